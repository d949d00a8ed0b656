#include "ioc/simulator.hpp"

#include "ioc/rng.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <thread>

namespace ioc {

using nlohmann::json;

FeedbackLaw build_feedback_law(const RiccatiSolution& sol) {
    FeedbackLaw law;
    law.K.resize(sol.nu - 1);
    law.k.resize(sol.nu - 1);
    for (int t = 0; t < sol.nu - 1; ++t) {
        const MatrixXd& Ru = sol.Ru[t];
        if (min_eigenvalue(Ru) <= kRankTol * std::max(1.0, Ru.norm()))
            throw std::runtime_error(
                "build_feedback_law: B'P B + R singular at t = " + std::to_string(t + 1));
        const auto llt = Ru.llt();
        law.K[t] = llt.solve(sol.S[t]);
        law.k[t] = llt.solve(sol.g[t]);
    }
    return law;
}

namespace {

void hash_doubles(std::uint64_t& h, const double* p, std::ptrdiff_t count) {
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(double));
        std::memcpy(&bits, p + i, sizeof(bits));
        h = rng::splitmix64(h ^ bits);
    }
}

void hash_matrix(std::uint64_t& h, const MatrixXd& M) {
    h = rng::splitmix64(h ^ static_cast<std::uint64_t>(M.rows()));
    h = rng::splitmix64(h ^ static_cast<std::uint64_t>(M.cols()));
    hash_doubles(h, M.data(), M.size());
}

}  // namespace

std::uint64_t scenario_digest(const Scenario& sc) {
    std::uint64_t h = 0x6f63692d64617461ULL;
    hash_matrix(h, sc.sys.A);
    hash_matrix(h, sc.sys.B);
    hash_doubles(h, sc.sys.d.data(), sc.sys.d.size());
    hash_matrix(h, sc.sys.sigma_w);
    hash_matrix(h, sc.sys.sigma_v);
    hash_matrix(h, sc.cost.Q);
    hash_doubles(h, sc.cost.q.data(), sc.cost.q.size());
    hash_matrix(h, sc.cost.R);
    h = rng::splitmix64(h ^ static_cast<std::uint64_t>(sc.horizon.nu));
    hash_doubles(h, sc.horizon.probs.data(), sc.horizon.probs.size());
    for (const auto& c : sc.init.components) {
        hash_doubles(h, &c.weight, 1);
        hash_doubles(h, c.mean.data(), c.mean.size());
        hash_matrix(h, c.cov);
    }
    return h;
}

TrajectoryRecord sample_trial(const Scenario& sc, const FeedbackLaw& law, std::uint64_t seed,
                              std::uint64_t trial_id, bool keep_truth) {
    const int n = sc.sys.n();
    const int nu = sc.horizon.nu;
    const CounterRng rng(seed, trial_id);

    // Horizon via inverse CDF over probs indexed N = 2..nu.
    const double uN = rng.uniform(RngChannel::horizon, 0, 0);
    int N = nu;
    double cum = 0.0;
    for (int k = 0; k < sc.horizon.probs.size(); ++k) {
        cum += sc.horizon.probs(k);
        if (uN <= cum) {
            N = k + 2;
            break;
        }
    }

    // Initial state from the Gaussian (mixture) law.
    int comp = 0;
    if (sc.init.components.size() > 1) {
        const double uc = rng.uniform(RngChannel::mixture_select, 0, 0);
        double wcum = 0.0;
        for (std::size_t c = 0; c < sc.init.components.size(); ++c) {
            wcum += sc.init.components[c].weight;
            if (uc <= wcum) {
                comp = static_cast<int>(c);
                break;
            }
        }
    }
    const auto& g0 = sc.init.components[comp];
    const VectorXd x_bar = g0.mean + psd_factor(g0.cov) * rng.normals(RngChannel::initial_state, 0, n);

    const MatrixXd Lw = psd_factor(sc.sys.sigma_w);
    const MatrixXd Lv = psd_factor(sc.sys.sigma_v);

    std::vector<VectorXd> x(nu), u(nu - 1);
    const int start = nu - N + 1;  // 1-based first active step
    for (int t = 1; t <= start; ++t) x[t - 1] = x_bar;
    for (int t = 1; t < start; ++t) u[t - 1] = VectorXd::Zero(sc.sys.m());
    for (int t = start; t <= nu - 1; ++t) {
        u[t - 1] = -(law.K[t - 1] * x[t - 1] + law.k[t - 1]);
        const VectorXd w = Lw * rng.normals(RngChannel::process_noise, static_cast<std::uint64_t>(t), n);
        x[t] = sc.sys.A * x[t - 1] + sc.sys.B * u[t - 1] + sc.sys.d + w;
    }

    TrajectoryRecord rec;
    rec.trial_id = trial_id;
    rec.N = N;
    rec.y.resize(nu);
    for (int t = 1; t <= nu; ++t) {
        const VectorXd v =
            Lv * rng.normals(RngChannel::observation_noise, static_cast<std::uint64_t>(t), n);
        rec.y[t - 1] = x[t - 1] + v;
    }
    if (keep_truth) {
        rec.x_true = std::move(x);
        rec.u_true = std::move(u);
    }
    return rec;
}

Dataset generate_dataset(const Scenario& sc, std::uint64_t trials, std::uint64_t seed,
                         bool keep_truth, int workers) {
    sc.validate();
    if (trials < 1) throw ValidationError("trials", "must be at least 1");
    const RiccatiSolution sol = riccati_backward(sc.sys, sc.cost, sc.horizon.nu);
    const FeasibilityReport feas = feasibility_check(sol);
    if (!feas.feasible)
        throw std::runtime_error("generate_dataset: instance is infeasible (the optimal control "
                                 "problem is unbounded below); refusing to sample");
    const FeedbackLaw law = build_feedback_law(sol);

    Dataset ds;
    ds.records.resize(trials);

    const int nthreads = std::max(1, workers);
    if (nthreads == 1) {
        for (std::uint64_t i = 0; i < trials; ++i)
            ds.records[i] = sample_trial(sc, law, seed, i, keep_truth);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nthreads; ++w) {
            pool.emplace_back([&, w]() {
                for (std::uint64_t i = w; i < trials; i += nthreads)
                    ds.records[i] = sample_trial(sc, law, seed, i, keep_truth);
            });
        }
        for (auto& th : pool) th.join();
    }

    ds.meta.digest = scenario_digest(sc);
    ds.meta.seed = seed;
    ds.meta.nu = sc.horizon.nu;
    ds.meta.n = sc.sys.n();
    ds.meta.m = sc.sys.m();
    ds.meta.trials = trials;
    for (const auto& rec : ds.records) ds.meta.counts[rec.N]++;
    return ds;
}

MatrixXd empirical_second_moment(const Dataset& ds, int t, int N) {
    if (t < 1 || t > ds.meta.nu) throw std::out_of_range("empirical_second_moment: bad time index");
    const int n = ds.meta.n;
    MatrixXd acc = MatrixXd::Zero(n + 1, n + 1);
    std::uint64_t count = 0;
    for (const auto& rec : ds.records) {
        if (rec.N != N) continue;
        if (!rec.x_true) throw std::runtime_error("empirical_second_moment: dataset has no ground truth");
        VectorXd xt(n + 1);
        xt << (*rec.x_true)[t - 1], 1.0;
        acc += xt * xt.transpose();
        ++count;
    }
    if (count == 0)
        throw std::runtime_error("empirical_second_moment: no trials with horizon N = " +
                                 std::to_string(N));
    return acc / static_cast<double>(count);
}

namespace {

json vecs_to_json(const std::vector<VectorXd>& vs) {
    json arr = json::array();
    for (const auto& v : vs) {
        json row = json::array();
        for (int i = 0; i < v.size(); ++i) row.push_back(v(i));
        arr.push_back(std::move(row));
    }
    return arr;
}

std::vector<VectorXd> vecs_from_json(const json& arr) {
    std::vector<VectorXd> out;
    out.reserve(arr.size());
    for (const auto& row : arr) {
        VectorXd v(row.size());
        for (std::size_t i = 0; i < row.size(); ++i) v(static_cast<int>(i)) = row[i].get<double>();
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_dataset: cannot open " + path);

    json meta{{"format", "ioc-dataset"},
              {"version", 1},
              {"digest", ds.meta.digest},
              {"seed", ds.meta.seed},
              {"nu", ds.meta.nu},
              {"n", ds.meta.n},
              {"m", ds.meta.m},
              {"trials", ds.meta.trials}};
    json counts = json::object();
    for (const auto& [N, c] : ds.meta.counts) counts[std::to_string(N)] = c;
    meta["counts"] = std::move(counts);
    out << meta.dump() << "\n";

    for (const auto& rec : ds.records) {
        json line{{"trial", rec.trial_id}, {"N", rec.N}, {"y", vecs_to_json(rec.y)}};
        if (rec.x_true) line["x"] = vecs_to_json(*rec.x_true);
        if (rec.u_true) line["u"] = vecs_to_json(*rec.u_true);
        out << line.dump() << "\n";
    }
    if (!out) throw std::runtime_error("write_dataset: write failed for " + path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_dataset: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_dataset: empty file " + path);
    const json meta = json::parse(line);
    if (meta.value("format", "") != "ioc-dataset")
        throw std::runtime_error("read_dataset: not a dataset file: " + path);

    Dataset ds;
    ds.meta.digest = meta.at("digest").get<std::uint64_t>();
    ds.meta.seed = meta.at("seed").get<std::uint64_t>();
    ds.meta.nu = meta.at("nu").get<int>();
    ds.meta.n = meta.at("n").get<int>();
    ds.meta.m = meta.at("m").get<int>();
    ds.meta.trials = meta.at("trials").get<std::uint64_t>();
    for (const auto& [key, val] : meta.at("counts").items())
        ds.meta.counts[std::stoi(key)] = val.get<std::uint64_t>();

    ds.records.reserve(ds.meta.trials);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        TrajectoryRecord rec;
        rec.trial_id = j.at("trial").get<std::uint64_t>();
        rec.N = j.at("N").get<int>();
        rec.y = vecs_from_json(j.at("y"));
        if (j.contains("x")) rec.x_true = vecs_from_json(j.at("x"));
        if (j.contains("u")) rec.u_true = vecs_from_json(j.at("u"));
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace ioc
