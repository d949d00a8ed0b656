#include "ioc/experiments.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

namespace ioc {

Scenario pursuit_evasion_scenario() {
    Scenario sc;
    const int n = 2;
    sc.sys.A = MatrixXd::Identity(n, n);
    sc.sys.B = 0.1 * MatrixXd::Identity(n, n);
    sc.sys.d = sc.sys.B * VectorXd::Constant(n, -1.0);
    sc.sys.sigma_w = 1e-2 * (MatrixXd(n, n) << 1.04, 0.68, 0.68, 1.00).finished();
    sc.sys.sigma_v = 1e-2 * (MatrixXd(n, n) << 2.33, -2.25, -2.25, 2.18).finished();
    sc.cost.Q = -0.1 * MatrixXd::Identity(n, n);
    sc.cost.q = VectorXd::Zero(n);
    sc.cost.R = MatrixXd::Identity(n, n);
    sc.horizon = HorizonDistribution::uniform(20);
    sc.init = InitialStateDistribution::gaussian(VectorXd::Zero(n), MatrixXd::Identity(n, n));
    return sc;
}

void BenchmarkPlan::validate() const {
    scenario.validate();
    if (batches < 1) throw ValidationError("plan.batches", "must be at least 1");
    if (group_sizes.empty()) throw ValidationError("plan.group_sizes", "must be non-empty");
    for (std::size_t i = 0; i < group_sizes.size(); ++i) {
        if (group_sizes[i] < 1) throw ValidationError("plan.group_sizes", "entries must be positive");
        if (i > 0 && group_sizes[i] <= group_sizes[i - 1])
            throw ValidationError("plan.group_sizes", "must be strictly increasing");
    }
}

namespace {

Dataset prefix_dataset(const Dataset& full, std::uint64_t M) {
    Dataset ds;
    ds.meta = full.meta;
    ds.meta.trials = M;
    ds.meta.counts.clear();
    ds.records.assign(full.records.begin(), full.records.begin() + static_cast<std::ptrdiff_t>(M));
    for (const auto& rec : ds.records) ds.meta.counts[rec.N]++;
    return ds;
}

void run_batch(const BenchmarkPlan& plan, int batch, std::vector<BenchmarkCell>& cells,
               std::size_t row_offset) {
    const std::uint64_t seed = plan.seed_base ^ static_cast<std::uint64_t>(batch);
    const std::uint64_t max_M = plan.group_sizes.back();
    const Dataset full = generate_dataset(plan.scenario, max_M, seed, /*keep_truth=*/false);

    for (std::size_t k = 0; k < plan.group_sizes.size(); ++k) {
        BenchmarkCell& cell = cells[row_offset + k];
        cell.batch = batch;
        cell.M = plan.group_sizes[k];
        try {
            const Dataset ds = prefix_dataset(full, cell.M);
            const EstimateResult res = estimate(ds, plan.scenario.sys, plan.estimator);
            const ErrorMetrics em =
                error_metrics(res.Q_hat, res.q_hat, plan.scenario.cost.Q, plan.scenario.cost.q);
            cell.rel_err_Q = em.rel_err_Q;
            cell.rel_err_q = em.rel_err_q;
            cell.ok = true;
            cell.status = sdp::status_name(res.solution.status);
        } catch (const std::exception& ex) {
            cell.ok = false;
            cell.status = ex.what();
            cell.rel_err_Q = cell.rel_err_q = std::numeric_limits<double>::quiet_NaN();
        }
    }
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkPlan& plan) {
    plan.validate();
    const std::size_t per_batch = plan.group_sizes.size();

    BenchmarkReport rep;
    rep.cells.resize(static_cast<std::size_t>(plan.batches) * per_batch);

    const int nthreads = std::max(1, std::min(plan.workers, plan.batches));
    if (nthreads == 1) {
        for (int b = 0; b < plan.batches; ++b) run_batch(plan, b, rep.cells, b * per_batch);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nthreads; ++w) {
            pool.emplace_back([&, w]() {
                for (int b = w; b < plan.batches; b += nthreads)
                    run_batch(plan, b, rep.cells, b * per_batch);
            });
        }
        for (auto& th : pool) th.join();
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < per_batch; ++k) {
        AggregateRow row;
        row.M = plan.group_sizes[k];
        double sQ = 0, sq = 0;
        std::vector<double> vQ, vq;
        for (int b = 0; b < plan.batches; ++b) {
            const BenchmarkCell& cell = rep.cells[b * per_batch + k];
            if (!cell.ok) continue;
            sQ += cell.rel_err_Q;
            sq += cell.rel_err_q;
            vQ.push_back(cell.rel_err_Q);
            vq.push_back(cell.rel_err_q);
            ++row.n_ok;
        }
        if (row.n_ok > 0) {
            row.mean_rel_err_Q = sQ / row.n_ok;
            row.mean_rel_err_q = sq / row.n_ok;
            auto sample_std = [&](const std::vector<double>& v, double mean) {
                if (v.size() < 2) return nan;
                double acc = 0;
                for (double x : v) acc += (x - mean) * (x - mean);
                return std::sqrt(acc / (static_cast<double>(v.size()) - 1.0));
            };
            row.std_rel_err_Q = sample_std(vQ, row.mean_rel_err_Q);
            row.std_rel_err_q = sample_std(vq, row.mean_rel_err_q);
        } else {
            row.mean_rel_err_Q = row.mean_rel_err_q = nan;
            row.std_rel_err_Q = row.std_rel_err_q = nan;
        }
        rep.aggregate.push_back(row);
    }

    rep.pairs_total = static_cast<int>(per_batch) - 1;
    for (std::size_t k = 0; k + 1 < per_batch; ++k) {
        const double a = rep.aggregate[k].mean_rel_err_Q;
        const double b = rep.aggregate[k + 1].mean_rel_err_Q;
        if (std::isfinite(a) && std::isfinite(b) && b <= a) ++rep.pairs_nonincreasing;
    }
    rep.monotone_ok = rep.pairs_total > 0 && rep.pairs_nonincreasing >= rep.pairs_total - 1;

    std::vector<std::pair<double, double>> mean_pts, std_pts;
    for (const auto& row : rep.aggregate) {
        if (std::isfinite(row.mean_rel_err_Q) && row.mean_rel_err_Q > 0)
            mean_pts.emplace_back(static_cast<double>(row.M), row.mean_rel_err_Q);
        if (std::isfinite(row.std_rel_err_Q) && row.std_rel_err_Q > 0)
            std_pts.emplace_back(static_cast<double>(row.M), row.std_rel_err_Q);
    }
    if (mean_pts.size() >= 2) rep.fit_mean_Q = loglog_fit(mean_pts);
    if (std_pts.size() >= 2) rep.fit_std_Q = loglog_fit(std_pts);
    rep.slope_ok = rep.fit_mean_Q && rep.fit_mean_Q->slope >= -0.7 && rep.fit_mean_Q->slope <= -0.3;
    return rep;
}

LogLogFit loglog_fit(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) throw ValidationError("points", "need at least 2 points");
    const int k = static_cast<int>(points.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < k; ++i) {
        if (!(points[i].first > 0) || !(points[i].second > 0))
            throw ValidationError("points", "nonpositive value at index " + std::to_string(i));
        const double x = std::log10(points[i].first);
        const double y = std::log10(points[i].second);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    LogLogFit fit;
    const double den = k * sxx - sx * sx;
    if (den <= 0) throw ValidationError("points", "degenerate abscissae");
    fit.slope = (k * sxy - sx * sy) / den;
    fit.intercept = (sy - fit.slope * sx) / k;
    const double ss_tot = syy - sy * sy / k;
    double ss_res = 0;
    for (int i = 0; i < k; ++i) {
        const double x = std::log10(points[i].first);
        const double y = std::log10(points[i].second);
        const double r = y - (fit.slope * x + fit.intercept);
        ss_res += r * r;
    }
    fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void emit_report(const BenchmarkReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    {
        std::ofstream out(fs::path(out_dir) / "cells.csv");
        if (!out) throw std::runtime_error("emit_report: cannot open cells.csv in " + out_dir);
        out << "batch,M,rel_err_Q,rel_err_q,ok,status\n";
        for (const auto& c : report.cells) {
            std::string status = c.status;
            for (char& ch : status)
                if (ch == ',' || ch == '\n') ch = ';';
            out << c.batch << "," << c.M << "," << fmt(c.rel_err_Q) << "," << fmt(c.rel_err_q) << ","
                << (c.ok ? 1 : 0) << "," << status << "\n";
        }
    }
    {
        std::ofstream out(fs::path(out_dir) / "aggregate.csv");
        if (!out) throw std::runtime_error("emit_report: cannot open aggregate.csv in " + out_dir);
        out << "M,mean_rel_err_Q,std_rel_err_Q,mean_rel_err_q,std_rel_err_q,n_ok\n";
        for (const auto& r : report.aggregate)
            out << r.M << "," << fmt(r.mean_rel_err_Q) << "," << fmt(r.std_rel_err_Q) << ","
                << fmt(r.mean_rel_err_q) << "," << fmt(r.std_rel_err_q) << "," << r.n_ok << "\n";
    }
    {
        nlohmann::json j;
        j["pairs_nonincreasing"] = report.pairs_nonincreasing;
        j["pairs_total"] = report.pairs_total;
        j["monotone_ok"] = report.monotone_ok;
        j["slope_ok"] = report.slope_ok;
        auto fit_json = [](const std::optional<LogLogFit>& f) {
            nlohmann::json out;
            if (f) {
                out["slope"] = f->slope;
                out["intercept"] = f->intercept;
                out["r2"] = f->r2;
            }
            return out;
        };
        j["fit_mean_Q"] = fit_json(report.fit_mean_Q);
        j["fit_std_Q"] = fit_json(report.fit_std_Q);
        std::ofstream out(fs::path(out_dir) / "summary.json");
        if (!out) throw std::runtime_error("emit_report: cannot open summary.json in " + out_dir);
        out << j.dump(2) << "\n";
    }
}

}  // namespace ioc
