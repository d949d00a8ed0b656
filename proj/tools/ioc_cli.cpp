#include "ioc/config.hpp"
#include "ioc/experiments.hpp"
#include "ioc/rng.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

using nlohmann::json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitMarginal = 3;

json matrix_json(const ioc::MatrixXd& M) {
    json rows = json::array();
    for (int r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_json(const ioc::VectorXd& v) {
    json arr = json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

int cmd_check(const std::string& config_path) {
    const ioc::RunConfig cfg = ioc::load_config(config_path);
    const auto report =
        ioc::check_assumptions(cfg.scenario.sys, cfg.scenario.horizon, cfg.scenario.init);
    std::cout << "assumptions:\n"
              << "  controllable:        " << (report.controllable ? "yes" : "no") << "\n"
              << "  A invertible:        " << (report.a_invertible ? "yes" : "no") << "\n"
              << "  B full column rank:  " << (report.b_full_column_rank ? "yes" : "no") << "\n"
              << "  horizon ok:          " << (report.horizon_ok ? "yes" : "no") << "\n"
              << "  excitation ok:       " << (report.excitation_ok ? "yes" : "no") << "\n";
    for (const auto& dtl : report.details) std::cout << "  note: " << dtl << "\n";

    const auto sol =
        ioc::riccati_backward(cfg.scenario.sys, cfg.scenario.cost, cfg.scenario.horizon.nu);
    const auto feas = ioc::feasibility_check(sol);
    std::cout << "feasibility:\n  verdict: "
              << (feas.verdict == ioc::FeasibilityVerdict::feasible     ? "feasible"
                  : feas.verdict == ioc::FeasibilityVerdict::infeasible ? "infeasible"
                                                                        : "marginal")
              << "\n";
    if (feas.first_violation_t)
        std::cout << "  first violation at t = " << *feas.first_violation_t << " ("
                  << (feas.violation_kind == ioc::ViolationKind::psd ? "indefinite control weight"
                                                                     : "kernel containment")
                  << ")\n";
    std::cout << "  control-weight margins (min eig of B'P B + R per step):\n";
    for (std::size_t t = 0; t < feas.psd_margins.size(); ++t)
        std::cout << "    t = " << (t + 1) << ": " << feas.psd_margins[t] << "\n";

    if (feas.verdict == ioc::FeasibilityVerdict::feasible) return 0;
    if (feas.verdict == ioc::FeasibilityVerdict::marginal) return kExitMarginal;
    return kExitInfeasible;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path, std::uint64_t trials,
                 std::optional<std::uint64_t> seed, bool strip_truth, int workers) {
    ioc::RunConfig cfg = ioc::load_config(config_path);
    if (seed) cfg.seed = *seed;
    const ioc::Dataset ds =
        ioc::generate_dataset(cfg.scenario, trials, cfg.seed, !strip_truth, workers);
    ioc::write_dataset(ds, out_path);
    std::cout << "wrote " << ds.meta.trials << " trials to " << out_path << "\n";
    return 0;
}

int cmd_estimate(const std::string& config_path, const std::string& data_path,
                 const std::string& out_path, std::optional<double> phi,
                 const std::string& dump_path) {
    ioc::RunConfig cfg = ioc::load_config(config_path);
    if (phi) cfg.estimator.phi = *phi;
    const ioc::Dataset ds = ioc::read_dataset(data_path);

    if (!dump_path.empty()) {
        const auto obj = ioc::assemble_objective(ds, cfg.scenario.sys);
        ioc::sdp::Problem prob;
        ioc::assemble_problem(obj, cfg.scenario.sys, cfg.estimator.phi, prob);
        prob.dump(dump_path);
        std::cout << "wrote problem dump to " << dump_path << "\n";
    }

    const ioc::EstimateResult res = ioc::estimate(ds, cfg.scenario.sys, cfg.estimator);
    const ioc::ErrorMetrics em =
        ioc::error_metrics(res.Q_hat, res.q_hat, cfg.scenario.cost.Q, cfg.scenario.cost.q);

    json j;
    j["Q_hat"] = matrix_json(res.Q_hat);
    j["q_hat"] = vector_json(res.q_hat);
    j["objective"] = res.objective;
    j["status"] = ioc::sdp::status_name(res.solution.status);
    j["gap"] = res.solution.gap;
    j["newton_steps"] = res.solution.newton_steps;
    j["rel_err_Q_vs_config"] = em.rel_err_Q;
    j["rel_err_q_vs_config"] = em.rel_err_q;
    if (res.lower_bound_gap) j["lower_bound_gap"] = *res.lower_bound_gap;

    std::cout << j.dump(2) << "\n";
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("estimate: cannot open " + out_path);
        out << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_bench(const std::string& config_path, const std::string& out_dir, int batches,
              std::vector<std::uint64_t> group_sizes, std::optional<std::uint64_t> seed,
              int workers, bool paper_scale) {
    ioc::RunConfig cfg = ioc::load_config(config_path);
    ioc::BenchmarkPlan plan;
    plan.scenario = cfg.scenario;
    plan.estimator = cfg.estimator;
    plan.batches = batches;
    plan.seed_base = seed ? *seed : cfg.seed;
    plan.workers = workers;
    if (paper_scale) {
        plan.batches = 100;
        plan.group_sizes.clear();
        for (std::uint64_t M = 100; M <= 50000; M += 100) plan.group_sizes.push_back(M);
    } else if (!group_sizes.empty()) {
        plan.group_sizes = std::move(group_sizes);
    } else {
        plan.group_sizes = {250, 500, 1000, 2000, 4000, 8000};
    }

    const ioc::BenchmarkReport rep = ioc::run_benchmark(plan);
    ioc::emit_report(rep, out_dir);
    std::cout << "wrote benchmark tables to " << out_dir << "\n";
    if (rep.fit_mean_Q)
        std::cout << "mean rel_err_Q slope: " << rep.fit_mean_Q->slope
                  << " (window check: " << (rep.slope_ok ? "pass" : "fail") << ")\n";
    std::cout << "non-increasing pairs: " << rep.pairs_nonincreasing << "/" << rep.pairs_total
              << " (" << (rep.monotone_ok ? "pass" : "fail") << ")\n";
    return 0;
}

int cmd_oracle(const std::string& config_path, int samples, std::optional<std::uint64_t> seed) {
    ioc::RunConfig cfg = ioc::load_config(config_path);
    // The oracle compares deterministic rollouts, so the process noise is
    // switched off regardless of the configured covariance.
    cfg.scenario.sys.sigma_w.setZero();
    if (seed) cfg.seed = *seed;

    const auto sol =
        ioc::riccati_backward(cfg.scenario.sys, cfg.scenario.cost, cfg.scenario.horizon.nu);
    const auto feas = ioc::feasibility_check(sol);
    if (!feas.feasible)
        throw std::runtime_error("oracle: configured instance is infeasible; nothing to compare");
    const auto law = ioc::build_feedback_law(sol);
    const int nu = cfg.scenario.horizon.nu;

    double max_dev = 0.0;
    for (int k = 0; k < samples; ++k) {
        const auto rec = ioc::sample_trial(cfg.scenario, law, cfg.seed,
                                           static_cast<std::uint64_t>(k), /*keep_truth=*/true);
        const int s = nu - rec.N + 1;
        const ioc::VectorXd x_bar = (*rec.x_true)[s - 1];
        const auto oracle = ioc::stacked_qp_oracle(cfg.scenario.sys, cfg.scenario.cost, x_bar, rec.N);
        if (!oracle.bounded) throw std::runtime_error("oracle: stacked problem unbounded");
        for (int t = s; t <= nu - 1; ++t) {
            const double scale = std::max(1.0, oracle.controls[t - s].norm());
            max_dev = std::max(
                max_dev, ((*rec.u_true)[t - 1] - oracle.controls[t - s]).norm() / scale);
        }
        const double v = ioc::value_function(sol, x_bar, s);
        max_dev = std::max(max_dev,
                           std::abs(v - oracle.cost_value) / std::max(1.0, std::abs(oracle.cost_value)));
    }
    std::cout << "max relative deviation over " << samples << " samples: " << max_dev << "\n";
    return max_dev <= 1e-6 ? 0 : kExitInfeasible;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Indefinite linear-quadratic optimal control and cost recovery"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_path, out_dir = "bench-out", dump_path;
    std::uint64_t trials = 1000;
    int workers = 1, batches = 10, samples = 20;
    std::optional<std::uint64_t> seed;
    std::optional<double> phi;
    bool strip_truth = false, paper_scale = false;
    std::vector<std::uint64_t> group_sizes;

    auto* check = app.add_subcommand("check", "Validate a scenario and report feasibility");
    check->add_option("--config", config_path, "Scenario configuration file")->required();

    auto* simulate = app.add_subcommand("simulate", "Generate a trajectory dataset");
    simulate->add_option("--config", config_path, "Scenario configuration file")->required();
    simulate->add_option("--out", out_path, "Output dataset path")->required();
    simulate->add_option("--trials", trials, "Number of trials (default 1000)");
    simulate->add_option("--seed", seed, "Override the configured seed");
    simulate->add_option("--workers", workers, "Worker threads (output is identical for any count)");
    simulate->add_flag("--strip-truth", strip_truth, "Keep only observations in the dataset");

    auto* estimate = app.add_subcommand("estimate", "Recover (Q, q) from a dataset");
    estimate->add_option("--config", config_path, "Scenario configuration file")->required();
    estimate->add_option("--data", data_path, "Dataset path")->required();
    estimate->add_option("--out", out_path, "Write the JSON result here as well");
    estimate->add_option("--phi", phi, "Override the norm-ball radius");
    estimate->add_option("--dump-sdp", dump_path, "Write the assembled program in sparse text form");

    auto* bench = app.add_subcommand("bench", "Monte Carlo consistency benchmark");
    bench->add_option("--config", config_path, "Scenario configuration file")->required();
    bench->add_option("--out-dir", out_dir, "Output directory (default bench-out)");
    bench->add_option("--batches", batches, "Number of batches (default 10)");
    bench->add_option("--group-sizes", group_sizes, "Nested group sizes (default desk scale)");
    bench->add_option("--seed", seed, "Override the configured seed");
    bench->add_option("--workers", workers, "Worker threads (results independent of the count)");
    bench->add_flag("--paper-scale", paper_scale, "Full-scale plan: 100 batches, M = 100..50000");

    auto* oracle = app.add_subcommand("oracle", "Cross-check the feedback law against a stacked QP");
    oracle->add_option("--config", config_path, "Scenario configuration file")->required();
    oracle->add_option("--samples", samples, "Number of sampled initial conditions (default 20)");
    oracle->add_option("--seed", seed, "Override the configured seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(check)) return cmd_check(config_path);
        if (app.got_subcommand(simulate))
            return cmd_simulate(config_path, out_path, trials, seed, strip_truth, workers);
        if (app.got_subcommand(estimate))
            return cmd_estimate(config_path, data_path, out_path, phi, dump_path);
        if (app.got_subcommand(bench))
            return cmd_bench(config_path, out_dir, batches, group_sizes, seed, workers, paper_scale);
        if (app.got_subcommand(oracle)) return cmd_oracle(config_path, samples, seed);
    } catch (const ioc::ValidationError& ex) {
        std::cerr << "error: invalid-config: " << ex.what() << "\n";
        return kExitError;
    } catch (const std::exception& ex) {
        std::cerr << "error: runtime: " << ex.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
