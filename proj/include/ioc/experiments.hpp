#pragma once

#include "ioc/estimator.hpp"

namespace ioc {

// The pursuit-evasion benchmark scenario: single-integrator dynamics sampled
// at 0.1 s, an indefinite state penalty Q = -0.1 I, a constant forcing term
// from the pursuer's dummy input [-1, -1], horizon length uniform on
// {2..20}, and fixed empirical noise covariances. The initial position is
// standard Gaussian.
Scenario pursuit_evasion_scenario();

struct BenchmarkPlan {
    Scenario scenario;
    std::vector<std::uint64_t> group_sizes;  // strictly increasing, nested prefixes
    int batches = 10;
    std::uint64_t seed_base = 0;
    EstimatorOptions estimator;
    int workers = 1;

    void validate() const;
};

struct BenchmarkCell {
    int batch = 0;
    std::uint64_t M = 0;
    double rel_err_Q = 0.0;
    double rel_err_q = 0.0;
    bool ok = false;
    std::string status;
};

struct AggregateRow {
    std::uint64_t M = 0;
    double mean_rel_err_Q = 0.0;
    double std_rel_err_Q = 0.0;  // NaN when fewer than two usable cells
    double mean_rel_err_q = 0.0;
    double std_rel_err_q = 0.0;
    int n_ok = 0;
};

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

struct BenchmarkReport {
    std::vector<BenchmarkCell> cells;      // (batch, M) in batch-major order
    std::vector<AggregateRow> aggregate;   // one row per M
    std::optional<LogLogFit> fit_mean_Q;
    std::optional<LogLogFit> fit_std_Q;
    int pairs_nonincreasing = 0;  // consecutive grid pairs with non-increasing mean
    int pairs_total = 0;
    bool monotone_ok = false;  // >= pairs_total - 1 pairs non-increasing
    bool slope_ok = false;     // fitted mean slope within [-0.7, -0.3]
};

// One dataset of max(group_sizes) trials per batch (seed = seed_base xor
// batch index); every smaller group is the prefix of the larger one.
BenchmarkReport run_benchmark(const BenchmarkPlan& plan);

// Ordinary least squares on (log10 M, log10 value).
LogLogFit loglog_fit(const std::vector<std::pair<double, double>>& points);

// Writes cells.csv, aggregate.csv and summary.json under out_dir.
void emit_report(const BenchmarkReport& report, const std::string& out_dir);

}  // namespace ioc
