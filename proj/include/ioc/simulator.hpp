#pragma once

#include "ioc/model.hpp"
#include "ioc/riccati.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace ioc {

struct TrajectoryRecord {
    std::uint64_t trial_id = 0;
    int N = 0;
    std::vector<VectorXd> y;                         // observations, t = 1..nu
    std::optional<std::vector<VectorXd>> x_true;     // states, t = 1..nu
    std::optional<std::vector<VectorXd>> u_true;     // controls, t = 1..nu-1
};

struct DatasetMeta {
    std::uint64_t digest = 0;  // scenario fingerprint
    std::uint64_t seed = 0;
    int nu = 0;
    int n = 0;
    int m = 0;
    std::uint64_t trials = 0;
    std::map<int, std::uint64_t> counts;  // horizon N -> M_N
};

struct Dataset {
    DatasetMeta meta;
    std::vector<TrajectoryRecord> records;
};

// Precomputed feedback law u_t = -(K_t x + k_t) for strictly feasible instances.
struct FeedbackLaw {
    std::vector<MatrixXd> K;  // Ru_t^{-1} S_t
    std::vector<VectorXd> k;  // Ru_t^{-1} g_t
};

FeedbackLaw build_feedback_law(const RiccatiSolution& sol);

std::uint64_t scenario_digest(const Scenario& sc);

TrajectoryRecord sample_trial(const Scenario& sc, const FeedbackLaw& law, std::uint64_t seed,
                              std::uint64_t trial_id, bool keep_truth = true);

// Refuses on infeasible instances or singular Ru_t (the feedback law must be
// unique). Trials are independent counter-based substreams keyed by trial id.
Dataset generate_dataset(const Scenario& sc, std::uint64_t trials, std::uint64_t seed,
                         bool keep_truth = true, int workers = 1);

// Sample mean of [x; 1][x; 1]' at time t (1-based) over trials with horizon N.
MatrixXd empirical_second_moment(const Dataset& ds, int t, int N);

void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace ioc
