#pragma once

#include "ioc/riccati.hpp"
#include "ioc/sdp.hpp"
#include "ioc/simulator.hpp"

namespace ioc {

// Linear functional of the decision blocks built from observed trajectories.
// Evaluated on the true cost parameters and their backward-recursion
// sequences it equals, up to sampling error, minus the average control
// energy of the recorded trials.
struct EmpiricalObjective {
    int nu = 0;
    int n = 0;
    MatrixXd coeff_Q;                 // tr(coeff_Q * Q)
    VectorXd coeff_q;                 // coeff_q . q
    std::vector<MatrixXd> coeff_P;    // t = 1..nu, tr(coeff_P[t] * P_t)
    std::vector<VectorXd> coeff_eta;  // t = 1..nu
    std::vector<double> coeff_xi;     // t = 1..nu-1
    double constant = 0.0;

    double evaluate(const MatrixXd& Q, const VectorXd& q, const std::vector<MatrixXd>& P,
                    const std::vector<VectorXd>& eta, const std::vector<double>& xi) const;
};

EmpiricalObjective assemble_objective(const Dataset& ds, const SystemModel& sys);

// Scalar-variable ids of the assembled decision blocks inside an sdp::Problem.
struct EstimatorVars {
    int Q = -1;
    int q = -1;
    std::vector<int> P;    // t = 1..nu
    std::vector<int> eta;  // t = 1..nu
    std::vector<int> xi;   // t = 1..nu-1
};

struct EstimatorOptions {
    double phi = 1e6;  // Frobenius-ball radius on every decision block
    sdp::Tolerances tol;
    int max_iter = 200;
};

// Full convex program: minimize the empirical functional subject to the
// solvability matrices H_t >= 0 (control weight fixed to the identity),
// the terminal ties P_nu = Q, eta_nu = q, and norm balls of radius phi.
EstimatorVars assemble_problem(const EmpiricalObjective& obj, const SystemModel& sys, double phi,
                               sdp::Problem& prob);

// Packs candidate blocks into the problem's scalar layout (used by tests to
// verify that injected sequences satisfy every constraint).
VectorXd pack_candidate(const sdp::Problem& prob, const EstimatorVars& vars, const MatrixXd& Q,
                        const VectorXd& q, const std::vector<MatrixXd>& P,
                        const std::vector<VectorXd>& eta, const std::vector<double>& xi);

struct EstimateResult {
    MatrixXd Q_hat;
    VectorXd q_hat;
    std::vector<MatrixXd> P_hat;
    std::vector<VectorXd> eta_hat;
    double objective = 0.0;
    sdp::Solution solution;
    // objective + average recorded control energy; requires ground-truth
    // controls in the dataset. Near zero on noiseless data.
    std::optional<double> lower_bound_gap;
};

EstimateResult estimate(const Dataset& ds, const SystemModel& sys, const EstimatorOptions& opts = {});

struct ErrorMetrics {
    double rel_err_Q = 0.0;
    double rel_err_q = 0.0;
    bool q_abs_fallback = false;  // true when ||q_true|| ~ 0 and rel_err_q is absolute
};

ErrorMetrics error_metrics(const MatrixXd& Q_hat, const VectorXd& q_hat, const MatrixXd& Q_true,
                           const VectorXd& q_true);

}  // namespace ioc
