#pragma once

#include "ioc/model.hpp"

namespace ioc {

// Backward recursion output for a horizon of nu steps. Sequences P, eta,
// gamma are indexed t = 1..nu (stored 0-based); Ru, S, g, xi cover
// t = 1..nu-1. Ru_t = B'P_{t+1}B + R, S_t = B'P_{t+1}A,
// g_t = B'eta_{t+1} + B'P_{t+1}d, xi_t = g_t' Ru_t^+ g_t.
struct RiccatiSolution {
    int nu = 0;
    std::vector<MatrixXd> P;
    std::vector<VectorXd> eta;
    std::vector<double> gamma;
    std::vector<MatrixXd> Ru;
    std::vector<MatrixXd> S;
    std::vector<VectorXd> g;
    std::vector<double> xi;
};

enum class ViolationKind { none, psd, kernel_containment };

enum class FeasibilityVerdict { feasible, infeasible, marginal };

struct FeasibilityReport {
    bool feasible = false;
    FeasibilityVerdict verdict = FeasibilityVerdict::infeasible;
    std::optional<int> first_violation_t;  // 1-based, largest violated t
    ViolationKind violation_kind = ViolationKind::none;
    std::vector<double> psd_margins;     // min eigenvalue of Ru_t, t = 1..nu-1
    std::vector<double> kernel_margins;  // ||(I - Ru Ru^+)[S, g]||_F per t
};

// H_t blocks of the solvability LMI; each H is (m+n+1) x (m+n+1).
struct HBlocks {
    std::vector<MatrixXd> H;
    std::vector<VectorXd> beta;
};

struct ClosedLoop {
    std::vector<MatrixXd> Acl;        // A - B Ru^{-1} S, t = 1..nu-1
    std::vector<MatrixXd> Acl_tilde;  // extended-state closed loop, last row [0', 1]
    std::vector<double> min_singular_values;
};

RiccatiSolution riccati_backward(const SystemModel& sys, const CostParams& cost, int nu);

FeasibilityReport feasibility_check(const RiccatiSolution& sol, double tol_psd = kPsdTol,
                                    double tol_ker = kKernelTol);

// Independent evaluation of the same verdict through the LMI route:
// H_t >= 0 and rank(H_t) == rank(Ru_t).
FeasibilityReport feasibility_check_lmi(const RiccatiSolution& sol, const SystemModel& sys,
                                        const CostParams& cost, double tol_psd = kPsdTol,
                                        double tol_rank = kRankTol);

HBlocks build_h_blocks(const RiccatiSolution& sol, const SystemModel& sys, const CostParams& cost);

// Frobenius norm of the generalized Schur complement H_t \ Ru_t per t; all
// entries vanish on any exact recursion output.
std::vector<double> schur_residual(const RiccatiSolution& sol, const SystemModel& sys,
                                   const CostParams& cost);

// u = -Ru_t^+ (S_t x + g_t) + (I - Ru_t^+ Ru_t) lambda. t is 1-based in 1..nu-1.
VectorXd optimal_control(const RiccatiSolution& sol, const VectorXd& x, int t,
                         const std::optional<VectorXd>& lambda = std::nullopt);

// V_t(x) = 1/2 x'P_t x + eta_t'x + gamma_t. t is 1-based in 1..nu.
double value_function(const RiccatiSolution& sol, const VectorXd& x, int t);

// Requires Ru_t > 0 for every t; throws otherwise with a feasibility hint.
ClosedLoop closed_loop(const RiccatiSolution& sol, const SystemModel& sys);

// Independent brute-force solution of the deterministic problem: eliminate
// states, minimize the stacked quadratic over the control sequence.
struct StackedQpResult {
    bool bounded = true;
    std::vector<VectorXd> controls;  // u_{nu-N+1} .. u_{nu-1}
    double cost_value = 0.0;
};

StackedQpResult stacked_qp_oracle(const SystemModel& sys, const CostParams& cost,
                                  const VectorXd& x_bar, int N);

}  // namespace ioc
