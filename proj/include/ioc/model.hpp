#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ioc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Scaled cutoffs used throughout for numerical rank / PSD decisions.
inline constexpr double kRankTol = 1e-10;
inline constexpr double kPsdTol = 1e-10;
inline constexpr double kKernelTol = 1e-10;

class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// Known part of the problem: dynamics x+ = A x + B u + d + w, observations
// y = x + v, with noise covariances Sigma_w, Sigma_v.
struct SystemModel {
    MatrixXd A;
    MatrixXd B;
    VectorXd d;
    MatrixXd sigma_w;
    MatrixXd sigma_v;

    int n() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(B.cols()); }

    void validate() const;
};

// Cost parameters (Q possibly indefinite). The inverse problem fixes R = I.
struct CostParams {
    MatrixXd Q;
    VectorXd q;
    MatrixXd R;

    void validate(int n, int m) const;
};

// Distribution of the planning horizon N over {2, ..., nu}.
// probs[k] = P(N = k + 2), so probs has nu - 1 entries.
struct HorizonDistribution {
    int nu = 0;
    VectorXd probs;

    static HorizonDistribution uniform(int nu);

    void validate(int n) const;
};

struct GaussianComponent {
    double weight = 1.0;
    VectorXd mean;
    MatrixXd cov;
};

// Initial-state law: a Gaussian or a finite mixture of Gaussians, each with
// strictly positive definite covariance.
struct InitialStateDistribution {
    std::vector<GaussianComponent> components;

    static InitialStateDistribution gaussian(VectorXd mean, MatrixXd cov);

    void validate(int n) const;
};

struct AssumptionReport {
    bool controllable = false;
    bool a_invertible = false;
    bool b_full_column_rank = false;
    bool horizon_ok = false;
    bool excitation_ok = false;
    std::vector<std::string> details;

    bool all_ok() const {
        return controllable && a_invertible && b_full_column_rank && horizon_ok && excitation_ok;
    }
};

// Numerical rank with the scaled singular-value cutoff.
int numerical_rank(const MatrixXd& M, double tol = kRankTol);

bool is_symmetric(const MatrixXd& M, double tol = 1e-12);

// Symmetric PSD check: min eigenvalue >= -tol * max(1, ||M||_F).
bool is_psd(const MatrixXd& M, double tol = kPsdTol);

double min_eigenvalue(const MatrixXd& M);

// Moore-Penrose pseudo-inverse via SVD, cutoff sigma_i <= kRankTol * sigma_max.
MatrixXd pseudo_inverse(const MatrixXd& M, double tol = kRankTol);

AssumptionReport check_assumptions(const SystemModel& sys, const HorizonDistribution& horizon,
                                   const InitialStateDistribution& init);

// Full problem data for one scenario.
struct Scenario {
    SystemModel sys;
    CostParams cost;
    HorizonDistribution horizon;
    InitialStateDistribution init;

    void validate() const {
        sys.validate();
        cost.validate(sys.n(), sys.m());
        horizon.validate(sys.n());
        init.validate(sys.n());
    }
};

// Extended state space [x; 1]: A_tilde = [[A, d], [0', 1]], B_tilde = [[B], [0']].
void build_extended_system(const SystemModel& sys, MatrixXd& A_tilde, MatrixXd& B_tilde);

}  // namespace ioc
