#include "ioc/model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

namespace ioc {

int numerical_rank(const MatrixXd& M, double tol) {
    if (M.size() == 0) return 0;
    Eigen::JacobiSVD<MatrixXd> svd(M);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double cutoff = tol * sv(0) * std::max(M.rows(), M.cols());
    int r = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++r;
    return r;
}

bool is_symmetric(const MatrixXd& M, double tol) {
    if (M.rows() != M.cols()) return false;
    const double scale = std::max(1.0, M.norm());
    return (M - M.transpose()).norm() <= tol * scale;
}

double min_eigenvalue(const MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool is_psd(const MatrixXd& M, double tol) {
    if (!is_symmetric(M, 1e-10)) return false;
    return min_eigenvalue(M) >= -tol * std::max(1.0, M.norm());
}

MatrixXd pseudo_inverse(const MatrixXd& M, double tol) {
    Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cutoff = (sv.size() > 0) ? tol * sv(0) : 0.0;
    VectorXd inv = VectorXd::Zero(sv.size());
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

void SystemModel::validate() const {
    const int nn = n();
    if (A.rows() != A.cols()) throw ValidationError("system.A", "must be square");
    if (B.rows() != nn) throw ValidationError("system.B", "row count must match state dimension");
    if (B.cols() < 1) throw ValidationError("system.B", "must have at least one column");
    if (d.size() != nn) throw ValidationError("system.d", "length must match state dimension");
    for (const auto* s : {&sigma_w, &sigma_v}) {
        const char* name = (s == &sigma_w) ? "system.sigma_w" : "system.sigma_v";
        if (s->rows() != nn || s->cols() != nn) throw ValidationError(name, "must be n x n");
        if (!is_symmetric(*s, 1e-10)) throw ValidationError(name, "must be symmetric");
        if (!is_psd(*s)) throw ValidationError(name, "must be positive semi-definite");
    }
}

void CostParams::validate(int n, int m) const {
    if (Q.rows() != n || Q.cols() != n) throw ValidationError("cost.Q", "must be n x n");
    if (!is_symmetric(Q, 1e-10)) throw ValidationError("cost.Q", "must be symmetric");
    if (q.size() != n) throw ValidationError("cost.q", "length must match state dimension");
    if (R.rows() != m || R.cols() != m) throw ValidationError("cost.R", "must be m x m");
    if (!is_symmetric(R, 1e-10)) throw ValidationError("cost.R", "must be symmetric");
}

HorizonDistribution HorizonDistribution::uniform(int nu) {
    HorizonDistribution h;
    h.nu = nu;
    if (nu >= 2) h.probs = VectorXd::Constant(nu - 1, 1.0 / (nu - 1));
    return h;
}

void HorizonDistribution::validate(int n) const {
    if (nu < 2) throw ValidationError("horizon.nu", "must be at least 2");
    if (nu < n + 1) throw ValidationError("horizon.nu", "must be at least n + 1");
    if (probs.size() != nu - 1) throw ValidationError("horizon.probs", "must have nu - 1 entries");
    if (probs.minCoeff() < 0.0) throw ValidationError("horizon.probs", "must be nonnegative");
    if (std::abs(probs.sum() - 1.0) > 1e-12) throw ValidationError("horizon.probs", "must sum to 1");
    if (probs(nu - 2) <= 0.0)
        throw ValidationError("horizon.probs", "the longest horizon must have positive probability");
}

InitialStateDistribution InitialStateDistribution::gaussian(VectorXd mean, MatrixXd cov) {
    InitialStateDistribution d;
    d.components.push_back({1.0, std::move(mean), std::move(cov)});
    return d;
}

void InitialStateDistribution::validate(int n) const {
    if (components.empty()) throw ValidationError("init", "must have at least one component");
    double wsum = 0.0;
    for (const auto& c : components) {
        if (c.weight < 0.0) throw ValidationError("init.weight", "must be nonnegative");
        wsum += c.weight;
        if (c.mean.size() != n) throw ValidationError("init.mean", "length must match state dimension");
        if (c.cov.rows() != n || c.cov.cols() != n) throw ValidationError("init.cov", "must be n x n");
        if (!is_symmetric(c.cov, 1e-10)) throw ValidationError("init.cov", "must be symmetric");
        // Strict positive definiteness certifies the excitation assumption.
        if (min_eigenvalue(c.cov) <= kPsdTol * std::max(1.0, c.cov.norm()))
            throw ValidationError("init.cov", "must be strictly positive definite");
    }
    if (std::abs(wsum - 1.0) > 1e-12) throw ValidationError("init.weight", "weights must sum to 1");
}

AssumptionReport check_assumptions(const SystemModel& sys, const HorizonDistribution& horizon,
                                   const InitialStateDistribution& init) {
    sys.validate();
    const int n = sys.n();
    const int m = sys.m();

    AssumptionReport rep;

    MatrixXd ctrb(n, n * m);
    MatrixXd Ak = MatrixXd::Identity(n, n);
    for (int k = 0; k < n; ++k) {
        ctrb.middleCols(k * m, m) = Ak * sys.B;
        Ak = sys.A * Ak;
    }
    rep.controllable = numerical_rank(ctrb) == n;
    rep.details.push_back(rep.controllable ? "controllability matrix has full rank"
                                           : "controllability matrix is rank deficient");

    Eigen::JacobiSVD<MatrixXd> svdA(sys.A);
    const auto& sa = svdA.singularValues();
    rep.a_invertible = sa.size() > 0 && sa(sa.size() - 1) > kRankTol * sa(0);
    rep.details.push_back(rep.a_invertible ? "A is invertible" : "A is numerically singular");

    rep.b_full_column_rank = numerical_rank(sys.B) == m;
    rep.details.push_back(rep.b_full_column_rank ? "B has full column rank"
                                                 : "B is column-rank deficient");

    try {
        horizon.validate(n);
        rep.horizon_ok = true;
        rep.details.push_back("horizon distribution satisfies the support conditions");
    } catch (const ValidationError& e) {
        rep.horizon_ok = false;
        rep.details.push_back(std::string("horizon: ") + e.what());
    }

    try {
        init.validate(n);
        rep.excitation_ok = true;
        rep.details.push_back("all initial-state covariances are strictly positive definite");
    } catch (const ValidationError& e) {
        rep.excitation_ok = false;
        rep.details.push_back(std::string("init: ") + e.what());
    }

    return rep;
}

void build_extended_system(const SystemModel& sys, MatrixXd& A_tilde, MatrixXd& B_tilde) {
    sys.validate();
    const int n = sys.n();
    const int m = sys.m();
    A_tilde.setZero(n + 1, n + 1);
    A_tilde.topLeftCorner(n, n) = sys.A;
    A_tilde.topRightCorner(n, 1) = sys.d;
    A_tilde(n, n) = 1.0;
    B_tilde.setZero(n + 1, m);
    B_tilde.topRows(n) = sys.B;
}

}  // namespace ioc
