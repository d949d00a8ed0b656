#include "ioc/riccati.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

namespace ioc {

RiccatiSolution riccati_backward(const SystemModel& sys, const CostParams& cost, int nu) {
    sys.validate();
    cost.validate(sys.n(), sys.m());
    if (nu < 2) throw ValidationError("nu", "must be at least 2");

    const MatrixXd& A = sys.A;
    const MatrixXd& B = sys.B;
    const VectorXd& d = sys.d;

    RiccatiSolution sol;
    sol.nu = nu;
    sol.P.resize(nu);
    sol.eta.resize(nu);
    sol.gamma.resize(nu);
    sol.Ru.resize(nu - 1);
    sol.S.resize(nu - 1);
    sol.g.resize(nu - 1);
    sol.xi.resize(nu - 1);

    sol.P[nu - 1] = 0.5 * (cost.Q + cost.Q.transpose());
    sol.eta[nu - 1] = cost.q;
    sol.gamma[nu - 1] = 0.0;

    for (int t = nu - 1; t >= 1; --t) {
        const MatrixXd& Pn = sol.P[t];      // P_{t+1}
        const VectorXd& etan = sol.eta[t];  // eta_{t+1}

        MatrixXd Ru = B.transpose() * Pn * B + cost.R;
        Ru = 0.5 * (Ru + Ru.transpose());
        MatrixXd S = B.transpose() * Pn * A;
        VectorXd g = B.transpose() * etan + B.transpose() * Pn * d;
        MatrixXd Ru_pinv = pseudo_inverse(Ru);

        MatrixXd P = A.transpose() * Pn * A + cost.Q - S.transpose() * Ru_pinv * S;
        sol.P[t - 1] = 0.5 * (P + P.transpose());

        MatrixXd Acl = A - B * Ru_pinv * S;
        sol.eta[t - 1] = Acl.transpose() * (etan + Pn * d) + cost.q;

        const double xi = g.dot(Ru_pinv * g);
        sol.gamma[t - 1] = sol.gamma[t] - 0.5 * xi + 0.5 * d.dot(Pn * d) + etan.dot(d) +
                           0.5 * (Pn * sys.sigma_w).trace();

        sol.Ru[t - 1] = std::move(Ru);
        sol.S[t - 1] = std::move(S);
        sol.g[t - 1] = std::move(g);
        sol.xi[t - 1] = xi;
    }
    return sol;
}

FeasibilityReport feasibility_check(const RiccatiSolution& sol, double tol_psd, double tol_ker) {
    FeasibilityReport rep;
    const int steps = sol.nu - 1;
    rep.psd_margins.resize(steps);
    rep.kernel_margins.resize(steps);

    bool any_marginal = false;
    // Walk backward so the first recorded violation is the largest t,
    // matching the order in which the recursion breaks down.
    for (int t = steps; t >= 1; --t) {
        const MatrixXd& Ru = sol.Ru[t - 1];
        const double psd_scale = std::max(1.0, Ru.norm());
        const double lmin = min_eigenvalue(Ru);
        rep.psd_margins[t - 1] = lmin;

        MatrixXd Sg(Ru.rows(), sol.S[t - 1].cols() + 1);
        Sg << sol.S[t - 1], sol.g[t - 1];
        const MatrixXd Ru_pinv = pseudo_inverse(Ru);
        const double ker_scale = std::max(1.0, Sg.norm());
        const double resid =
            ((MatrixXd::Identity(Ru.rows(), Ru.cols()) - Ru * Ru_pinv) * Sg).norm();
        rep.kernel_margins[t - 1] = resid;

        const bool psd_viol = lmin < -tol_psd * psd_scale;
        const bool ker_viol = resid > tol_ker * ker_scale;
        if ((psd_viol || ker_viol) && !rep.first_violation_t) {
            rep.first_violation_t = t;
            rep.violation_kind = psd_viol ? ViolationKind::psd : ViolationKind::kernel_containment;
        }
        if (!psd_viol && std::abs(lmin) < tol_psd * psd_scale) any_marginal = true;
        if (!ker_viol && resid > 0.1 * tol_ker * ker_scale) any_marginal = true;
    }

    rep.feasible = !rep.first_violation_t.has_value();
    rep.verdict = !rep.feasible ? FeasibilityVerdict::infeasible
                  : any_marginal ? FeasibilityVerdict::marginal
                                 : FeasibilityVerdict::feasible;
    return rep;
}

HBlocks build_h_blocks(const RiccatiSolution& sol, const SystemModel& sys, const CostParams& cost) {
    const int n = sys.n();
    const int m = sys.m();
    HBlocks hb;
    hb.H.resize(sol.nu - 1);
    hb.beta.resize(sol.nu - 1);
    for (int t = 1; t <= sol.nu - 1; ++t) {
        const MatrixXd& Pn = sol.P[t];
        const VectorXd beta = cost.q + sys.A.transpose() * Pn * sys.d +
                              sys.A.transpose() * sol.eta[t] - sol.eta[t - 1];
        MatrixXd H(m + n + 1, m + n + 1);
        H.setZero();
        H.block(0, 0, m, m) = sol.Ru[t - 1];
        H.block(0, m, m, n) = sol.S[t - 1];
        H.block(0, m + n, m, 1) = sol.g[t - 1];
        H.block(m, 0, n, m) = sol.S[t - 1].transpose();
        H.block(m, m, n, n) = sys.A.transpose() * Pn * sys.A + cost.Q - sol.P[t - 1];
        H.block(m, m + n, n, 1) = beta;
        H.block(m + n, 0, 1, m) = sol.g[t - 1].transpose();
        H.block(m + n, m, 1, n) = beta.transpose();
        H(m + n, m + n) = sol.xi[t - 1];
        hb.H[t - 1] = 0.5 * (H + H.transpose());
        hb.beta[t - 1] = beta;
    }
    return hb;
}

FeasibilityReport feasibility_check_lmi(const RiccatiSolution& sol, const SystemModel& sys,
                                        const CostParams& cost, double tol_psd, double tol_rank) {
    const HBlocks hb = build_h_blocks(sol, sys, cost);
    FeasibilityReport rep;
    const int steps = sol.nu - 1;
    rep.psd_margins.resize(steps);
    rep.kernel_margins.resize(steps);

    bool any_marginal = false;
    for (int t = steps; t >= 1; --t) {
        const MatrixXd& H = hb.H[t - 1];
        const double scale = std::max(1.0, H.norm());
        const double lmin = min_eigenvalue(H);
        rep.psd_margins[t - 1] = lmin;

        const int rank_H = numerical_rank(H, tol_rank);
        const int rank_Ru = numerical_rank(sol.Ru[t - 1], tol_rank);
        rep.kernel_margins[t - 1] = static_cast<double>(rank_H - rank_Ru);

        const bool psd_viol = lmin < -tol_psd * scale;
        const bool rank_viol = rank_H != rank_Ru;
        if ((psd_viol || rank_viol) && !rep.first_violation_t) {
            rep.first_violation_t = t;
            rep.violation_kind = psd_viol ? ViolationKind::psd : ViolationKind::kernel_containment;
        }
        // H_t is singular by construction whenever the instance is feasible
        // (its rank equals rank(Ru) < m + n + 1), so a zero eigenvalue is the
        // expected case; only a slightly negative one is borderline.
        if (!psd_viol && lmin < -0.1 * tol_psd * scale) any_marginal = true;
    }

    rep.feasible = !rep.first_violation_t.has_value();
    rep.verdict = !rep.feasible ? FeasibilityVerdict::infeasible
                  : any_marginal ? FeasibilityVerdict::marginal
                                 : FeasibilityVerdict::feasible;
    return rep;
}

std::vector<double> schur_residual(const RiccatiSolution& sol, const SystemModel& sys,
                                   const CostParams& cost) {
    const HBlocks hb = build_h_blocks(sol, sys, cost);
    const int n = sys.n();
    const int m = sys.m();
    std::vector<double> out(sol.nu - 1);
    for (int t = 1; t <= sol.nu - 1; ++t) {
        const MatrixXd& H = hb.H[t - 1];
        const MatrixXd Ru = H.block(0, 0, m, m);
        const MatrixXd C = H.block(0, m, m, n + 1);
        const MatrixXd D = H.block(m, m, n + 1, n + 1);
        out[t - 1] = (D - C.transpose() * pseudo_inverse(Ru) * C).norm();
    }
    return out;
}

VectorXd optimal_control(const RiccatiSolution& sol, const VectorXd& x, int t,
                         const std::optional<VectorXd>& lambda) {
    if (t < 1 || t > sol.nu - 1) throw std::out_of_range("optimal_control: time index out of range");
    const MatrixXd& Ru = sol.Ru[t - 1];
    const MatrixXd Ru_pinv = pseudo_inverse(Ru);
    VectorXd u = -Ru_pinv * (sol.S[t - 1] * x + sol.g[t - 1]);
    if (lambda) {
        const MatrixXd Pker = MatrixXd::Identity(Ru.rows(), Ru.cols()) - Ru_pinv * Ru;
        u += Pker * (*lambda);
    }
    return u;
}

double value_function(const RiccatiSolution& sol, const VectorXd& x, int t) {
    if (t < 1 || t > sol.nu) throw std::out_of_range("value_function: time index out of range");
    return 0.5 * x.dot(sol.P[t - 1] * x) + sol.eta[t - 1].dot(x) + sol.gamma[t - 1];
}

ClosedLoop closed_loop(const RiccatiSolution& sol, const SystemModel& sys) {
    const int n = sys.n();
    ClosedLoop cl;
    cl.Acl.resize(sol.nu - 1);
    cl.Acl_tilde.resize(sol.nu - 1);
    cl.min_singular_values.resize(sol.nu - 1);
    for (int t = 1; t <= sol.nu - 1; ++t) {
        const MatrixXd& Ru = sol.Ru[t - 1];
        if (min_eigenvalue(Ru) <= kRankTol * std::max(1.0, Ru.norm()))
            throw std::runtime_error(
                "closed_loop: B'P B + R is singular at t = " + std::to_string(t) +
                "; the instance is outside the strictly feasible regime (run feasibility_check)");
        const MatrixXd Ru_inv = Ru.llt().solve(MatrixXd::Identity(Ru.rows(), Ru.cols()));
        cl.Acl[t - 1] = sys.A - sys.B * Ru_inv * sol.S[t - 1];
        MatrixXd At(n + 1, n + 1);
        At.setZero();
        At.topLeftCorner(n, n) = cl.Acl[t - 1];
        At.topRightCorner(n, 1) = sys.d - sys.B * Ru_inv * sol.g[t - 1];
        At(n, n) = 1.0;
        cl.Acl_tilde[t - 1] = At;
        Eigen::JacobiSVD<MatrixXd> svd(At);
        cl.min_singular_values[t - 1] = svd.singularValues().minCoeff();
    }
    return cl;
}

StackedQpResult stacked_qp_oracle(const SystemModel& sys, const CostParams& cost,
                                  const VectorXd& x_bar, int N) {
    sys.validate();
    cost.validate(sys.n(), sys.m());
    if (N < 2) throw ValidationError("N", "must be at least 2");
    if (x_bar.size() != sys.n()) throw ValidationError("x_bar", "dimension mismatch");

    const int n = sys.n();
    const int m = sys.m();
    const int nu_dim = (N - 1) * m;

    // x_tau = Phi_tau U + c_tau with local indices tau = 1..N, x_1 = x_bar.
    std::vector<MatrixXd> Phi(N);
    std::vector<VectorXd> c(N);
    Phi[0] = MatrixXd::Zero(n, nu_dim);
    c[0] = x_bar;
    for (int tau = 1; tau < N; ++tau) {
        Phi[tau] = sys.A * Phi[tau - 1];
        Phi[tau].middleCols((tau - 1) * m, m) += sys.B;
        c[tau] = sys.A * c[tau - 1] + sys.d;
    }

    MatrixXd Hqp = MatrixXd::Zero(nu_dim, nu_dim);
    VectorXd lin = VectorXd::Zero(nu_dim);
    double constant = 0.0;
    for (int tau = 0; tau < N; ++tau) {
        Hqp += Phi[tau].transpose() * cost.Q * Phi[tau];
        lin += Phi[tau].transpose() * (cost.Q * c[tau] + cost.q);
        constant += 0.5 * c[tau].dot(cost.Q * c[tau]) + cost.q.dot(c[tau]);
    }
    for (int k = 0; k < N - 1; ++k) Hqp.block(k * m, k * m, m, m) += cost.R;
    Hqp = 0.5 * (Hqp + Hqp.transpose());

    StackedQpResult res;
    const double scale = std::max(1.0, Hqp.norm());
    if (min_eigenvalue(Hqp) < -kPsdTol * scale) {
        res.bounded = false;
        return res;
    }
    const MatrixXd Hqp_pinv = pseudo_inverse(Hqp);
    // A consistent stationary point must exist; otherwise the cost slides
    // to minus infinity along the Hessian kernel.
    if ((lin - Hqp * (Hqp_pinv * lin)).norm() > 1e-8 * std::max(1.0, lin.norm())) {
        res.bounded = false;
        return res;
    }
    const VectorXd U = -Hqp_pinv * lin;
    res.cost_value = 0.5 * U.dot(Hqp * U) + lin.dot(U) + constant;
    res.controls.resize(N - 1);
    for (int k = 0; k < N - 1; ++k) res.controls[k] = U.segment(k * m, m);
    return res;
}

}  // namespace ioc
