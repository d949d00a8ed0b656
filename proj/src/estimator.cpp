#include "ioc/estimator.hpp"

#include <cmath>

namespace ioc {

double EmpiricalObjective::evaluate(const MatrixXd& Q, const VectorXd& q,
                                    const std::vector<MatrixXd>& P,
                                    const std::vector<VectorXd>& eta,
                                    const std::vector<double>& xi) const {
    double v = constant + coeff_Q.cwiseProduct(Q).sum() + coeff_q.dot(q);
    for (int t = 0; t < nu; ++t) {
        v += coeff_P[t].cwiseProduct(P[t]).sum();
        v += coeff_eta[t].dot(eta[t]);
    }
    for (int t = 0; t < nu - 1; ++t) v += coeff_xi[t] * xi[t];
    return v;
}

EmpiricalObjective assemble_objective(const Dataset& ds, const SystemModel& sys) {
    const int nu = ds.meta.nu;
    const int n = ds.meta.n;
    if (n != sys.n())
        throw ValidationError("dataset", "state dimension does not match the system model");
    if (ds.records.empty()) throw ValidationError("dataset", "no trials");

    EmpiricalObjective obj;
    obj.nu = nu;
    obj.n = n;
    obj.coeff_Q = MatrixXd::Zero(n, n);
    obj.coeff_q = VectorXd::Zero(n);
    obj.coeff_P.assign(nu, MatrixXd::Zero(n, n));
    obj.coeff_eta.assign(nu, VectorXd::Zero(n));
    obj.coeff_xi.assign(nu - 1, 0.0);

    const double w = 1.0 / static_cast<double>(ds.records.size());
    const MatrixXd half_Sv = 0.5 * sys.sigma_v;
    const MatrixXd drift = 0.5 * (sys.d * sys.d.transpose() + sys.sigma_w);

    for (const auto& rec : ds.records) {
        if (rec.N < 2 || rec.N > nu)
            throw ValidationError("dataset", "trial horizon outside {2..nu}");
        const int s = nu - rec.N + 1;  // first active step, 1-based

        const VectorXd& y_nu = rec.y[nu - 1];
        obj.coeff_P[nu - 1] += w * (0.5 * y_nu * y_nu.transpose() - half_Sv);
        obj.coeff_eta[nu - 1] += w * y_nu;

        const VectorXd& y_s = rec.y[s - 1];
        obj.coeff_P[s - 1] -= w * (0.5 * y_s * y_s.transpose() - half_Sv);
        obj.coeff_eta[s - 1] -= w * y_s;

        for (int t = s; t <= nu - 1; ++t) {
            obj.coeff_xi[t - 1] += 0.5 * w;
            obj.coeff_P[t] -= w * drift;
            obj.coeff_eta[t] -= w * sys.d;
            const VectorXd& y_t = rec.y[t - 1];
            obj.coeff_Q += w * (0.5 * y_t * y_t.transpose() - half_Sv);
            obj.coeff_q += w * y_t;
        }
    }
    // Symmetrize the quadratic coefficients (outer products already are;
    // this guards accumulated round-off).
    obj.coeff_Q = 0.5 * (obj.coeff_Q + obj.coeff_Q.transpose()).eval();
    for (auto& C : obj.coeff_P) C = 0.5 * (C + C.transpose()).eval();
    return obj;
}

namespace {

// Packed-entry basis matrices of an n x n symmetric block, in the scalar
// order used by sdp::Problem (lower triangle, column major). Off-diagonal
// bases carry 1/sqrt(2) entries so that X = sum_k x_k E_k.
std::vector<MatrixXd> sym_basis(int n) {
    constexpr double inv_sqrt2 = 0.7071067811865476;
    std::vector<MatrixXd> basis;
    basis.reserve(n * (n + 1) / 2);
    for (int j = 0; j < n; ++j)
        for (int i = j; i < n; ++i) {
            MatrixXd E = MatrixXd::Zero(n, n);
            if (i == j)
                E(i, i) = 1.0;
            else
                E(i, j) = E(j, i) = inv_sqrt2;
            basis.push_back(std::move(E));
        }
    return basis;
}

}  // namespace

EstimatorVars assemble_problem(const EmpiricalObjective& obj, const SystemModel& sys, double phi,
                               sdp::Problem& prob) {
    const int nu = obj.nu;
    const int n = obj.n;
    const int m = sys.m();
    const MatrixXd& A = sys.A;
    const MatrixXd& B = sys.B;
    const VectorXd& d = sys.d;

    EstimatorVars vars;
    vars.Q = prob.add_sym("Q", n);
    vars.q = prob.add_vec("q", n);
    for (int t = 1; t <= nu; ++t) {
        vars.P.push_back(prob.add_sym("P" + std::to_string(t), n));
        vars.eta.push_back(prob.add_vec("eta" + std::to_string(t), n));
    }
    for (int t = 1; t <= nu - 1; ++t) vars.xi.push_back(prob.add_scalar("xi" + std::to_string(t)));

    prob.obj_sym(vars.Q, obj.coeff_Q);
    prob.obj_vec(vars.q, obj.coeff_q);
    for (int t = 0; t < nu; ++t) {
        prob.obj_sym(vars.P[t], obj.coeff_P[t]);
        prob.obj_vec(vars.eta[t], obj.coeff_eta[t]);
    }
    for (int t = 0; t < nu - 1; ++t) prob.obj_scalar(vars.xi[t], obj.coeff_xi[t]);
    prob.obj_constant(obj.constant);

    prob.link_equal(vars.P[nu - 1], vars.Q);
    prob.link_equal(vars.eta[nu - 1], vars.q);

    // Solvability matrices H_t >= 0, affine in the blocks. Rows/columns are
    // grouped (control, state, affine): H = [[B'P+B + I, B'P+A, g],
    // [., A'P+A + Q - P_t, beta], [., ., xi_t]] with g = B'(eta+ + P+ d),
    // beta = q + A'(eta+ + P+ d) - eta_t.
    const int h = m + n + 1;
    const auto basis = sym_basis(n);
    for (int t = 1; t <= nu - 1; ++t) {
        sdp::MatExpr e;
        e.dim = h;
        e.constant = MatrixXd::Zero(h, h);
        e.constant.topLeftCorner(m, m).setIdentity();

        int k = 0;
        for (int j = 0; j < n; ++j)
            for (int i = j; i < n; ++i, ++k) {
                const MatrixXd& E = basis[k];
                // P_{t+1} entry (i, j)
                {
                    MatrixXd C = MatrixXd::Zero(h, h);
                    C.topLeftCorner(m, m) = B.transpose() * E * B;
                    C.block(0, m, m, n) = B.transpose() * E * A;
                    C.block(m, 0, n, m) = C.block(0, m, m, n).transpose();
                    const VectorXd Ed = E * d;
                    C.block(0, m + n, m, 1) = B.transpose() * Ed;
                    C.block(m + n, 0, 1, m) = C.block(0, m + n, m, 1).transpose();
                    C.block(m, m, n, n) = A.transpose() * E * A;
                    C.block(m, m + n, n, 1) = A.transpose() * Ed;
                    C.block(m + n, m, 1, n) = C.block(m, m + n, n, 1).transpose();
                    e.terms.emplace_back(prob.sym_index(vars.P[t], i, j), std::move(C));
                }
                // P_t entry (i, j): minus E in the state block
                {
                    MatrixXd C = MatrixXd::Zero(h, h);
                    C.block(m, m, n, n) = -E;
                    e.terms.emplace_back(prob.sym_index(vars.P[t - 1], i, j), std::move(C));
                }
                // Q entry (i, j): plus E in the state block
                {
                    MatrixXd C = MatrixXd::Zero(h, h);
                    C.block(m, m, n, n) = E;
                    e.terms.emplace_back(prob.sym_index(vars.Q, i, j), std::move(C));
                }
            }
        for (int i = 0; i < n; ++i) {
            const VectorXd ei = VectorXd::Unit(n, i);
            // eta_{t+1}: enters g and beta
            {
                MatrixXd C = MatrixXd::Zero(h, h);
                C.block(0, m + n, m, 1) = B.transpose() * ei;
                C.block(m, m + n, n, 1) = A.transpose() * ei;
                C.block(m + n, 0, 1, m) = C.block(0, m + n, m, 1).transpose();
                C.block(m + n, m, 1, n) = C.block(m, m + n, n, 1).transpose();
                e.terms.emplace_back(prob.vec_index(vars.eta[t], i), std::move(C));
            }
            // eta_t: minus in beta
            {
                MatrixXd C = MatrixXd::Zero(h, h);
                C(m + i, m + n) = C(m + n, m + i) = -1.0;
                e.terms.emplace_back(prob.vec_index(vars.eta[t - 1], i), std::move(C));
            }
            // q: plus in beta
            {
                MatrixXd C = MatrixXd::Zero(h, h);
                C(m + i, m + n) = C(m + n, m + i) = 1.0;
                e.terms.emplace_back(prob.vec_index(vars.q, i), std::move(C));
            }
        }
        {
            MatrixXd C = MatrixXd::Zero(h, h);
            C(h - 1, h - 1) = 1.0;
            e.terms.emplace_back(prob.scalar_index(vars.xi[t - 1]), std::move(C));
        }
        prob.add_psd(std::move(e));
    }

    // Norm balls of radius phi. The (Q, q) pair is bounded jointly as
    // ||[[Q, q], [q', 0]]||_F <= phi, so the q entries carry weight 2.
    auto block_ball = [&prob, phi](int var, double weight) {
        const sdp::Variable& v = prob.var(var);
        sdp::NormBound b;
        b.radius = phi;
        for (int k = 0; k < v.count; ++k) {
            b.idx.push_back(v.offset + k);
            b.weights.push_back(weight);
        }
        return b;
    };
    {
        sdp::NormBound joint = block_ball(vars.Q, 1.0);
        const sdp::NormBound qb = block_ball(vars.q, 2.0);
        joint.idx.insert(joint.idx.end(), qb.idx.begin(), qb.idx.end());
        joint.weights.insert(joint.weights.end(), qb.weights.begin(), qb.weights.end());
        prob.add_norm_bound(std::move(joint));
    }
    for (int t = 0; t < nu; ++t) {
        prob.add_norm_bound(block_ball(vars.P[t], 1.0));
        prob.add_norm_bound(block_ball(vars.eta[t], 1.0));
    }
    for (int t = 0; t < nu - 1; ++t) prob.add_norm_bound(block_ball(vars.xi[t], 1.0));

    return vars;
}

VectorXd pack_candidate(const sdp::Problem& prob, const EstimatorVars& vars, const MatrixXd& Q,
                        const VectorXd& q, const std::vector<MatrixXd>& P,
                        const std::vector<VectorXd>& eta, const std::vector<double>& xi) {
    VectorXd x = VectorXd::Zero(prob.num_scalars());
    prob.set_sym(x, vars.Q, Q);
    prob.set_vec(x, vars.q, q);
    for (std::size_t t = 0; t < vars.P.size(); ++t) {
        prob.set_sym(x, vars.P[t], P[t]);
        prob.set_vec(x, vars.eta[t], eta[t]);
    }
    for (std::size_t t = 0; t < vars.xi.size(); ++t) prob.set_scalar(x, vars.xi[t], xi[t]);
    return x;
}

EstimateResult estimate(const Dataset& ds, const SystemModel& sys, const EstimatorOptions& opts) {
    const EmpiricalObjective obj = assemble_objective(ds, sys);
    sdp::Problem prob;
    const EstimatorVars vars = assemble_problem(obj, sys, opts.phi, prob);
    const sdp::Solution sol = sdp::solve(prob, opts.tol, opts.max_iter);
    if (sol.status == sdp::Status::infeasible || sol.x.size() != prob.num_scalars())
        throw std::runtime_error(std::string("estimate: solver failed (") +
                                 sdp::status_name(sol.status) + "): " + sol.message);

    EstimateResult res;
    res.Q_hat = prob.get_sym(sol.x, vars.Q);
    res.q_hat = prob.get_vec(sol.x, vars.q);
    for (int t = 0; t < obj.nu; ++t) {
        res.P_hat.push_back(prob.get_sym(sol.x, vars.P[t]));
        res.eta_hat.push_back(prob.get_vec(sol.x, vars.eta[t]));
    }
    res.objective = sol.objective_value;
    res.solution = sol;

    bool have_truth = true;
    for (const auto& rec : ds.records)
        if (!rec.u_true) have_truth = false;
    if (have_truth) {
        double energy = 0.0;
        for (const auto& rec : ds.records) {
            const int s = ds.meta.nu - rec.N + 1;
            for (int t = s; t <= ds.meta.nu - 1; ++t)
                energy += 0.5 * (*rec.u_true)[t - 1].squaredNorm();
        }
        energy /= static_cast<double>(ds.records.size());
        res.lower_bound_gap = res.objective + energy;
    }
    return res;
}

ErrorMetrics error_metrics(const MatrixXd& Q_hat, const VectorXd& q_hat, const MatrixXd& Q_true,
                           const VectorXd& q_true) {
    ErrorMetrics em;
    const double nQ = Q_true.norm();
    if (nQ <= 1e-12) throw ValidationError("Q_true", "vanishing norm, relative error undefined");
    em.rel_err_Q = (Q_hat - Q_true).norm() / nQ;
    const double nq = q_true.norm();
    if (nq <= 1e-12) {
        em.rel_err_q = (q_hat - q_true).norm();
        em.q_abs_fallback = true;
    } else {
        em.rel_err_q = (q_hat - q_true).norm() / nq;
    }
    return em;
}

}  // namespace ioc
