#include "ioc/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ioc {
namespace sdp {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
}

MatrixXd MatExpr::evaluate(const VectorXd& x) const {
    MatrixXd G = constant;
    for (const auto& [idx, coeff] : terms) G += x(idx) * coeff;
    return G;
}

int Problem::add_sym(const std::string& name, int n) {
    Variable v{name, Variable::Kind::sym, n, num_scalars_, n * (n + 1) / 2};
    num_scalars_ += v.count;
    vars_.push_back(std::move(v));
    return static_cast<int>(vars_.size()) - 1;
}

int Problem::add_vec(const std::string& name, int n) {
    Variable v{name, Variable::Kind::vec, n, num_scalars_, n};
    num_scalars_ += n;
    vars_.push_back(std::move(v));
    return static_cast<int>(vars_.size()) - 1;
}

int Problem::add_scalar(const std::string& name) {
    Variable v{name, Variable::Kind::scalar, 1, num_scalars_, 1};
    num_scalars_ += 1;
    vars_.push_back(std::move(v));
    return static_cast<int>(vars_.size()) - 1;
}

int Problem::sym_index(int var, int i, int j) const {
    const Variable& v = vars_.at(var);
    if (v.kind != Variable::Kind::sym) throw std::logic_error("sym_index on non-symmetric block");
    if (i < j) std::swap(i, j);
    const int n = v.dim;
    return v.offset + j * n - j * (j - 1) / 2 + (i - j);
}

int Problem::vec_index(int var, int i) const {
    const Variable& v = vars_.at(var);
    if (v.kind != Variable::Kind::vec) throw std::logic_error("vec_index on non-vector block");
    return v.offset + i;
}

int Problem::scalar_index(int var) const {
    const Variable& v = vars_.at(var);
    if (v.kind != Variable::Kind::scalar) throw std::logic_error("scalar_index on non-scalar block");
    return v.offset;
}

void Problem::obj_sym(int var, const MatrixXd& C) {
    const Variable& v = vars_.at(var);
    for (int j = 0; j < v.dim; ++j)
        for (int i = j; i < v.dim; ++i) {
            const double c = (i == j) ? C(i, i) : (C(i, j) + C(j, i)) / kSqrt2;
            if (c != 0.0) obj_terms_.emplace_back(sym_index(var, i, j), c);
        }
    objective_.resize(0);
}

void Problem::obj_vec(int var, const VectorXd& c) {
    for (int i = 0; i < c.size(); ++i)
        if (c(i) != 0.0) obj_terms_.emplace_back(vec_index(var, i), c(i));
    objective_.resize(0);
}

void Problem::obj_scalar(int var, double c) {
    if (c != 0.0) obj_terms_.emplace_back(scalar_index(var), c);
    objective_.resize(0);
}

const VectorXd& Problem::objective() const {
    if (objective_.size() != num_scalars_) {
        objective_ = VectorXd::Zero(num_scalars_);
        for (const auto& [idx, c] : obj_terms_) objective_(idx) += c;
    }
    return objective_;
}

void Problem::add_equality(const std::vector<std::pair<int, double>>& coeffs, double rhs) {
    equalities_.emplace_back(coeffs, rhs);
}

void Problem::link_equal(int var_a, int var_b) {
    const Variable& a = vars_.at(var_a);
    const Variable& b = vars_.at(var_b);
    if (a.kind != b.kind || a.dim != b.dim)
        throw std::logic_error("link_equal: incompatible blocks");
    for (int k = 0; k < a.count; ++k)
        add_equality({{a.offset + k, 1.0}, {b.offset + k, -1.0}}, 0.0);
}

void Problem::add_psd(MatExpr expr) {
    if (expr.constant.rows() != expr.dim || expr.constant.cols() != expr.dim)
        throw std::logic_error("add_psd: constant dimension mismatch");
    psd_.push_back(std::move(expr));
}

void Problem::add_norm_bound(NormBound bound) {
    if (bound.radius <= 0.0) throw std::logic_error("add_norm_bound: radius must be positive");
    if (bound.weights.size() != bound.idx.size())
        throw std::logic_error("add_norm_bound: weights/indices mismatch");
    norm_bounds_.push_back(std::move(bound));
}

MatrixXd Problem::get_sym(const VectorXd& x, int var) const {
    const Variable& v = vars_.at(var);
    MatrixXd M(v.dim, v.dim);
    for (int j = 0; j < v.dim; ++j)
        for (int i = j; i < v.dim; ++i) {
            const double val = x(sym_index(var, i, j));
            M(i, j) = M(j, i) = (i == j) ? val : val / kSqrt2;
        }
    return M;
}

VectorXd Problem::get_vec(const VectorXd& x, int var) const {
    const Variable& v = vars_.at(var);
    return x.segment(v.offset, v.dim);
}

double Problem::get_scalar(const VectorXd& x, int var) const { return x(scalar_index(var)); }

void Problem::set_sym(VectorXd& x, int var, const MatrixXd& value) const {
    const Variable& v = vars_.at(var);
    for (int j = 0; j < v.dim; ++j)
        for (int i = j; i < v.dim; ++i)
            x(sym_index(var, i, j)) = (i == j) ? value(i, i) : kSqrt2 * 0.5 * (value(i, j) + value(j, i));
}

void Problem::set_vec(VectorXd& x, int var, const VectorXd& value) const {
    const Variable& v = vars_.at(var);
    x.segment(v.offset, v.dim) = value;
}

void Problem::set_scalar(VectorXd& x, int var, double value) const { x(scalar_index(var)) = value; }

// ---------------------------------------------------------------------------
// Solver internals
// ---------------------------------------------------------------------------

namespace {

// Norm-ball as an arrow LMI: [[r I, v], [v', r]] >= 0 with v_k = sqrt(w_k) x_k.
MatExpr ball_to_lmi(const NormBound& b) {
    const int k = static_cast<int>(b.idx.size());
    MatExpr e;
    e.dim = k + 1;
    e.constant = MatrixXd::Zero(k + 1, k + 1);
    e.constant.diagonal().setConstant(b.radius);
    for (int i = 0; i < k; ++i) {
        MatrixXd C = MatrixXd::Zero(k + 1, k + 1);
        C(i, k) = C(k, i) = std::sqrt(b.weights[i]);
        e.terms.emplace_back(b.idx[i], C);
    }
    return e;
}

struct BarrierState {
    std::vector<MatExpr> blocks;  // scaled working copies, in x-space
    MatrixXd Z;                   // nullspace basis of the equalities
    VectorXd x_particular;
    VectorXd c;  // linear objective, x-space
    int m_total = 0;
};

bool strictly_feasible(const std::vector<MatExpr>& blocks, const VectorXd& x,
                       std::vector<Eigen::LLT<MatrixXd>>* facts = nullptr) {
    if (facts) facts->clear();
    for (const auto& blk : blocks) {
        Eigen::LLT<MatrixXd> llt(blk.evaluate(x));
        if (llt.info() != Eigen::Success) return false;
        if (facts) facts->push_back(std::move(llt));
    }
    return true;
}

double barrier_value(const std::vector<MatrixXd>& vals) {
    double v = 0.0;
    for (const auto& G : vals) {
        Eigen::LLT<MatrixXd> llt(G);
        if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
        v -= 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }
    return v;
}

double phi_value(const BarrierState& st, double t, const VectorXd& x) {
    std::vector<MatrixXd> vals;
    vals.reserve(st.blocks.size());
    for (const auto& blk : st.blocks) vals.push_back(blk.evaluate(x));
    const double bar = barrier_value(vals);
    return t * st.c.dot(x) + bar;
}

enum class CenterResult { converged, budget_exhausted, breakdown };

// One Newton centering pass for phi(z) = t c'x(z) - sum log det G_k(x(z)).
// The m/t suboptimality bound used by the caller is only valid at a genuinely
// centered point, so running out of inner iterations is reported as its own
// outcome rather than being conflated with convergence.
CenterResult center(const BarrierState& st, double t, VectorXd& x, int& newton_steps,
                    int max_inner = 60) {
    const int nx = static_cast<int>(x.size());
    const int nz = static_cast<int>(st.Z.cols());

    for (int it = 0; it < max_inner; ++it) {
        VectorXd grad = t * st.c;
        MatrixXd hess = MatrixXd::Zero(nx, nx);

        for (const auto& blk : st.blocks) {
            Eigen::LLT<MatrixXd> llt(blk.evaluate(x));
            if (llt.info() != Eigen::Success) return CenterResult::breakdown;
            const MatrixXd W = llt.solve(MatrixXd::Identity(blk.dim, blk.dim));
            const int k = static_cast<int>(blk.terms.size());
            std::vector<MatrixXd> WGW(k);
            for (int a = 0; a < k; ++a) {
                const MatrixXd WG = W * blk.terms[a].second;
                grad(blk.terms[a].first) -= WG.trace();
                WGW[a] = WG * W;
            }
            for (int a = 0; a < k; ++a) {
                const int ia = blk.terms[a].first;
                for (int b = a; b < k; ++b) {
                    const int ib = blk.terms[b].first;
                    const double h = WGW[a].cwiseProduct(blk.terms[b].second).sum();
                    hess(ia, ib) += h;
                    if (ia != ib) hess(ib, ia) += h;
                }
            }
        }

        VectorXd gz = st.Z.transpose() * grad;
        MatrixXd Hz = st.Z.transpose() * hess * st.Z;

        Eigen::LLT<MatrixXd> hllt(Hz);
        VectorXd dz;
        if (hllt.info() == Eigen::Success) {
            dz = -hllt.solve(gz);
        } else {
            const double ridge = 1e-12 * (1.0 + Hz.trace() / std::max(1, nz));
            Eigen::LDLT<MatrixXd> ldlt(Hz + ridge * MatrixXd::Identity(nz, nz));
            dz = -ldlt.solve(gz);
        }
        const double decrement = -gz.dot(dz);
        // Stationary (or indefinite round-off): nothing left to gain here.
        if (!(decrement > 0)) return CenterResult::converged;
        if (decrement * 0.5 < 1e-11) {
            ++newton_steps;
            x += st.Z * dz;  // final full step keeps quadratic convergence accuracy
            if (!strictly_feasible(st.blocks, x)) x -= st.Z * dz;
            return CenterResult::converged;
        }

        const VectorXd dx = st.Z * dz;
        const double f0 = phi_value(st, t, x);
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            const VectorXd cand = x + alpha * dx;
            if (strictly_feasible(st.blocks, cand)) {
                const double f1 = phi_value(st, t, cand);
                if (f1 <= f0 - 1e-4 * alpha * decrement) {
                    x = cand;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        ++newton_steps;
        if (!accepted) return CenterResult::breakdown;
    }
    return CenterResult::budget_exhausted;
}

MatrixXd nullspace_basis(const MatrixXd& Aeq, int nx) {
    if (Aeq.rows() == 0) return MatrixXd::Identity(nx, nx);
    Eigen::JacobiSVD<MatrixXd> svd(Aeq, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cutoff = (sv.size() > 0 ? sv(0) : 0.0) * 1e-12 * std::max<int>(Aeq.rows(), nx);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++rank;
    return svd.matrixV().rightCols(nx - rank);
}

}  // namespace

const char* status_name(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::max_iterations: return "max_iterations";
        case Status::numerical_failure: return "numerical_failure";
        case Status::infeasible: return "infeasible";
    }
    return "unknown";
}

Solution solve(const Problem& p, Tolerances tol, int max_iter) {
    Solution sol;
    const int nx = p.num_scalars();
    if (nx == 0) {
        sol.status = Status::optimal;
        sol.objective_value = p.objective_constant();
        return sol;
    }

    BarrierState st;
    st.c = p.objective();

    // Scaled working blocks: PSD constraints plus the norm balls as arrow LMIs.
    for (const auto& blk : p.psd_constraints()) {
        MatExpr e = blk;
        const double s = 1.0 / std::max(1.0, e.constant.norm());
        e.constant *= s;
        for (auto& [idx, C] : e.terms) C *= s;
        st.blocks.push_back(std::move(e));
        st.m_total += blk.dim;
    }
    for (const auto& b : p.norm_bounds()) {
        st.blocks.push_back(ball_to_lmi(b));
        st.m_total += static_cast<int>(b.idx.size()) + 1;
    }

    // Equality elimination: x = x_p + Z z.
    const auto& eqs = p.equalities();
    MatrixXd Aeq = MatrixXd::Zero(static_cast<int>(eqs.size()), nx);
    VectorXd beq = VectorXd::Zero(static_cast<int>(eqs.size()));
    for (std::size_t r = 0; r < eqs.size(); ++r) {
        for (const auto& [idx, c] : eqs[r].first) Aeq(static_cast<int>(r), idx) += c;
        beq(static_cast<int>(r)) = eqs[r].second;
    }
    st.Z = nullspace_basis(Aeq, nx);
    st.x_particular = (eqs.empty() || beq.norm() == 0.0)
                          ? VectorXd::Zero(nx)
                          : VectorXd(Aeq.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(beq));

    VectorXd x = st.x_particular;
    int outer_budget = max_iter;

    // Phase I: min s with G_k(x) + s I > 0, until s is strictly negative.
    if (!strictly_feasible(st.blocks, x)) {
        BarrierState ph;
        ph.m_total = st.m_total;
        ph.blocks = st.blocks;
        for (auto& blk : ph.blocks)
            blk.terms.emplace_back(nx, MatrixXd::Identity(blk.dim, blk.dim));
        ph.Z = MatrixXd::Zero(nx + 1, st.Z.cols() + 1);
        ph.Z.topLeftCorner(nx, st.Z.cols()) = st.Z;
        ph.Z(nx, st.Z.cols()) = 1.0;
        ph.c = VectorXd::Zero(nx + 1);
        ph.c(nx) = 1.0;

        double s0 = 0.0;
        for (const auto& blk : st.blocks) {
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(blk.evaluate(x), Eigen::EigenvaluesOnly);
            s0 = std::max(s0, -es.eigenvalues().minCoeff());
        }
        VectorXd xs(nx + 1);
        xs << x, s0 + 1.0;
        ph.x_particular = xs;

        double t = 1.0;
        bool found = false;
        int recenter = 0;
        while (outer_budget-- > 0) {
            const CenterResult cr = center(ph, t, xs, sol.newton_steps);
            if (cr == CenterResult::breakdown) break;
            if (xs(nx) < -1e-4 * (1.0 + s0)) {
                found = true;
                break;
            }
            if (cr == CenterResult::budget_exhausted && recenter < 2) {
                ++recenter;
                continue;
            }
            recenter = 0;
            if (static_cast<double>(ph.m_total) / t < 1e-9 * (1.0 + std::abs(xs(nx)))) break;
            t *= 10.0;
        }
        if (!found && xs(nx) < -1e-10) found = true;
        if (!found) {
            sol.status = Status::infeasible;
            sol.message = "phase-I infeasibility margin " + std::to_string(xs(nx));
            sol.x = xs.head(nx);
            return sol;
        }
        x = xs.head(nx);
    }

    // Phase II: path following on the true objective. The starting point sits
    // near the analytic center (the t -> 0 end of the central path), so pick
    // the initial barrier parameter small enough that the first centering is
    // cheap: t0 * (c'x0 - p*) = O(1), with |c||x0| as a crude range proxy.
    const double c_range = (st.Z.transpose() * st.c).norm() * (1.0 + x.norm());
    double t = 1.0 / (1.0 + c_range);
    bool converged = false;
    int recenter = 0;
    while (outer_budget-- > 0) {
        const CenterResult cr = center(st, t, x, sol.newton_steps);
        if (cr == CenterResult::breakdown) {
            sol.message = "line search breakdown at barrier parameter " + std::to_string(t);
            break;
        }
        // The m/t gap bound presumes a centered point; if the inner budget ran
        // out, spend a couple more rounds at the same t before moving on (the
        // decrement threshold may simply be unreachable in floating point).
        if (cr == CenterResult::budget_exhausted && recenter < 2) {
            ++recenter;
            continue;
        }
        recenter = 0;
        const double gap = static_cast<double>(st.m_total) / t;
        if (gap <= std::max(tol.gap * (1.0 + std::abs(st.c.dot(x))), 1e-13)) {
            converged = true;
            sol.gap = gap;
            break;
        }
        t *= 10.0;
    }

    sol.x = x;
    sol.objective_value = st.c.dot(x) + p.objective_constant();
    if (!converged) {
        sol.gap = static_cast<double>(st.m_total) / t;
        sol.status = sol.message.empty() ? Status::max_iterations : Status::numerical_failure;
        if (sol.message.empty()) sol.message = "barrier budget exhausted";
    } else {
        sol.status = Status::optimal;
    }

    // Residual report on the original (unscaled) constraints.
    double worst = 0.0;
    for (const auto& blk : p.psd_constraints()) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(blk.evaluate(x), Eigen::EigenvaluesOnly);
        worst = std::min(worst, es.eigenvalues().minCoeff() / std::max(1.0, blk.constant.norm()));
    }
    sol.feas_residual = -worst;
    sol.eq_residual = eqs.empty() ? 0.0 : (Aeq * x - beq).norm() / (1.0 + beq.norm());
    return sol;
}

void Problem::dump(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dump: cannot open " + path);

    // SDPA sparse conventions: min c'x s.t. sum_i x_i F_i - F0 >= 0 blockwise.
    // Equalities appear as paired 1x1 blocks; norm balls as arrow blocks.
    // Symmetric decision blocks are packed entries (off-diagonals scaled by
    // sqrt(2)); the mapping is listed below.
    out << "* ioc assembled problem (SDPA sparse format)\n";
    for (const auto& v : vars_) {
        const char* kind = v.kind == Variable::Kind::sym   ? "sym"
                           : v.kind == Variable::Kind::vec ? "vec"
                                                           : "scalar";
        out << "* var " << v.name << " kind=" << kind << " dim=" << v.dim
            << " scalars=[" << v.offset << "," << (v.offset + v.count - 1) << "]\n";
    }

    std::vector<MatExpr> blocks = psd_;
    for (const auto& b : norm_bounds_) blocks.push_back(ball_to_lmi(b));
    std::vector<int> sizes;
    for (const auto& blk : blocks) sizes.push_back(blk.dim);
    for (std::size_t r = 0; r < equalities_.size(); ++r) {
        sizes.push_back(1);
        sizes.push_back(1);
    }

    out << num_scalars_ << "\n" << sizes.size() << "\n";
    for (std::size_t i = 0; i < sizes.size(); ++i) out << sizes[i] << (i + 1 < sizes.size() ? " " : "\n");
    const VectorXd& c = objective();
    for (int i = 0; i < c.size(); ++i) out << c(i) << (i + 1 < c.size() ? " " : "\n");

    auto emit = [&out](int matno, int blkno, const MatrixXd& M) {
        for (int i = 0; i < M.rows(); ++i)
            for (int j = i; j < M.cols(); ++j)
                if (M(i, j) != 0.0)
                    out << matno << " " << blkno << " " << i + 1 << " " << j + 1 << " " << M(i, j)
                        << "\n";
    };

    int blkno = 1;
    for (const auto& blk : blocks) {
        emit(0, blkno, MatrixXd(-blk.constant));
        for (const auto& [idx, C] : blk.terms) emit(idx + 1, blkno, C);
        ++blkno;
    }
    for (const auto& [coeffs, rhs] : equalities_) {
        for (int sgn : {+1, -1}) {
            MatrixXd F0(1, 1);
            F0(0, 0) = sgn * rhs;
            emit(0, blkno, F0);
            for (const auto& [idx, cv] : coeffs) {
                MatrixXd F(1, 1);
                F(0, 0) = sgn * cv;
                emit(idx + 1, blkno, F);
            }
            ++blkno;
        }
    }
}

}  // namespace sdp
}  // namespace ioc
