#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ioc {
namespace sdp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Decision blocks are flattened into one scalar vector x. Symmetric matrix
// blocks use the scaled lower-triangle packing (off-diagonals times sqrt(2)),
// so Euclidean norms of the packed entries equal Frobenius norms.
struct Variable {
    enum class Kind { sym, vec, scalar };
    std::string name;
    Kind kind = Kind::scalar;
    int dim = 1;     // matrix side length / vector length
    int offset = 0;  // first scalar index
    int count = 1;   // number of scalar entries
};

// Affine symmetric-matrix expression G(x) = constant + sum_k x_{idx[k]} coeff[k].
struct MatExpr {
    int dim = 0;
    MatrixXd constant;
    std::vector<std::pair<int, MatrixXd>> terms;

    MatrixXd evaluate(const VectorXd& x) const;
};

// Weighted Euclidean ball sum_k w_k x_{idx[k]}^2 <= radius^2.
struct NormBound {
    std::vector<int> idx;
    std::vector<double> weights;
    double radius = 0.0;
};

class Problem {
public:
    int add_sym(const std::string& name, int n);
    int add_vec(const std::string& name, int n);
    int add_scalar(const std::string& name);

    int num_scalars() const { return num_scalars_; }
    const std::vector<Variable>& variables() const { return vars_; }
    const Variable& var(int id) const { return vars_.at(id); }

    // Scalar index of entry (i, j) of a symmetric block (i >= j or i <= j).
    int sym_index(int var, int i, int j) const;
    int vec_index(int var, int i) const;
    int scalar_index(int var) const;

    // Linear objective: adds tr(C X) / c'v / c s to the functional.
    void obj_sym(int var, const MatrixXd& C);
    void obj_vec(int var, const VectorXd& c);
    void obj_scalar(int var, double c);
    void obj_constant(double c) { obj_constant_ += c; }

    // Affine equality sum coeffs_k x_{idx_k} = rhs.
    void add_equality(const std::vector<std::pair<int, double>>& coeffs, double rhs);
    // Entrywise links X_a = X_b / v_a = v_b between same-shaped blocks.
    void link_equal(int var_a, int var_b);

    void add_psd(MatExpr expr);
    void add_norm_bound(NormBound bound);

    const VectorXd& objective() const;
    double objective_constant() const { return obj_constant_; }
    const std::vector<MatExpr>& psd_constraints() const { return psd_; }
    const std::vector<NormBound>& norm_bounds() const { return norm_bounds_; }
    const std::vector<std::pair<std::vector<std::pair<int, double>>, double>>& equalities() const {
        return equalities_;
    }

    // Block values from a packed solution vector.
    MatrixXd get_sym(const VectorXd& x, int var) const;
    VectorXd get_vec(const VectorXd& x, int var) const;
    double get_scalar(const VectorXd& x, int var) const;

    void set_sym(VectorXd& x, int var, const MatrixXd& value) const;
    void set_vec(VectorXd& x, int var, const VectorXd& value) const;
    void set_scalar(VectorXd& x, int var, double value) const;

    // Sparse SDPA-like text dump for offline cross-solver validation.
    void dump(const std::string& path) const;

private:
    std::vector<Variable> vars_;
    int num_scalars_ = 0;
    mutable VectorXd objective_;
    double obj_constant_ = 0.0;
    std::vector<std::pair<int, double>> obj_terms_;
    std::vector<std::pair<std::vector<std::pair<int, double>>, double>> equalities_;
    std::vector<MatExpr> psd_;
    std::vector<NormBound> norm_bounds_;
};

enum class Status { optimal, max_iterations, numerical_failure, infeasible };

struct Tolerances {
    double feas = 1e-8;
    double gap = 1e-8;
};

struct Solution {
    Status status = Status::numerical_failure;
    VectorXd x;
    double objective_value = 0.0;
    double gap = 0.0;            // barrier duality-gap bound
    double feas_residual = 0.0;  // worst PSD violation (negative min eigenvalue, scaled)
    double eq_residual = 0.0;
    int newton_steps = 0;
    std::string message;
};

const char* status_name(Status s);

// Interior-point (log-barrier path following) solve with a feasibility
// phase; equalities are eliminated through a nullspace basis.
Solution solve(const Problem& p, Tolerances tol = {}, int max_iter = 200);

}  // namespace sdp
}  // namespace ioc
