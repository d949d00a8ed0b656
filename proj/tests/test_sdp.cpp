#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ioc/sdp.hpp"

#include <fstream>
#include <sstream>

using namespace ioc::sdp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatExpr scalar_expr(int idx, double coeff, double constant) {
    MatExpr e;
    e.dim = 1;
    e.constant = MatrixXd::Constant(1, 1, constant);
    e.terms.emplace_back(idx, MatrixXd::Constant(1, 1, coeff));
    return e;
}

}  // namespace

TEST_CASE("packed symmetric layout preserves the Frobenius norm") {
    Problem p;
    const int X = p.add_sym("X", 3);
    CHECK(p.num_scalars() == 6);
    CHECK(p.sym_index(X, 0, 0) == 0);
    CHECK(p.sym_index(X, 2, 1) == p.sym_index(X, 1, 2));

    MatrixXd M(3, 3);
    M << 1, 2, 3, 2, 4, 5, 3, 5, 6;
    VectorXd x = VectorXd::Zero(p.num_scalars());
    p.set_sym(x, X, M);
    CHECK(x.norm() == doctest::Approx(M.norm()));
    CHECK((p.get_sym(x, X) - M).norm() < 1e-14);
}

TEST_CASE("objective assembly is linear in the blocks") {
    Problem p;
    const int X = p.add_sym("X", 2);
    const int v = p.add_vec("v", 2);
    const int s = p.add_scalar("s");
    MatrixXd C(2, 2);
    C << 1, 2, 2, -1;
    p.obj_sym(X, C);
    p.obj_vec(v, (VectorXd(2) << 3, -4).finished());
    p.obj_scalar(s, 5);
    p.obj_constant(7);

    MatrixXd Xval(2, 2);
    Xval << 2, 0.5, 0.5, 1;
    VectorXd x = VectorXd::Zero(p.num_scalars());
    p.set_sym(x, X, Xval);
    p.set_vec(x, v, (VectorXd(2) << 1, 2).finished());
    p.set_scalar(x, s, -1);
    const double val = p.objective().dot(x) + p.objective_constant();
    CHECK(val == doctest::Approx((C.transpose() * Xval).trace() + 3 - 8 - 5 + 7));
}

TEST_CASE("minimize p subject to p >= 0") {
    Problem p;
    const int s = p.add_scalar("p");
    p.obj_scalar(s, 1.0);
    p.add_psd(scalar_expr(p.scalar_index(s), 1.0, 0.0));
    const Solution sol = solve(p);
    REQUIRE(sol.status == Status::optimal);
    CHECK(sol.objective_value == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(p.get_scalar(sol.x, s) >= -1e-9);
}

TEST_CASE("maximize p inside a ball of radius 5") {
    Problem p;
    const int s = p.add_scalar("p");
    p.obj_scalar(s, -1.0);
    NormBound b;
    b.idx = {p.scalar_index(s)};
    b.weights = {1.0};
    b.radius = 5.0;
    p.add_norm_bound(b);
    const Solution sol = solve(p);
    REQUIRE(sol.status == Status::optimal);
    CHECK(p.get_scalar(sol.x, s) == doctest::Approx(5.0).epsilon(1e-5));
}

TEST_CASE("minimize x subject to [[x,1],[1,x]] psd") {
    Problem p;
    const int s = p.add_scalar("x");
    p.obj_scalar(s, 1.0);
    MatExpr e;
    e.dim = 2;
    e.constant = (MatrixXd(2, 2) << 0, 1, 1, 0).finished();
    e.terms.emplace_back(p.scalar_index(s), MatrixXd::Identity(2, 2));
    p.add_psd(e);
    const Solution sol = solve(p);
    REQUIRE(sol.status == Status::optimal);
    CHECK(p.get_scalar(sol.x, s) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("minimize a + b subject to [[a,1],[1,b]] psd") {
    Problem p;
    const int a = p.add_scalar("a");
    const int b = p.add_scalar("b");
    p.obj_scalar(a, 1.0);
    p.obj_scalar(b, 1.0);
    MatExpr e;
    e.dim = 2;
    e.constant = (MatrixXd(2, 2) << 0, 1, 1, 0).finished();
    MatrixXd Ea = MatrixXd::Zero(2, 2), Eb = MatrixXd::Zero(2, 2);
    Ea(0, 0) = 1;
    Eb(1, 1) = 1;
    e.terms.emplace_back(p.scalar_index(a), Ea);
    e.terms.emplace_back(p.scalar_index(b), Eb);
    p.add_psd(e);
    const Solution sol = solve(p);
    REQUIRE(sol.status == Status::optimal);
    CHECK(sol.objective_value == doctest::Approx(2.0).epsilon(1e-5));
    CHECK(p.get_scalar(sol.x, a) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(p.get_scalar(sol.x, b) == doctest::Approx(1.0).epsilon(1e-3));

    SUBCASE("scaling the objective does not move the minimizer") {
        Problem p2;
        const int a2 = p2.add_scalar("a");
        const int b2 = p2.add_scalar("b");
        p2.obj_scalar(a2, 10.0);
        p2.obj_scalar(b2, 10.0);
        MatExpr e2 = e;
        p2.add_psd(e2);
        const Solution sol2 = solve(p2);
        REQUIRE(sol2.status == Status::optimal);
        CHECK(p2.get_scalar(sol2.x, a2) == doctest::Approx(p.get_scalar(sol.x, a)).epsilon(1e-3));
        CHECK(sol2.objective_value == doctest::Approx(10.0 * sol.objective_value).epsilon(1e-5));
    }
}

TEST_CASE("equality constraints are eliminated exactly") {
    Problem p;
    const int a = p.add_scalar("a");
    const int b = p.add_scalar("b");
    p.obj_scalar(b, 1.0);
    p.add_equality({{p.scalar_index(a), 1.0}, {p.scalar_index(b), -1.0}}, 0.5);  // a - b = 0.5
    p.add_psd(scalar_expr(p.scalar_index(a), 1.0, -1.0));                        // a >= 1
    NormBound ball;
    ball.idx = {p.scalar_index(a), p.scalar_index(b)};
    ball.weights = {1.0, 1.0};
    ball.radius = 100.0;
    p.add_norm_bound(ball);
    const Solution sol = solve(p);
    REQUIRE(sol.status == Status::optimal);
    CHECK(p.get_scalar(sol.x, a) - p.get_scalar(sol.x, b) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(p.get_scalar(sol.x, b) == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(sol.eq_residual < 1e-9);
}

TEST_CASE("link_equal ties whole blocks") {
    Problem p;
    const int X = p.add_sym("X", 2);
    const int Y = p.add_sym("Y", 2);
    p.link_equal(X, Y);
    CHECK(p.equalities().size() == 3);
    // minimize tr(X) with Y >= I (via Y - I psd), X = Y -> tr(X) = 2.
    p.obj_sym(X, MatrixXd::Identity(2, 2));
    MatExpr e;
    e.dim = 2;
    e.constant = -MatrixXd::Identity(2, 2);
    for (int j = 0; j < 2; ++j)
        for (int i = j; i < 2; ++i) {
            MatrixXd E = MatrixXd::Zero(2, 2);
            if (i == j)
                E(i, i) = 1;
            else
                E(i, j) = E(j, i) = 1.0 / std::sqrt(2.0);
            e.terms.emplace_back(p.sym_index(Y, i, j), E);
        }
    p.add_psd(e);
    const Solution sol = solve(p);
    REQUIRE(sol.status == Status::optimal);
    CHECK(sol.objective_value == doctest::Approx(2.0).epsilon(1e-5));
    CHECK((p.get_sym(sol.x, X) - p.get_sym(sol.x, Y)).norm() < 1e-8);
}

TEST_CASE("conflicting constraints are reported infeasible") {
    Problem p;
    const int s = p.add_scalar("p");
    p.obj_scalar(s, 1.0);
    p.add_psd(scalar_expr(p.scalar_index(s), 1.0, -1.0));   // p >= 1
    p.add_psd(scalar_expr(p.scalar_index(s), -1.0, 0.0));   // p <= 0
    const Solution sol = solve(p);
    CHECK(sol.status == Status::infeasible);
}

TEST_CASE("sparse text dump is deterministic and complete") {
    Problem p;
    const int X = p.add_sym("X", 2);
    const int s = p.add_scalar("t");
    p.obj_sym(X, MatrixXd::Identity(2, 2));
    p.add_equality({{p.scalar_index(s), 1.0}}, 2.0);
    MatExpr e;
    e.dim = 2;
    e.constant = -MatrixXd::Identity(2, 2);
    e.terms.emplace_back(p.sym_index(X, 0, 0), (MatrixXd(2, 2) << 1, 0, 0, 0).finished());
    p.add_psd(e);
    NormBound b;
    b.idx = {p.scalar_index(s)};
    b.weights = {1.0};
    b.radius = 10.0;
    p.add_norm_bound(b);

    p.dump("test_dump_a.dat");
    p.dump("test_dump_b.dat");
    auto slurp = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::string a = slurp("test_dump_a.dat");
    CHECK(a == slurp("test_dump_b.dat"));
    CHECK(a.find("var X kind=sym dim=2") != std::string::npos);
    CHECK(a.find("var t kind=scalar") != std::string::npos);
    CHECK(!a.empty());
}

TEST_CASE("validation of malformed inputs") {
    Problem p;
    const int v = p.add_vec("v", 2);
    CHECK_THROWS_AS(p.sym_index(v, 0, 0), std::logic_error);
    NormBound bad;
    bad.idx = {0};
    bad.weights = {1.0};
    bad.radius = 0.0;
    CHECK_THROWS_AS(p.add_norm_bound(bad), std::logic_error);
    MatExpr e;
    e.dim = 2;
    e.constant = MatrixXd::Zero(1, 1);
    CHECK_THROWS_AS(p.add_psd(e), std::logic_error);
}
