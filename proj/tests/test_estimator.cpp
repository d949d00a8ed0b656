#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ioc/estimator.hpp"

using namespace ioc;

namespace {

Scenario scalar_scenario(double Q, double q, int nu, double sigma_w = 0.0, double sigma_v = 0.0) {
    Scenario sc;
    sc.sys.A = MatrixXd::Constant(1, 1, 1.0);
    sc.sys.B = MatrixXd::Constant(1, 1, 1.0);
    sc.sys.d = VectorXd::Zero(1);
    sc.sys.sigma_w = MatrixXd::Constant(1, 1, sigma_w);
    sc.sys.sigma_v = MatrixXd::Constant(1, 1, sigma_v);
    sc.cost.Q = MatrixXd::Constant(1, 1, Q);
    sc.cost.q = VectorXd::Constant(1, q);
    sc.cost.R = MatrixXd::Constant(1, 1, 1.0);
    sc.horizon = HorizonDistribution::uniform(nu);
    sc.init = InitialStateDistribution::gaussian(VectorXd::Zero(1), MatrixXd::Identity(1, 1));
    return sc;
}

Scenario noiseless_bench(int nu = 6) {
    Scenario sc;
    sc.sys.A = MatrixXd::Identity(2, 2);
    sc.sys.B = 0.1 * MatrixXd::Identity(2, 2);
    sc.sys.d = sc.sys.B * VectorXd::Constant(2, -1.0);
    sc.sys.sigma_w = MatrixXd::Zero(2, 2);
    sc.sys.sigma_v = MatrixXd::Zero(2, 2);
    sc.cost.Q = -0.1 * MatrixXd::Identity(2, 2);
    sc.cost.q = VectorXd::Zero(2);
    sc.cost.R = MatrixXd::Identity(2, 2);
    sc.horizon = HorizonDistribution::uniform(nu);
    sc.init = InitialStateDistribution::gaussian(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
    return sc;
}

}  // namespace

TEST_CASE("single-trial objective coefficients by hand") {
    Dataset ds;
    ds.meta.nu = 2;
    ds.meta.n = 1;
    ds.meta.m = 1;
    ds.meta.trials = 1;
    TrajectoryRecord rec;
    rec.trial_id = 0;
    rec.N = 2;
    rec.y = {VectorXd::Constant(1, 2.0), VectorXd::Constant(1, 3.0)};
    ds.records.push_back(rec);
    ds.meta.counts[2] = 1;

    SystemModel sys;
    sys.A = MatrixXd::Constant(1, 1, 1.0);
    sys.B = MatrixXd::Constant(1, 1, 1.0);
    sys.d = VectorXd::Constant(1, 0.5);
    sys.sigma_w = MatrixXd::Constant(1, 1, 0.04);
    sys.sigma_v = MatrixXd::Constant(1, 1, 0.09);

    const EmpiricalObjective obj = assemble_objective(ds, sys);
    CHECK(obj.coeff_P[0](0, 0) == doctest::Approx(-(0.5 * 4.0 - 0.045)));
    CHECK(obj.coeff_eta[0](0) == doctest::Approx(-2.0));
    CHECK(obj.coeff_P[1](0, 0) == doctest::Approx(0.5 * 9.0 - 0.045 - 0.5 * 0.25 - 0.5 * 0.04));
    CHECK(obj.coeff_eta[1](0) == doctest::Approx(3.0 - 0.5));
    CHECK(obj.coeff_xi[0] == doctest::Approx(0.5));
    CHECK(obj.coeff_Q(0, 0) == doctest::Approx(0.5 * 4.0 - 0.045));
    CHECK(obj.coeff_q(0) == doctest::Approx(2.0));
    CHECK(obj.constant == doctest::Approx(0.0));
}

TEST_CASE("xi coefficients encode the horizon mix") {
    const Scenario sc = noiseless_bench(5);
    const Dataset ds = generate_dataset(sc, 400, 3);
    const EmpiricalObjective obj = assemble_objective(ds, sc.sys);
    const double M = static_cast<double>(ds.records.size());
    for (int t = 1; t <= sc.horizon.nu - 1; ++t) {
        double expected = 0.0;
        for (const auto& [N, count] : ds.meta.counts)
            if (t >= sc.horizon.nu - N + 1) expected += 0.5 * static_cast<double>(count) / M;
        CHECK(obj.coeff_xi[t - 1] == doctest::Approx(expected));
    }
}

TEST_CASE("objective at the true blocks equals minus the average control energy") {
    const Scenario sc = noiseless_bench();
    const Dataset ds = generate_dataset(sc, 200, 9);
    const EmpiricalObjective obj = assemble_objective(ds, sc.sys);
    const auto sol = riccati_backward(sc.sys, sc.cost, sc.horizon.nu);

    const double val = obj.evaluate(sc.cost.Q, sc.cost.q, sol.P, sol.eta, sol.xi);
    double energy = 0.0;
    for (const auto& rec : ds.records) {
        const int s = sc.horizon.nu - rec.N + 1;
        for (int t = s; t <= sc.horizon.nu - 1; ++t)
            energy += 0.5 * (*rec.u_true)[t - 1].squaredNorm();
    }
    energy /= static_cast<double>(ds.records.size());
    CHECK(val == doctest::Approx(-energy).epsilon(1e-9));
}

TEST_CASE("true blocks satisfy every assembled constraint") {
    const Scenario sc = noiseless_bench();
    const Dataset ds = generate_dataset(sc, 50, 13);
    const EmpiricalObjective obj = assemble_objective(ds, sc.sys);
    sdp::Problem prob;
    const EstimatorVars vars = assemble_problem(obj, sc.sys, 1e6, prob);
    const auto sol = riccati_backward(sc.sys, sc.cost, sc.horizon.nu);
    const VectorXd x = pack_candidate(prob, vars, sc.cost.Q, sc.cost.q, sol.P, sol.eta, sol.xi);

    for (const auto& blk : prob.psd_constraints()) {
        const double lmin = min_eigenvalue(blk.evaluate(x));
        CHECK(lmin >= -1e-9 * std::max(1.0, blk.constant.norm()));
    }
    for (const auto& [coeffs, rhs] : prob.equalities()) {
        double v = 0.0;
        for (const auto& [idx, c] : coeffs) v += c * x(idx);
        CHECK(v == doctest::Approx(rhs).epsilon(1e-12));
    }
    for (const auto& ball : prob.norm_bounds()) {
        double acc = 0.0;
        for (std::size_t k = 0; k < ball.idx.size(); ++k)
            acc += ball.weights[k] * x(ball.idx[k]) * x(ball.idx[k]);
        CHECK(std::sqrt(acc) <= ball.radius);
    }
    // The packed objective agrees with the direct evaluation.
    const double direct = obj.evaluate(sc.cost.Q, sc.cost.q, sol.P, sol.eta, sol.xi);
    CHECK(prob.objective().dot(x) + prob.objective_constant() == doctest::Approx(direct));
}

TEST_CASE("problem structure at benchmark dimensions") {
    const Scenario sc = noiseless_bench(6);
    const Dataset ds = generate_dataset(sc, 20, 1);
    const EmpiricalObjective obj = assemble_objective(ds, sc.sys);
    sdp::Problem prob;
    assemble_problem(obj, sc.sys, 1e6, prob);
    // nu - 1 solvability blocks of side m + n + 1.
    REQUIRE(prob.psd_constraints().size() == 5);
    for (const auto& blk : prob.psd_constraints()) CHECK(blk.dim == 5);
    // Terminal ties: one per packed Q entry plus one per q entry.
    CHECK(prob.equalities().size() == 3 + 2);
    // Balls: joint (Q, q), each P_t and eta_t, each xi_t.
    CHECK(prob.norm_bounds().size() == 1 + 6 + 6 + 5);
}

TEST_CASE("noiseless scalar recovery is near-exact") {
    const Scenario sc = scalar_scenario(1.0, 0.5, 4);
    const Dataset ds = generate_dataset(sc, 300, 21);
    const EstimateResult res = estimate(ds, sc.sys);
    CHECK(res.solution.status == sdp::Status::optimal);
    const ErrorMetrics em = error_metrics(res.Q_hat, res.q_hat, sc.cost.Q, sc.cost.q);
    CHECK(em.rel_err_Q <= 1e-3);
    CHECK(em.rel_err_q <= 1e-3);
    REQUIRE(res.lower_bound_gap.has_value());
    CHECK(std::abs(*res.lower_bound_gap) <= 1e-5 * (1.0 + std::abs(res.objective)));
}

TEST_CASE("lower-bound gap needs ground truth") {
    const Scenario sc = scalar_scenario(1.0, 0.5, 3);
    Dataset ds = generate_dataset(sc, 100, 2);
    for (auto& rec : ds.records) {
        rec.x_true.reset();
        rec.u_true.reset();
    }
    const EstimateResult res = estimate(ds, sc.sys);
    CHECK_FALSE(res.lower_bound_gap.has_value());
}

TEST_CASE("error metrics and the degenerate-q fallback") {
    const MatrixXd Qt = 2.0 * MatrixXd::Identity(2, 2);
    const MatrixXd Qh = 2.1 * MatrixXd::Identity(2, 2);
    const VectorXd qt = (VectorXd(2) << 1.0, 0.0).finished();
    const VectorXd qh = (VectorXd(2) << 1.1, 0.0).finished();
    const ErrorMetrics em = error_metrics(Qh, qh, Qt, qt);
    CHECK(em.rel_err_Q == doctest::Approx(0.1 * std::sqrt(2.0) / (2.0 * std::sqrt(2.0))));
    CHECK(em.rel_err_q == doctest::Approx(0.1));
    CHECK_FALSE(em.q_abs_fallback);

    const ErrorMetrics fb = error_metrics(Qh, qh, Qt, VectorXd::Zero(2));
    CHECK(fb.q_abs_fallback);
    CHECK(fb.rel_err_q == doctest::Approx(qh.norm()));

    CHECK_THROWS_AS(error_metrics(Qh, qh, MatrixXd::Zero(2, 2), qt), ValidationError);
}

TEST_CASE("dataset validation in the objective assembly") {
    Dataset empty;
    empty.meta.nu = 3;
    empty.meta.n = 1;
    SystemModel sys;
    sys.A = MatrixXd::Identity(1, 1);
    sys.B = MatrixXd::Identity(1, 1);
    sys.d = VectorXd::Zero(1);
    sys.sigma_w = MatrixXd::Zero(1, 1);
    sys.sigma_v = MatrixXd::Zero(1, 1);
    CHECK_THROWS_AS(assemble_objective(empty, sys), ValidationError);

    Dataset bad = empty;
    bad.meta.trials = 1;
    TrajectoryRecord rec;
    rec.N = 5;  // exceeds nu
    rec.y = {VectorXd::Zero(1), VectorXd::Zero(1), VectorXd::Zero(1)};
    bad.records.push_back(rec);
    CHECK_THROWS_AS(assemble_objective(bad, sys), ValidationError);
}
