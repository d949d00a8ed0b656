#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ioc/experiments.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ioc;

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

BenchmarkPlan small_plan() {
    BenchmarkPlan plan;
    plan.scenario = pursuit_evasion_scenario();
    plan.scenario.horizon = HorizonDistribution::uniform(6);  // shrink for test speed
    plan.scenario.sys.sigma_w.setZero();
    plan.scenario.sys.sigma_v.setZero();
    plan.batches = 2;
    plan.group_sizes = {40, 80};
    plan.seed_base = 11;
    return plan;
}

}  // namespace

TEST_CASE("benchmark scenario constants") {
    const Scenario sc = pursuit_evasion_scenario();
    CHECK(sc.sys.n() == 2);
    CHECK(sc.sys.m() == 2);
    CHECK((sc.sys.A - MatrixXd::Identity(2, 2)).norm() == 0.0);
    CHECK(sc.sys.B(0, 0) == doctest::Approx(0.1));
    CHECK(sc.sys.d(0) == doctest::Approx(-0.1));
    CHECK(sc.sys.d(1) == doctest::Approx(-0.1));
    CHECK(sc.sys.sigma_v(0, 1) == doctest::Approx(-2.25e-2));
    CHECK(sc.sys.sigma_w(0, 0) == doctest::Approx(1.04e-2));
    CHECK(sc.cost.Q(0, 0) == doctest::Approx(-0.1));
    CHECK(sc.cost.q.norm() == 0.0);
    CHECK((sc.cost.R - MatrixXd::Identity(2, 2)).norm() == 0.0);
    CHECK(sc.horizon.nu == 20);
    CHECK(sc.horizon.probs.size() == 19);
    CHECK_NOTHROW(sc.validate());

    const auto sol = riccati_backward(sc.sys, sc.cost, sc.horizon.nu);
    const auto rep = feasibility_check(sol);
    CHECK(rep.verdict == FeasibilityVerdict::feasible);
    for (double margin : rep.psd_margins) CHECK(margin > 0.0);
}

TEST_CASE("log-log fitting") {
    {
        const auto fit = loglog_fit({{100.0, 0.1}, {400.0, 0.05}});
        CHECK(fit.slope == doctest::Approx(std::log10(0.5) / std::log10(4.0)));
        CHECK(fit.r2 == doctest::Approx(1.0));
    }
    {
        const auto fit = loglog_fit({{100.0, 1.0}, {1000.0, 1.0}});
        CHECK(fit.slope == doctest::Approx(0.0));
    }
    CHECK_THROWS_AS(loglog_fit({{100.0, 0.1}}), ValidationError);
    CHECK_THROWS_WITH_AS(loglog_fit({{100.0, 0.1}, {200.0, -1.0}}),
                         "points: nonpositive value at index 1", ValidationError);
}

TEST_CASE("plan validation") {
    BenchmarkPlan plan = small_plan();
    CHECK_NOTHROW(plan.validate());
    plan.group_sizes = {80, 40};
    CHECK_THROWS_AS(plan.validate(), ValidationError);
    plan.group_sizes = {};
    CHECK_THROWS_AS(plan.validate(), ValidationError);
    plan.group_sizes = {40};
    plan.batches = 0;
    CHECK_THROWS_AS(plan.validate(), ValidationError);
}

TEST_CASE("benchmark cells are deterministic and worker-invariant") {
    BenchmarkPlan plan = small_plan();
    const BenchmarkReport a = run_benchmark(plan);
    plan.workers = 2;
    const BenchmarkReport b = run_benchmark(plan);

    REQUIRE(a.cells.size() == 4);
    REQUIRE(b.cells.size() == 4);
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        CHECK(a.cells[i].ok);
        CHECK(a.cells[i].batch == b.cells[i].batch);
        CHECK(a.cells[i].M == b.cells[i].M);
        CHECK(a.cells[i].rel_err_Q == b.cells[i].rel_err_Q);
        CHECK(a.cells[i].rel_err_q == b.cells[i].rel_err_q);
    }
    REQUIRE(a.aggregate.size() == 2);
    CHECK(a.aggregate[0].M == 40);
    CHECK(a.aggregate[1].M == 80);
    CHECK(a.aggregate[0].n_ok == 2);
    CHECK(a.aggregate[1].n_ok == 2);
    CHECK(a.pairs_total == 1);
    // Noiseless estimation is solver-tolerance limited at any M.
    for (const auto& row : a.aggregate) CHECK(row.mean_rel_err_Q < 1e-2);
}

TEST_CASE("report emission") {
    BenchmarkPlan plan = small_plan();
    plan.group_sizes = {30};
    plan.batches = 1;
    const BenchmarkReport rep = run_benchmark(plan);
    REQUIRE(rep.aggregate.size() == 1);
    CHECK(rep.aggregate[0].n_ok == 1);
    CHECK(std::isnan(rep.aggregate[0].std_rel_err_Q));  // flagged as undefined

    const std::string dir = "test_bench_out";
    emit_report(rep, dir);
    const std::string cells1 = slurp(std::filesystem::path(dir) / "cells.csv");
    const std::string agg1 = slurp(std::filesystem::path(dir) / "aggregate.csv");
    CHECK(cells1.rfind("batch,M,rel_err_Q,rel_err_q,ok,status\n", 0) == 0);
    CHECK(agg1.rfind("M,mean_rel_err_Q,std_rel_err_Q,mean_rel_err_q,std_rel_err_q,n_ok\n", 0) == 0);

    emit_report(rep, dir);
    CHECK(slurp(std::filesystem::path(dir) / "cells.csv") == cells1);
    CHECK(slurp(std::filesystem::path(dir) / "aggregate.csv") == agg1);

    const BenchmarkReport empty;
    emit_report(empty, dir);
    CHECK(slurp(std::filesystem::path(dir) / "cells.csv") ==
          "batch,M,rel_err_Q,rel_err_q,ok,status\n");
}

TEST_CASE("nested groups reuse the same leading trials") {
    // The nesting discipline is observable through the estimates: the M = 40
    // cell of a 2-group plan must equal the only cell of a 1-group plan.
    BenchmarkPlan two = small_plan();
    two.batches = 1;
    const BenchmarkReport both = run_benchmark(two);

    BenchmarkPlan one = two;
    one.group_sizes = {40};
    const BenchmarkReport first = run_benchmark(one);
    CHECK(both.cells[0].rel_err_Q == first.cells[0].rel_err_Q);
    CHECK(both.cells[0].rel_err_q == first.cells[0].rel_err_q);
}
