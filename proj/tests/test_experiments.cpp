#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "alohastab/experiments.hpp"

using namespace alohastab;
using namespace alohastab::experiments;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("example 1 closed form values") {
    CHECK(example1_closed_form(1) == doctest::Approx(4.0 / 9).epsilon(1e-15));
    CHECK(example1_closed_form(2) == doctest::Approx(24.0 / 55).epsilon(1e-15));
    CHECK(example1_closed_form(50) ==
          doctest::Approx(10200.0 / 25351.0).epsilon(1e-15));
}

TEST_CASE("example 2 closed form: branches, breakpoint continuity, flip") {
    CHECK(example2_closed_form(1.0) == doctest::Approx(0.243).epsilon(1e-15));
    CHECK(example2_closed_form(0.1) ==
          doctest::Approx(24.3 * 1.1 / (9.1 * 19.1)).epsilon(1e-15));
    CHECK(example2_closed_form(10.0) ==
          doctest::Approx(44.1 * 121.0 / (137.0 * 83.0)).epsilon(1e-15));

    const double x0 = kExample2Breakpoint;
    const double left = 24.3 * (x0 + 1.0) / ((x0 + 9.0) * (x0 + 19.0));
    const double right =
        44.1 * (x0 + 1.0) * (x0 + 1.0) / ((13.0 * x0 + 7.0) * (7.0 * x0 + 13.0));
    CHECK(std::abs(left - right) < 1e-9);

    // the saturated user flips from user 3 to user 2 at the breakpoint
    region::AttemptVector p({0.6, 0.3, 0.1});
    CHECK(region::shat_star(sweep_direction(x0 - 1e-6), p).i_star == 2);
    CHECK(region::shat_star(sweep_direction(x0 + 1e-6), p).i_star == 1);
}

TEST_CASE("example 3 closed form values") {
    CHECK(example3_closed_form(2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(example3_closed_form(3) ==
          doctest::Approx(0.428571428571428571).epsilon(1e-12));
    CHECK(example3_closed_form(10) ==
          doctest::Approx(0.339216844383020916).epsilon(1e-12));
}

TEST_CASE("sweeps: closed form and solver agree on every row") {
    auto r1 = example1({1, 2, 5, 10, 50});
    for (const auto& row : r1.rows) {
        CHECK(std::abs(row.s_closed_form - row.s_solver) < 1e-10);
    }
    auto r2 = example2({0.1, 0.5, 1, 2, 5, kExample2Breakpoint, 8, 10});
    for (const auto& row : r2.rows) {
        CHECK(std::abs(row.s_closed_form - row.s_solver) < 1e-10);
    }
    auto r3 = example3({2, 3, 4, 5, 6, 7, 8, 9, 10});
    for (const auto& row : r3.rows) {
        CHECK(std::abs(row.s_closed_form - row.s_solver) < 1e-10);
    }

    CHECK_THROWS_AS(example1({0.5}), ValidationError);
    CHECK_THROWS_AS(example2({20.0}), ValidationError);
    CHECK_THROWS_AS(example3({1}), ValidationError);
}

TEST_CASE("finite-region ray limits") {
    meanfield::ClassSpec cls;
    cls.p = 1.0;
    cls.lambda = 0.2;
    meanfield::ClassModel model({cls}, 1.0);

    CHECK(gamma_ray_limit(model) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(finite_ray_limit(model, 10) ==
          doctest::Approx(std::pow(0.9, 9)).epsilon(1e-12));

    auto rows = finite_region_check(model, {10, 20, 50, 100, 200, 500, 1000});
    for (const auto& row : rows) {
        CHECK(row.s_limit == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
        CHECK(row.scaled_gap > 0.1);
        CHECK(row.scaled_gap < 0.3);
    }

    // the finite form converges to the exponential form for several classes
    meanfield::ClassSpec a, b;
    a.beta = 0.3;
    a.p = 1.4;
    a.lambda = 0.1;
    b.beta = 0.7;
    b.p = 0.6;
    b.lambda = 0.05;
    meanfield::ClassModel two({a, b}, 0.9);
    CHECK(finite_ray_limit(two, 1e8) ==
          doctest::Approx(gamma_ray_limit(two)).epsilon(1e-7));
}

TEST_CASE("bistability demo") {
    meanfield::ClassSpec stable;
    stable.p = 1.0;
    stable.lambda = 0.2;
    CHECK_THROWS_AS(bistability_demo(meanfield::ClassModel({stable}, 1.0)),
                    ValidationError);

    meanfield::ClassSpec cls;
    cls.p = 3.0;
    cls.lambda = 0.2;
    auto report = bistability_demo(meanfield::ClassModel({cls}, 1.0), 200, 150.0);
    CHECK(report.gamma_from_empty == doctest::Approx(0.25917110181907375).epsilon(1e-3));
    CHECK(report.gamma_from_upper == doctest::Approx(2.5426413577735264).epsilon(1e-3));
    CHECK(report.gap > 0.1);
}

TEST_CASE("example 3 simulation brackets the analytic boundary at N = 8") {
    SimBudget budget;
    budget.enabled = true;
    budget.slots = 10'000'000;
    budget.replications = 3;
    budget.seed = 3030;
    auto result = example3({8}, budget);
    REQUIRE(result.rows.size() == 2);
    const auto& sim_row = result.rows[1];
    REQUIRE(sim_row.has_sim);
    CHECK(std::abs(sim_row.s_sim - sim_row.s_solver) <= 0.05 * sim_row.s_solver);
}

TEST_CASE("sweep and report files are deterministic") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "alohastab_test_out";
    fs::remove_all(dir);

    auto result = example1({1, 2});
    write_sweep(result, dir);
    const auto csv1 = slurp(dir / "example1.csv");
    const auto manifest1 = slurp(dir / "example1_manifest.json");
    CHECK(csv1.find("x,arrival,") == 0);
    CHECK(csv1.find("analytic") != std::string::npos);
    CHECK(manifest1.find("closed_form_vs_solver") != std::string::npos);

    write_sweep(result, dir);
    CHECK(slurp(dir / "example1.csv") == csv1);
    CHECK(slurp(dir / "example1_manifest.json") == manifest1);

    meanfield::ClassSpec cls;
    cls.p = 1.0;
    cls.lambda = 0.2;
    meanfield::ClassModel model({cls}, 1.0);
    write_finite_region(finite_region_check(model, {10, 100}), dir);
    CHECK(slurp(dir / "finite_region.csv").find("N,s_finite") == 0);

    fs::remove_all(dir);
}
