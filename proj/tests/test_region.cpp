#include <doctest.h>

#include <cmath>
#include <vector>

#include "alohastab/region.hpp"
#include "alohastab/rng.hpp"
#include "oracles.hpp"

using namespace alohastab;
using namespace alohastab::region;

namespace {

Direction uniform_direction(std::size_t n) {
    return Direction::normalized(std::vector<double>(n, 1.0));
}

// deterministic uniforms for the randomized cases
struct TestRand {
    CounterRng rng;
    std::uint64_t counter = 0;
    explicit TestRand(std::uint64_t seed) : rng(seed, 7777) {}
    double next(double lo, double hi) { return lo + (hi - lo) * rng.uniform(counter++); }
};

}  // namespace

TEST_CASE("domain type validation") {
    CHECK_THROWS_AS(AttemptVector({}), ValidationError);
    CHECK_THROWS_AS(AttemptVector({0.0}), ValidationError);
    CHECK_THROWS_AS(AttemptVector({1.0}), ValidationError);
    CHECK_THROWS_AS(OccupancyVector({-0.1}), ValidationError);
    CHECK_THROWS_AS(OccupancyVector({1.1}), ValidationError);
    CHECK_THROWS_AS(Direction({0.5, 0.2}), ValidationError);
    CHECK_THROWS_AS(Direction::normalized({0.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(CsmaParams(0), ValidationError);
}

TEST_CASE("saturated throughput anchor points") {
    AttemptVector p({0.6, 0.3, 0.1});
    const double p1 = 0.6, p2 = 0.3, p3 = 0.1;

    auto a = saturated_throughput(OccupancyVector({1, 1, 0}), p, 1.0);
    CHECK(a[0] == doctest::Approx(p1 * (1 - p2)).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(p2 * (1 - p1)).epsilon(1e-15));
    CHECK(a[2] == 0.0);

    auto b = saturated_throughput(OccupancyVector({1, 0, 1}), p, 1.0);
    CHECK(b[0] == doctest::Approx(p1 * (1 - p3)).epsilon(1e-15));
    CHECK(b[1] == 0.0);
    CHECK(b[2] == doctest::Approx(p3 * (1 - p1)).epsilon(1e-15));

    auto c = saturated_throughput(OccupancyVector({0, 1, 1}), p, 1.0);
    CHECK(c[0] == 0.0);
    CHECK(c[1] == doctest::Approx(p2 * (1 - p3)).epsilon(1e-15));
    CHECK(c[2] == doctest::Approx(p3 * (1 - p2)).epsilon(1e-15));

    auto zeros = saturated_throughput(OccupancyVector({0, 0, 0}), p, 1.0);
    for (double v : zeros) CHECK(v == 0.0);

    AttemptVector third({1.0 / 3, 1.0 / 3, 1.0 / 3});
    auto sym = saturated_throughput(OccupancyVector({1, 1, 1}), third, 1.0);
    for (double v : sym) CHECK(v == doctest::Approx(4.0 / 27).epsilon(1e-15));

    // b thins every rate by the same factor
    auto thinned = saturated_throughput(OccupancyVector({1, 1, 0}), p, 0.5);
    CHECK(thinned[0] == doctest::Approx(0.5 * a[0]).epsilon(1e-15));

    CHECK_THROWS_AS(saturated_throughput(OccupancyVector({1, 1}), p, 1.0),
                    ValidationError);
}

TEST_CASE("boundary_point requires a saturated user") {
    AttemptVector p({0.4, 0.4});
    CHECK_THROWS_AS(boundary_point(OccupancyVector({0.5, 0.5}), 0, p, 1.0),
                    ValidationError);
    auto bp = boundary_point(OccupancyVector({1.0, 0.5}), 0, p, 1.0);
    CHECK(bp.j == 0);
    CHECK(bp.lambda[0] == doctest::Approx(0.4 * 0.8).epsilon(1e-15));
}

TEST_CASE("shat_star on the uniform three-user system") {
    AttemptVector p({1.0 / 3, 1.0 / 3, 1.0 / 3});
    auto sat = shat_star(uniform_direction(3), p);
    CHECK(sat.s_star == doctest::Approx(4.0 / 9).epsilon(1e-14));
    CHECK(sat.i_star == 0);  // tie resolved to the lowest index
    for (std::size_t i = 0; i < 3; ++i) CHECK(sat.rho_star[i] == 1.0);
}

TEST_CASE("shat_star homogeneous per-user boundary rate is p(1-p)^(N-1)") {
    for (std::size_t n : {2u, 3u, 5u, 8u}) {
        for (double p_val : {0.05, 0.2, 1.0 / n}) {
            AttemptVector p(std::vector<double>(n, p_val));
            auto sat = shat_star(uniform_direction(n), p);
            const double per_user = p_val * std::pow(1.0 - p_val, n - 1);
            CHECK(sat.s_star / n == doctest::Approx(per_user).epsilon(1e-12));
        }
    }
}

TEST_CASE("shat_star with heterogeneous p saturates the right user") {
    // shares (1, (1+1/x)/2, 1/x) at x = 1 are uniform
    AttemptVector p({0.6, 0.3, 0.1});
    auto sat = shat_star(uniform_direction(3), p);
    CHECK(sat.i_star == 2);
    CHECK(sat.s_star == doctest::Approx(0.243).epsilon(1e-12));
    CHECK(sat.rho_star[2] == 1.0);
    // occupancies satisfy the boundary system: lambda = s * alpha
    auto lambda = saturated_throughput(sat.rho_star, p, 1.0);
    for (double v : lambda) CHECK(v == doctest::Approx(sat.s_star / 3).epsilon(1e-12));
}

TEST_CASE("shat_star ignores zero-share users") {
    AttemptVector p({0.5, 0.5, 0.9});
    auto sat = shat_star(Direction::normalized({1.0, 1.0, 0.0}), p);
    CHECK(sat.rho_star[2] == 0.0);
    // matches the two-user system
    auto two = shat_star(uniform_direction(2), AttemptVector({0.5, 0.5}));
    CHECK(sat.s_star == doctest::Approx(two.s_star).epsilon(1e-14));
}

// Random attempt vectors are kept inside the model's domain sum(p) <= 1;
// there the along-ray boundary crossing coincides with the largest dominated
// ray point, which is what the brute-force maximin oracle computes. (Outside
// that domain the region loses Pareto monotonicity and the two notions split.)
TEST_CASE("shat_star agrees with brute-force boundary maximization") {
    TestRand rand(2024);
    for (int instance = 0; instance < 20; ++instance) {
        const std::size_t n = 2 + static_cast<std::size_t>(rand.next(0, 3.999));
        std::vector<double> p(n), w(n);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = rand.next(0.1, 0.8);
            w[i] = rand.next(0.1, 1.0);
            sum += p[i];
        }
        if (sum > 0.95) {
            for (double& v : p) v *= 0.95 / sum;
        }
        auto alpha = Direction::normalized(w);
        auto sat = shat_star(alpha, AttemptVector(p));
        const double brute = oracles::brute_ray_limit(alpha.values(), p, 1);
        CHECK(sat.s_star == doctest::Approx(brute).epsilon(1e-4));
    }
}

TEST_CASE("approx_region_contains along-ray membership") {
    AttemptVector p({1.0 / 3, 1.0 / 3, 1.0 / 3});
    CHECK(approx_region_contains({0.1, 0.1, 0.1}, p));
    CHECK_FALSE(approx_region_contains({0.2, 0.2, 0.2}, p));
    CHECK(approx_region_contains({0.0, 0.0, 0.0}, p));
    CHECK_THROWS_AS(approx_region_contains({-0.1, 0.1, 0.1}, p), ValidationError);

    // exactly on the boundary is outside (all quantities exact in binary here)
    AttemptVector half({0.5, 0.5});
    CHECK_FALSE(approx_region_contains({0.25, 0.25}, half));
    CHECK(approx_region_contains({0.25 * (1 - 1e-9), 0.25 * (1 - 1e-9)}, half));
}

TEST_CASE("boundary images are one-sided for membership") {
    TestRand rand(99);
    for (int instance = 0; instance < 50; ++instance) {
        const std::size_t n = 2 + static_cast<std::size_t>(rand.next(0, 2.999));
        std::vector<double> p(n), rho(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = rand.next(0.05, 0.9);
            rho[i] = rand.next(0.05, 1.0);
        }
        rho[static_cast<std::size_t>(rand.next(0, n - 1e-9))] = 1.0;
        AttemptVector pv(p);
        auto lambda = saturated_throughput(OccupancyVector(rho), pv, 1.0);
        std::vector<double> inside = lambda, outside = lambda;
        for (double& v : inside) v *= 1.0 - 1e-9;
        for (double& v : outside) v *= 1.0 + 1e-9;
        CHECK(approx_region_contains(inside, pv));
        CHECK_FALSE(approx_region_contains(outside, pv));
    }
}

TEST_CASE("membership is monotone under componentwise decrease") {
    TestRand rand(4242);
    for (int instance = 0; instance < 50; ++instance) {
        const std::size_t n = 2 + static_cast<std::size_t>(rand.next(0, 2.999));
        std::vector<double> p(n), w(n);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = rand.next(0.1, 0.8);
            w[i] = rand.next(0.1, 1.0);
            sum += p[i];
        }
        if (sum > 0.95) {
            for (double& v : p) v *= 0.95 / sum;
        }
        AttemptVector pv(p);
        auto sat = shat_star(Direction::normalized(w), pv);
        double total = 0.0;
        for (double v : w) total += v;
        std::vector<double> lambda(n), smaller(n);
        for (std::size_t i = 0; i < n; ++i) {
            lambda[i] = 0.95 * sat.s_star * w[i] / total;
            smaller[i] = lambda[i] * rand.next(0.0, 1.0);
        }
        REQUIRE(approx_region_contains(lambda, pv));
        CHECK(approx_region_contains(smaller, pv));
    }
}

TEST_CASE("exact two-user region") {
    AttemptVector p({0.5, 0.5});
    CHECK(exact_region2_contains({0.2, 0.29}, p));
    CHECK_FALSE(exact_region2_contains({0.2, 0.3}, p));  // tight, not strict
    CHECK(exact_region2_contains({0.0, 0.0}, p));
    CHECK_THROWS_AS(exact_region2_contains({0.1, 0.1, 0.1},
                                           AttemptVector({0.5, 0.5, 0.5})),
                    ValidationError);
}

TEST_CASE("two-user exact and along-ray regions coincide on a grid") {
    TestRand rand(31337);
    for (int rep = 0; rep < 5; ++rep) {
        const double p1 = rand.next(0.1, 0.9), p2 = rand.next(0.1, 0.9);
        AttemptVector p({p1, p2});
        const double m1 = 1.1 * p1 * (1 - p2), m2 = 1.1 * p2 * (1 - p1);
        for (int i = 1; i <= 60; ++i) {
            for (int j = 1; j <= 60; ++j) {
                std::vector<double> lambda{m1 * i / 60.0, m2 * j / 60.0};
                CHECK(exact_region2_contains(lambda, p) ==
                      approx_region_contains(lambda, p));
            }
        }
    }
}

TEST_CASE("k-homogeneous closed form") {
    AttemptVector third({1.0 / 3, 1.0 / 3, 1.0 / 3});
    CHECK(k_homogeneous_sstar(uniform_direction(3), third) ==
          doctest::Approx(4.0 / 9).epsilon(1e-14));

    AttemptVector half({0.5, 0.5});
    CHECK(k_homogeneous_sstar(Direction({0.6, 0.4}), half) ==
          doctest::Approx(0.5).epsilon(1e-14));

    // three distinct keys with a positive third share is not admissible
    AttemptVector p({0.2, 0.3, 0.4});
    CHECK_THROWS_AS(k_homogeneous_sstar(Direction::normalized({3.0, 2.0, 1.0}), p),
                    ValidationError);
}

TEST_CASE("k-homogeneous directions match the generic solver") {
    TestRand rand(1234);
    int built = 0;
    while (built < 30) {
        const std::size_t n = 2 + static_cast<std::size_t>(rand.next(0, 6.999));
        const std::size_t k = 1 + static_cast<std::size_t>(rand.next(0, n - 1.0001));
        std::vector<double> p(n), w(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) p[i] = rand.next(0.05, 0.85);
        for (std::size_t i = 0; i < k; ++i) w[i] = p[i] / (1.0 - p[i]);
        if (k < n) w[k] = rand.next(0.0, 1.0) * p[k] / (1.0 - p[k]);
        auto alpha = Direction::normalized(w);
        ++built;
        const double closed = k_homogeneous_sstar(alpha, AttemptVector(p));
        const double generic = shat_star(alpha, AttemptVector(p)).s_star;
        CHECK(closed == doctest::Approx(generic).epsilon(1e-10));
    }
}

TEST_CASE("capacity solve: single user and round trip") {
    auto single = capacity_region_solve({0.5});
    REQUIRE(single.has_value());
    CHECK((*single)[0] == doctest::Approx(0.5).epsilon(1e-12));

    auto two = capacity_region_solve({0.4 * 0.7, 0.3 * 0.6});  // p = (0.4, 0.3)
    REQUIRE(two.has_value());
    CHECK((*two)[0] == doctest::Approx(0.4).epsilon(1e-9));
    CHECK((*two)[1] == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("capacity solve: infeasible load returns none") {
    CapacitySolveReport rep;
    auto none = capacity_region_solve({0.6, 0.6}, &rep);
    CHECK_FALSE(none.has_value());
    CHECK_FALSE(rep.converged);

    // grid scan confirms no p in (0,1)^2 reproduces (0.6, 0.6)
    double best = 1e9;
    for (int i = 1; i < 200; ++i) {
        for (int j = 1; j < 200; ++j) {
            const double p1 = i / 200.0, p2 = j / 200.0;
            best = std::min(best, std::max(std::abs(0.6 - p1 * (1 - p2)),
                                           std::abs(0.6 - p2 * (1 - p1))));
        }
    }
    CHECK(best > 0.05);

    CHECK_THROWS_AS(capacity_region_solve({0.0, 0.1}), ValidationError);
}

TEST_CASE("capacity solve round-trips random attempt vectors") {
    // The forward map is not injective on all of (0,1)^N (a homogeneous system
    // has two p values per rate); recovery of the original p is asserted on
    // the branch with sum(p) < 1, where the least solution is the original.
    TestRand rand(555);
    for (int instance = 0; instance < 30; ++instance) {
        const std::size_t n = 1 + static_cast<std::size_t>(rand.next(0, 5.999));
        std::vector<double> p(n), lambda(n);
        const double hi = std::min(0.6, 0.95 / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) p[i] = rand.next(0.05, hi);
        for (std::size_t i = 0; i < n; ++i) {
            double prod = 1.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) prod *= 1.0 - p[j];
            }
            lambda[i] = p[i] * prod;
        }
        auto solved = capacity_region_solve(lambda);
        REQUIRE(solved.has_value());
        for (std::size_t i = 0; i < n; ++i) {
            CHECK((*solved)[i] == doctest::Approx(p[i]).epsilon(1e-8));
        }
    }
}

TEST_CASE("capacity solve returns a valid solution on the non-injective branch") {
    // all-0.5 four-user system: the solver lands on the least solution, whose
    // forward image still reproduces the requested rates
    const std::size_t n = 4;
    std::vector<double> lambda(n, 0.5 * std::pow(0.5, n - 1));
    auto solved = capacity_region_solve(lambda);
    REQUIRE(solved.has_value());
    for (std::size_t i = 0; i < n; ++i) {
        double prod = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) prod *= 1.0 - (*solved)[j];
        }
        CHECK((*solved)[i] * prod == doctest::Approx(lambda[i]).epsilon(1e-9));
        CHECK((*solved)[i] < 0.5);
    }
}

TEST_CASE("csma saturation throughput") {
    AttemptVector p({0.5, 0.5});
    OccupancyVector both({1.0, 1.0});

    auto one_slot = csma_saturation_throughput(both, p, CsmaParams(1));
    auto aloha = saturated_throughput(both, p, 1.0);
    CHECK(one_slot[0] == aloha[0]);  // bit-equal
    CHECK(one_slot[1] == aloha[1]);

    auto idle = csma_saturation_throughput(OccupancyVector({0.0, 0.0}), p,
                                           CsmaParams(10));
    CHECK(idle[0] == 0.0);
    CHECK(idle[1] == 0.0);

    auto ten = csma_saturation_throughput(both, p, CsmaParams(10));
    CHECK(ten[0] == doctest::Approx(0.25 / 7.75).epsilon(1e-15));
    CHECK(ten[1] == doctest::Approx(0.25 / 7.75).epsilon(1e-15));
}

TEST_CASE("csma ray limit: reduction, example, oracle, monotone utilization") {
    AttemptVector half({0.5, 0.5});
    auto sat10 = csma_shat_star(uniform_direction(2), half, CsmaParams(10));
    CHECK(sat10.s_star == doctest::Approx(2.0 * 0.25 / 7.75).epsilon(1e-12));
    CHECK(sat10.rho_star[1] == doctest::Approx(1.0).epsilon(1e-14));

    TestRand rand(777);
    for (int instance = 0; instance < 15; ++instance) {
        const std::size_t n = 2 + static_cast<std::size_t>(rand.next(0, 2.999));
        std::vector<double> p(n), w(n);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = rand.next(0.1, 0.8);
            w[i] = rand.next(0.1, 1.0);
            sum += p[i];
        }
        if (sum > 0.95) {
            for (double& v : p) v *= 0.95 / sum;
        }
        auto alpha = Direction::normalized(w);
        AttemptVector pv(p);

        auto reduced = csma_shat_star(alpha, pv, CsmaParams(1));
        auto plain = shat_star(alpha, pv);
        CHECK(reduced.s_star == doctest::Approx(plain.s_star).epsilon(1e-12));
        CHECK(reduced.i_star == plain.i_star);

        const int sigma = 1 + static_cast<int>(rand.next(0, 19.999));
        auto sat = csma_shat_star(alpha, pv, CsmaParams(sigma));
        const double brute = oracles::brute_ray_limit(alpha.values(), p, sigma);
        CHECK(sat.s_star == doctest::Approx(brute).epsilon(1e-4));
    }

    // channel-time utilization sigma * s_star is nondecreasing in sigma
    for (double p_val : {0.2, 0.5}) {
        AttemptVector pv({p_val, p_val, p_val});
        double prev = 0.0;
        for (int sigma : {1, 2, 5, 10, 50}) {
            const double s = csma_shat_star(uniform_direction(3), pv,
                                            CsmaParams(sigma)).s_star;
            const double utilization = sigma * s;
            CHECK(utilization >= prev - 1e-12);
            prev = utilization;
        }
    }
}
