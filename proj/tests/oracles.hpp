#pragma once

// Test-only oracles, deliberately independent of the library implementations
// they check: a long-double bisection for the xi roots, a brute-force
// boundary maximization over the saturated-user surfaces, and a Monte Carlo
// stationary distribution for the modulated queue.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "alohastab/rng.hpp"

namespace oracles {

inline long double xi_ld(long double x) { return x * std::exp(-x); }

// Root of x e^{-x} = r on [lo, hi]; the function must be monotone there.
inline double xi_root(double r, double lo, double hi, bool increasing) {
    long double a = lo, b = hi;
    for (int it = 0; it < 300; ++it) {
        const long double mid = 0.5L * (a + b);
        if ((xi_ld(mid) < static_cast<long double>(r)) == increasing) {
            a = mid;
        } else {
            b = mid;
        }
    }
    return static_cast<double>(0.5L * (a + b));
}

// Literal throughput map gamma_i(rho, sigma) straight from the definition.
inline std::vector<double> csma_gamma(const std::vector<double>& rho,
                                      const std::vector<double>& p, int sigma) {
    const std::size_t n = p.size();
    std::vector<double> big_p(n);
    double e = 1.0;
    for (std::size_t k = 0; k < n; ++k) e *= 1.0 - rho[k] * p[k];
    double sum_p = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double prod = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k != i) prod *= 1.0 - rho[k] * p[k];
        }
        big_p[i] = rho[i] * p[i] * prod;
        sum_p += big_p[i];
    }
    const double c = 1.0 - e - sum_p;
    const double denom = sigma * (sum_p + c) + e;
    for (double& v : big_p) v /= denom;
    return big_p;
}

// Largest s such that s*alpha is dominated by some boundary point, straight
// from the set definition: max over saturated-user surfaces and over the
// free occupancies of min_i gamma_i(rho) / alpha_i, located by a refining
// grid search (derivative-free; accuracy around 1e-5 relative).
inline double brute_ray_limit(const std::vector<double>& alpha,
                              const std::vector<double>& p, int sigma = 1) {
    const std::size_t n = p.size();
    std::vector<std::size_t> free_idx;
    double best = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (alpha[j] <= 0.0) continue;
        free_idx.clear();
        for (std::size_t i = 0; i < n; ++i) {
            if (i != j) free_idx.push_back(i);
        }
        const std::size_t d = free_idx.size();
        const int pts = d <= 2 ? 40 : (d == 3 ? 20 : 12);

        std::vector<double> lo(d, 0.0), hi(d, 1.0), center(d, 0.5);
        std::vector<double> rho(n, 0.0);
        rho[j] = 1.0;
        double surface_best = 0.0;

        auto value_at = [&](const std::vector<double>& free_rho) {
            for (std::size_t k = 0; k < d; ++k) rho[free_idx[k]] = free_rho[k];
            auto gamma = csma_gamma(rho, p, sigma);
            double s = 1e300;
            for (std::size_t i = 0; i < n; ++i) {
                if (alpha[i] > 0.0) s = std::min(s, gamma[i] / alpha[i]);
            }
            return s;
        };

        for (int round = 0; round < 10; ++round) {
            std::vector<int> index(d, 0);
            std::vector<double> free_rho(d);
            std::vector<double> best_rho = center;
            double round_best = -1.0;
            bool done = false;
            while (!done) {
                for (std::size_t k = 0; k < d; ++k) {
                    free_rho[k] =
                        lo[k] + (hi[k] - lo[k]) * index[k] / static_cast<double>(pts - 1);
                }
                const double s = value_at(free_rho);
                if (s > round_best) {
                    round_best = s;
                    best_rho = free_rho;
                }
                std::size_t k = 0;
                while (k < d && ++index[k] == pts) {
                    index[k] = 0;
                    ++k;
                }
                done = k == d;
            }
            surface_best = round_best;
            center = best_rho;
            for (std::size_t k = 0; k < d; ++k) {
                const double span = (hi[k] - lo[k]) / 3.0;
                lo[k] = std::max(0.0, center[k] - 0.5 * span);
                hi[k] = std::min(1.0, center[k] + 0.5 * span);
            }
        }
        best = std::max(best, surface_best);
    }
    return best;
}

// Time-average occupancy of the uniformized modulated queue, truncated at
// k_max (arrivals at the top level dropped). Row-major (a, k).
inline std::vector<double> mc_modulated_mm1(
    const std::vector<std::vector<double>>& kernel, const std::vector<double>& g,
    double lambda, double capacity, int k_max, std::uint64_t steps,
    std::uint64_t seed) {
    const std::size_t a_dim = kernel.size();
    double rate_bound = capacity;
    for (std::size_t a = 0; a < a_dim; ++a) {
        double out = lambda * g[a];
        for (std::size_t a2 = 0; a2 < a_dim; ++a2) {
            if (a2 != a) out += kernel[a][a2];
        }
        rate_bound = std::max(rate_bound, out + capacity);
    }

    std::vector<double> occupancy(a_dim * (k_max + 1), 0.0);
    std::size_t a = 0;
    int k = 0;
    alohastab::CounterRng rng(seed, 99);
    for (std::uint64_t t = 0; t < steps; ++t) {
        occupancy[a * (k_max + 1) + k] += 1.0;
        double u = rng.uniform(t) * rate_bound;
        const double arrive = k < k_max ? lambda * g[a] : 0.0;
        if (u < arrive) {
            ++k;
            continue;
        }
        u -= arrive;
        if (k > 0 && u < capacity) {
            --k;
            continue;
        }
        if (k > 0) u -= capacity;
        bool moved = false;
        for (std::size_t a2 = 0; a2 < a_dim && !moved; ++a2) {
            if (a2 == a) continue;
            if (u < kernel[a][a2]) {
                a = a2;
                moved = true;
            } else {
                u -= kernel[a][a2];
            }
        }
        // otherwise: uniformization self-loop
    }
    for (double& v : occupancy) v /= static_cast<double>(steps);
    return occupancy;
}

}  // namespace oracles
