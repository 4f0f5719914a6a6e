#include "alohastab/region.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace alohastab::region {

namespace {

void check_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ValidationError(std::string(what) + ": dimension mismatch (" +
                              std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

// P_i = rho_i p_i prod_{k != i} (1 - rho_k p_k), plus E = prod_k (1 - rho_k p_k).
// Shared by the Aloha and CSMA throughput maps so the sigma = 1 reduction is
// bit-exact.
struct SaturationProducts {
    std::vector<double> P;
    double E = 1.0;
};

SaturationProducts saturation_products(const std::vector<double>& rho,
                                       const std::vector<double>& p) {
    const std::size_t n = p.size();
    SaturationProducts out;
    out.P.resize(n);
    for (std::size_t k = 0; k < n; ++k) out.E *= 1.0 - rho[k] * p[k];
    for (std::size_t i = 0; i < n; ++i) {
        double prod = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k != i) prod *= 1.0 - rho[k] * p[k];
        }
        out.P[i] = rho[i] * p[i] * prod;
    }
    return out;
}

// Saturation key alpha_i (1 - p_i) / p_i; the user maximizing it is the one
// pinned at rho = 1 on the boundary along the direction alpha.
double saturation_key(double alpha, double p) { return alpha * (1.0 - p) / p; }

std::size_t argmax_key(const Direction& alpha, const AttemptVector& p) {
    std::size_t best = alpha.size();
    double best_key = -1.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (alpha[i] <= 0.0) continue;
        const double key = saturation_key(alpha[i], p[i]);
        if (best == alpha.size() || key > best_key) {
            best = i;
            best_key = key;
        }
    }
    if (best == alpha.size()) throw ValidationError("all-zero direction");
    return best;
}

// Boundary occupancies for saturated user j: rho_i p_i = alpha_i / (alpha_i + m)
// with m the saturation key of user j. Ties with user j give rho_i = 1 exactly,
// up to roundoff; clamp the stray ulps.
std::vector<double> boundary_occupancies(const Direction& alpha,
                                         const AttemptVector& p, std::size_t j) {
    const double m = saturation_key(alpha[j], p[j]);
    std::vector<double> rho(alpha.size(), 0.0);
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (alpha[i] <= 0.0) continue;
        rho[i] = (i == j) ? 1.0
                          : std::min(alpha[i] / (p[i] * (m + alpha[i])), 1.0);
    }
    return rho;
}

}  // namespace

AttemptVector::AttemptVector(std::vector<double> p) : p_(std::move(p)) {
    if (p_.empty()) throw ValidationError("attempt vector must have N >= 1");
    for (double v : p_) {
        if (!(v > 0.0 && v < 1.0)) {
            throw ValidationError("attempt probabilities must lie in (0,1)");
        }
    }
}

Direction::Direction(std::vector<double> alpha) : alpha_(std::move(alpha)) {
    if (alpha_.empty()) throw ValidationError("direction must have N >= 1");
    double sum = 0.0;
    for (double v : alpha_) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ValidationError("direction entries must be nonnegative");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw ValidationError("direction must be L1-normalized");
    }
}

Direction Direction::normalized(std::vector<double> weights) {
    double sum = 0.0;
    for (double v : weights) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ValidationError("direction entries must be nonnegative");
        }
        sum += v;
    }
    if (sum <= 0.0) throw ValidationError("all-zero direction");
    for (double& v : weights) v /= sum;
    return Direction(std::move(weights));
}

OccupancyVector::OccupancyVector(std::vector<double> rho) : rho_(std::move(rho)) {
    if (rho_.empty()) throw ValidationError("occupancy vector must have N >= 1");
    for (double v : rho_) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ValidationError("occupancies must lie in [0,1]");
        }
    }
}

CsmaParams::CsmaParams(int s) : sigma(s) {
    if (s < 1) throw ValidationError("sigma must be >= 1");
}

std::vector<double> saturated_throughput(const OccupancyVector& rho,
                                         const AttemptVector& p, double b) {
    check_same_size(rho.size(), p.size(), "saturated_throughput");
    if (!(b >= 0.0 && b <= 1.0)) throw ValidationError("b must lie in [0,1]");
    auto prods = saturation_products(rho.values(), p.values());
    for (double& v : prods.P) v *= b;
    return std::move(prods.P);
}

BoundaryPoint boundary_point(const OccupancyVector& rho, std::size_t j,
                             const AttemptVector& p, double b) {
    if (j >= rho.size()) throw ValidationError("saturated index out of range");
    if (rho[j] != 1.0) throw ValidationError("boundary point requires rho[j] == 1");
    return BoundaryPoint{rho, j, saturated_throughput(rho, p, b)};
}

SaturationPoint shat_star(const Direction& alpha, const AttemptVector& p) {
    check_same_size(alpha.size(), p.size(), "shat_star");
    const std::size_t j = argmax_key(alpha, p);

    // s_star = (p_j / alpha_j) prod_{i != j} alpha_j (1-p_j) /
    //          (alpha_i p_j + alpha_j (1-p_j)), over users with traffic.
    const double num = alpha[j] * (1.0 - p[j]);
    double s = p[j] / alpha[j];
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (i == j || alpha[i] <= 0.0) continue;
        s *= num / (alpha[i] * p[j] + num);
    }
    return SaturationPoint{s, j, OccupancyVector(boundary_occupancies(alpha, p, j))};
}

bool approx_region_contains(const std::vector<double>& lambda,
                            const AttemptVector& p) {
    check_same_size(lambda.size(), p.size(), "approx_region_contains");
    double s = 0.0;
    for (double v : lambda) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ValidationError("rates must be nonnegative");
        }
        s += v;
    }
    if (s == 0.0) return true;  // dominated by every boundary point
    auto alpha = Direction::normalized(lambda);
    return s < shat_star(alpha, p).s_star;
}

bool exact_region2_contains(const std::vector<double>& lambda,
                            const AttemptVector& p) {
    if (lambda.size() != 2 || p.size() != 2) {
        throw ValidationError("exact_region2_contains requires N = 2");
    }
    const double l1 = lambda[0], l2 = lambda[1];
    const double p1 = p[0], p2 = p[1];
    const bool first = l1 < p1 * (1.0 - p2) && l2 < p2 * (1.0 - l1 / (1.0 - p2));
    const bool second = l2 < p2 * (1.0 - p1) && l1 < p1 * (1.0 - l2 / (1.0 - p1));
    return first || second;
}

double k_homogeneous_sstar(const Direction& alpha, const AttemptVector& p) {
    check_same_size(alpha.size(), p.size(), "k_homogeneous_sstar");
    const std::size_t n = alpha.size();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return saturation_key(alpha[a], p[a]) > saturation_key(alpha[b], p[b]);
    });

    const double top = saturation_key(alpha[order[0]], p[order[0]]);
    if (top <= 0.0) throw ValidationError("not a k-homogeneous direction");

    std::size_t k = 1;
    while (k < n) {
        const double key = saturation_key(alpha[order[k]], p[order[k]]);
        if (std::abs(key - top) <= 1e-12 * std::abs(top)) {
            ++k;
        } else {
            break;
        }
    }
    for (std::size_t pos = k + 1; pos < n; ++pos) {
        if (alpha[order[pos]] != 0.0) {
            throw ValidationError("not a k-homogeneous direction");
        }
    }

    double prod = 1.0;
    for (std::size_t pos = 0; pos < k; ++pos) prod *= 1.0 - p[order[pos]];
    const double alpha1 = alpha[order[0]];
    const double p1 = p[order[0]];
    const double alpha_next = (k < n) ? alpha[order[k]] : 0.0;
    return prod / ((1.0 - p1) / p1 * alpha1 + alpha_next);
}

std::optional<AttemptVector> capacity_region_solve(const std::vector<double>& lambda,
                                                   CapacitySolveReport* report) {
    const std::size_t n = lambda.size();
    if (n == 0) throw ValidationError("capacity_region_solve: empty rate vector");
    for (double v : lambda) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ValidationError("capacity_region_solve requires lambda > 0");
        }
    }

    constexpr int kMaxIterations = 10'000;
    constexpr double kTol = 1e-10;
    constexpr double kCeil = 1.0 - 1e-12;

    auto residual_of = [&](const std::vector<double>& p) {
        double r = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double prod = 1.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) prod *= 1.0 - p[j];
            }
            r = std::max(r, std::abs(lambda[i] - p[i] * prod));
        }
        return r;
    };

    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = std::min(lambda[i], 0.9);

    double damping = 1.0;
    double prev_residual = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < kMaxIterations; ++it) {
        const double res = residual_of(p);
        if (report) {
            report->iterations = it;
            report->residual = res;
        }
        if (res < kTol) {
            bool interior = true;
            for (double v : p) interior = interior && v > 0.0 && v < 1.0;
            if (report) report->converged = interior;
            if (!interior) return std::nullopt;
            return AttemptVector(p);
        }
        if (res > prev_residual) damping *= 0.5;  // oscillating; damp
        prev_residual = res;
        if (damping < 1e-6) break;

        for (std::size_t i = 0; i < n; ++i) {
            double prod = 1.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) prod *= 1.0 - p[j];
            }
            double candidate = lambda[i] / prod;
            candidate = std::clamp(candidate, 1e-15, kCeil);
            p[i] += damping * (candidate - p[i]);
        }
    }
    if (report) {
        report->iterations = it;
        report->residual = residual_of(p);
        report->converged = false;
    }
    return std::nullopt;
}

std::vector<double> csma_saturation_throughput(const OccupancyVector& rho,
                                               const AttemptVector& p,
                                               const CsmaParams& csma) {
    check_same_size(rho.size(), p.size(), "csma_saturation_throughput");
    auto prods = saturation_products(rho.values(), p.values());

    double sum_p = 0.0;
    for (double v : prods.P) sum_p += v;
    const double collision = 1.0 - prods.E - sum_p;
    if (collision < -1e-12) {
        throw NumericalError("csma_saturation_throughput: negative collision mass");
    }

    // sigma (sum_j P_j + C) + E, with sum_j P_j + C = 1 - E.
    const double denom =
        static_cast<double>(csma.sigma) - static_cast<double>(csma.sigma - 1) * prods.E;
    for (double& v : prods.P) v /= denom;
    return std::move(prods.P);
}

SaturationPoint csma_shat_star(const Direction& alpha, const AttemptVector& p,
                               const CsmaParams& csma) {
    check_same_size(alpha.size(), p.size(), "csma_shat_star");
    const std::size_t j = argmax_key(alpha, p);

    // Throughput ratios are sigma-free, so the boundary occupancies coincide
    // with the Aloha ones; sigma only rescales the attained rate.
    OccupancyVector rho(boundary_occupancies(alpha, p, j));
    auto gamma = csma_saturation_throughput(rho, p, csma);
    const double s = gamma[j] / alpha[j];

    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (alpha[i] <= 0.0) continue;
        if (std::abs(gamma[i] - s * alpha[i]) > 1e-10 * std::max(1.0, s)) {
            throw NumericalError(
                "csma_shat_star: boundary equations not satisfied (user " +
                std::to_string(i) + ")");
        }
    }
    return SaturationPoint{s, j, std::move(rho)};
}

}  // namespace alohastab::region
