#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "alohastab/errors.hpp"

namespace alohastab::region {

// Per-user transmission attempt probabilities; every entry in (0,1).
class AttemptVector {
public:
    explicit AttemptVector(std::vector<double> p);
    std::size_t size() const noexcept { return p_.size(); }
    double operator[](std::size_t i) const noexcept { return p_[i]; }
    const std::vector<double>& values() const noexcept { return p_; }

private:
    std::vector<double> p_;
};

// Traffic direction: nonnegative shares with unit L1 norm.
class Direction {
public:
    explicit Direction(std::vector<double> alpha);  // must already sum to 1
    static Direction normalized(std::vector<double> weights);
    std::size_t size() const noexcept { return alpha_.size(); }
    double operator[](std::size_t i) const noexcept { return alpha_[i]; }
    const std::vector<double>& values() const noexcept { return alpha_; }

private:
    std::vector<double> alpha_;
};

// Per-user probability of a non-empty buffer; every entry in [0,1].
class OccupancyVector {
public:
    explicit OccupancyVector(std::vector<double> rho);
    std::size_t size() const noexcept { return rho_.size(); }
    double operator[](std::size_t i) const noexcept { return rho_[i]; }
    const std::vector<double>& values() const noexcept { return rho_; }

private:
    std::vector<double> rho_;
};

struct CsmaParams {
    int sigma = 1;  // slots occupied by one transmission attempt
    explicit CsmaParams(int s);
};

// A point on boundary surface j: rho[j] == 1 and lambda is the
// saturated-throughput image of rho.
struct BoundaryPoint {
    OccupancyVector rho;
    std::size_t j = 0;
    std::vector<double> lambda;
};

// Result of a ray-limit computation: the maximum total rate s_star along a
// direction, the saturated user attaining it, and the boundary occupancies.
struct SaturationPoint {
    double s_star = 0.0;
    std::size_t i_star = 0;
    OccupancyVector rho_star;
};

// lambda_i = b * rho_i * p_i * prod_{k != i} (1 - rho_k p_k)
std::vector<double> saturated_throughput(const OccupancyVector& rho,
                                         const AttemptVector& p, double b);

BoundaryPoint boundary_point(const OccupancyVector& rho, std::size_t j,
                             const AttemptVector& p, double b);

// Maximum total rate s such that s * alpha is on the region boundary, with
// the saturated user and boundary occupancies. Users with alpha_i == 0 get
// rho_i = 0 and are excluded from the saturation argmax; ties pick the
// lowest index.
SaturationPoint shat_star(const Direction& alpha, const AttemptVector& p);

// Along-ray membership: true iff sum(lambda) < s_star of the normalized
// direction. Strict at the boundary. The all-zero vector counts as inside.
bool approx_region_contains(const std::vector<double>& lambda,
                            const AttemptVector& p);

// Exact two-user region: either
//   lambda_1 < p_1(1-p_2) and lambda_2 < p_2(1 - lambda_1/(1-p_2)),
// or the symmetric pair with the roles of users 1 and 2 swapped.
bool exact_region2_contains(const std::vector<double>& lambda,
                            const AttemptVector& p);

// Closed form for directions where, after sorting users by descending
// alpha_i (1-p_i)/p_i, the first k key values coincide, every share beyond
// position k+1 is zero, and the (k+1)-th key does not exceed the first:
//     s_star = prod_{i<=k} (1-p_i) / ( alpha_1 (1-p_1)/p_1 + alpha_{k+1} )
// (indices in sorted order). Throws ValidationError otherwise.
double k_homogeneous_sstar(const Direction& alpha, const AttemptVector& p);

struct CapacitySolveReport {
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

// Solve lambda_i = p_i prod_{j != i} (1 - p_j) for p in (0,1)^N by damped
// fixed-point iteration (residual < 1e-10, at most 10000 iterations).
// Returns nullopt when no solution is found.
std::optional<AttemptVector> capacity_region_solve(
    const std::vector<double>& lambda, CapacitySolveReport* report = nullptr);

// gamma_i = P_i / (sigma (sum_j P_j + C) + E) with
//   P_i = rho_i p_i prod_{j != i} (1 - rho_j p_j),
//   E   = prod_k (1 - rho_k p_k),  C = 1 - E - sum_j P_j.
// sigma = 1 reduces to saturated_throughput with b = 1.
std::vector<double> csma_saturation_throughput(const OccupancyVector& rho,
                                               const AttemptVector& p,
                                               const CsmaParams& csma);

// Ray limit of the CSMA region, in packets per slot. The boundary
// occupancies do not depend on sigma (the throughput denominator is common
// to all users, so throughput ratios fix rho in closed form); only the
// attained rate does.
SaturationPoint csma_shat_star(const Direction& alpha, const AttemptVector& p,
                               const CsmaParams& csma);

}  // namespace alohastab::region
