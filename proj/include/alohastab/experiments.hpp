#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "alohastab/meanfield.hpp"
#include "alohastab/region.hpp"
#include "alohastab/sim.hpp"

namespace alohastab::experiments {

// Three-user sweep family: traffic shares proportional to
// (1, (1+1/x)/2, 1/x).
region::Direction sweep_direction(double x);

// s_star along sweep_direction(x) with p = (1/3, 1/3, 1/3):
//   4x(x+1) / ((2x+1)(5x+1))
double example1_closed_form(double x);

inline constexpr double kExample2Breakpoint = 47.0 / 7.0;

// s_star along sweep_direction(x) with p = (0.6, 0.3, 0.1). User 3 is the
// saturated one below the breakpoint, user 2 above it; both branches follow
// from the saturated-user construction and meet continuously at 47/7:
//   x <  47/7 : 24.3 (x+1)   / ((x+9)(x+19))
//   x >= 47/7 : 44.1 (x+1)^2 / ((13x+7)(7x+13))
double example2_closed_form(double x);

// Linearly decreasing shares alpha_i proportional to N+1-i.
region::Direction linear_direction(int n);

// s_star along linear_direction(N) with p_i = 1/N:
//   (1 / (N alpha_1)) prod_{i>=2} (1 - alpha_i / (alpha_i + (N-1) alpha_1))
double example3_closed_form(int n);

struct SimBudget {
    bool enabled = false;
    std::uint64_t slots = 10'000'000;
    int replications = 3;
    std::uint64_t seed = 20240901;
    double rel_resolution = 0.01;
    double bracket_low = 0.5;   // bracket = [low * s_analytic, high * s_analytic]
    double bracket_high = 1.5;
};

struct SweepRow {
    double param = 0.0;           // x or N
    std::string arrival;          // "analytic", "bernoulli", "hypergeometric"
    double s_closed_form = 0.0;
    double s_solver = 0.0;        // generic ray-limit solver
    std::size_t i_star = 0;       // saturated user, 0-based
    double s_sim = 0.0;
    double sim_half_width = 0.0;
    bool has_sim = false;
    std::uint64_t seed = 0;       // replication base seed for simulated rows
};

struct SweepResult {
    std::string name;
    std::string param_name;
    std::vector<SweepRow> rows;
    SimBudget budget;
};

// Each sweep evaluates the closed form and the generic solver independently
// (they must agree to 1e-10) and, when the budget enables it, brackets the
// empirical boundary by seeded simulation.
SweepResult example1(const std::vector<double>& xs, const SimBudget& budget = {});
SweepResult example2(const std::vector<double>& xs, const SimBudget& budget = {});
SweepResult example3(const std::vector<int>& ns, const SimBudget& budget = {});

struct FiniteRegionRow {
    double n = 0.0;
    double s_finite = 0.0;  // finite-product boundary rate at this N
    double s_limit = 0.0;   // exponential-form limit
    double scaled_gap = 0.0;  // (s_finite - s_limit) * N
};

// Ray limit of the class-level region along the model's own rate direction,
// exponential form (the N -> infinity region).
double gamma_ray_limit(const meanfield::ClassModel& model);
// Finite-N form of the same ray limit, with per-user rates p_v / N.
double finite_ray_limit(const meanfield::ClassModel& model, double n);

std::vector<FiniteRegionRow> finite_region_check(const meanfield::ClassModel& model,
                                                 const std::vector<double>& ns);

struct BistabilityReport {
    meanfield::StabilityVerdict verdict;
    double gamma_lower_fp = 0.0;
    double gamma_upper_fp = 0.0;
    double gamma_from_empty = 0.0;  // gamma at the end of the empty-start run
    double gamma_from_upper = 0.0;  // gamma at the end of the upper-start run
    double gap = 0.0;
    meanfield::Trajectory trajectory_empty;
    meanfield::Trajectory trajectory_upper;
};

// Requires a NotGloballyStable model with both fixed points present;
// integrates from the empty state and from the upper fixed point and reports
// the two limiting gamma values.
BistabilityReport bistability_demo(const meanfield::ClassModel& model,
                                   int k_max = 200, double tau_end = 200.0,
                                   double dt = 0.01);

// CSV emission: one file per sweep plus a JSON manifest carrying seeds,
// budgets, and tolerances. Identical inputs produce identical bytes.
void write_sweep(const SweepResult& result, const std::filesystem::path& out_dir);
void write_finite_region(const std::vector<FiniteRegionRow>& rows,
                         const std::filesystem::path& out_dir);
void write_bistability(const BistabilityReport& report,
                       const std::filesystem::path& out_dir);

}  // namespace alohastab::experiments
