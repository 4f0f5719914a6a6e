#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "alohastab/errors.hpp"

namespace alohastab::meanfield {

inline double xi(double x) noexcept { return x * std::exp(-x); }

inline constexpr double kInvE = 0.36787944117144233;  // e^{-1}, max of xi

enum class ModulationSpeed { Fast, Slow };

// Square matrix, row-major by convention of the call site:
//  - Slow classes / CTMC: off-diagonal jump rates (1/sec), diagonal ignored.
//  - Fast classes / DTMC: one-step transition matrix, rows sum to 1.
using Kernel = std::vector<std::vector<double>>;

struct ClassSpec {
    double beta = 1.0;    // population fraction
    double p = 1.0;       // scaled attempt rate
    double lambda = 0.0;  // scaled mean arrival rate
    ModulationSpeed speed = ModulationSpeed::Fast;
    Kernel kernel;          // empty => single environment state
    std::vector<double> g;  // modulation weights; empty => {1}
};

// Stationary law of a modulating kernel: jump rates for Slow, one-step
// transition matrix for Fast. An empty kernel yields {1}.
std::vector<double> kernel_stationary(const Kernel& kernel, ModulationSpeed speed);

// Validated class-level description of the population. Environment chains of
// fast classes are averaged out, so their state dimension collapses to 1 and
// arrivals enter at the mean rate lambda_v. Slow classes keep the full
// (environment, buffer) state with arrival rate lambda_v * g_{v,a}.
class ClassModel {
public:
    explicit ClassModel(std::vector<ClassSpec> classes, double b = 1.0);

    std::size_t num_classes() const noexcept { return classes_.size(); }
    const ClassSpec& cls(std::size_t v) const { return classes_[v]; }
    const std::vector<double>& pi(std::size_t v) const { return pi_[v]; }
    std::size_t env_dim(std::size_t v) const { return env_dim_[v]; }
    double arrival_rate(std::size_t v, std::size_t a) const {
        return arrival_rates_[v][a];
    }
    double b() const noexcept { return b_; }
    double total_lambda() const noexcept { return total_lambda_; }  // sum beta_v lambda_v
    double zeta() const noexcept { return zeta_; }                  // sum beta_v p_v

private:
    std::vector<ClassSpec> classes_;
    std::vector<std::vector<double>> pi_;
    std::vector<std::vector<double>> arrival_rates_;  // per (v, a)
    std::vector<std::size_t> env_dim_;
    double b_ = 1.0;
    double total_lambda_ = 0.0;
    double zeta_ = 0.0;
};

// Truncated distribution over (class, environment state, buffer length),
// one probability block per class, plus a per-class tail-mass accumulator
// that records the arrival flow dropped at the truncation level.
class MeanFieldState {
public:
    MeanFieldState() = default;  // empty shell; assign a real state before use
    MeanFieldState(const ClassModel& model, int k_max);

    static MeanFieldState empty(const ClassModel& model, int k_max);
    // All buffer mass at level k0, environment marginal at pi_v.
    static MeanFieldState point_mass(const ClassModel& model, int k_max, int k0);

    int k_max() const noexcept { return k_max_; }
    std::size_t num_classes() const noexcept { return env_dim_.size(); }
    std::size_t env_dim(std::size_t v) const { return env_dim_[v]; }

    double q(std::size_t v, std::size_t a, int k) const {
        return data_[offset_[v] + a * (k_max_ + 1) + k];
    }
    double& q(std::size_t v, std::size_t a, int k) {
        return data_[offset_[v] + a * (k_max_ + 1) + k];
    }
    double tail_mass(std::size_t v) const { return data_[tail_offset_ + v]; }
    double& tail_mass(std::size_t v) { return data_[tail_offset_ + v]; }

    double class_mass(std::size_t v) const;
    double q_empty(std::size_t v) const;  // sum_a q(v,a,0)
    double gamma(const ClassModel& model) const;
    double workload(std::size_t v) const;  // sum_k k * q(v,.,k)

    void normalize();  // rescale each class block to unit mass

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }
    std::size_t block_offset(std::size_t v) const { return offset_[v]; }
    std::size_t tail_offset() const noexcept { return tail_offset_; }

private:
    int k_max_ = 0;
    std::vector<std::size_t> offset_;
    std::vector<std::size_t> env_dim_;
    std::size_t tail_offset_ = 0;
    std::vector<double> data_;
};

// Right-hand side of the mean-field Kolmogorov system, laid out like
// state.data(). Service rate is b * p_v * exp(-gamma(state)); at the
// truncation level the arrival term is dropped and its flow is routed to
// the tail-mass slot of the class.
std::vector<double> mf_derivative(const ClassModel& model,
                                  const MeanFieldState& state);

struct TrajectorySample {
    double tau = 0.0;
    double gamma = 0.0;
    double workload = 0.0;  // sum_v beta_v W_v
    std::vector<double> workload_per_class;
    std::vector<double> q_empty;
    double workload_residual = 0.0;  // |dW/dtau - (lambda - b xi(gamma))|
    MeanFieldState state;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    double max_workload_residual = 0.0;
    double max_mass_drift = 0.0;
    double max_tail_mass = 0.0;
};

struct IntegrateOptions {
    double dt = 0.01;
    double sample_interval = 0.0;  // 0 => max(dt, tau_end / 1000)
    double tail_mass_limit = 1e-4;
    double mass_drift_limit = 1e-7;
};

// Classical fixed-step 4th-order integration of the Kolmogorov system.
// Throws NumericalError when per-class mass drifts beyond the limit or the
// accumulated tail mass exceeds its limit (advice: larger k_max / smaller dt).
Trajectory mf_integrate(const ClassModel& model, const MeanFieldState& q0,
                        double tau_end, const IntegrateOptions& opts = {});

struct GammaRoots {
    double lower = 0.0;  // in (0,1)
    double upper = 0.0;  // in (1,inf)
};

// Roots of gamma * exp(-gamma) = lambda_total / b, by bisection to residual
// 1e-12. Equality with e^{-1} (within 1e-12) returns (1,1); a supercritical
// load throws NumericalError.
GammaRoots gamma_roots(double lambda_total, double b = 1.0);

enum class Verdict { GloballyStable, Unstable, NotGloballyStable, Indeterminate };

const char* to_string(Verdict v) noexcept;

struct StabilityVerdict {
    Verdict verdict = Verdict::Indeterminate;
    std::optional<double> gamma_lower;
    std::optional<double> gamma_upper;
    double lambda_total = 0.0;
    double zeta = 0.0;
    // b * p_v * exp(-gamma_lower) - lambda_v per class; empty when roots are absent.
    std::vector<double> service_margins;
    std::string reason;
};

// GloballyStable  : zeta < gamma_upper and every service margin positive.
// Unstable       : some lambda_v > b p_v exp(-gamma_lower), or zeta < gamma_lower,
//                  or supercritical total load.
// NotGloballyStable: zeta > gamma_upper.
// Indeterminate  : a governing comparison sits within 1e-9 of equality.
StabilityVerdict classify_stability(const ClassModel& model);

// Stationary distribution over (a, k) of a modulated birth-death queue with
// arrival rate lambda * g_a in environment a, service rate `capacity`, and
// environment jump rates `kernel`, truncated at k_max (arrivals at the top
// level dropped), renormalized. Row-major: index a * (k_max+1) + k. The
// single-environment case is the (truncated) geometric distribution.
std::vector<double> modulated_mm1_stationary(const Kernel& kernel,
                                             const std::vector<double>& g,
                                             double lambda, double capacity,
                                             int k_max);

struct FixedPoint {
    double gamma = 0.0;  // root of xi(gamma) = lambda / b this point sits at
    MeanFieldState state;
    double self_consistency = 0.0;     // |xi(gamma(state)) - lambda/b|
    double derivative_sup_norm = 0.0;  // sup-norm of mf_derivative at the point
};

// Fixed points of the dynamical system. Lower point present when every class
// satisfies lambda_v < b p_v exp(-gamma_lower); additionally the upper point
// when lambda_v < b p_v exp(-gamma_upper) for all v. Zero load yields the
// empty state at gamma = 0; a supercritical load yields no fixed points.
std::vector<FixedPoint> fixed_points(const ClassModel& model, int k_max = 200);

// Per-class, per-environment-state cumulative comparison: a <=_st b iff the
// partial sums of a dominate those of b at every level (within slack).
bool stochastically_leq(const MeanFieldState& a, const MeanFieldState& b,
                        double slack = 0.0);

}  // namespace alohastab::meanfield
