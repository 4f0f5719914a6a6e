#pragma once

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "alohastab/errors.hpp"
#include "alohastab/meanfield.hpp"
#include "alohastab/region.hpp"
#include "alohastab/rng.hpp"

namespace alohastab::sim {

struct BernoulliArrival {
    double lambda = 0.0;  // arrival probability per slot
};

// Inter-arrival gaps are i.i.d. geometric with success parameter q_fast or
// q_slow, each picked with probability 1/2. The two parameters are the
// (a, 1-a)-split rates rescaled by a common factor so the mixture mean gap
// is exactly 1/lambda; the split still inflates the gap variance.
struct HyperGeometricArrival {
    double lambda = 0.0;
    double a = 0.5;
    double scale() const noexcept { return 0.5 * (1.0 / a + 1.0 / (1.0 - a)); }
    double q_fast() const noexcept { return scale() * a * lambda; }
    double q_slow() const noexcept { return scale() * (1.0 - a) * lambda; }
};

struct MarkovModulatedArrival {
    meanfield::Kernel kernel;  // fast: one-step matrix; slow: jump rates (applied as K/N per slot)
    std::vector<double> g;
    double lambda = 0.0;
    meanfield::ModulationSpeed speed = meanfield::ModulationSpeed::Fast;
};

using ArrivalModel =
    std::variant<BernoulliArrival, HyperGeometricArrival, MarkovModulatedArrival>;

double mean_rate(const ArrivalModel& model);
ArrivalModel with_rate(const ArrivalModel& model, double lambda);

// Standalone single-user arrival driver; produces exactly the sequence that
// run_sim feeds user `user_index` under the same seed. `n_users` fixes the
// 1/N scaling of slow modulating kernels.
class ArrivalProcess {
public:
    ArrivalProcess(const ArrivalModel& model, std::uint64_t seed,
                   std::size_t user_index = 0, std::size_t n_users = 1);
    ~ArrivalProcess();
    ArrivalProcess(ArrivalProcess&&) noexcept;
    ArrivalProcess& operator=(ArrivalProcess&&) noexcept;

    bool step();  // advance one slot; true if a packet arrived
    std::uint64_t slot() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct UserSpec {
    double p = 0.5;  // attempt probability, in (0,1]
    ArrivalModel arrival;
};

struct FiniteSystemSpec {
    std::vector<UserSpec> users;
    double b = 1.0;  // per-slot channel availability
    int sigma = 1;   // slots per transmission attempt (1 = pure Aloha)
    std::vector<std::size_t> saturated;  // users forced always-nonempty

    void validate() const;
    bool is_saturated(std::size_t i) const;
};

enum class ChannelPhase : std::uint8_t { Idle, HeldSuccess, HeldCollision };

// One replication worth of mutable simulation state, including the event
// counters that a report is assembled from. All randomness is derived from
// (seed, stream, counter); nothing else is stochastic.
struct SimState {
    std::uint64_t t = 0;
    std::uint64_t seed = 0;

    std::vector<std::uint64_t> buffer;
    std::vector<std::uint64_t> next_arrival;   // slot of next arrival (gap-driven models)
    std::vector<std::uint64_t> arrival_draws;  // inversion draws consumed per user
    std::vector<std::uint32_t> env;            // modulated arrival environment state

    ChannelPhase phase = ChannelPhase::Idle;
    int hold_remaining = 0;
    std::size_t holder = 0;

    std::vector<std::uint64_t> arrivals;
    std::vector<std::uint64_t> departures;
    std::uint64_t idle_slots = 0;
    std::uint64_t blocked_slots = 0;
    std::uint64_t success_starts = 0;
    std::uint64_t collision_starts = 0;
    std::uint64_t held_success_slots = 0;
    std::uint64_t held_collision_slots = 0;
};

SimState make_sim_state(const FiniteSystemSpec& spec, std::uint64_t seed);

// Advance one slot. Order within the slot: channel hold bookkeeping (a
// success hold delivers its departure on expiry), else contention on an
// available slot, then arrivals. A packet arriving in slot t first contends
// in slot t+1.
void slot_step(SimState& state, const FiniteSystemSpec& spec);

struct BacklogTrace {
    std::uint64_t checkpoint_interval = 0;
    std::vector<std::uint64_t> slot;                 // checkpoint slot numbers
    std::vector<std::uint64_t> total;                // total backlog
    std::vector<std::vector<std::uint64_t>> per_user;  // [checkpoint][user]
};

struct SimReport {
    std::uint64_t slots = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> arrivals;
    std::vector<std::uint64_t> departures;
    std::vector<std::uint64_t> final_backlog;
    std::uint64_t idle_slots = 0;
    std::uint64_t blocked_slots = 0;
    std::uint64_t success_starts = 0;
    std::uint64_t collision_starts = 0;
    double empty_slot_fraction = 0.0;
    double collision_fraction = 0.0;  // fraction of slots consumed by collisions
    BacklogTrace trace;
};

struct RunOptions {
    std::uint64_t checkpoint_interval = 0;  // 0 => slots/1000, at least 1
    // Route sigma == 1 through the general CSMA stepper instead of the
    // dedicated Aloha loop; both must produce bit-identical reports.
    bool force_general_path = false;
};

// Deterministic given (spec, slots, seed). Per-user conservation
// (arrivals = departures + final backlog) is checked and must hold exactly.
SimReport run_sim(const FiniteSystemSpec& spec, std::uint64_t slots,
                  std::uint64_t seed, const RunOptions& opts = {});

enum class DriftVerdict { Stable, Unstable, Inconclusive };

const char* to_string(DriftVerdict v) noexcept;

struct DriftReport {
    double slope = 0.0;     // packets per slot, least squares on the trace's second half
    double slope_se = 0.0;  // standard error of the slope
    DriftVerdict verdict = DriftVerdict::Inconclusive;
    double max_backlog_second_half = 0.0;
    double backlog_cap = 0.0;
};

// Unstable: slope > 0.02 * total_lambda and slope > 4 standard errors.
// Stable:   slope < 0.01 * total_lambda and the second-half backlog stays
//           under 50 * sqrt(slots) * total_lambda.
// Anything else is Inconclusive. Requires at least 20 checkpoints.
DriftReport drift_test(const BacklogTrace& trace, double total_lambda);

struct SStarOptions {
    std::uint64_t slots = 10'000'000;
    int replications = 3;
    int max_extra_replications = 3;  // extra runs when a probe is inconclusive
    double rel_resolution = 0.01;    // stop when half-width < rel_resolution * s
    int max_probes = 64;
    bool verify_bracket = false;
    std::uint64_t checkpoint_interval = 0;
};

struct SStarEstimate {
    double s_hat = 0.0;
    double half_width = 0.0;
    bool inconclusive = false;  // probe budget exhausted before the bracket closed
    int probes = 0;
};

// Bisection on the total rate s with lambda_i = s * alpha_i. Each probe is
// decided by the majority drift verdict over replications (replication r of
// any probe uses seed + r); persistent ties fall back to the mean slope
// sign. Deterministic given the seed.
SStarEstimate estimate_sstar_sim(const region::Direction& alpha,
                                 const FiniteSystemSpec& tmpl, double s_low,
                                 double s_high, std::uint64_t seed,
                                 const SStarOptions& opts = {});

}  // namespace alohastab::sim
