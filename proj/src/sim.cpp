#include "alohastab/sim.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <future>
#include <limits>
#include <string>
#include <utility>

namespace alohastab::sim {

namespace {

constexpr std::uint64_t kNoArrival = std::numeric_limits<std::uint64_t>::max();
constexpr std::uint64_t kInitCounter = std::numeric_limits<std::uint64_t>::max();

// Stream ids: one per (user, purpose), plus the channel availability stream.
constexpr std::uint64_t kAvailStream = 1;
std::uint64_t stream_of(std::size_t user, std::uint64_t purpose) {
    return (static_cast<std::uint64_t>(user) + 2) * 8 + purpose;
}
constexpr std::uint64_t kGapValue = 0;
constexpr std::uint64_t kGapBranch = 1;
constexpr std::uint64_t kAttempt = 2;
constexpr std::uint64_t kEnv = 3;

enum class ArrivalKind : std::uint8_t { None, Gap, Modulated };

struct ArrivalParams {
    ArrivalKind kind = ArrivalKind::None;
    // Gap-driven (Bernoulli or two-point geometric mixture):
    double q1 = 0.0;
    double q2 = 0.0;
    bool mixture = false;
    // Modulated:
    double lambda = 0.0;
    std::vector<double> g;
    std::vector<std::vector<double>> row_cum;  // one-step cumulative transition rows
    std::vector<double> pi;
};

// One-step transition rows of the modulating chain as consumed per slot:
// the slow jump-rate kernel becomes probabilities K(a,a')/n_users.
std::vector<std::vector<double>> one_step_rows(const MarkovModulatedArrival& m,
                                               std::size_t n_users) {
    const std::size_t a_dim = m.kernel.size();
    std::vector<std::vector<double>> rows(a_dim, std::vector<double>(a_dim, 0.0));
    for (std::size_t a = 0; a < a_dim; ++a) {
        if (m.speed == meanfield::ModulationSpeed::Fast) {
            rows[a] = m.kernel[a];
        } else {
            double stay = 1.0;
            for (std::size_t a2 = 0; a2 < a_dim; ++a2) {
                if (a2 == a) continue;
                rows[a][a2] = m.kernel[a][a2] / static_cast<double>(n_users);
                stay -= rows[a][a2];
            }
            if (stay < 0.0) {
                throw ValidationError(
                    "slow kernel rates too large for the per-slot 1/N scaling");
            }
            rows[a][a] = stay;
        }
        // cumulative for inversion sampling
        double cum = 0.0;
        for (std::size_t a2 = 0; a2 < a_dim; ++a2) {
            cum += rows[a][a2];
            rows[a][a2] = cum;
        }
        rows[a][a_dim - 1] = 1.0;
    }
    return rows;
}

ArrivalParams make_arrival_params(const ArrivalModel& model, std::size_t n_users) {
    ArrivalParams out;
    if (const auto* b = std::get_if<BernoulliArrival>(&model)) {
        if (b->lambda > 0.0) {
            out.kind = ArrivalKind::Gap;
            out.q1 = out.q2 = b->lambda;
        }
    } else if (const auto* h = std::get_if<HyperGeometricArrival>(&model)) {
        if (h->lambda > 0.0) {
            out.kind = ArrivalKind::Gap;
            out.mixture = true;
            out.q1 = h->q_fast();
            out.q2 = h->q_slow();
        }
    } else {
        const auto& m = std::get<MarkovModulatedArrival>(model);
        out.kind = ArrivalKind::Modulated;
        out.lambda = m.lambda;
        out.g = m.g;
        out.row_cum = one_step_rows(m, n_users);
        out.pi = meanfield::kernel_stationary(m.kernel, m.speed);
    }
    return out;
}

std::uint32_t sample_index(const std::vector<double>& cum, double u) {
    std::uint32_t i = 0;
    while (i + 1 < cum.size() && u >= cum[i]) ++i;
    return i;
}

std::uint64_t draw_gap(const ArrivalParams& ap, const CounterRng& value_rng,
                       const CounterRng& branch_rng, std::uint64_t index) {
    double q = ap.q1;
    if (ap.mixture && branch_rng.uniform(index) >= 0.5) q = ap.q2;
    return geometric_gap(value_rng.uniform(index), q);
}

// Per-user per-slot arrival update shared by the system stepper and the
// standalone ArrivalProcess. Returns true when a packet arrives in slot t.
bool arrival_tick(const ArrivalParams& ap, const CounterRng& value_rng,
                  const CounterRng& branch_rng, const CounterRng& env_rng,
                  std::uint64_t t, std::uint64_t& next_arrival,
                  std::uint64_t& draws, std::uint32_t& env) {
    switch (ap.kind) {
        case ArrivalKind::None:
            return false;
        case ArrivalKind::Gap: {
            if (t != next_arrival) return false;
            next_arrival = t + draw_gap(ap, value_rng, branch_rng, draws++);
            return true;
        }
        case ArrivalKind::Modulated: {
            env = sample_index(ap.row_cum[env], env_rng.uniform(t));
            return value_rng.uniform(t) < ap.lambda * ap.g[env];
        }
    }
    return false;
}

void init_arrival(const ArrivalParams& ap, const CounterRng& value_rng,
                  const CounterRng& branch_rng, const CounterRng& env_rng,
                  std::uint64_t& next_arrival, std::uint64_t& draws,
                  std::uint32_t& env) {
    next_arrival = kNoArrival;
    draws = 0;
    env = 0;
    if (ap.kind == ArrivalKind::Gap) {
        next_arrival = draw_gap(ap, value_rng, branch_rng, draws++) - 1;
    } else if (ap.kind == ArrivalKind::Modulated) {
        // initial environment from the stationary law
        std::vector<double> cum(ap.pi.size());
        double c = 0.0;
        for (std::size_t i = 0; i < ap.pi.size(); ++i) {
            c += ap.pi[i];
            cum[i] = c;
        }
        cum.back() = 1.0;
        env = sample_index(cum, env_rng.uniform(kInitCounter));
    }
}

struct StepContext {
    const FiniteSystemSpec* spec = nullptr;
    std::size_t n = 0;
    double b = 1.0;
    int sigma = 1;
    CounterRng avail_rng;
    std::vector<CounterRng> attempt_rng, value_rng, branch_rng, env_rng;
    std::vector<ArrivalParams> arrivals;
    std::vector<std::uint8_t> saturated;
    std::vector<double> p;
};

StepContext make_context(const FiniteSystemSpec& spec, std::uint64_t seed) {
    StepContext cx;
    cx.spec = &spec;
    cx.n = spec.users.size();
    cx.b = spec.b;
    cx.sigma = spec.sigma;
    cx.avail_rng = CounterRng(seed, kAvailStream);
    cx.saturated.assign(cx.n, 0);
    for (std::size_t i : spec.saturated) cx.saturated[i] = 1;
    cx.p.resize(cx.n);
    for (std::size_t i = 0; i < cx.n; ++i) {
        cx.p[i] = spec.users[i].p;
        cx.attempt_rng.push_back(CounterRng(seed, stream_of(i, kAttempt)));
        cx.value_rng.push_back(CounterRng(seed, stream_of(i, kGapValue)));
        cx.branch_rng.push_back(CounterRng(seed, stream_of(i, kGapBranch)));
        cx.env_rng.push_back(CounterRng(seed, stream_of(i, kEnv)));
        cx.arrivals.push_back(cx.saturated[i]
                                  ? ArrivalParams{}
                                  : make_arrival_params(spec.users[i].arrival, cx.n));
    }
    return cx;
}

inline void depart(SimState& st, const StepContext& cx, std::size_t i) {
    ++st.departures[i];
    if (!cx.saturated[i]) {
        assert(st.buffer[i] > 0);
        --st.buffer[i];
    }
}

inline void do_arrivals(SimState& st, const StepContext& cx, std::uint64_t t) {
    for (std::size_t i = 0; i < cx.n; ++i) {
        if (arrival_tick(cx.arrivals[i], cx.value_rng[i], cx.branch_rng[i],
                         cx.env_rng[i], t, st.next_arrival[i], st.arrival_draws[i],
                         st.env[i])) {
            ++st.buffer[i];
            ++st.arrivals[i];
        }
    }
}

// Contention on an open slot: 0 attempts, a single attempter, or a collision.
inline void contend(SimState& st, const StepContext& cx, std::uint64_t t) {
    std::size_t attempter = 0;
    int count = 0;
    for (std::size_t i = 0; i < cx.n; ++i) {
        if (!cx.saturated[i] && st.buffer[i] == 0) continue;
        if (cx.attempt_rng[i].uniform(t) < cx.p[i]) {
            attempter = i;
            ++count;
        }
    }
    if (count == 0) {
        ++st.idle_slots;
    } else if (count == 1) {
        ++st.success_starts;
        if (cx.sigma == 1) {
            depart(st, cx, attempter);
        } else {
            st.phase = ChannelPhase::HeldSuccess;
            st.holder = attempter;
            st.hold_remaining = cx.sigma - 1;
        }
    } else {
        ++st.collision_starts;
        if (cx.sigma > 1) {
            st.phase = ChannelPhase::HeldCollision;
            st.hold_remaining = cx.sigma - 1;
        }
    }
}

// General stepper: handles channel holds of length sigma.
void step_general(SimState& st, const StepContext& cx) {
    const std::uint64_t t = st.t;
    if (st.phase != ChannelPhase::Idle) {
        if (st.phase == ChannelPhase::HeldSuccess) {
            ++st.held_success_slots;
        } else {
            ++st.held_collision_slots;
        }
        if (--st.hold_remaining == 0) {
            if (st.phase == ChannelPhase::HeldSuccess) depart(st, cx, st.holder);
            st.phase = ChannelPhase::Idle;
        }
    } else if (cx.b < 1.0 && cx.avail_rng.uniform(t) >= cx.b) {
        ++st.blocked_slots;
    } else {
        contend(st, cx, t);
    }
    do_arrivals(st, cx, t);
    st.t = t + 1;
}

// Dedicated pure-Aloha stepper (sigma == 1): no channel state at all.
void step_aloha(SimState& st, const StepContext& cx) {
    const std::uint64_t t = st.t;
    if (cx.b < 1.0 && cx.avail_rng.uniform(t) >= cx.b) {
        ++st.blocked_slots;
    } else {
        contend(st, cx, t);
    }
    do_arrivals(st, cx, t);
    st.t = t + 1;
}

}  // namespace

double mean_rate(const ArrivalModel& model) {
    return std::visit([](const auto& m) { return m.lambda; }, model);
}

ArrivalModel with_rate(const ArrivalModel& model, double lambda) {
    ArrivalModel out = model;
    std::visit([&](auto& m) { m.lambda = lambda; }, out);
    return out;
}

bool FiniteSystemSpec::is_saturated(std::size_t i) const {
    return std::find(saturated.begin(), saturated.end(), i) != saturated.end();
}

void FiniteSystemSpec::validate() const {
    if (users.empty()) throw ValidationError("system needs at least one user");
    if (!(b > 0.0 && b <= 1.0)) throw ValidationError("b must lie in (0,1]");
    if (sigma < 1) throw ValidationError("sigma must be >= 1");
    for (std::size_t i : saturated) {
        if (i >= users.size()) throw ValidationError("saturated index out of range");
    }
    for (const auto& u : users) {
        if (!(u.p > 0.0 && u.p <= 1.0)) {
            throw ValidationError("attempt probabilities must lie in (0,1]");
        }
        if (const auto* bern = std::get_if<BernoulliArrival>(&u.arrival)) {
            if (!(bern->lambda >= 0.0 && bern->lambda <= 1.0)) {
                throw ValidationError("Bernoulli rate must lie in [0,1]");
            }
        } else if (const auto* h = std::get_if<HyperGeometricArrival>(&u.arrival)) {
            if (!(h->a > 0.0 && h->a < 1.0)) {
                throw ValidationError("mixture parameter a must lie in (0,1)");
            }
            if (!(h->lambda >= 0.0)) throw ValidationError("rate must be >= 0");
            if (h->lambda > 0.0 && (h->q_fast() > 1.0 || h->q_slow() > 1.0)) {
                throw ValidationError(
                    "rate too high for the mixture: a success parameter exceeds 1");
            }
        } else {
            const auto& m = std::get<MarkovModulatedArrival>(u.arrival);
            if (m.kernel.empty()) throw ValidationError("modulated model needs a kernel");
            for (const auto& row : m.kernel) {
                if (row.size() != m.kernel.size()) {
                    throw ValidationError("kernel must be square");
                }
            }
            if (m.g.size() != m.kernel.size()) {
                throw ValidationError("weights must match kernel dimension");
            }
            auto pi = meanfield::kernel_stationary(m.kernel, m.speed);
            double mean_weight = 0.0;
            for (std::size_t a = 0; a < m.g.size(); ++a) {
                if (!(m.g[a] >= 0.0)) throw ValidationError("weights must be >= 0");
                if (m.lambda * m.g[a] > 1.0) {
                    throw ValidationError("modulated arrival probability exceeds 1");
                }
                mean_weight += pi[a] * m.g[a];
            }
            if (std::abs(mean_weight - 1.0) > 1e-9) {
                throw ValidationError(
                    "weights must average to 1 under the stationary law");
            }
            one_step_rows(m, users.size());  // validates the 1/N scaling
        }
    }
}

struct ArrivalProcess::Impl {
    ArrivalParams params;
    CounterRng value_rng, branch_rng, env_rng;
    std::uint64_t slot = 0;
    std::uint64_t next_arrival = kNoArrival;
    std::uint64_t draws = 0;
    std::uint32_t env = 0;
};

ArrivalProcess::ArrivalProcess(const ArrivalModel& model, std::uint64_t seed,
                               std::size_t user_index, std::size_t n_users)
    : impl_(std::make_unique<Impl>()) {
    impl_->params = make_arrival_params(model, n_users);
    impl_->value_rng = CounterRng(seed, stream_of(user_index, kGapValue));
    impl_->branch_rng = CounterRng(seed, stream_of(user_index, kGapBranch));
    impl_->env_rng = CounterRng(seed, stream_of(user_index, kEnv));
    init_arrival(impl_->params, impl_->value_rng, impl_->branch_rng, impl_->env_rng,
                 impl_->next_arrival, impl_->draws, impl_->env);
}

ArrivalProcess::~ArrivalProcess() = default;
ArrivalProcess::ArrivalProcess(ArrivalProcess&&) noexcept = default;
ArrivalProcess& ArrivalProcess::operator=(ArrivalProcess&&) noexcept = default;

bool ArrivalProcess::step() {
    const bool arrived =
        arrival_tick(impl_->params, impl_->value_rng, impl_->branch_rng,
                     impl_->env_rng, impl_->slot, impl_->next_arrival,
                     impl_->draws, impl_->env);
    ++impl_->slot;
    return arrived;
}

std::uint64_t ArrivalProcess::slot() const noexcept { return impl_->slot; }

SimState make_sim_state(const FiniteSystemSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t n = spec.users.size();
    SimState st;
    st.seed = seed;
    st.buffer.assign(n, 0);
    st.next_arrival.assign(n, kNoArrival);
    st.arrival_draws.assign(n, 0);
    st.env.assign(n, 0);
    st.arrivals.assign(n, 0);
    st.departures.assign(n, 0);
    StepContext cx = make_context(spec, seed);
    for (std::size_t i = 0; i < n; ++i) {
        init_arrival(cx.arrivals[i], cx.value_rng[i], cx.branch_rng[i], cx.env_rng[i],
                     st.next_arrival[i], st.arrival_draws[i], st.env[i]);
    }
    return st;
}

void slot_step(SimState& state, const FiniteSystemSpec& spec) {
    StepContext cx = make_context(spec, state.seed);
    step_general(state, cx);
}

const char* to_string(DriftVerdict v) noexcept {
    switch (v) {
        case DriftVerdict::Stable: return "Stable";
        case DriftVerdict::Unstable: return "Unstable";
        case DriftVerdict::Inconclusive: return "Inconclusive";
    }
    return "?";
}

SimReport run_sim(const FiniteSystemSpec& spec, std::uint64_t slots,
                  std::uint64_t seed, const RunOptions& opts) {
    if (slots < 1) throw ValidationError("slots must be >= 1");
    SimState st = make_sim_state(spec, seed);
    StepContext cx = make_context(spec, seed);
    const std::size_t n = cx.n;

    std::uint64_t checkpoint = opts.checkpoint_interval;
    if (checkpoint == 0) checkpoint = std::max<std::uint64_t>(1, slots / 1000);

    SimReport rep;
    rep.slots = slots;
    rep.seed = seed;
    rep.trace.checkpoint_interval = checkpoint;

    auto record = [&]() {
        rep.trace.slot.push_back(st.t);
        std::uint64_t total = 0;
        std::vector<std::uint64_t> row(n);
        for (std::size_t i = 0; i < n; ++i) {
            row[i] = st.buffer[i];
            total += st.buffer[i];
        }
        rep.trace.total.push_back(total);
        rep.trace.per_user.push_back(std::move(row));
    };

    const bool general = spec.sigma > 1 || opts.force_general_path;
    while (st.t < slots) {
        if (general) {
            step_general(st, cx);
        } else {
            step_aloha(st, cx);
        }
        if (st.t % checkpoint == 0) record();
    }
    if (rep.trace.slot.empty() || rep.trace.slot.back() != slots) record();

    rep.arrivals = st.arrivals;
    rep.departures = st.departures;
    rep.final_backlog = st.buffer;
    rep.idle_slots = st.idle_slots;
    rep.blocked_slots = st.blocked_slots;
    rep.success_starts = st.success_starts;
    rep.collision_starts = st.collision_starts;
    rep.empty_slot_fraction = static_cast<double>(st.idle_slots) / slots;
    rep.collision_fraction =
        static_cast<double>(st.collision_starts + st.held_collision_slots) / slots;

    for (std::size_t i = 0; i < n; ++i) {
        if (cx.saturated[i]) continue;
        if (st.arrivals[i] != st.departures[i] + st.buffer[i]) {
            throw std::logic_error("conservation violated for user " +
                                   std::to_string(i));
        }
    }
    return rep;
}

DriftReport drift_test(const BacklogTrace& trace, double total_lambda) {
    const std::size_t n = trace.slot.size();
    if (n < 20) {
        throw ValidationError("trace too short: need at least 20 checkpoints");
    }
    const std::size_t start = n / 2;
    const std::size_t m = n - start;

    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = start; i < n; ++i) {
        mean_x += static_cast<double>(trace.slot[i]);
        mean_y += static_cast<double>(trace.total[i]);
    }
    mean_x /= m;
    mean_y /= m;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = start; i < n; ++i) {
        const double dx = static_cast<double>(trace.slot[i]) - mean_x;
        sxx += dx * dx;
        sxy += dx * (static_cast<double>(trace.total[i]) - mean_y);
    }
    DriftReport rep;
    rep.slope = sxy / sxx;
    double ss_res = 0.0;
    for (std::size_t i = start; i < n; ++i) {
        const double fit = mean_y + rep.slope * (static_cast<double>(trace.slot[i]) - mean_x);
        const double r = static_cast<double>(trace.total[i]) - fit;
        ss_res += r * r;
    }
    rep.slope_se = m > 2 ? std::sqrt(ss_res / (m - 2) / sxx) : 0.0;

    for (std::size_t i = start; i < n; ++i) {
        rep.max_backlog_second_half =
            std::max(rep.max_backlog_second_half, static_cast<double>(trace.total[i]));
    }
    const double total_slots = static_cast<double>(trace.slot.back());
    rep.backlog_cap = 50.0 * std::sqrt(total_slots) * total_lambda;

    constexpr double kTheta = 0.02;
    if (total_lambda == 0.0) {
        rep.verdict = rep.max_backlog_second_half == 0.0 ? DriftVerdict::Stable
                                                         : DriftVerdict::Inconclusive;
        return rep;
    }
    if (rep.slope > kTheta * total_lambda && rep.slope > 4.0 * rep.slope_se) {
        rep.verdict = DriftVerdict::Unstable;
    } else if (rep.slope < 0.5 * kTheta * total_lambda &&
               rep.max_backlog_second_half < rep.backlog_cap) {
        rep.verdict = DriftVerdict::Stable;
    } else {
        rep.verdict = DriftVerdict::Inconclusive;
    }
    return rep;
}

SStarEstimate estimate_sstar_sim(const region::Direction& alpha,
                                 const FiniteSystemSpec& tmpl, double s_low,
                                 double s_high, std::uint64_t seed,
                                 const SStarOptions& opts) {
    if (alpha.size() != tmpl.users.size()) {
        throw ValidationError("direction does not match the system");
    }
    if (!(s_low >= 0.0 && s_low < s_high)) {
        throw ValidationError("bracket invalid: need 0 <= s_low < s_high");
    }
    if (opts.replications < 1) throw ValidationError("need at least one replication");

    auto spec_at = [&](double s) {
        FiniteSystemSpec sp = tmpl;
        for (std::size_t i = 0; i < sp.users.size(); ++i) {
            sp.users[i].arrival = with_rate(sp.users[i].arrival, s * alpha[i]);
        }
        sp.validate();
        return sp;
    };

    RunOptions run_opts;
    run_opts.checkpoint_interval = opts.checkpoint_interval;

    auto probe = [&](double s) {
        const FiniteSystemSpec sp = spec_at(s);
        std::vector<DriftReport> reports;
        int next_rep = 0;
        auto launch = [&](int count) {
            std::vector<std::future<DriftReport>> futs;
            futs.reserve(count);
            for (int k = 0; k < count; ++k) {
                const std::uint64_t rep_seed = seed + static_cast<std::uint64_t>(next_rep++);
                futs.push_back(std::async(std::launch::async, [&sp, &run_opts, s,
                                                               rep_seed, &opts]() {
                    auto rep = run_sim(sp, opts.slots, rep_seed, run_opts);
                    return drift_test(rep.trace, s);
                }));
            }
            for (auto& f : futs) reports.push_back(f.get());
        };

        launch(opts.replications);
        while (true) {
            int stable = 0, unstable = 0;
            double slope_sum = 0.0;
            for (const auto& r : reports) {
                stable += r.verdict == DriftVerdict::Stable;
                unstable += r.verdict == DriftVerdict::Unstable;
                slope_sum += r.slope;
            }
            if (stable > unstable) return DriftVerdict::Stable;
            if (unstable > stable) return DriftVerdict::Unstable;
            if (static_cast<int>(reports.size()) >=
                opts.replications + opts.max_extra_replications) {
                return slope_sum > 0.0 ? DriftVerdict::Unstable : DriftVerdict::Stable;
            }
            launch(1);
        }
    };

    SStarEstimate est;
    if (opts.verify_bracket) {
        if (probe(s_low) != DriftVerdict::Stable) {
            throw ValidationError("bracket invalid: low endpoint not Stable");
        }
        if (probe(s_high) != DriftVerdict::Unstable) {
            throw ValidationError("bracket invalid: high endpoint not Unstable");
        }
        est.probes += 2;
    }

    double lo = s_low, hi = s_high;
    while (est.probes < opts.max_probes) {
        const double mid = 0.5 * (lo + hi);
        if (0.5 * (hi - lo) < opts.rel_resolution * mid) break;
        ++est.probes;
        if (probe(mid) == DriftVerdict::Stable) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    est.s_hat = 0.5 * (lo + hi);
    est.half_width = 0.5 * (hi - lo);
    est.inconclusive = est.half_width >= opts.rel_resolution * est.s_hat;
    return est;
}

}  // namespace alohastab::sim
