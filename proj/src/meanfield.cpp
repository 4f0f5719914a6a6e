#include "alohastab/meanfield.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

namespace alohastab::meanfield {

namespace {

constexpr double kRootResidual = 1e-12;
constexpr double kVerdictTol = 1e-9;

void validate_kernel_shape(const Kernel& kernel, const std::vector<double>& g) {
    const std::size_t a = kernel.size();
    for (const auto& row : kernel) {
        if (row.size() != a) throw ValidationError("kernel must be square");
    }
    if (g.size() != a) {
        throw ValidationError("modulation weights must match kernel dimension");
    }
}

// Stationary distribution of a CTMC given by off-diagonal jump rates.
std::vector<double> ctmc_stationary(const Kernel& kernel) {
    const std::size_t a = kernel.size();
    if (a == 1) return {1.0};
    Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(a, a);
    for (std::size_t i = 0; i < a; ++i) {
        double out = 0.0;
        for (std::size_t j = 0; j < a; ++j) {
            if (i == j) continue;
            if (kernel[i][j] < 0.0) throw ValidationError("jump rates must be >= 0");
            gen(i, j) = kernel[i][j];
            out += kernel[i][j];
        }
        gen(i, i) = -out;
    }
    // pi * gen = 0 with sum(pi) = 1: replace the last balance equation.
    Eigen::MatrixXd m(a, a);
    m.leftCols(a - 1) = gen.leftCols(a - 1);
    m.col(a - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(a);
    rhs(a - 1) = 1.0;
    Eigen::VectorXd pi = m.transpose().partialPivLu().solve(rhs);
    std::vector<double> out(a);
    for (std::size_t i = 0; i < a; ++i) {
        if (pi(i) < -1e-10) throw NumericalError("kernel has no stationary distribution");
        out[i] = std::max(pi(i), 0.0);
    }
    return out;
}

// Stationary distribution of a DTMC given by a one-step transition matrix.
std::vector<double> dtmc_stationary(const Kernel& kernel) {
    const std::size_t a = kernel.size();
    if (a == 1) return {1.0};
    Eigen::MatrixXd p(a, a);
    for (std::size_t i = 0; i < a; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < a; ++j) {
            if (kernel[i][j] < 0.0) {
                throw ValidationError("transition probabilities must be >= 0");
            }
            p(i, j) = kernel[i][j];
            row_sum += kernel[i][j];
        }
        if (std::abs(row_sum - 1.0) > 1e-9) {
            throw ValidationError("one-step kernel rows must sum to 1");
        }
    }
    Eigen::MatrixXd gen = p - Eigen::MatrixXd::Identity(a, a);
    Eigen::MatrixXd m(a, a);
    m.leftCols(a - 1) = gen.leftCols(a - 1);
    m.col(a - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(a);
    rhs(a - 1) = 1.0;
    Eigen::VectorXd pi = m.transpose().partialPivLu().solve(rhs);
    std::vector<double> out(a);
    for (std::size_t i = 0; i < a; ++i) out[i] = std::max(pi(i), 0.0);
    return out;
}

double gamma_of(const ClassModel& model, const std::vector<double>& y,
                const std::vector<std::size_t>& offset, int k_max) {
    double g = 0.0;
    for (std::size_t v = 0; v < model.num_classes(); ++v) {
        double empty = 0.0;
        for (std::size_t a = 0; a < model.env_dim(v); ++a) {
            empty += y[offset[v] + a * (k_max + 1)];
        }
        g += model.cls(v).beta * model.cls(v).p * (1.0 - empty);
    }
    return g;
}

struct Layout {
    int k_max = 0;
    std::vector<std::size_t> offset;
    std::size_t tail_offset = 0;
};

Layout layout_of(const ClassModel& model, const MeanFieldState& s) {
    if (s.num_classes() != model.num_classes()) {
        throw ValidationError("state does not match model");
    }
    Layout l;
    l.k_max = s.k_max();
    l.offset.resize(model.num_classes());
    for (std::size_t v = 0; v < model.num_classes(); ++v) {
        if (s.env_dim(v) != model.env_dim(v)) {
            throw ValidationError("state does not match model");
        }
        l.offset[v] = s.block_offset(v);
    }
    l.tail_offset = s.tail_offset();
    return l;
}

void derivative_into(const ClassModel& model, const Layout& l,
                     const std::vector<double>& y, std::vector<double>& dy) {
    const int kk = l.k_max;
    const double gamma = gamma_of(model, y, l.offset, kk);
    std::fill(dy.begin(), dy.end(), 0.0);

    for (std::size_t v = 0; v < model.num_classes(); ++v) {
        const std::size_t a_dim = model.env_dim(v);
        const double c = model.b() * model.cls(v).p * std::exp(-gamma);
        double tail_flow = 0.0;
        for (std::size_t a = 0; a < a_dim; ++a) {
            const std::size_t base = l.offset[v] + a * (kk + 1);
            const double lam = model.arrival_rate(v, a);
            dy[base] += -lam * y[base] + c * y[base + 1];
            for (int k = 1; k < kk; ++k) {
                dy[base + k] += lam * (y[base + k - 1] - y[base + k]) +
                                c * (y[base + k + 1] - y[base + k]);
            }
            // Arrival flow out of the top level is dropped and tracked.
            dy[base + kk] += lam * y[base + kk - 1] - c * y[base + kk];
            tail_flow += lam * y[base + kk];
        }
        if (a_dim > 1) {
            const Kernel& kernel = model.cls(v).kernel;
            for (std::size_t a = 0; a < a_dim; ++a) {
                const std::size_t from = l.offset[v] + a * (kk + 1);
                for (std::size_t a2 = 0; a2 < a_dim; ++a2) {
                    if (a2 == a) continue;
                    const double rate = kernel[a][a2];
                    if (rate == 0.0) continue;
                    const std::size_t to = l.offset[v] + a2 * (kk + 1);
                    for (int k = 0; k <= kk; ++k) {
                        dy[to + k] += rate * y[from + k];
                        dy[from + k] -= rate * y[from + k];
                    }
                }
            }
        }
        dy[l.tail_offset + v] = tail_flow;
    }
}

}  // namespace

std::vector<double> kernel_stationary(const Kernel& kernel, ModulationSpeed speed) {
    if (kernel.empty()) return {1.0};
    return speed == ModulationSpeed::Slow ? ctmc_stationary(kernel)
                                          : dtmc_stationary(kernel);
}

ClassModel::ClassModel(std::vector<ClassSpec> classes, double b)
    : classes_(std::move(classes)), b_(b) {
    if (classes_.empty()) throw ValidationError("model must have at least one class");
    if (!(b_ > 0.0 && b_ <= 1.0)) throw ValidationError("b must lie in (0,1]");

    double beta_sum = 0.0;
    for (auto& c : classes_) {
        if (!(c.beta > 0.0)) throw ValidationError("class fractions must be > 0");
        if (!(c.p > 0.0)) throw ValidationError("attempt rates must be > 0");
        if (!(c.lambda >= 0.0)) throw ValidationError("arrival rates must be >= 0");
        beta_sum += c.beta;
        if (c.kernel.empty()) {
            c.kernel = Kernel{};
            c.g.assign(1, 1.0);
        } else {
            validate_kernel_shape(c.kernel, c.g);
            for (double w : c.g) {
                if (!(w >= 0.0)) throw ValidationError("weights must be >= 0");
            }
        }
    }
    if (std::abs(beta_sum - 1.0) > 1e-9) {
        throw ValidationError("class fractions must sum to 1");
    }

    pi_.resize(classes_.size());
    arrival_rates_.resize(classes_.size());
    env_dim_.resize(classes_.size());
    for (std::size_t v = 0; v < classes_.size(); ++v) {
        const auto& c = classes_[v];
        const std::size_t a = std::max<std::size_t>(c.kernel.size(), 1);
        pi_[v] = a == 1 ? std::vector<double>{1.0}
                        : kernel_stationary(c.kernel, c.speed);
        double mean_weight = 0.0;
        for (std::size_t i = 0; i < a; ++i) mean_weight += pi_[v][i] * c.g[i];
        if (std::abs(mean_weight - 1.0) > 1e-9) {
            throw ValidationError("weights must average to 1 under the stationary law");
        }
        // Fast modulation is averaged out, so its environment collapses.
        if (c.speed == ModulationSpeed::Slow && a > 1) {
            env_dim_[v] = a;
            arrival_rates_[v].resize(a);
            for (std::size_t i = 0; i < a; ++i) {
                arrival_rates_[v][i] = c.lambda * c.g[i];
            }
        } else {
            env_dim_[v] = 1;
            arrival_rates_[v] = {c.lambda};
        }
        total_lambda_ += c.beta * c.lambda;
        zeta_ += c.beta * c.p;
    }
}

MeanFieldState::MeanFieldState(const ClassModel& model, int k_max) : k_max_(k_max) {
    if (k_max < 1) throw ValidationError("k_max must be >= 1");
    const std::size_t n = model.num_classes();
    offset_.resize(n);
    env_dim_.resize(n);
    std::size_t off = 0;
    for (std::size_t v = 0; v < n; ++v) {
        offset_[v] = off;
        env_dim_[v] = model.env_dim(v);
        off += env_dim_[v] * (k_max_ + 1);
    }
    tail_offset_ = off;
    data_.assign(off + n, 0.0);
}

MeanFieldState MeanFieldState::empty(const ClassModel& model, int k_max) {
    return point_mass(model, k_max, 0);
}

MeanFieldState MeanFieldState::point_mass(const ClassModel& model, int k_max, int k0) {
    if (k0 < 0 || k0 > k_max) throw ValidationError("k0 must lie in [0, k_max]");
    MeanFieldState s(model, k_max);
    for (std::size_t v = 0; v < model.num_classes(); ++v) {
        if (model.env_dim(v) == 1) {
            s.q(v, 0, k0) = 1.0;
        } else {
            for (std::size_t a = 0; a < model.env_dim(v); ++a) {
                s.q(v, a, k0) = model.pi(v)[a];
            }
        }
    }
    return s;
}

double MeanFieldState::class_mass(std::size_t v) const {
    const std::size_t n = env_dim_[v] * (k_max_ + 1);
    return std::accumulate(data_.begin() + offset_[v],
                           data_.begin() + offset_[v] + n, 0.0);
}

double MeanFieldState::q_empty(std::size_t v) const {
    double s = 0.0;
    for (std::size_t a = 0; a < env_dim_[v]; ++a) s += q(v, a, 0);
    return s;
}

double MeanFieldState::gamma(const ClassModel& model) const {
    double g = 0.0;
    for (std::size_t v = 0; v < num_classes(); ++v) {
        g += model.cls(v).beta * model.cls(v).p * (1.0 - q_empty(v));
    }
    return g;
}

double MeanFieldState::workload(std::size_t v) const {
    double w = 0.0;
    for (std::size_t a = 0; a < env_dim_[v]; ++a) {
        for (int k = 1; k <= k_max_; ++k) w += static_cast<double>(k) * q(v, a, k);
    }
    return w;
}

void MeanFieldState::normalize() {
    for (std::size_t v = 0; v < num_classes(); ++v) {
        const double mass = class_mass(v);
        if (mass <= 0.0) throw ValidationError("cannot normalize an empty class block");
        const std::size_t n = env_dim_[v] * (k_max_ + 1);
        for (std::size_t i = 0; i < n; ++i) data_[offset_[v] + i] /= mass;
    }
}

std::vector<double> mf_derivative(const ClassModel& model, const MeanFieldState& state) {
    if (state.num_classes() != model.num_classes()) {
        throw ValidationError("state does not match model");
    }
    Layout l = layout_of(model, state);
    std::vector<double> dy(state.data().size());
    derivative_into(model, l, state.data(), dy);
    return dy;
}

Trajectory mf_integrate(const ClassModel& model, const MeanFieldState& q0,
                        double tau_end, const IntegrateOptions& opts) {
    if (!(tau_end > 0.0)) throw ValidationError("tau_end must be > 0");
    if (!(opts.dt > 0.0)) throw ValidationError("dt must be > 0");
    if (q0.num_classes() != model.num_classes()) {
        throw ValidationError("state does not match model");
    }

    const double sample_interval =
        opts.sample_interval > 0.0 ? opts.sample_interval
                                   : std::max(opts.dt, tau_end / 1000.0);
    const std::size_t stride = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(sample_interval / opts.dt)));

    MeanFieldState state = q0;
    Layout l = layout_of(model, state);
    const std::size_t n = state.data().size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);

    std::vector<double> mass0(model.num_classes());
    std::vector<double> tail0(model.num_classes());
    for (std::size_t v = 0; v < model.num_classes(); ++v) {
        mass0[v] = state.class_mass(v);
        tail0[v] = state.tail_mass(v);
    }

    Trajectory traj;
    const double lambda_total = model.total_lambda();

    auto record = [&](double tau) {
        TrajectorySample s;
        s.tau = tau;
        s.gamma = state.gamma(model);
        s.workload_per_class.resize(model.num_classes());
        s.q_empty.resize(model.num_classes());
        for (std::size_t v = 0; v < model.num_classes(); ++v) {
            s.workload_per_class[v] = state.workload(v);
            s.q_empty[v] = state.q_empty(v);
            s.workload += model.cls(v).beta * s.workload_per_class[v];
        }
        derivative_into(model, l, state.data(), k1);
        double dw = 0.0;
        for (std::size_t v = 0; v < model.num_classes(); ++v) {
            double dwv = 0.0;
            for (std::size_t a = 0; a < model.env_dim(v); ++a) {
                const std::size_t base = l.offset[v] + a * (l.k_max + 1);
                for (int k = 1; k <= l.k_max; ++k) {
                    dwv += static_cast<double>(k) * k1[base + k];
                }
            }
            dw += model.cls(v).beta * dwv;
        }
        s.workload_residual = std::abs(dw - (lambda_total - model.b() * xi(s.gamma)));
        traj.max_workload_residual =
            std::max(traj.max_workload_residual, s.workload_residual);

        for (std::size_t v = 0; v < model.num_classes(); ++v) {
            const double drift = std::abs(state.class_mass(v) - mass0[v]);
            traj.max_mass_drift = std::max(traj.max_mass_drift, drift);
            const double tail = state.tail_mass(v) - tail0[v];
            traj.max_tail_mass = std::max(traj.max_tail_mass, tail);
            if (drift > opts.mass_drift_limit) {
                throw NumericalError(
                    "mass conservation breached (drift " + std::to_string(drift) +
                    "); use a smaller dt or a larger k_max");
            }
            if (tail > opts.tail_mass_limit) {
                throw NumericalError(
                    "tail mass " + std::to_string(tail) +
                    " exceeds limit; use a larger k_max or a smaller dt");
            }
        }
        s.state = state;
        traj.samples.push_back(std::move(s));
    };

    auto rk4_step = [&](double h) {
        auto& y = state.data();
        derivative_into(model, l, y, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        derivative_into(model, l, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        derivative_into(model, l, tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
        derivative_into(model, l, tmp, k4);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    };

    record(0.0);
    const std::size_t steps =
        static_cast<std::size_t>(std::ceil(tau_end / opts.dt - 1e-9));
    double tau = 0.0;
    for (std::size_t step = 1; step <= steps; ++step) {
        const double target = std::min(tau_end, static_cast<double>(step) * opts.dt);
        rk4_step(target - tau);
        tau = target;
        if (step % stride == 0 || step == steps) record(tau);
    }
    return traj;
}

GammaRoots gamma_roots(double lambda_total, double b) {
    if (!(b > 0.0 && b <= 1.0)) throw ValidationError("b must lie in (0,1]");
    if (!(lambda_total > 0.0)) throw ValidationError("total load must be > 0");
    const double r = lambda_total / b;
    if (std::abs(r - kInvE) <= 1e-12) return GammaRoots{1.0, 1.0};
    if (r > kInvE) {
        throw NumericalError("supercritical load: lambda/b exceeds 1/e");
    }

    auto bisect = [&](double lo, double hi, bool increasing) {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            const bool below = xi(mid) < r;
            if (below == increasing) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    };

    const double lower = bisect(0.0, 1.0, true);
    const double hi_bracket = std::max(50.0, -2.0 * std::log(r));
    const double upper = bisect(1.0, hi_bracket, false);
    if (std::abs(xi(lower) - r) > kRootResidual ||
        std::abs(xi(upper) - r) > kRootResidual) {
        throw NumericalError("root bisection did not reach requested residual");
    }
    return GammaRoots{lower, upper};
}

const char* to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::GloballyStable: return "GloballyStable";
        case Verdict::Unstable: return "Unstable";
        case Verdict::NotGloballyStable: return "NotGloballyStable";
        case Verdict::Indeterminate: return "Indeterminate";
    }
    return "?";
}

StabilityVerdict classify_stability(const ClassModel& model) {
    StabilityVerdict out;
    out.lambda_total = model.total_lambda();
    out.zeta = model.zeta();

    if (out.lambda_total == 0.0) {
        out.verdict = Verdict::GloballyStable;
        out.gamma_lower = 0.0;
        out.reason = "zero load";
        return out;
    }

    const double r = out.lambda_total / model.b();
    if (std::abs(r - kInvE) <= kVerdictTol) {
        out.verdict = Verdict::Indeterminate;
        out.reason = "total load at the critical value 1/e";
        return out;
    }
    if (r > kInvE) {
        out.verdict = Verdict::Unstable;
        out.reason = "supercritical total load";
        return out;
    }

    const GammaRoots roots = gamma_roots(out.lambda_total, model.b());
    out.gamma_lower = roots.lower;
    out.gamma_upper = roots.upper;

    double min_margin = std::numeric_limits<double>::infinity();
    out.service_margins.resize(model.num_classes());
    for (std::size_t v = 0; v < model.num_classes(); ++v) {
        const auto& c = model.cls(v);
        out.service_margins[v] = model.b() * c.p * std::exp(-roots.lower) - c.lambda;
        min_margin = std::min(min_margin, out.service_margins[v]);
    }

    if (min_margin < -kVerdictTol) {
        out.verdict = Verdict::Unstable;
        out.reason = "a class exceeds its service rate at the lower root";
        return out;
    }
    if (out.zeta - roots.lower < -kVerdictTol) {
        out.verdict = Verdict::Unstable;
        out.reason = "aggregate attempt rate below the lower root";
        return out;
    }
    if (out.zeta - roots.upper > kVerdictTol) {
        out.verdict = Verdict::NotGloballyStable;
        out.reason = "aggregate attempt rate above the upper root";
        return out;
    }
    if (out.zeta - roots.upper < -kVerdictTol && min_margin > kVerdictTol) {
        out.verdict = Verdict::GloballyStable;
        out.reason = "all classes below service at the lower root";
        return out;
    }
    out.verdict = Verdict::Indeterminate;
    out.reason = "a governing comparison is an equality within tolerance";
    return out;
}

std::vector<double> modulated_mm1_stationary(const Kernel& kernel,
                                             const std::vector<double>& g,
                                             double lambda, double capacity,
                                             int k_max) {
    if (k_max < 1) throw ValidationError("k_max must be >= 1");
    if (!(capacity > 0.0)) throw ValidationError("capacity must be > 0");
    if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
    if (lambda / capacity >= 1.0) {
        throw ValidationError("mean load must be < 1");
    }

    const std::size_t a_dim = std::max<std::size_t>(kernel.size(), 1);
    const int levels = k_max + 1;

    if (a_dim == 1) {
        // Truncated geometric, renormalized.
        const double rho = lambda / capacity;
        std::vector<double> q(levels);
        double w = 1.0, sum = 0.0;
        for (int k = 0; k < levels; ++k) {
            q[k] = w;
            sum += w;
            w *= rho;
        }
        for (double& v : q) v /= sum;
        return q;
    }

    validate_kernel_shape(kernel, g);
    using Mat = Eigen::MatrixXd;
    Mat env_gen = Mat::Zero(a_dim, a_dim);
    for (std::size_t i = 0; i < a_dim; ++i) {
        double out = 0.0;
        for (std::size_t j = 0; j < a_dim; ++j) {
            if (i == j) continue;
            env_gen(i, j) = kernel[i][j];
            out += kernel[i][j];
        }
        env_gen(i, i) = -out;
    }
    Mat arr = Mat::Zero(a_dim, a_dim);
    for (std::size_t i = 0; i < a_dim; ++i) arr(i, i) = lambda * g[i];
    const Mat id = Mat::Identity(a_dim, a_dim);

    // Level recursion pi_k = pi_{k-1} R_k for the truncated chain
    // (arrivals dropped at the top level).
    std::vector<Mat> r(levels);
    r[k_max] = -arr * (env_gen - capacity * id).partialPivLu().inverse();
    for (int k = k_max - 1; k >= 1; --k) {
        Mat core = env_gen - arr - capacity * id + capacity * r[k + 1];
        r[k] = -arr * core.partialPivLu().inverse();
    }

    Mat m0 = env_gen - arr + capacity * r[1];
    Mat c(a_dim, a_dim);
    c.leftCols(a_dim - 1) = m0.leftCols(a_dim - 1);
    c.col(a_dim - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(a_dim);
    rhs(a_dim - 1) = 1.0;
    Eigen::RowVectorXd pi0 =
        c.transpose().partialPivLu().solve(rhs).transpose();

    std::vector<double> out(a_dim * levels, 0.0);
    Eigen::RowVectorXd pik = pi0;
    double total = 0.0;
    for (int k = 0; k < levels; ++k) {
        if (k > 0) pik = pik * r[k];
        for (std::size_t a = 0; a < a_dim; ++a) {
            double value = pik(a);
            if (value < -1e-10) {
                throw NumericalError("stationary solve produced negative mass");
            }
            value = std::max(value, 0.0);
            out[a * levels + k] = value;
            total += value;
        }
    }
    for (double& v : out) v /= total;
    return out;
}

std::vector<FixedPoint> fixed_points(const ClassModel& model, int k_max) {
    std::vector<FixedPoint> out;
    const double lambda_total = model.total_lambda();

    auto finalize = [&](double gamma_target, MeanFieldState state) {
        FixedPoint fp{gamma_target, std::move(state), 0.0, 0.0};
        const double realized = fp.state.gamma(model);
        fp.self_consistency =
            std::abs(xi(realized) - lambda_total / model.b());
        auto dy = mf_derivative(model, fp.state);
        for (std::size_t i = 0; i + model.num_classes() < dy.size(); ++i) {
            fp.derivative_sup_norm = std::max(fp.derivative_sup_norm, std::abs(dy[i]));
        }
        out.push_back(std::move(fp));
    };

    if (lambda_total == 0.0) {
        finalize(0.0, MeanFieldState::empty(model, k_max));
        return out;
    }

    const double r = lambda_total / model.b();
    if (r > kInvE + 1e-12) return out;  // no roots, no fixed points

    GammaRoots roots = gamma_roots(lambda_total, model.b());
    std::vector<double> candidates{roots.lower};
    if (roots.upper > roots.lower) candidates.push_back(roots.upper);

    for (double gamma : candidates) {
        bool feasible = true;
        for (std::size_t v = 0; v < model.num_classes(); ++v) {
            const auto& c = model.cls(v);
            if (!(c.lambda < model.b() * c.p * std::exp(-gamma) * (1.0 - 1e-12))) {
                feasible = false;
                break;
            }
        }
        if (!feasible) continue;

        MeanFieldState state(model, k_max);
        for (std::size_t v = 0; v < model.num_classes(); ++v) {
            const auto& c = model.cls(v);
            const double capacity = model.b() * c.p * std::exp(-gamma);
            if (model.env_dim(v) == 1) {
                auto q = modulated_mm1_stationary(Kernel{}, {1.0}, c.lambda,
                                                  capacity, k_max);
                for (int k = 0; k <= k_max; ++k) state.q(v, 0, k) = q[k];
            } else {
                auto q = modulated_mm1_stationary(c.kernel, c.g, c.lambda,
                                                  capacity, k_max);
                for (std::size_t a = 0; a < model.env_dim(v); ++a) {
                    for (int k = 0; k <= k_max; ++k) {
                        state.q(v, a, k) = q[a * (k_max + 1) + k];
                    }
                }
            }
        }
        finalize(gamma, std::move(state));
    }
    return out;
}

bool stochastically_leq(const MeanFieldState& a, const MeanFieldState& b,
                        double slack) {
    if (a.num_classes() != b.num_classes() || a.k_max() != b.k_max()) {
        throw ValidationError("states have different shapes");
    }
    for (std::size_t v = 0; v < a.num_classes(); ++v) {
        if (a.env_dim(v) != b.env_dim(v)) {
            throw ValidationError("states have different shapes");
        }
        for (std::size_t e = 0; e < a.env_dim(v); ++e) {
            double cum_a = 0.0, cum_b = 0.0;
            for (int k = 0; k <= a.k_max(); ++k) {
                cum_a += a.q(v, e, k);
                cum_b += b.q(v, e, k);
                if (cum_a < cum_b - slack) return false;
            }
        }
    }
    return true;
}

}  // namespace alohastab::meanfield
