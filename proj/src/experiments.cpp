#include "alohastab/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <utility>

#include "alohastab/rng.hpp"

namespace alohastab::experiments {

namespace {

using nlohmann::json;

std::string full_precision(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void check_dual_route(double closed_form, double solver, double x) {
    if (std::abs(closed_form - solver) > 1e-10) {
        throw NumericalError("closed form and solver disagree at parameter " +
                             std::to_string(x) + ": " + full_precision(closed_form) +
                             " vs " + full_precision(solver));
    }
}

std::uint64_t row_seed(std::uint64_t base, std::uint64_t index) {
    return CounterRng::mix64(CounterRng::mix64(base) ^ CounterRng::mix64(index + 1));
}

// Largest rate the mixture supports with both success parameters <= 1.
double hypergeometric_rate_cap(const sim::HyperGeometricArrival& h) {
    const double s = h.scale();
    return 0.999 * std::min(1.0 / (s * h.a), 1.0 / (s * (1.0 - h.a)));
}

struct SimPoint {
    double s_hat = 0.0;
    double half_width = 0.0;
};

SimPoint simulate_point(const region::Direction& alpha,
                        const std::vector<double>& p,
                        const sim::ArrivalModel& proto, double s_analytic,
                        const SimBudget& budget, std::uint64_t seed) {
    sim::FiniteSystemSpec spec;
    for (std::size_t i = 0; i < p.size(); ++i) {
        spec.users.push_back(sim::UserSpec{p[i], sim::with_rate(proto, 0.0)});
    }
    double lo = budget.bracket_low * s_analytic;
    double hi = budget.bracket_high * s_analytic;
    if (const auto* h = std::get_if<sim::HyperGeometricArrival>(&proto)) {
        double alpha_max = 0.0;
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            alpha_max = std::max(alpha_max, alpha[i]);
        }
        hi = std::min(hi, hypergeometric_rate_cap(*h) / alpha_max);
    }
    sim::SStarOptions opts;
    opts.slots = budget.slots;
    opts.replications = budget.replications;
    opts.rel_resolution = budget.rel_resolution;
    auto est = sim::estimate_sstar_sim(alpha, spec, lo, hi, seed, opts);
    return SimPoint{est.s_hat, est.half_width};
}

struct ArrivalChoice {
    std::string tag;
    sim::ArrivalModel proto;
};

std::vector<ArrivalChoice> sweep_arrivals() {
    return {{"bernoulli", sim::BernoulliArrival{}},
            {"hypergeometric", sim::HyperGeometricArrival{0.0, 0.2}}};
}

SweepResult run_sweep(std::string name, std::string param_name,
                      const std::vector<double>& params,
                      const std::vector<double>& p,
                      const SimBudget& budget,
                      double (*closed_form)(double),
                      region::Direction (*direction)(double),
                      bool simulate_hypergeometric) {
    SweepResult result;
    result.name = std::move(name);
    result.param_name = std::move(param_name);
    result.budget = budget;

    const region::AttemptVector attempts(p);
    std::uint64_t index = 0;
    for (double x : params) {
        const region::Direction alpha = direction(x);
        const auto sat = region::shat_star(alpha, attempts);
        const double closed = closed_form(x);
        check_dual_route(closed, sat.s_star, x);

        SweepRow analytic;
        analytic.param = x;
        analytic.arrival = "analytic";
        analytic.s_closed_form = closed;
        analytic.s_solver = sat.s_star;
        analytic.i_star = sat.i_star;
        result.rows.push_back(analytic);

        if (!budget.enabled) continue;
        for (const auto& choice : sweep_arrivals()) {
            if (choice.tag == "hypergeometric" && !simulate_hypergeometric) continue;
            SweepRow row = analytic;
            row.arrival = choice.tag;
            row.seed = row_seed(budget.seed, index++);
            const SimPoint pt =
                simulate_point(alpha, p, choice.proto, sat.s_star, budget, row.seed);
            row.s_sim = pt.s_hat;
            row.sim_half_width = pt.half_width;
            row.has_sim = true;
            result.rows.push_back(row);
        }
    }
    return result;
}

json budget_json(const SimBudget& b) {
    return json{{"enabled", b.enabled},
                {"slots", b.slots},
                {"replications", b.replications},
                {"seed", b.seed},
                {"rel_resolution", b.rel_resolution},
                {"bracket_low", b.bracket_low},
                {"bracket_high", b.bracket_high}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
    out << text;
}

}  // namespace

region::Direction sweep_direction(double x) {
    if (!(x > 0.0)) throw ValidationError("sweep parameter x must be > 0");
    return region::Direction::normalized({1.0, 0.5 * (1.0 + 1.0 / x), 1.0 / x});
}

double example1_closed_form(double x) {
    return 4.0 * x * (x + 1.0) / ((2.0 * x + 1.0) * (5.0 * x + 1.0));
}

double example2_closed_form(double x) {
    if (x < kExample2Breakpoint) {
        return 24.3 * (x + 1.0) / ((x + 9.0) * (x + 19.0));
    }
    return 44.1 * (x + 1.0) * (x + 1.0) /
           ((13.0 * x + 7.0) * (7.0 * x + 13.0));
}

region::Direction linear_direction(int n) {
    if (n < 1) throw ValidationError("need at least one user");
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = static_cast<double>(n - i);
    return region::Direction::normalized(std::move(w));
}

double example3_closed_form(int n) {
    if (n < 2) throw ValidationError("closed form needs N >= 2");
    const region::Direction alpha = linear_direction(n);
    double prod = 1.0;
    for (int i = 1; i < n; ++i) {
        prod *= 1.0 - alpha[i] / (alpha[i] + (n - 1) * alpha[0]);
    }
    return prod / (n * alpha[0]);
}

SweepResult example1(const std::vector<double>& xs, const SimBudget& budget) {
    for (double x : xs) {
        if (!(x >= 1.0)) throw ValidationError("example1 requires x >= 1");
    }
    return run_sweep("example1", "x", xs, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, budget,
                     &example1_closed_form, &sweep_direction, true);
}

SweepResult example2(const std::vector<double>& xs, const SimBudget& budget) {
    for (double x : xs) {
        if (!(x >= 0.1 && x <= 10.0)) {
            throw ValidationError("example2 requires x in [0.1, 10]");
        }
    }
    return run_sweep("example2", "x", xs, {0.6, 0.3, 0.1}, budget,
                     &example2_closed_form, &sweep_direction, true);
}

SweepResult example3(const std::vector<int>& ns, const SimBudget& budget) {
    SweepResult result;
    result.name = "example3";
    result.param_name = "N";
    result.budget = budget;

    std::uint64_t index = 0;
    for (int n : ns) {
        if (n < 2) throw ValidationError("example3 requires N >= 2");
        const region::Direction alpha = linear_direction(n);
        const region::AttemptVector attempts(std::vector<double>(n, 1.0 / n));
        const auto sat = region::shat_star(alpha, attempts);
        const double closed = example3_closed_form(n);
        check_dual_route(closed, sat.s_star, n);

        SweepRow analytic;
        analytic.param = n;
        analytic.arrival = "analytic";
        analytic.s_closed_form = closed;
        analytic.s_solver = sat.s_star;
        analytic.i_star = sat.i_star;
        result.rows.push_back(analytic);

        if (budget.enabled && n <= 8) {
            SweepRow row = analytic;
            row.arrival = "bernoulli";
            row.seed = row_seed(budget.seed, index++);
            const SimPoint pt =
                simulate_point(alpha, attempts.values(), sim::BernoulliArrival{},
                               sat.s_star, budget, row.seed);
            row.s_sim = pt.s_hat;
            row.sim_half_width = pt.half_width;
            row.has_sim = true;
            result.rows.push_back(row);
        }
    }
    return result;
}

double gamma_ray_limit(const meanfield::ClassModel& model) {
    std::vector<double> alpha(model.num_classes());
    double sum = 0.0;
    for (std::size_t v = 0; v < model.num_classes(); ++v) {
        alpha[v] = model.cls(v).lambda;
        sum += alpha[v];
        if (!(alpha[v] > 0.0)) {
            throw ValidationError("ray limit needs positive class rates");
        }
    }
    for (double& a : alpha) a /= sum;

    double c_max = std::numeric_limits<double>::infinity();
    double inner = 0.0;
    for (std::size_t v = 0; v < model.num_classes(); ++v) {
        c_max = std::min(c_max, model.cls(v).p / alpha[v]);
        inner += model.cls(v).beta * alpha[v];
    }
    // s(c) = c b exp(-c <beta, alpha>) peaks at c = 1/inner
    const double c = std::min(c_max, 1.0 / inner);
    return c * model.b() * std::exp(-c * inner);
}

double finite_ray_limit(const meanfield::ClassModel& model, double n) {
    std::vector<double> alpha(model.num_classes());
    double sum = 0.0;
    for (std::size_t v = 0; v < model.num_classes(); ++v) {
        alpha[v] = model.cls(v).lambda;
        sum += alpha[v];
        if (!(alpha[v] > 0.0)) {
            throw ValidationError("ray limit needs positive class rates");
        }
        if (!(model.cls(v).p < n)) {
            throw ValidationError("need p_v < N for the finite form");
        }
    }
    for (double& a : alpha) a /= sum;

    double c_max = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < model.num_classes(); ++v) {
        c_max = std::min(c_max, model.cls(v).p / alpha[v] /
                                    (1.0 - model.cls(v).p / n));
    }
    auto log_s_slope = [&](double c) {
        double slope = 1.0 / c;
        for (std::size_t v = 0; v < model.num_classes(); ++v) {
            slope -= model.cls(v).beta * alpha[v] / (1.0 + c * alpha[v] / n);
        }
        return slope;
    };
    double c = c_max;
    if (log_s_slope(c_max) < 0.0) {  // interior maximum
        double lo = 1e-12, hi = c_max;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (log_s_slope(mid) > 0.0 ? lo : hi) = mid;
        }
        c = 0.5 * (lo + hi);
    }
    double s = c * model.b();
    for (std::size_t v = 0; v < model.num_classes(); ++v) {
        s *= std::pow(1.0 + c * alpha[v] / n, -model.cls(v).beta * n);
    }
    return s;
}

std::vector<FiniteRegionRow> finite_region_check(const meanfield::ClassModel& model,
                                                 const std::vector<double>& ns) {
    const double s_limit = gamma_ray_limit(model);
    std::vector<FiniteRegionRow> rows;
    rows.reserve(ns.size());
    for (double n : ns) {
        FiniteRegionRow row;
        row.n = n;
        row.s_finite = finite_ray_limit(model, n);
        row.s_limit = s_limit;
        row.scaled_gap = (row.s_finite - s_limit) * n;
        rows.push_back(row);
    }
    return rows;
}

BistabilityReport bistability_demo(const meanfield::ClassModel& model, int k_max,
                                   double tau_end, double dt) {
    BistabilityReport report;
    report.verdict = meanfield::classify_stability(model);
    if (report.verdict.verdict != meanfield::Verdict::NotGloballyStable) {
        throw ValidationError("bistability demo requires a NotGloballyStable model");
    }
    auto points = meanfield::fixed_points(model, k_max);
    if (points.size() != 2) {
        throw ValidationError("bistability demo requires both fixed points");
    }
    report.gamma_lower_fp = points[0].gamma;
    report.gamma_upper_fp = points[1].gamma;

    meanfield::IntegrateOptions opts;
    opts.dt = dt;
    report.trajectory_empty = meanfield::mf_integrate(
        model, meanfield::MeanFieldState::empty(model, k_max), tau_end, opts);
    report.trajectory_upper =
        meanfield::mf_integrate(model, points[1].state, tau_end, opts);
    report.gamma_from_empty = report.trajectory_empty.samples.back().gamma;
    report.gamma_from_upper = report.trajectory_upper.samples.back().gamma;
    report.gap = std::abs(report.gamma_from_upper - report.gamma_from_empty);
    return report;
}

void write_sweep(const SweepResult& result, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::string csv =
        result.param_name +
        ",arrival,s_closed_form,s_solver,i_star,s_sim,sim_half_width,seed\n";
    for (const auto& row : result.rows) {
        csv += full_precision(row.param) + "," + row.arrival + "," +
               full_precision(row.s_closed_form) + "," +
               full_precision(row.s_solver) + "," + std::to_string(row.i_star + 1) +
               ",";
        csv += row.has_sim ? full_precision(row.s_sim) : std::string("");
        csv += ",";
        csv += row.has_sim ? full_precision(row.sim_half_width) : std::string("");
        csv += "," + (row.has_sim ? std::to_string(row.seed) : std::string("")) + "\n";
    }
    write_text(out_dir / (result.name + ".csv"), csv);

    json manifest{
        {"name", result.name},
        {"param", result.param_name},
        {"budget", budget_json(result.budget)},
        {"tolerances", {{"closed_form_vs_solver", 1e-10}}},
        {"seed_derivation", "splitmix64(splitmix64(base) xor splitmix64(row+1))"},
        {"outputs", {result.name + ".csv"}},
        {"rows", result.rows.size()}};
    write_text(out_dir / (result.name + "_manifest.json"), manifest.dump(2) + "\n");
}

void write_finite_region(const std::vector<FiniteRegionRow>& rows,
                         const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::string csv = "N,s_finite,s_limit,scaled_gap\n";
    for (const auto& row : rows) {
        csv += full_precision(row.n) + "," + full_precision(row.s_finite) + "," +
               full_precision(row.s_limit) + "," + full_precision(row.scaled_gap) +
               "\n";
    }
    write_text(out_dir / "finite_region.csv", csv);
    json manifest{{"name", "finite_region"},
                  {"outputs", {"finite_region.csv"}},
                  {"rows", rows.size()}};
    write_text(out_dir / "finite_region_manifest.json", manifest.dump(2) + "\n");
}

void write_bistability(const BistabilityReport& report,
                       const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::string csv = "tau,gamma_from_empty,gamma_from_upper\n";
    const auto& a = report.trajectory_empty.samples;
    const auto& b = report.trajectory_upper.samples;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
        csv += full_precision(a[i].tau) + "," + full_precision(a[i].gamma) + "," +
               full_precision(b[i].gamma) + "\n";
    }
    write_text(out_dir / "bistability.csv", csv);
    json manifest{{"name", "bistability"},
                  {"gamma_lower_fixed_point", report.gamma_lower_fp},
                  {"gamma_upper_fixed_point", report.gamma_upper_fp},
                  {"gamma_from_empty", report.gamma_from_empty},
                  {"gamma_from_upper", report.gamma_from_upper},
                  {"gap", report.gap},
                  {"outputs", {"bistability.csv"}}};
    write_text(out_dir / "bistability_manifest.json", manifest.dump(2) + "\n");
}

}  // namespace alohastab::experiments
