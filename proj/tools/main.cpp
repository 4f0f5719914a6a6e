// Command-line frontend: stability-region computations, mean-field runs,
// slot-level simulation, and the scripted experiment sweeps. Results go to
// CSV files plus a JSON manifest embedding the resolved configuration and
// seed, so identical invocations produce identical bytes.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "alohastab/experiments.hpp"
#include "alohastab/meanfield.hpp"
#include "alohastab/region.hpp"
#include "alohastab/sim.hpp"

namespace {

using alohastab::NumericalError;
using alohastab::ValidationError;
using nlohmann::json;
namespace region = alohastab::region;
namespace meanfield = alohastab::meanfield;
namespace sim = alohastab::sim;
namespace experiments = alohastab::experiments;

std::string sig5(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.5g", v);
    return buf;
}

std::string full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::filesystem::path default_out_dir() {
    if (const char* env = std::getenv("ALOHASTAB_OUT_DIR")) return env;
    return "out";
}

void expect_keys(const json& j, std::initializer_list<const char*> allowed,
                 const std::string& ctx) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* key : allowed) ok = ok || it.key() == key;
        if (!ok) {
            throw ValidationError("unknown field \"" + it.key() + "\" in " + ctx);
        }
    }
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("config " + path + ": " + e.what());
    }
    return j;
}

meanfield::Kernel parse_kernel(const json& j, const std::string& ctx) {
    if (!j.is_array()) throw ValidationError(ctx + ": kernel must be an array of rows");
    meanfield::Kernel k;
    for (const auto& row : j) k.push_back(row.get<std::vector<double>>());
    return k;
}

sim::ArrivalModel parse_arrival(const json& j, const std::string& ctx) {
    expect_keys(j, {"type", "lambda", "a", "kernel", "g", "speed"}, ctx);
    const std::string type = j.at("type").get<std::string>();
    if (type == "bernoulli") {
        expect_keys(j, {"type", "lambda"}, ctx);
        return sim::BernoulliArrival{j.at("lambda").get<double>()};
    }
    if (type == "hypergeometric") {
        expect_keys(j, {"type", "lambda", "a"}, ctx);
        return sim::HyperGeometricArrival{j.at("lambda").get<double>(),
                                          j.at("a").get<double>()};
    }
    if (type == "modulated") {
        sim::MarkovModulatedArrival m;
        m.lambda = j.at("lambda").get<double>();
        m.kernel = parse_kernel(j.at("kernel"), ctx);
        m.g = j.at("g").get<std::vector<double>>();
        const std::string speed = j.value("speed", "fast");
        if (speed != "fast" && speed != "slow") {
            throw ValidationError(ctx + ": speed must be \"fast\" or \"slow\"");
        }
        m.speed = speed == "slow" ? meanfield::ModulationSpeed::Slow
                                  : meanfield::ModulationSpeed::Fast;
        return m;
    }
    throw ValidationError(ctx + ": unknown arrival type \"" + type + "\"");
}

json arrival_to_json(const sim::ArrivalModel& model) {
    if (const auto* b = std::get_if<sim::BernoulliArrival>(&model)) {
        return json{{"type", "bernoulli"}, {"lambda", b->lambda}};
    }
    if (const auto* h = std::get_if<sim::HyperGeometricArrival>(&model)) {
        return json{{"type", "hypergeometric"}, {"lambda", h->lambda}, {"a", h->a}};
    }
    const auto& m = std::get<sim::MarkovModulatedArrival>(model);
    return json{{"type", "modulated"},
                {"lambda", m.lambda},
                {"kernel", m.kernel},
                {"g", m.g},
                {"speed", m.speed == meanfield::ModulationSpeed::Slow ? "slow" : "fast"}};
}

sim::FiniteSystemSpec parse_system(const json& j) {
    expect_keys(j, {"users", "b", "sigma", "saturated"}, "system config");
    sim::FiniteSystemSpec spec;
    spec.b = j.value("b", 1.0);
    spec.sigma = j.value("sigma", 1);
    if (j.contains("saturated")) {
        spec.saturated = j.at("saturated").get<std::vector<std::size_t>>();
    }
    if (!j.contains("users")) throw ValidationError("system config: missing \"users\"");
    for (const auto& u : j.at("users")) {
        expect_keys(u, {"p", "arrival"}, "user");
        spec.users.push_back(sim::UserSpec{u.at("p").get<double>(),
                                           parse_arrival(u.at("arrival"), "arrival")});
    }
    spec.validate();
    return spec;
}

json system_to_json(const sim::FiniteSystemSpec& spec) {
    json users = json::array();
    for (const auto& u : spec.users) {
        users.push_back(json{{"p", u.p}, {"arrival", arrival_to_json(u.arrival)}});
    }
    return json{{"users", users},
                {"b", spec.b},
                {"sigma", spec.sigma},
                {"saturated", spec.saturated}};
}

meanfield::ClassModel parse_model(const json& j) {
    expect_keys(j, {"classes", "b"}, "model config");
    if (!j.contains("classes")) throw ValidationError("model config: missing \"classes\"");
    std::vector<meanfield::ClassSpec> classes;
    for (const auto& c : j.at("classes")) {
        expect_keys(c, {"beta", "p", "lambda", "speed", "kernel", "g"}, "class");
        meanfield::ClassSpec spec;
        spec.beta = c.value("beta", 1.0);
        spec.p = c.at("p").get<double>();
        spec.lambda = c.at("lambda").get<double>();
        const std::string speed = c.value("speed", "fast");
        if (speed != "fast" && speed != "slow") {
            throw ValidationError("class: speed must be \"fast\" or \"slow\"");
        }
        spec.speed = speed == "slow" ? meanfield::ModulationSpeed::Slow
                                     : meanfield::ModulationSpeed::Fast;
        if (c.contains("kernel")) {
            spec.kernel = parse_kernel(c.at("kernel"), "class kernel");
            spec.g = c.at("g").get<std::vector<double>>();
        }
        classes.push_back(std::move(spec));
    }
    return meanfield::ClassModel(std::move(classes), j.value("b", 1.0));
}

json model_to_json(const meanfield::ClassModel& model) {
    json classes = json::array();
    for (std::size_t v = 0; v < model.num_classes(); ++v) {
        const auto& c = model.cls(v);
        json jc{{"beta", c.beta},
                {"p", c.p},
                {"lambda", c.lambda},
                {"speed", c.speed == meanfield::ModulationSpeed::Slow ? "slow" : "fast"}};
        if (!c.kernel.empty()) {
            jc["kernel"] = c.kernel;
            jc["g"] = c.g;
        }
        classes.push_back(std::move(jc));
    }
    return json{{"classes", classes}, {"b", model.b()}};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << text;
}

// -------------------------------------------------------------------------
// region subcommands

struct RegionArgs {
    std::vector<double> p, alpha, lambda;
    int sigma = 1;
};

void add_region(CLI::App& app, RegionArgs& args) {
    auto* cmd = app.add_subcommand("region", "stability/capacity region computations");
    cmd->require_subcommand(1);

    auto* sstar = cmd->add_subcommand("sstar", "maximum rate along a direction");
    sstar->add_option("--p", args.p, "attempt probabilities")->delimiter(',')->required();
    sstar->add_option("--alpha", args.alpha, "traffic shares")->delimiter(',')->required();
    sstar->callback([&args]() {
        auto sat = region::shat_star(region::Direction::normalized(args.alpha),
                                     region::AttemptVector(args.p));
        std::cout << "s_star = " << sig5(sat.s_star) << "\n";
        std::cout << "i_star = " << sat.i_star + 1 << "\n";
        std::cout << "rho_star =";
        for (std::size_t i = 0; i < sat.rho_star.size(); ++i) {
            std::cout << " " << sig5(sat.rho_star[i]);
        }
        std::cout << "\n";
    });

    auto* member = cmd->add_subcommand("member", "membership test for a rate vector");
    member->add_option("--p", args.p, "attempt probabilities")->delimiter(',')->required();
    member->add_option("--lambda", args.lambda, "rate vector")->delimiter(',')->required();
    member->callback([&args]() {
        region::AttemptVector p(args.p);
        const bool inside = region::approx_region_contains(args.lambda, p);
        std::cout << (inside ? "inside" : "outside") << "\n";
        if (args.lambda.size() == 2) {
            std::cout << "exact_two_user: "
                      << (region::exact_region2_contains(args.lambda, p) ? "inside"
                                                                         : "outside")
                      << "\n";
        }
    });

    auto* capacity = cmd->add_subcommand("capacity", "solve for attempt probabilities");
    capacity->add_option("--lambda", args.lambda, "rate vector")->delimiter(',')->required();
    capacity->callback([&args]() {
        region::CapacitySolveReport rep;
        auto p = region::capacity_region_solve(args.lambda, &rep);
        if (!p) {
            std::cout << "none (residual " << sig5(rep.residual) << " after "
                      << rep.iterations << " iterations)\n";
            return;
        }
        std::cout << "p =";
        for (double v : p->values()) std::cout << " " << sig5(v);
        std::cout << "\n";
    });

    auto* csma = cmd->add_subcommand("csma-sstar", "CSMA boundary rate along a direction");
    csma->add_option("--p", args.p, "attempt probabilities")->delimiter(',')->required();
    csma->add_option("--alpha", args.alpha, "traffic shares")->delimiter(',')->required();
    csma->add_option("--sigma", args.sigma, "slots per transmission")->required();
    csma->callback([&args]() {
        auto sat = region::csma_shat_star(region::Direction::normalized(args.alpha),
                                          region::AttemptVector(args.p),
                                          region::CsmaParams(args.sigma));
        std::cout << "s_star = " << sig5(sat.s_star) << "\n";
        std::cout << "i_star = " << sat.i_star + 1 << "\n";
        std::cout << "utilization = " << sig5(sat.s_star * args.sigma) << "\n";
    });
}

// -------------------------------------------------------------------------
// meanfield subcommands

struct MeanFieldArgs {
    double lambda = 0.0, b = 1.0;
    std::string config;
    std::vector<double> beta, p, lambda_v;
    double tau_end = 200.0, dt = 0.01;
    int k_max = 200;
    std::string start = "empty";
    std::string out;
};

meanfield::ClassModel model_from_args(const MeanFieldArgs& args) {
    if (!args.config.empty()) return parse_model(load_json(args.config));
    if (args.p.empty()) {
        throw ValidationError("provide --config or inline --p/--lambda-v flags");
    }
    std::vector<meanfield::ClassSpec> classes;
    for (std::size_t v = 0; v < args.p.size(); ++v) {
        meanfield::ClassSpec c;
        c.beta = v < args.beta.size() ? args.beta[v]
                                      : 1.0 / static_cast<double>(args.p.size());
        c.p = args.p[v];
        c.lambda = v < args.lambda_v.size() ? args.lambda_v[v] : 0.0;
        classes.push_back(c);
    }
    return meanfield::ClassModel(std::move(classes), args.b);
}

void add_meanfield(CLI::App& app, MeanFieldArgs& args) {
    auto* cmd = app.add_subcommand("meanfield", "mean-field roots, ODEs, fixed points");
    cmd->require_subcommand(1);

    auto* roots = cmd->add_subcommand("roots", "roots of gamma exp(-gamma) = lambda/b");
    roots->add_option("--lambda", args.lambda, "total load")->required();
    roots->add_option("--b", args.b, "slot availability");
    roots->callback([&args]() {
        auto r = meanfield::gamma_roots(args.lambda, args.b);
        std::cout << sig5(r.lower) << ", " << sig5(r.upper) << "\n";
    });

    auto add_model_flags = [&args](CLI::App* sub) {
        sub->add_option("--config", args.config, "model config JSON");
        sub->add_option("--beta", args.beta, "class fractions")->delimiter(',');
        sub->add_option("--p", args.p, "class attempt rates")->delimiter(',');
        sub->add_option("--lambda-v", args.lambda_v, "class arrival rates")->delimiter(',');
        sub->add_option("--b", args.b, "slot availability");
    };

    auto* classify = cmd->add_subcommand("classify", "stability classification");
    add_model_flags(classify);
    classify->callback([&args]() {
        auto verdict = meanfield::classify_stability(model_from_args(args));
        std::cout << to_string(verdict.verdict) << " (" << verdict.reason << ")\n";
        if (verdict.gamma_lower) {
            std::cout << "gamma_lower = " << sig5(*verdict.gamma_lower) << "\n";
        }
        if (verdict.gamma_upper) {
            std::cout << "gamma_upper = " << sig5(*verdict.gamma_upper) << "\n";
        }
        std::cout << "zeta = " << sig5(verdict.zeta)
                  << ", lambda = " << sig5(verdict.lambda_total) << "\n";
    });

    auto* integrate = cmd->add_subcommand("integrate", "integrate the Kolmogorov system");
    add_model_flags(integrate);
    integrate->add_option("--tau-end", args.tau_end, "horizon in scaled seconds");
    integrate->add_option("--dt", args.dt, "step size");
    integrate->add_option("--k-max", args.k_max, "buffer truncation level");
    integrate->add_option("--start", args.start, "empty | heavy | lower | upper");
    integrate->add_option("--out", args.out, "trajectory CSV path");
    integrate->callback([&args]() {
        auto model = model_from_args(args);
        meanfield::MeanFieldState q0 = meanfield::MeanFieldState::empty(model, args.k_max);
        if (args.start == "heavy") {
            q0 = meanfield::MeanFieldState::point_mass(model, args.k_max, args.k_max / 2);
        } else if (args.start == "lower" || args.start == "upper") {
            auto points = meanfield::fixed_points(model, args.k_max);
            const bool want_upper = args.start == "upper";
            if (points.empty() || (want_upper && points.size() < 2)) {
                throw ValidationError("requested fixed point does not exist");
            }
            q0 = points[want_upper ? 1 : 0].state;
        } else if (args.start != "empty") {
            throw ValidationError("unknown start state: " + args.start);
        }
        meanfield::IntegrateOptions opts;
        opts.dt = args.dt;
        auto traj = meanfield::mf_integrate(model, q0, args.tau_end, opts);
        const auto& last = traj.samples.back();
        std::cout << "gamma(tau_end) = " << sig5(last.gamma) << "\n";
        std::cout << "W(tau_end) = " << sig5(last.workload) << "\n";
        std::cout << "max workload residual = " << sig5(traj.max_workload_residual)
                  << "\n";
        if (!args.out.empty()) {
            std::string csv = "tau,gamma,W";
            for (std::size_t v = 0; v < model.num_classes(); ++v) {
                csv += ",q_empty_" + std::to_string(v + 1);
            }
            csv += "\n";
            for (const auto& s : traj.samples) {
                csv += full(s.tau) + "," + full(s.gamma) + "," + full(s.workload);
                for (double q : s.q_empty) csv += "," + full(q);
                csv += "\n";
            }
            write_file(args.out, csv);
            json manifest{{"command", "meanfield integrate"},
                          {"model", model_to_json(model)},
                          {"tau_end", args.tau_end},
                          {"dt", args.dt},
                          {"k_max", args.k_max},
                          {"start", args.start},
                          {"output", args.out}};
            write_file(args.out + ".manifest.json", manifest.dump(2) + "\n");
            std::cout << "trajectory written to " << args.out << "\n";
        }
    });

    auto* fixed = cmd->add_subcommand("fixed-points", "fixed points of the system");
    add_model_flags(fixed);
    fixed->add_option("--k-max", args.k_max, "buffer truncation level");
    fixed->callback([&args]() {
        auto points = meanfield::fixed_points(model_from_args(args), args.k_max);
        if (points.empty()) {
            std::cout << "no fixed points\n";
            return;
        }
        for (const auto& fp : points) {
            std::cout << "gamma = " << sig5(fp.gamma)
                      << " (self-consistency " << sig5(fp.self_consistency)
                      << ", derivative sup-norm " << sig5(fp.derivative_sup_norm)
                      << ")\n";
        }
    });
}

// -------------------------------------------------------------------------
// simulate subcommands

struct SimulateArgs {
    std::string config;
    std::uint64_t slots = 1'000'000;
    std::uint64_t seed = 1;
    std::uint64_t checkpoint = 0;
    std::string out_dir;
    std::vector<double> alpha, bracket;
    int replications = 3;
    double resolution = 0.01;
};

void add_simulate(CLI::App& app, SimulateArgs& args) {
    auto* cmd = app.add_subcommand("simulate", "slot-level Monte Carlo");
    cmd->require_subcommand(1);

    auto* run = cmd->add_subcommand("run", "single seeded run");
    run->add_option("--config", args.config, "system config JSON")->required();
    run->add_option("--slots", args.slots, "number of slots");
    run->add_option("--seed", args.seed, "run seed");
    run->add_option("--checkpoint-interval", args.checkpoint, "trace interval");
    run->add_option("--out-dir", args.out_dir, "output directory");
    run->callback([&args]() {
        auto spec = parse_system(load_json(args.config));
        sim::RunOptions opts;
        opts.checkpoint_interval = args.checkpoint;
        auto rep = sim::run_sim(spec, args.slots, args.seed, opts);
        for (std::size_t i = 0; i < spec.users.size(); ++i) {
            std::cout << "user " << i + 1 << ": arrivals " << rep.arrivals[i]
                      << ", departures " << rep.departures[i] << ", backlog "
                      << rep.final_backlog[i] << ", rate "
                      << sig5(static_cast<double>(rep.departures[i]) / rep.slots)
                      << "\n";
        }
        std::cout << "empty-slot fraction = " << sig5(rep.empty_slot_fraction) << "\n";
        std::cout << "collision fraction = " << sig5(rep.collision_fraction) << "\n";

        const std::filesystem::path dir = args.out_dir.empty()
                                              ? default_out_dir()
                                              : std::filesystem::path(args.out_dir);
        std::string csv = "checkpoint_slot,total_backlog";
        for (std::size_t i = 0; i < spec.users.size(); ++i) {
            csv += ",backlog_user_" + std::to_string(i + 1);
        }
        csv += "\n";
        for (std::size_t k = 0; k < rep.trace.slot.size(); ++k) {
            csv += std::to_string(rep.trace.slot[k]) + "," +
                   std::to_string(rep.trace.total[k]);
            for (auto v : rep.trace.per_user[k]) csv += "," + std::to_string(v);
            csv += "\n";
        }
        write_file(dir / "trace.csv", csv);
        json manifest{{"command", "simulate run"},
                      {"config", system_to_json(spec)},
                      {"slots", rep.slots},
                      {"seed", rep.seed},
                      {"checkpoint_interval", rep.trace.checkpoint_interval},
                      {"outputs", {"trace.csv"}}};
        write_file(dir / "trace_manifest.json", manifest.dump(2) + "\n");
        std::cout << "trace written to " << (dir / "trace.csv").string() << "\n";
    });

    auto* est = cmd->add_subcommand("estimate-sstar", "bisect the empirical boundary");
    est->add_option("--config", args.config, "system config JSON")->required();
    est->add_option("--alpha", args.alpha, "traffic shares")->delimiter(',')->required();
    est->add_option("--bracket", args.bracket, "total-rate bracket lo,hi")
        ->delimiter(',')
        ->required();
    est->add_option("--slots", args.slots, "slots per replication");
    est->add_option("--replications", args.replications, "replications per probe");
    est->add_option("--seed", args.seed, "base seed");
    est->add_option("--resolution", args.resolution, "relative bracket resolution");
    est->callback([&args]() {
        if (args.bracket.size() != 2) {
            throw ValidationError("--bracket needs exactly two values");
        }
        auto spec = parse_system(load_json(args.config));
        sim::SStarOptions opts;
        opts.slots = args.slots;
        opts.replications = args.replications;
        opts.rel_resolution = args.resolution;
        auto estimate = sim::estimate_sstar_sim(
            region::Direction::normalized(args.alpha), spec, args.bracket[0],
            args.bracket[1], args.seed, opts);
        std::cout << "s_hat = " << sig5(estimate.s_hat) << " +- "
                  << sig5(estimate.half_width) << " (" << estimate.probes
                  << " probes" << (estimate.inconclusive ? ", inconclusive" : "")
                  << ")\n";
    });
}

// -------------------------------------------------------------------------
// experiment subcommands

struct ExperimentArgs {
    std::vector<double> xs;
    std::vector<int> ns;
    std::vector<double> n_values;
    bool simulate = false;
    std::uint64_t slots = 10'000'000;
    int replications = 3;
    std::uint64_t seed = 20240901;
    double resolution = 0.01;
    std::string out_dir;
    double p = 1.0, lambda = 0.2, b = 1.0;
    int k_max = 200;
    double tau_end = 200.0;
};

void add_experiment(CLI::App& app, ExperimentArgs& args) {
    auto* cmd = app.add_subcommand("experiment", "scripted sweeps and demos");
    cmd->require_subcommand(1);

    auto budget_of = [&args]() {
        experiments::SimBudget budget;
        budget.enabled = args.simulate;
        budget.slots = args.slots;
        budget.replications = args.replications;
        budget.seed = args.seed;
        budget.rel_resolution = args.resolution;
        return budget;
    };
    auto out_of = [&args]() -> std::filesystem::path {
        if (args.out_dir.empty()) return default_out_dir();
        return args.out_dir;
    };
    auto add_budget_flags = [&args](CLI::App* sub) {
        sub->add_flag("--simulate", args.simulate, "also locate the boundary by simulation");
        sub->add_option("--slots", args.slots, "slots per replication");
        sub->add_option("--replications", args.replications, "replications per probe");
        sub->add_option("--seed", args.seed, "base seed");
        sub->add_option("--resolution", args.resolution, "relative bracket resolution");
        sub->add_option("--out-dir", args.out_dir, "output directory");
    };

    auto* ex1 = cmd->add_subcommand("example1", "uniform-p three-user sweep");
    ex1->add_option("--x", args.xs, "sweep parameters")->delimiter(',')->required();
    add_budget_flags(ex1);
    ex1->callback([&args, budget_of, out_of]() {
        auto result = experiments::example1(args.xs, budget_of());
        experiments::write_sweep(result, out_of());
        for (const auto& row : result.rows) {
            std::cout << "x = " << sig5(row.param) << " [" << row.arrival
                      << "] s = " << sig5(row.has_sim ? row.s_sim : row.s_solver)
                      << "\n";
        }
    });

    auto* ex2 = cmd->add_subcommand("example2", "heterogeneous-p three-user sweep");
    ex2->add_option("--x", args.xs, "sweep parameters")->delimiter(',')->required();
    add_budget_flags(ex2);
    ex2->callback([&args, budget_of, out_of]() {
        auto result = experiments::example2(args.xs, budget_of());
        experiments::write_sweep(result, out_of());
        for (const auto& row : result.rows) {
            std::cout << "x = " << sig5(row.param) << " [" << row.arrival
                      << "] s = " << sig5(row.has_sim ? row.s_sim : row.s_solver)
                      << " (saturated user " << row.i_star + 1 << ")\n";
        }
    });

    auto* ex3 = cmd->add_subcommand("example3", "growing-N sweep, p_i = 1/N");
    ex3->add_option("--n", args.ns, "user counts")->delimiter(',')->required();
    add_budget_flags(ex3);
    ex3->callback([&args, budget_of, out_of]() {
        auto result = experiments::example3(args.ns, budget_of());
        experiments::write_sweep(result, out_of());
        for (const auto& row : result.rows) {
            std::cout << "N = " << row.param << " [" << row.arrival
                      << "] s = " << sig5(row.has_sim ? row.s_sim : row.s_solver)
                      << "\n";
        }
    });

    auto* finite = cmd->add_subcommand("finite-region", "finite-N convergence of the region");
    finite->add_option("--n", args.n_values, "N values")->delimiter(',')->required();
    finite->add_option("--p", args.p, "class attempt rate");
    finite->add_option("--lambda", args.lambda, "class arrival rate");
    finite->add_option("--b", args.b, "slot availability");
    finite->add_option("--out-dir", args.out_dir, "output directory");
    finite->callback([&args, out_of]() {
        meanfield::ClassSpec cls;
        cls.p = args.p;
        cls.lambda = args.lambda;
        meanfield::ClassModel model({cls}, args.b);
        auto rows = experiments::finite_region_check(model, args.n_values);
        experiments::write_finite_region(rows, out_of());
        for (const auto& row : rows) {
            std::cout << "N = " << row.n << ": s_N = " << sig5(row.s_finite)
                      << ", (s_N - s_inf) * N = " << sig5(row.scaled_gap) << "\n";
        }
    });

    auto* bist = cmd->add_subcommand("bistability", "two-fixed-point demonstration");
    bist->add_option("--p", args.p, "class attempt rate")->default_val(3.0);
    bist->add_option("--lambda", args.lambda, "class arrival rate");
    bist->add_option("--b", args.b, "slot availability");
    bist->add_option("--k-max", args.k_max, "buffer truncation level");
    bist->add_option("--tau-end", args.tau_end, "integration horizon");
    bist->add_option("--out-dir", args.out_dir, "output directory");
    bist->callback([&args, out_of]() {
        meanfield::ClassSpec cls;
        cls.p = args.p;
        cls.lambda = args.lambda;
        meanfield::ClassModel model({cls}, args.b);
        auto report = experiments::bistability_demo(model, args.k_max, args.tau_end);
        experiments::write_bistability(report, out_of());
        std::cout << "fixed points: gamma = " << sig5(report.gamma_lower_fp) << ", "
                  << sig5(report.gamma_upper_fp) << "\n";
        std::cout << "from empty: gamma -> " << sig5(report.gamma_from_empty) << "\n";
        std::cout << "from upper: gamma -> " << sig5(report.gamma_from_upper) << "\n";
        std::cout << "gap = " << sig5(report.gap) << "\n";
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stability analysis for buffered slotted-Aloha and CSMA"};
    app.require_subcommand(1);

    RegionArgs region_args;
    MeanFieldArgs meanfield_args;
    SimulateArgs simulate_args;
    ExperimentArgs experiment_args;
    add_region(app, region_args);
    add_meanfield(app, meanfield_args);
    add_simulate(app, simulate_args);
    add_experiment(app, experiment_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
