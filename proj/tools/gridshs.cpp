#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "gridshs/app.hpp"
#include "gridshs/errors.hpp"

using namespace gridshs;
using app::json;
namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string config;
    std::string grid;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> replicas;
    std::optional<int> workers;
    std::optional<double> tau;
};

void apply(app::RunConfig& cfg, const Overrides& o) {
    if (!o.grid.empty()) {
        cfg.grid = o.grid;
        cfg.system.clear();
        cfg.raw["grid"] = o.grid;
        cfg.raw.erase("system");
    }
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.raw["sim"]["seed"] = *o.seed;
    }
    if (o.replicas) {
        if (*o.replicas < 1) throw ConfigError("--replicas must be at least 1");
        cfg.replicas = *o.replicas;
        cfg.raw["sim"]["replicas"] = *o.replicas;
    }
    if (o.workers) {
        if (*o.workers < 1) throw ConfigError("--workers must be at least 1");
        cfg.workers = *o.workers;
    }
    if (o.tau) {
        if (!(*o.tau > 0.0)) throw ConfigError("--tau must be positive");
        cfg.tau = *o.tau;
        cfg.raw["observer"]["tau"] = *o.tau;
    }
}

app::RunConfig config_from(const Overrides& o) {
    app::RunConfig cfg = o.config.empty() ? app::parse_config(json::object()) : app::load_config(o.config);
    apply(cfg, o);
    return cfg;
}

std::string out_dir(const Overrides& o, const app::RunConfig& cfg, const std::string& fallback) {
    if (!o.out.empty()) return o.out;
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    return (fs::path(app::default_out_dir()) / fallback).string();
}

bool wants(const app::RunConfig& cfg, const std::string& fmt) {
    return std::find(cfg.formats.begin(), cfg.formats.end(), fmt) != cfg.formats.end();
}

void print_matrix(const std::string& name, const Matrix& M) {
    std::cout << name << " =\n";
    Eigen::IOFormat f(6, 0, "  ", "\n", "  [", "]");
    std::cout << M.format(f) << "\n";
}

void print_analysis(const app::AnalysisResult& r) {
    const auto& c = r.convergence;
    std::cout << "observability: combined rank " << r.observability.rank << " of " << r.observability.n << "\n";
    for (const auto& d : r.design.obs.decomps)
        std::cout << "  scenario " << d.scenario << ": p = " << d.probability << ", observable dim " << d.n_i << "\n";
    for (const auto& note : r.design.notes) std::cout << "note: " << note << "\n";
    std::cout << "gamma_exact = " << c.gamma_exact << " (gamma1 = " << c.gamma1 << ", gamma2 = " << c.gamma2 << ")\n"
              << "rho(E[Lambda^T Lambda]) = " << c.rho_M << (c.stable ? " (mean-square stable)" : " (unstable)") << "\n";
    if (r.tau_max.unbounded)
        std::cout << "tau_max: unbounded in scan range [0, " << r.tau_max.scan_window << "] s\n";
    else
        std::cout << "tau_max = " << r.tau_max.value << " s (q_max = " << r.tau_max.q_max << ")\n";
    if (r.steady)
        std::cout << "mu_inf = " << r.steady->mu_inf << ", mu_state = " << r.steady->mu_state << "\n";
    else
        std::cout << "steady state: " << r.steady_error << "\n";
}

json manifest(const std::string& command, const app::RunConfig& cfg) {
    json m;
    m["command"] = command;
    m["config"] = cfg.raw;
    m["workers"] = cfg.workers;
    return m;
}

int cmd_linearize(const Overrides& o) {
    app::RunConfig cfg = config_from(o);
    if (cfg.grid.empty()) throw ConfigError("linearize needs --grid or a config with 'grid'");
    const app::SystemModel sys = app::resolve_system(cfg);
    const grid::LinearizedSystem& lin = *sys.linearized;
    print_matrix("A", lin.A);
    std::cout << "eigenvalues:";
    for (const Complex& z : numerics::eigenvalues(lin.A)) std::cout << " " << z;
    std::cout << "\n";
    const auto& eq = lin.equilibrium;
    for (std::size_t i = 0; i < lin.dynamic_bus_ids.size(); ++i)
        std::cout << "equilibrium delta_" << lin.dynamic_bus_ids[i] << " = " << eq.state(2 * i) << " rad\n";
    if (eq.balanced.slack_index()) std::cout << "slack real power = " << eq.network.slack_P << " pu\n";
    if (eq.reference_bus)
        std::cout << "reference bus " << *eq.reference_bus << ": P_in adjusted by " << eq.reference_adjustment
                  << " pu\n";
    const std::string dir = out_dir(o, cfg, "linearize");
    json m = manifest("linearize", cfg);
    m["linearization"] = app::to_json(lin);
    app::write_json((fs::path(dir) / "linearization.json").string(), m);
    std::cout << "wrote " << (fs::path(dir) / "linearization.json").string() << "\n";
    return 0;
}

int cmd_analyze(const Overrides& o, bool design_only) {
    app::RunConfig cfg = config_from(o);
    const app::SystemModel sys = app::resolve_system(cfg);
    const shs::ScenarioSet set = app::build_scenarios(cfg, sys);
    const std::string dir = out_dir(o, cfg, design_only ? "design" : "analyze");
    json m = manifest(design_only ? "design" : "analyze", cfg);
    m["scenarios"] = app::to_json(set);
    if (design_only) {
        const analysis::Design d = analysis::design_observer(app::observer_spec(cfg, sys, set));
        json decs = json::array();
        for (const auto& dec : d.obs.decomps) {
            decs.push_back(app::to_json(dec));
            std::cout << "scenario " << dec.scenario << ": observable dim " << dec.n_i;
            if (dec.has_gain) std::cout << ", |L| = " << numerics::operator_norm(dec.L);
            std::cout << "\n";
        }
        for (const auto& note : d.notes) std::cout << "note: " << note << "\n";
        m["decompositions"] = decs;
        m["notes"] = d.notes;
        m["Phi"] = app::to_json(d.obs.Phi);
        m["F"] = app::to_json(d.obs.F);
        app::write_json((fs::path(dir) / "design.json").string(), m);
        std::cout << "wrote " << (fs::path(dir) / "design.json").string() << "\n";
        return 0;
    }
    const app::AnalysisResult r = app::run_analysis(cfg, sys, set);
    print_analysis(r);
    m["analysis"] = app::to_json(r);
    app::write_json((fs::path(dir) / "analysis.json").string(), m);
    std::cout << "wrote " << (fs::path(dir) / "analysis.json").string() << "\n";
    return 0;
}

void write_outputs(const std::string& dir, const std::vector<app::RunOutcome>& runs, json m, const std::string& title) {
    std::vector<std::pair<std::string, std::string>> csvs;
    json run_list = json::array();
    for (const app::RunOutcome& r : runs) {
        const std::string csv = r.label + ".csv";
        if (wants(r.cfg, "csv")) {
            app::write_text((fs::path(dir) / csv).string(), app::trajectory_csv(r.trajectory));
            csvs.emplace_back(r.label, csv);
        }
        run_list.push_back({{"label", r.label},
                            {"config", r.cfg.raw},
                            {"replica_seeds", r.trajectory.seeds},
                            {"analysis", app::to_json(r.analysis)},
                            {"csv", csv}});
    }
    m["runs"] = run_list;
    const bool any_json = std::any_of(runs.begin(), runs.end(), [](const auto& r) { return wants(r.cfg, "json"); });
    const bool any_plot = std::any_of(runs.begin(), runs.end(), [](const auto& r) { return wants(r.cfg, "gnuplot"); });
    if (any_json) app::write_json((fs::path(dir) / "manifest.json").string(), m);
    if (any_plot && !csvs.empty()) app::write_text((fs::path(dir) / "plot.gp").string(), app::gnuplot_script(csvs, title));
    std::cout << "wrote outputs to " << dir << "\n";
}

int cmd_simulate(const Overrides& o) {
    app::RunConfig cfg = config_from(o);
    const app::RunOutcome r = app::execute_run("trajectory", cfg);
    print_analysis(r.analysis);
    const auto& t = r.trajectory;
    std::cout << "replicas = " << t.replicas << ", K = " << t.K << ", mean ||e||^2: k=0 " << t.mean_err_sq(0)
              << ", k=" << t.K << " " << t.mean_err_sq(t.K) << "\n";
    write_outputs(out_dir(o, cfg, "simulate"), {r}, manifest("simulate", cfg), "estimation error");
    return 0;
}

int cmd_reproduce(const std::string& name, const Overrides& o) {
    const app::Experiment ex = app::load_experiment(name);
    std::cout << name << ": " << ex.description << "\n";
    std::vector<app::RunOutcome> runs;
    for (auto [label, cfg] : ex.runs) {
        apply(cfg, o);
        std::cout << "run " << label << " (" << cfg.replicas << " replicas, K = " << cfg.K << ")\n";
        runs.push_back(app::execute_run(label, cfg));
        const auto& c = runs.back().analysis.convergence;
        std::cout << "  gamma_exact = " << c.gamma_exact << ", rho_M = " << c.rho_M;
        if (runs.back().analysis.steady) std::cout << ", mu_inf = " << runs.back().analysis.steady->mu_inf;
        std::cout << "\n";
    }
    const app::CheckResult check = app::check_experiment(name, runs);
    for (const std::string& line : check.lines) std::cout << line << "\n";
    std::cout << (check.passed ? "CHECK PASSED" : "CHECK FAILED") << "\n";
    json m;
    m["command"] = "reproduce";
    m["experiment"] = name;
    m["description"] = ex.description;
    m["check"] = {{"passed", check.passed}, {"lines", check.lines}, {"details", check.details}};
    const std::string dir = o.out.empty() ? (fs::path(app::default_out_dir()) / name).string() : o.out;
    write_outputs(dir, runs, m, name);
    return check.passed ? 0 : 3;
}

void add_common(CLI::App* sub, Overrides& o, bool needs_config) {
    auto* opt = sub->add_option("--config,-c", o.config, "run configuration (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--out,-o", o.out, "output directory");
    sub->add_option("--workers", o.workers, "worker threads");
}

void add_sim(CLI::App* sub, Overrides& o) {
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--replicas", o.replicas, "Monte Carlo replicas");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Coordinated observers for power grids under random sensor contingencies"};
    cli.require_subcommand(1);
    Overrides o;
    std::string experiment;

    auto* lin = cli.add_subcommand("linearize", "equilibrium and linearized swing model of a grid");
    add_common(lin, o, false);
    lin->add_option("--grid,-g", o.grid, "builtin grid (two_bus, ieee5, ieee33) or file");

    auto* ana = cli.add_subcommand("analyze", "contraction factor, tau_max and steady-state variance");
    add_common(ana, o, true);
    ana->add_option("--grid,-g", o.grid, "override the config's grid");
    ana->add_option("--tau", o.tau, "sampling interval override (s)");

    auto* des = cli.add_subcommand("design", "per-scenario decompositions and observer gains");
    add_common(des, o, true);
    des->add_option("--grid,-g", o.grid, "override the config's grid");
    des->add_option("--tau", o.tau, "sampling interval override (s)");

    auto* sim = cli.add_subcommand("simulate", "Monte Carlo estimation-error trajectories");
    add_common(sim, o, true);
    add_sim(sim, o);
    sim->add_option("--grid,-g", o.grid, "override the config's grid");
    sim->add_option("--tau", o.tau, "sampling interval override (s)");

    auto* rep = cli.add_subcommand("reproduce", "run a canned experiment and check its expected behaviour");
    rep->add_option("name", experiment, "fig3, fig4, fig5, fig6, fig7 or fig8")->required();
    rep->add_option("--out,-o", o.out, "output directory");
    rep->add_option("--workers", o.workers, "worker threads");
    add_sim(rep, o);

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*lin) return cmd_linearize(o);
        if (*ana) return cmd_analyze(o, false);
        if (*des) return cmd_analyze(o, true);
        if (*sim) return cmd_simulate(o);
        if (*rep) return cmd_reproduce(experiment, o);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
