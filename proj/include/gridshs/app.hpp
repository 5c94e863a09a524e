#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridshs/analysis.hpp"
#include "gridshs/grid.hpp"
#include "gridshs/sim.hpp"

namespace gridshs::app {

using nlohmann::json;

// Root of the shipped data files; GRIDSHS_DATA_DIR in the environment overrides the build default.
std::string data_dir();
// Default output root: GRIDSHS_OUT_DIR, else "gridshs_out".
std::string default_out_dir();

struct ChannelSpec {
    std::string measure;  // "<bus>.<delta|omega>"
    double rho = 1.0;
    double sigma = 0.0;
};

struct RunConfig {
    json raw;                   // effective document, echoed into manifests
    std::string base_dir = ".";
    std::string grid;           // builtin name or path
    std::string system;         // published system name or path; takes precedence over grid
    std::vector<ChannelSpec> channels;
    shs::SigmaOverrides sigma_overrides;

    double tau = 0.0;
    int n_sub = 64;
    observer::PoleSpec poles;
    observer::Completion completion = observer::Completion::orthonormal;
    observer::Recombination recombination = observer::Recombination::stacked;

    std::optional<std::vector<double>> x0, e0, xhat0;
    int K = 30;
    int replicas = 30;
    std::uint64_t seed = 1;
    int workers = 1;

    std::string out_dir;
    std::vector<std::string> formats{"csv", "json", "gnuplot"};
};

RunConfig parse_config(const json& doc, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

grid::GridModel resolve_grid(const std::string& name_or_path, const std::string& base_dir = ".");

struct SystemModel {
    std::string name;
    Matrix A;
    std::vector<int> dynamic_bus_ids;
    std::optional<grid::LinearizedSystem> linearized;
};

SystemModel load_published_system(const std::string& name_or_path, const std::string& base_dir = ".");
SystemModel resolve_system(const RunConfig& cfg);

// Row selector of "<bus>.<delta|omega>" in the state ordering [delta_1, omega_1, delta_2, ...].
Eigen::RowVectorXd measure_row(const std::string& measure, const std::vector<int>& dynamic_bus_ids);

shs::ScenarioSet build_scenarios(const RunConfig& cfg, const SystemModel& sys);
analysis::ObserverSpec observer_spec(const RunConfig& cfg, const SystemModel& sys, const shs::ScenarioSet& set);
sim::SimConfig sim_config(const RunConfig& cfg, int n);

// ---- reports ----

json to_json(const Matrix& M);
json to_json(const std::vector<Complex>& v);
json to_json(const grid::LinearizedSystem& lin);
json to_json(const shs::ScenarioSet& set);
json to_json(const observer::SubsystemDecomposition& d);
json to_json(const analysis::ConvergenceReport& r);
json to_json(const analysis::TauMax& t);
json to_json(const analysis::SteadyState& s);

void write_text(const std::string& path, const std::string& text);
void write_json(const std::string& path, const json& j);
// CSV columns: k, t_seconds, mean_err_sq, var_err_sq, mean_e1..mean_en.
std::string trajectory_csv(const sim::ErrorTrajectory& t);
std::string gnuplot_script(const std::vector<std::pair<std::string, std::string>>& label_csv, const std::string& title);

// ---- pipeline ----

struct AnalysisResult {
    analysis::Design design;
    observer::ObservabilityReport observability;
    analysis::ConvergenceReport convergence;
    analysis::TauMax tau_max;
    std::optional<analysis::SteadyState> steady;
    std::string steady_error;  // set when the steady state is undefined
};

AnalysisResult run_analysis(const RunConfig& cfg, const SystemModel& sys, const shs::ScenarioSet& set);
json to_json(const AnalysisResult& r);

// ---- canned experiments ----

std::vector<std::string> experiment_names();

struct Experiment {
    std::string name;
    std::string description;
    std::vector<std::pair<std::string, RunConfig>> runs;  // file order
};

Experiment load_experiment(const std::string& name);

struct RunOutcome {
    std::string label;
    RunConfig cfg;
    AnalysisResult analysis;
    sim::ErrorTrajectory trajectory;
};

struct CheckResult {
    bool passed = false;
    std::vector<std::string> lines;
    json details;
};

// First interval at which the trajectory drops below `fraction` of its initial value, interpolated
// log-linearly between intervals; +inf if it never does.
double time_to_fraction(const Vector& traj, double fraction);

RunOutcome execute_run(const std::string& label, const RunConfig& cfg);

CheckResult check_experiment(const std::string& name, const std::vector<RunOutcome>& runs);

}  // namespace gridshs::app
