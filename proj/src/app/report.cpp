#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gridshs/app.hpp"
#include "gridshs/errors.hpp"

namespace gridshs::app {
namespace fs = std::filesystem;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < M.cols(); ++k) row.push_back(number(M(i, k)));
        rows.push_back(row);
    }
    return rows;
}

json to_json(const std::vector<Complex>& v) {
    json out = json::array();
    for (const Complex& z : v) {
        if (z.imag() == 0.0)
            out.push_back(z.real());
        else
            out.push_back(json::array({z.real(), z.imag()}));
    }
    return out;
}

json to_json(const grid::LinearizedSystem& lin) {
    const grid::Equilibrium& eq = lin.equilibrium;
    json j;
    j["A"] = to_json(lin.A);
    j["B1"] = to_json(lin.B1);
    j["B2"] = to_json(lin.B2);
    j["D1"] = to_json(lin.D1);
    j["D2"] = to_json(lin.D2);
    j["dynamic_bus_ids"] = lin.dynamic_bus_ids;
    j["non_dynamic_bus_ids"] = lin.non_dynamic_bus_ids;
    j["eigenvalues"] = to_json(numerics::eigenvalues(lin.A));
    j["finite_difference_step"] = lin.step;
    j["richardson_gap"] = lin.richardson_gap;
    json e;
    e["state"] = std::vector<double>(eq.state.data(), eq.state.data() + eq.state.size());
    json buses = json::array();
    for (std::size_t i = 0; i < eq.balanced.buses.size(); ++i) {
        const grid::Bus& b = eq.balanced.buses[i];
        buses.push_back({{"id", b.id},
                         {"kind", grid::to_string(b.kind)},
                         {"angle_rad", eq.network.angle(static_cast<Eigen::Index>(i))},
                         {"voltage_pu", eq.network.voltage(static_cast<Eigen::Index>(i))},
                         {"P_out_pu", eq.network.P_out(static_cast<Eigen::Index>(i))},
                         {"Q_out_pu", eq.network.Q_out(static_cast<Eigen::Index>(i))},
                         {"P_in_pu", b.P_in}});
    }
    e["buses"] = buses;
    e["slack_P_pu"] = eq.network.slack_P;
    e["slack_Q_pu"] = eq.network.slack_Q;
    e["residual_pu"] = eq.network.residual;
    e["iterations"] = eq.network.iterations;
    if (eq.reference_bus) {
        e["reference_bus"] = *eq.reference_bus;
        e["reference_P_in_adjustment_pu"] = eq.reference_adjustment;
    }
    j["equilibrium"] = e;
    return j;
}

json to_json(const shs::ScenarioSet& set) {
    json out = json::array();
    for (const shs::Scenario& s : set.scenarios)
        out.push_back({{"index", s.index},
                       {"probability", s.probability},
                       {"channels", s.channels},
                       {"C", to_json(s.C)},
                       {"sigma", to_json(s.sigma)}});
    return out;
}

json to_json(const observer::SubsystemDecomposition& d) {
    json j;
    j["scenario"] = d.scenario;
    j["probability"] = d.probability;
    j["observable_dim"] = d.n_i;
    j["W"] = to_json(d.W);
    j["M"] = to_json(d.M);
    j["N"] = to_json(d.N);
    j["T"] = to_json(d.T);
    j["T_inv"] = to_json(d.Tinv);
    j["G"] = to_json(d.G);
    j["F"] = to_json(d.F);
    j["A11"] = to_json(d.A11);
    j["A12"] = to_json(d.A12);
    j["A22"] = to_json(d.A22);
    j["C2"] = to_json(d.C2);
    if (d.has_gain) {
        j["L"] = to_json(d.L);
        j["Ac"] = to_json(d.Ac);
        j["poles"] = to_json(d.poles);
        j["poles_truncated"] = d.poles_truncated;
        j["Ac_eigenvalues"] = to_json(numerics::eigenvalues(d.Ac));
    }
    return j;
}

json to_json(const analysis::ConvergenceReport& r) {
    return {{"gamma_exact", r.gamma_exact}, {"gamma1", r.gamma1},       {"gamma2", r.gamma2},
            {"rho_M", r.rho_M},             {"stable", r.stable},       {"lambda_norms", r.lambda_norms}};
}

json to_json(const analysis::TauMax& t) {
    json j{{"q_max", t.q_max}, {"unbounded", t.unbounded}, {"scan_window_s", t.scan_window}};
    j["tau_max_s"] = t.unbounded ? json("unbounded in scan range") : json(t.value);
    return j;
}

json to_json(const analysis::SteadyState& s) {
    return {{"mu_inf", s.mu_inf}, {"mu_state", s.mu_state}, {"stein_residual", s.residual},
            {"M", to_json(s.M)},  {"Psi", to_json(s.Psi)},  {"W_inf", to_json(s.W_inf)}};
}

void write_text(const std::string& path, const std::string& text) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string trajectory_csv(const sim::ErrorTrajectory& t) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "k,t_seconds,mean_err_sq,var_err_sq";
    for (Eigen::Index i = 0; i < t.mean_state_sq.cols(); ++i) os << ",mean_e" << i + 1;
    os << "\n";
    for (int k = 0; k <= t.K; ++k) {
        os << k << "," << k * t.tau << "," << t.mean_err_sq(k) << "," << t.var_err_sq(k);
        for (Eigen::Index i = 0; i < t.mean_state_sq.cols(); ++i) os << "," << t.mean_state_sq(k, i);
        os << "\n";
    }
    return os.str();
}

std::string gnuplot_script(const std::vector<std::pair<std::string, std::string>>& label_csv,
                           const std::string& title) {
    std::ostringstream os;
    os << "set datafile separator ','\n"
       << "set title '" << title << "'\n"
       << "set xlabel 'time (s)'\n"
       << "set ylabel 'mean squared estimation error'\n"
       << "set logscale y\n"
       << "set key top right\n"
       << "plot ";
    for (std::size_t i = 0; i < label_csv.size(); ++i) {
        if (i) os << ", \\\n     ";
        os << "'" << label_csv[i].second << "' using 2:3 every ::1 with lines title '" << label_csv[i].first << "'";
    }
    os << "\n";
    return os.str();
}

AnalysisResult run_analysis(const RunConfig& cfg, const SystemModel& sys, const shs::ScenarioSet& set) {
    AnalysisResult r;
    r.observability = observer::check_combined_observability(set, sys.A);
    if (!r.observability.full())
        throw ModelError("combined observability rank " + std::to_string(r.observability.rank) + " < " +
                         std::to_string(r.observability.n) + ": no coordinated observer exists for this sensor set");
    r.design = analysis::design_observer(observer_spec(cfg, sys, set));
    r.convergence = analysis::contraction(r.design.obs);
    r.tau_max = analysis::compute_tau_max(sys.A, r.design.obs.decomps);
    try {
        r.steady = analysis::steady_state(r.design.obs);
    } catch (const NumericalError& e) {
        r.steady_error = e.what();
    }
    return r;
}

json to_json(const AnalysisResult& r) {
    json j;
    j["observability"] = {{"n", r.observability.n},
                          {"combined_rank", r.observability.rank},
                          {"scenario_ranks", r.observability.scenario_ranks}};
    j["recombination"] = observer::to_string(r.design.obs.mode);
    j["tau_s"] = r.design.obs.tau;
    j["notes"] = r.design.notes;
    j["convergence"] = to_json(r.convergence);
    j["tau_max"] = to_json(r.tau_max);
    if (r.steady)
        j["steady_state"] = to_json(*r.steady);
    else
        j["steady_state"] = {{"error", r.steady_error}};
    return j;
}

}  // namespace gridshs::app
