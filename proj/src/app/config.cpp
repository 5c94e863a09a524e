#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gridshs/app.hpp"
#include "gridshs/errors.hpp"

namespace gridshs::app {
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kBuiltinGrids{"two_bus", "ieee5", "ieee33"};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json_file(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

std::string resolve_path(const std::string& p, const std::string& base_dir) {
    const fs::path path(p);
    return path.is_absolute() ? p : (fs::path(base_dir) / path).string();
}

Complex parse_pole(const json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw ConfigError("a pole must be a number or a [re, im] pair");
}

std::vector<Complex> parse_pole_list(const json& j) {
    if (!j.is_array()) throw ConfigError("pole lists must be arrays");
    std::vector<Complex> out;
    for (const json& e : j) out.push_back(parse_pole(e));
    return out;
}

std::vector<double> parse_vector(const json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError(what + " must be an array of numbers");
    std::vector<double> v;
    for (const json& e : j) {
        if (!e.is_number()) throw ConfigError(what + " must be an array of numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

int parse_scenario_key(const std::string& key, const std::string& where) {
    try {
        std::size_t used = 0;
        const int idx = std::stoi(key, &used);
        if (used == key.size() && idx >= 1) return idx;
    } catch (const std::exception&) {
    }
    throw ConfigError("'" + key + "' in " + where + " is not a scenario index (1, 2, ...)");
}

}  // namespace

std::string data_dir() {
    if (const char* env = std::getenv("GRIDSHS_DATA_DIR"); env && *env) return env;
    return GRIDSHS_DATA_DIR;
}

std::string default_out_dir() {
    if (const char* env = std::getenv("GRIDSHS_OUT_DIR"); env && *env) return env;
    return "gridshs_out";
}

RunConfig parse_config(const json& doc, const std::string& base_dir) {
    RunConfig cfg;
    cfg.raw = doc;
    cfg.base_dir = base_dir;
    try {
        check_keys(doc, {"description", "grid", "system", "channels", "scenario_sigma_overrides", "observer", "sim",
                         "outputs"},
                   "config");
        cfg.grid = doc.value("grid", "");
        cfg.system = doc.value("system", "");

        for (const json& c : doc.value("channels", json::array())) {
            check_keys(c, {"measure", "rho", "sigma"}, "channel");
            ChannelSpec ch;
            ch.measure = c.at("measure").get<std::string>();
            const auto dot = ch.measure.find('.');
            const std::string what = dot == std::string::npos ? "" : ch.measure.substr(dot + 1);
            if (what != "delta" && what != "omega")
                throw ConfigError("measure '" + ch.measure + "' must look like '<bus>.<delta|omega>'");
            ch.rho = c.value("rho", 1.0);
            ch.sigma = c.value("sigma", 0.0);
            cfg.channels.push_back(ch);
        }
        if (doc.contains("scenario_sigma_overrides")) {
            const json& o = doc.at("scenario_sigma_overrides");
            if (!o.is_object()) throw ConfigError("scenario_sigma_overrides must be an object");
            for (const auto& [key, val] : o.items()) {
                const int idx = parse_scenario_key(key, "scenario_sigma_overrides");
                cfg.sigma_overrides[idx] = val.is_number() ? std::vector<double>{val.get<double>()}
                                                           : parse_vector(val, "sigma override");
            }
        }

        if (doc.contains("observer")) {
            const json& o = doc.at("observer");
            check_keys(o, {"tau", "n_sub", "poles", "completion", "recombination"}, "observer");
            cfg.tau = o.value("tau", 0.0);
            cfg.n_sub = o.value("n_sub", 64);
            if (o.contains("completion")) cfg.completion = observer::parse_completion(o.at("completion").get<std::string>());
            if (o.contains("recombination"))
                cfg.recombination = observer::parse_recombination(o.at("recombination").get<std::string>());
            if (o.contains("poles")) {
                const json& p = o.at("poles");
                if (p.is_array()) {
                    cfg.poles.default_poles = parse_pole_list(p);
                } else if (p.is_object()) {
                    for (const auto& [key, val] : p.items()) {
                        if (key == "default")
                            cfg.poles.default_poles = parse_pole_list(val);
                        else
                            cfg.poles.per_scenario[parse_scenario_key(key, "observer.poles")] = parse_pole_list(val);
                    }
                } else {
                    throw ConfigError("observer.poles must be a list or an object");
                }
            }
        }

        if (doc.contains("sim")) {
            const json& s = doc.at("sim");
            check_keys(s, {"x0", "e0", "xhat0", "K", "replicas", "seed", "workers"}, "sim");
            if (s.contains("x0")) cfg.x0 = parse_vector(s.at("x0"), "sim.x0");
            if (s.contains("e0")) cfg.e0 = parse_vector(s.at("e0"), "sim.e0");
            if (s.contains("xhat0")) cfg.xhat0 = parse_vector(s.at("xhat0"), "sim.xhat0");
            if (cfg.e0 && cfg.xhat0) throw ConfigError("sim: give either e0 or xhat0, not both");
            cfg.K = s.value("K", cfg.K);
            cfg.replicas = s.value("replicas", cfg.replicas);
            cfg.seed = s.value("seed", cfg.seed);
            cfg.workers = s.value("workers", cfg.workers);
            if (cfg.K < 1 || cfg.replicas < 1 || cfg.workers < 1)
                throw ConfigError("sim: K, replicas and workers must be at least 1");
        }
        if (cfg.n_sub < 1) throw ConfigError("observer.n_sub must be at least 1");

        if (doc.contains("outputs")) {
            const json& o = doc.at("outputs");
            check_keys(o, {"directory", "formats"}, "outputs");
            cfg.out_dir = o.value("directory", "");
            if (o.contains("formats")) {
                cfg.formats.clear();
                for (const json& f : o.at("formats")) {
                    const std::string s = f.get<std::string>();
                    if (s != "csv" && s != "json" && s != "gnuplot")
                        throw ConfigError("unknown output format '" + s + "' (expected csv, json or gnuplot)");
                    cfg.formats.push_back(s);
                }
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (cfg.n_sub < 1) throw ConfigError("observer.n_sub must be at least 1");
    if (doc.contains("observer") && !(cfg.tau > 0.0)) throw ConfigError("observer.tau must be positive");
    return cfg;
}

RunConfig load_config(const std::string& path) {
    const std::string dir = fs::path(path).parent_path().string();
    return parse_config(parse_json_file(path), dir.empty() ? "." : dir);
}

grid::GridModel resolve_grid(const std::string& name_or_path, const std::string& base_dir) {
    for (const std::string& b : kBuiltinGrids)
        if (name_or_path == b) return grid::load_grid_json((fs::path(data_dir()) / "grids" / (b + ".json")).string());
    const std::string path = resolve_path(name_or_path, base_dir);
    if (!fs::exists(path))
        throw ConfigError("unknown grid '" + name_or_path + "' (builtins: two_bus, ieee5, ieee33; or a file path)");
    if (fs::path(path).extension() == ".m") return grid::load_matpower(path);
    return grid::load_grid_json(path);
}

SystemModel load_published_system(const std::string& name_or_path, const std::string& base_dir) {
    std::string path = (fs::path(data_dir()) / "systems" / (name_or_path + ".json")).string();
    if (!fs::exists(path)) path = resolve_path(name_or_path, base_dir);
    if (!fs::exists(path))
        throw ConfigError("unknown system '" + name_or_path +
                          "' (builtins: ieee5_published, ieee33_published; or a file path)");
    const json j = parse_json_file(path);
    SystemModel sys;
    try {
        sys.name = j.value("name", name_or_path);
        const json& a = j.at("A");
        const auto n = static_cast<Eigen::Index>(a.size());
        sys.A.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (a[i].size() != static_cast<std::size_t>(n)) throw ConfigError("system A must be square");
            for (Eigen::Index k = 0; k < n; ++k) sys.A(i, k) = a[i][k].get<double>();
        }
        if (j.contains("dynamic_buses")) {
            sys.dynamic_bus_ids = j.at("dynamic_buses").get<std::vector<int>>();
        } else {
            for (Eigen::Index i = 0; i < n / 2; ++i) sys.dynamic_bus_ids.push_back(static_cast<int>(i) + 1);
        }
    } catch (const json::exception& e) {
        throw ConfigError("system file '" + path + "': " + e.what());
    }
    if (static_cast<Eigen::Index>(2 * sys.dynamic_bus_ids.size()) != sys.A.rows())
        throw ConfigError("system file '" + path + "': A must have two states per dynamic bus");
    numerics::require_finite(sys.A, "system A");
    return sys;
}

SystemModel resolve_system(const RunConfig& cfg) {
    if (!cfg.system.empty()) return load_published_system(cfg.system, cfg.base_dir);
    if (cfg.grid.empty()) throw ConfigError("config needs either 'system' or 'grid'");
    const grid::GridModel g = resolve_grid(cfg.grid, cfg.base_dir);
    const grid::Equilibrium eq = grid::find_equilibrium(g);
    grid::LinearizeOptions opt;
    opt.workers = cfg.workers;
    SystemModel sys;
    sys.name = g.name.empty() ? cfg.grid : g.name;
    sys.linearized = grid::linearize(g, eq, opt);
    sys.A = sys.linearized->A;
    sys.dynamic_bus_ids = sys.linearized->dynamic_bus_ids;
    return sys;
}

Eigen::RowVectorXd measure_row(const std::string& measure, const std::vector<int>& dynamic_bus_ids) {
    const auto dot = measure.find('.');
    if (dot == std::string::npos) throw ConfigError("measure '" + measure + "' must look like '<bus>.<delta|omega>'");
    const std::string bus_s = measure.substr(0, dot);
    const std::string what = measure.substr(dot + 1);
    int bus = 0;
    try {
        std::size_t used = 0;
        bus = std::stoi(bus_s, &used);
        if (used != bus_s.size()) throw std::invalid_argument(bus_s);
    } catch (const std::exception&) {
        throw ConfigError("measure '" + measure + "': bus must be an integer id");
    }
    if (what != "delta" && what != "omega")
        throw ConfigError("measure '" + measure + "': quantity must be delta or omega");
    const auto n = static_cast<Eigen::Index>(2 * dynamic_bus_ids.size());
    for (std::size_t i = 0; i < dynamic_bus_ids.size(); ++i)
        if (dynamic_bus_ids[i] == bus)
            return Eigen::RowVectorXd::Unit(n, static_cast<Eigen::Index>(2 * i + (what == "omega" ? 1 : 0)));
    throw ConfigError("measure '" + measure + "': bus " + bus_s + " is not a dynamic bus");
}

shs::ScenarioSet build_scenarios(const RunConfig& cfg, const SystemModel& sys) {
    if (cfg.channels.empty()) throw ConfigError("config has no sensor channels");
    std::vector<shs::SensorChannel> chans;
    for (const ChannelSpec& c : cfg.channels) {
        shs::SensorChannel ch;
        ch.name = c.measure;
        ch.row = measure_row(c.measure, sys.dynamic_bus_ids);
        ch.rho = c.rho;
        ch.sigma = c.sigma;
        chans.push_back(ch);
    }
    return shs::scenarios_from_channels(chans, cfg.sigma_overrides);
}

analysis::ObserverSpec observer_spec(const RunConfig& cfg, const SystemModel& sys, const shs::ScenarioSet& set) {
    if (!(cfg.tau > 0.0)) throw ConfigError("observer.tau must be positive");
    if (cfg.poles.default_poles.empty() && cfg.poles.per_scenario.empty())
        throw ConfigError("observer.poles is required");
    analysis::ObserverSpec spec;
    spec.A = sys.A;
    spec.set = set;
    spec.poles = cfg.poles;
    spec.tau = cfg.tau;
    spec.completion = cfg.completion;
    spec.mode = cfg.recombination;
    return spec;
}

sim::SimConfig sim_config(const RunConfig& cfg, int n) {
    auto vec = [n](const std::vector<double>& v, const char* what) {
        if (static_cast<int>(v.size()) != n)
            throw ConfigError(std::string("sim.") + what + " must have " + std::to_string(n) + " entries");
        return Vector(Eigen::Map<const Vector>(v.data(), n));
    };
    sim::SimConfig sc;
    sc.x0 = cfg.x0 ? vec(*cfg.x0, "x0") : Vector(Vector::Zero(n));
    if (cfg.xhat0)
        sc.xhat0 = vec(*cfg.xhat0, "xhat0");
    else
        sc.xhat0 = sc.x0 + (cfg.e0 ? vec(*cfg.e0, "e0") : Vector(Vector::Zero(n)));
    sc.K = cfg.K;
    sc.tau = cfg.tau;
    sc.n_sub = cfg.n_sub;
    sc.replicas = cfg.replicas;
    sc.seed = cfg.seed;
    sc.workers = cfg.workers;
    sc.validate(n);
    return sc;
}

}  // namespace gridshs::app
