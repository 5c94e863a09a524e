#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <regex>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gridshs/errors.hpp"
#include "gridshs/grid.hpp"

namespace gridshs::grid {
namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

BusKind parse_kind(const std::string& s) {
    if (s == "dynamic") return BusKind::dynamic;
    if (s == "non_dynamic") return BusKind::non_dynamic;
    if (s == "slack") return BusKind::slack;
    throw ConfigError("unknown bus kind '" + s + "' (expected dynamic, non_dynamic or slack)");
}

void apply_bus_fields(Bus& b, const json& j) {
    if (j.contains("kind")) b.kind = parse_kind(j.at("kind").get<std::string>());
    if (j.contains("voltage_magnitude")) b.voltage_magnitude = j.at("voltage_magnitude").get<double>();
    if (j.contains("M")) b.M = j.at("M").get<double>();
    if (j.contains("b")) b.b = j.at("b").get<double>();
    if (j.contains("P_L")) b.P_L = j.at("P_L").get<double>();
    if (j.contains("Q_L")) b.Q_L = j.at("Q_L").get<double>();
    if (j.contains("P_in")) b.P_in = j.at("P_in").get<double>();
    if (j.contains("Q_in")) b.Q_in = j.at("Q_in").get<double>();
    if (j.contains("voltage_fixed")) b.voltage_fixed = j.at("voltage_fixed").get<bool>();
    if (b.kind != BusKind::non_dynamic) b.voltage_fixed = true;
}

Line parse_line(const json& j) {
    Line l;
    l.from = j.at("from").get<int>();
    l.to = j.at("to").get<int>();
    l.R = j.value("R", 0.0);
    l.X = j.value("X", 0.0);
    l.shunt_magnitude = j.value("shunt_magnitude", 0.0);
    l.shunt_angle = j.value("shunt_angle", 0.0);
    return l;
}

std::vector<std::vector<double>> matpower_table(const std::string& text, const std::string& name) {
    const std::regex block("mpc\\." + name + "\\s*=\\s*\\[([\\s\\S]*?)\\]\\s*;");
    std::smatch m;
    if (!std::regex_search(text, m, block)) throw ConfigError("MATPOWER case has no mpc." + name + " table");
    std::vector<std::vector<double>> rows;
    std::string body = m[1];
    for (char& c : body)
        if (c == ',') c = ' ';
    std::stringstream all(body);
    std::string chunk;
    while (std::getline(all, chunk, ';')) {
        std::stringstream lines(chunk);
        std::string line;
        while (std::getline(lines, line)) {
            std::stringstream ss(line);
            std::vector<double> row;
            double v;
            while (ss >> v) row.push_back(v);
            if (!ss.eof()) throw ConfigError("MATPOWER mpc." + name + ": unparsable entry in '" + line + "'");
            if (!row.empty()) rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace

GridModel parse_matpower(const std::string& raw) {
    std::string text;
    {
        std::stringstream in(raw);
        std::string line;
        while (std::getline(in, line)) {
            const auto pct = line.find('%');
            text += (pct == std::string::npos ? line : line.substr(0, pct)) + "\n";
        }
    }
    GridModel g;
    std::smatch m;
    if (std::regex_search(text, m, std::regex("mpc\\.baseMVA\\s*=\\s*([-+0-9.eE]+)")))
        g.base_mva = std::stod(m[1]);
    else
        throw ConfigError("MATPOWER case has no mpc.baseMVA");
    if (std::regex_search(text, m, std::regex("function\\s+\\w+\\s*=\\s*(\\w+)"))) g.name = m[1];

    for (const auto& r : matpower_table(text, "bus")) {
        if (r.size() < 9) throw ConfigError("MATPOWER bus row has fewer than 9 columns");
        Bus b;
        b.id = static_cast<int>(r[0]);
        const int type = static_cast<int>(r[1]);
        b.P_L = r[2] / g.base_mva;
        b.Q_L = r[3] / g.base_mva;
        b.voltage_magnitude = r[7];
        if (type == 3) {
            b.kind = BusKind::slack;
        } else if (type == 2) {
            b.kind = BusKind::non_dynamic;
            b.voltage_fixed = true;
        } else if (type == 1) {
            b.kind = BusKind::non_dynamic;
            b.voltage_fixed = false;
        } else {
            continue;  // isolated
        }
        if (r.size() > 9 && g.base_kv == 0.0) g.base_kv = r[9];
        g.buses.push_back(b);
    }
    for (const auto& r : matpower_table(text, "branch")) {
        if (r.size() < 5) throw ConfigError("MATPOWER branch row has fewer than 5 columns");
        if (r.size() > 10 && r[10] == 0.0) continue;  // out of service
        Line l;
        l.from = static_cast<int>(r[0]);
        l.to = static_cast<int>(r[1]);
        l.R = r[2];
        l.X = r[3];
        if (r[4] != 0.0) {
            l.shunt_magnitude = std::abs(r[4]) / 2.0;
            l.shunt_angle = r[4] > 0 ? std::numbers::pi / 2 : -std::numbers::pi / 2;
        }
        g.lines.push_back(l);
    }
    return g;
}

GridModel load_matpower(const std::string& path) { return parse_matpower(read_file(path)); }

GridModel parse_grid_json(const std::string& text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("grid file is not valid JSON: ") + e.what());
    }
    GridModel g;
    try {
        if (j.contains("matpower")) {
            const std::filesystem::path p = std::filesystem::path(base_dir) / j.at("matpower").get<std::string>();
            g = load_matpower(p.string());
            for (const json& jb : j.value("buses", json::array())) {
                Bus& b = g.buses[g.index_of(jb.at("id").get<int>())];
                apply_bus_fields(b, jb);
            }
        } else {
            for (const json& jb : j.at("buses")) {
                Bus b;
                b.id = jb.at("id").get<int>();
                apply_bus_fields(b, jb);
                g.buses.push_back(b);
            }
            for (const json& jl : j.at("lines")) g.lines.push_back(parse_line(jl));
        }
        if (j.contains("name")) g.name = j.at("name").get<std::string>();
        if (j.contains("base_mva")) g.base_mva = j.at("base_mva").get<double>();
        if (j.contains("base_kv")) g.base_kv = j.at("base_kv").get<double>();
        if (j.contains("angle_reference")) g.angle_reference = j.at("angle_reference").get<int>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("grid file: ") + e.what());
    }
    g.validate();
    return g;
}

GridModel load_grid_json(const std::string& path) {
    const std::string dir = std::filesystem::path(path).parent_path().string();
    return parse_grid_json(read_file(path), dir.empty() ? "." : dir);
}

}  // namespace gridshs::grid
