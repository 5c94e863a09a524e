#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridshs/numerics.hpp"

namespace gridshs::grid {

enum class BusKind { dynamic, non_dynamic, slack };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::non_dynamic;
    double voltage_magnitude = 1.0;  // pu; fixed unless voltage_fixed is false
    double M = 0.0;                  // inertia, dynamic buses only
    double b = 0.0;                  // damping, dynamic buses only
    double P_L = 0.0, Q_L = 0.0;     // load, pu
    double P_in = 0.0, Q_in = 0.0;   // injection, pu
    bool voltage_fixed = true;
};

struct Line {
    int from = 0, to = 0;
    double R = 0.0, X = 0.0;
    double shunt_magnitude = 0.0;  // |Y| at each end, pu
    double shunt_angle = 0.0;      // gamma, rad

    double z_abs() const;
    double theta() const;
};

struct GridModel {
    std::string name;
    std::vector<Bus> buses;
    std::vector<Line> lines;
    double base_mva = 100.0;
    double base_kv = 0.0;
    std::optional<int> angle_reference;  // dynamic bus held at angle 0 when there is no slack

    // Throws ModelError on duplicate ids, dangling lines, more than one slack,
    // non-positive M/b on dynamic buses, |Z| = 0 or a disconnected graph.
    void validate() const;

    int index_of(int bus_id) const;
    std::vector<int> dynamic_indices() const;      // positions in buses
    std::vector<int> non_dynamic_indices() const;  // non_dynamic and slack, positions in buses
    std::optional<int> slack_index() const;
};

struct Flow {
    double P = 0.0, Q = 0.0;
};

// Sending-end flow from bus i towards bus j (angles in rad).
Flow line_flow(double Vi, double di, double Vj, double dj, const Line& line);

struct NetworkSolution {
    Vector angle;      // rad, per bus
    Vector voltage;    // pu, per bus
    Vector P_out;      // pu, sum of sending-end flows per bus
    Vector Q_out;
    double slack_P = 0.0, slack_Q = 0.0;  // injection absorbed by the slack bus
    double residual = 0.0;                // infinity norm of the bus mismatches, pu
    int iterations = 0;
};

struct SolveOptions {
    int max_iterations = 50;
    double tolerance = 1e-8;
    const NetworkSolution* warm_start = nullptr;
};

// Solves the algebraic network equations with the dynamic-bus angles held fixed.
NetworkSolution solve_network(const GridModel& grid, const Vector& dynamic_angles, const SolveOptions& opt = {});

struct Equilibrium {
    Vector state;               // [delta_1, omega_1, delta_2, omega_2, ...]
    NetworkSolution network;
    GridModel balanced;         // grid with the reference input rebalanced (if any)
    std::optional<int> reference_bus;  // bus id of the angle reference, if used
    double reference_adjustment = 0.0; // P_in change applied to the reference bus, pu
};

Equilibrium find_equilibrium(const GridModel& grid, const SolveOptions& opt = {});

// Right-hand side of the swing dynamics for a state and the grid's inputs/loads.
Vector dynamics(const GridModel& grid, const Vector& state, const NetworkSolution* warm_start = nullptr);

struct LinearizedSystem {
    Matrix A, B1, B2, D1, D2;
    Equilibrium equilibrium;
    std::vector<int> dynamic_bus_ids;
    std::vector<int> non_dynamic_bus_ids;
    double step = 0.0;          // finite-difference step accepted by the Richardson check
    double richardson_gap = 0.0;  // worst relative disagreement between h and h/2
};

struct LinearizeOptions {
    double step = 1e-5;
    double richardson_rtol = 1e-4;
    int workers = 1;
};

LinearizedSystem linearize(const GridModel& grid, const Equilibrium& eq, const LinearizeOptions& opt = {});

// ---- I/O ----

GridModel load_grid_json(const std::string& path);
GridModel parse_grid_json(const std::string& text, const std::string& base_dir = ".");

// MATPOWER-style case (bus/branch tables with per-unit impedances). Type 3 -> slack,
// type 2 -> fixed-|V| bus, type 1 -> PQ bus. Pd/Qd are converted with baseMVA.
GridModel parse_matpower(const std::string& text);
GridModel load_matpower(const std::string& path);

std::string to_string(BusKind kind);

}  // namespace gridshs::grid
