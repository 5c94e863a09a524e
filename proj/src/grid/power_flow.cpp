#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <string>

#include <Eigen/LU>

#include "gridshs/errors.hpp"
#include "gridshs/grid.hpp"

namespace gridshs::grid {

double Line::z_abs() const { return std::hypot(R, X); }
double Line::theta() const { return std::atan2(X, R); }

std::string to_string(BusKind kind) {
    switch (kind) {
        case BusKind::dynamic: return "dynamic";
        case BusKind::non_dynamic: return "non_dynamic";
        case BusKind::slack: return "slack";
    }
    return "unknown";
}

int GridModel::index_of(int bus_id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == bus_id) return static_cast<int>(i);
    throw ModelError("grid '" + name + "': unknown bus id " + std::to_string(bus_id));
}

std::vector<int> GridModel::dynamic_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].kind == BusKind::dynamic) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> GridModel::non_dynamic_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].kind != BusKind::dynamic) out.push_back(static_cast<int>(i));
    return out;
}

std::optional<int> GridModel::slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].kind == BusKind::slack) return static_cast<int>(i);
    return std::nullopt;
}

void GridModel::validate() const {
    if (buses.empty()) throw ModelError("grid '" + name + "' has no buses");
    std::set<int> ids;
    int slacks = 0;
    for (const Bus& b : buses) {
        if (!ids.insert(b.id).second) throw ModelError("grid '" + name + "': duplicate bus id " + std::to_string(b.id));
        if (b.kind == BusKind::slack) ++slacks;
        if (b.kind == BusKind::dynamic && !(b.M > 0.0 && b.b > 0.0))
            throw ModelError("bus " + std::to_string(b.id) + ": dynamic buses need M > 0 and b > 0");
        for (double v : {b.voltage_magnitude, b.P_L, b.Q_L, b.P_in, b.Q_in, b.M, b.b})
            if (!std::isfinite(v)) throw ModelError("bus " + std::to_string(b.id) + ": non-finite data");
        if (!(b.voltage_magnitude > 0.0)) throw ModelError("bus " + std::to_string(b.id) + ": |V| must be positive");
    }
    if (slacks > 1) throw ModelError("grid '" + name + "' has more than one slack bus");

    std::map<int, std::vector<int>> adj;
    for (const Line& l : lines) {
        if (!ids.count(l.from) || !ids.count(l.to))
            throw ModelError("line " + std::to_string(l.from) + "-" + std::to_string(l.to) + " references an unknown bus");
        if (l.from == l.to) throw ModelError("line " + std::to_string(l.from) + " connects a bus to itself");
        if (!(l.z_abs() > 0.0)) throw ModelError("line " + std::to_string(l.from) + "-" + std::to_string(l.to) + " has |Z| = 0");
        adj[l.from].push_back(l.to);
        adj[l.to].push_back(l.from);
    }
    std::set<int> seen{buses.front().id};
    std::queue<int> todo;
    todo.push(buses.front().id);
    while (!todo.empty()) {
        const int u = todo.front();
        todo.pop();
        for (int v : adj[u])
            if (seen.insert(v).second) todo.push(v);
    }
    if (seen.size() != buses.size()) throw ModelError("grid '" + name + "' is not connected");
}

Flow line_flow(double Vi, double di, double Vj, double dj, const Line& line) {
    const double z = line.z_abs();
    const double th = line.theta();
    const double dij = di - dj;
    Flow f;
    f.P = Vi * Vi / z * std::cos(th) - Vi * Vj / z * std::cos(th + dij) +
          Vi * Vi * line.shunt_magnitude * std::cos(line.shunt_angle);
    f.Q = Vi * Vi / z * std::sin(th) - Vi * Vj / z * std::sin(th + dij) -
          Vi * Vi * line.shunt_magnitude * std::sin(line.shunt_angle);
    return f;
}

namespace {

// Which quantities are unknown and which balance equations are enforced, per bus position.
struct FlowSetup {
    std::vector<int> col_angle, col_voltage;  // -1 when the quantity is known
    std::vector<int> row_p, row_q;            // -1 when no equation
    int unknowns = 0;
    Vector P_spec, Q_spec;                    // injection minus load, per bus
};

struct Evaluation {
    Vector P_out, Q_out;
    Vector mismatch;  // spec - out at the equation rows
    Matrix jac;       // d(out)/d(unknowns) at the equation rows
};

Evaluation evaluate(const GridModel& g, const FlowSetup& s, const Vector& angle, const Vector& V, bool with_jac) {
    const auto nb = static_cast<Eigen::Index>(g.buses.size());
    Evaluation e;
    e.P_out = Vector::Zero(nb);
    e.Q_out = Vector::Zero(nb);
    if (with_jac) e.jac = Matrix::Zero(s.unknowns, s.unknowns);

    for (const Line& line : g.lines) {
        const int a = g.index_of(line.from);
        const int b = g.index_of(line.to);
        for (int side = 0; side < 2; ++side) {
            const int i = side == 0 ? a : b;
            const int j = side == 0 ? b : a;
            const double Vi = V(i), Vj = V(j);
            const Flow f = line_flow(Vi, angle(i), Vj, angle(j), line);
            e.P_out(i) += f.P;
            e.Q_out(i) += f.Q;
            if (!with_jac) continue;

            const double z = line.z_abs();
            const double arg = line.theta() + angle(i) - angle(j);
            const double ys = line.shunt_magnitude;
            const double dP_ddi = Vi * Vj / z * std::sin(arg);
            const double dP_dVi = 2.0 * Vi / z * std::cos(line.theta()) - Vj / z * std::cos(arg) +
                                  2.0 * Vi * ys * std::cos(line.shunt_angle);
            const double dP_dVj = -Vi / z * std::cos(arg);
            const double dQ_ddi = -Vi * Vj / z * std::cos(arg);
            const double dQ_dVi = 2.0 * Vi / z * std::sin(line.theta()) - Vj / z * std::sin(arg) -
                                  2.0 * Vi * ys * std::sin(line.shunt_angle);
            const double dQ_dVj = -Vi / z * std::sin(arg);

            auto add = [&](int row, int col, double v) {
                if (row >= 0 && col >= 0) e.jac(row, col) += v;
            };
            add(s.row_p[i], s.col_angle[i], dP_ddi);
            add(s.row_p[i], s.col_angle[j], -dP_ddi);
            add(s.row_p[i], s.col_voltage[i], dP_dVi);
            add(s.row_p[i], s.col_voltage[j], dP_dVj);
            add(s.row_q[i], s.col_angle[i], dQ_ddi);
            add(s.row_q[i], s.col_angle[j], -dQ_ddi);
            add(s.row_q[i], s.col_voltage[i], dQ_dVi);
            add(s.row_q[i], s.col_voltage[j], dQ_dVj);
        }
    }

    e.mismatch = Vector::Zero(s.unknowns);
    for (Eigen::Index i = 0; i < nb; ++i) {
        if (s.row_p[i] >= 0) e.mismatch(s.row_p[i]) = s.P_spec(i) - e.P_out(i);
        if (s.row_q[i] >= 0) e.mismatch(s.row_q[i]) = s.Q_spec(i) - e.Q_out(i);
    }
    return e;
}

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

NetworkSolution newton(const GridModel& g, const FlowSetup& s, Vector angle, Vector V, const SolveOptions& opt,
                       const char* what) {
    // Iterate past the requested tolerance while Newton still improves: the finite-difference
    // Jacobians downstream need the solution well below the acceptance tolerance.
    constexpr double kTight = 1e-13;
    auto apply = [&](const Vector& dx, double alpha, Vector& a, Vector& v) {
        for (std::size_t i = 0; i < g.buses.size(); ++i) {
            if (s.col_angle[i] >= 0) a(i) += alpha * dx(s.col_angle[i]);
            if (s.col_voltage[i] >= 0) v(i) += alpha * dx(s.col_voltage[i]);
        }
    };

    Evaluation e = evaluate(g, s, angle, V, true);
    double res = inf_norm(e.mismatch);
    int it = 0;
    for (; it < opt.max_iterations && res > kTight && s.unknowns > 0; ++it) {
        Eigen::FullPivLU<Matrix> lu(e.jac);
        if (lu.rank() < s.unknowns)
            throw NumericalError(std::string(what) + ": singular Jacobian at iteration " + std::to_string(it));
        const Vector dx = lu.solve(e.mismatch);

        double alpha = 1.0;
        Vector a_try, v_try;
        Evaluation trial;
        for (int halving = 0; halving < 12; ++halving) {
            a_try = angle;
            v_try = V;
            apply(dx, alpha, a_try, v_try);
            trial = evaluate(g, s, a_try, v_try, true);
            if (inf_norm(trial.mismatch) < res || !std::isfinite(res)) break;
            alpha *= 0.5;
        }
        const double new_res = inf_norm(trial.mismatch);
        if (!std::isfinite(new_res)) break;
        const bool stalled = new_res >= res && res <= opt.tolerance;
        if (stalled) break;
        angle = a_try;
        V = v_try;
        e = std::move(trial);
        res = new_res;
    }
    if (!(res <= opt.tolerance))
        throw ModelError(std::string(what) + ": Newton did not converge after " + std::to_string(it) +
                         " iterations (residual " + std::to_string(res) + " pu)");
    for (std::size_t i = 0; i < g.buses.size(); ++i)
        if (!(V(i) > 0.0))
            throw ModelError(std::string(what) + ": solution has a non-positive voltage at bus " +
                             std::to_string(g.buses[i].id));

    NetworkSolution sol;
    sol.angle = angle;
    sol.voltage = V;
    sol.P_out = e.P_out;
    sol.Q_out = e.Q_out;
    sol.residual = res;
    sol.iterations = it;
    if (auto sl = g.slack_index()) {
        sol.slack_P = e.P_out(*sl) + g.buses[*sl].P_L;
        sol.slack_Q = e.Q_out(*sl) + g.buses[*sl].Q_L;
    }
    return sol;
}

FlowSetup empty_setup(const GridModel& g) {
    const auto nb = g.buses.size();
    FlowSetup s;
    s.col_angle.assign(nb, -1);
    s.col_voltage.assign(nb, -1);
    s.row_p.assign(nb, -1);
    s.row_q.assign(nb, -1);
    s.P_spec = Vector::Zero(static_cast<Eigen::Index>(nb));
    s.Q_spec = Vector::Zero(static_cast<Eigen::Index>(nb));
    for (std::size_t i = 0; i < nb; ++i) {
        s.P_spec(i) = g.buses[i].P_in - g.buses[i].P_L;
        s.Q_spec(i) = g.buses[i].Q_in - g.buses[i].Q_L;
    }
    return s;
}

// Non-dynamic, non-slack buses: angle unknown with a real-power balance; |V| unknown with a
// reactive balance when not fixed.
void add_network_unknowns(const GridModel& g, FlowSetup& s) {
    for (std::size_t i = 0; i < g.buses.size(); ++i) {
        const Bus& b = g.buses[i];
        if (b.kind != BusKind::non_dynamic) continue;
        s.col_angle[i] = s.row_p[i] = s.unknowns++;
        if (!b.voltage_fixed) s.col_voltage[i] = s.row_q[i] = s.unknowns++;
    }
}

void initial_point(const GridModel& g, const SolveOptions& opt, Vector& angle, Vector& V) {
    const auto nb = static_cast<Eigen::Index>(g.buses.size());
    if (opt.warm_start && opt.warm_start->angle.size() == nb) {
        angle = opt.warm_start->angle;
        V = opt.warm_start->voltage;
        for (Eigen::Index i = 0; i < nb; ++i)
            if (g.buses[i].voltage_fixed || g.buses[i].kind != BusKind::non_dynamic) V(i) = g.buses[i].voltage_magnitude;
        return;
    }
    angle = Vector::Zero(nb);
    V = Vector::Ones(nb);
    for (Eigen::Index i = 0; i < nb; ++i)
        if (g.buses[i].voltage_fixed || g.buses[i].kind != BusKind::non_dynamic) V(i) = g.buses[i].voltage_magnitude;
}

}  // namespace

NetworkSolution solve_network(const GridModel& grid, const Vector& dynamic_angles, const SolveOptions& opt) {
    const std::vector<int> dyn = grid.dynamic_indices();
    if (static_cast<Eigen::Index>(dyn.size()) != dynamic_angles.size())
        throw ModelError("solve_network: expected " + std::to_string(dyn.size()) + " dynamic angles");
    FlowSetup s = empty_setup(grid);
    add_network_unknowns(grid, s);

    Vector angle, V;
    initial_point(grid, opt, angle, V);
    for (std::size_t k = 0; k < dyn.size(); ++k) angle(dyn[k]) = dynamic_angles(k);
    if (auto sl = grid.slack_index()) angle(*sl) = 0.0;
    return newton(grid, s, angle, V, opt, "solve_network");
}

Equilibrium find_equilibrium(const GridModel& grid, const SolveOptions& opt) {
    grid.validate();
    const std::vector<int> dyn = grid.dynamic_indices();
    FlowSetup s = empty_setup(grid);

    std::optional<int> ref;  // bus position
    if (!grid.slack_index()) {
        if (dyn.empty()) throw ModelError("find_equilibrium: grid has neither a slack nor a dynamic bus");
        ref = grid.angle_reference ? grid.index_of(*grid.angle_reference) : dyn.front();
        if (grid.buses[*ref].kind != BusKind::dynamic)
            throw ModelError("find_equilibrium: angle reference must be a dynamic bus");
    }
    for (int i : dyn)
        if (!ref || i != *ref) s.col_angle[i] = s.row_p[i] = s.unknowns++;
    add_network_unknowns(grid, s);

    Vector angle, V;
    initial_point(grid, opt, angle, V);
    if (ref) angle(*ref) = 0.0;
    if (auto sl = grid.slack_index()) angle(*sl) = 0.0;

    Equilibrium eq;
    try {
        eq.network = newton(grid, s, angle, V, opt, "find_equilibrium");
    } catch (const ModelError& e) {
        throw ModelError(std::string("no equilibrium in the operating range: ") + e.what());
    }
    eq.balanced = grid;
    if (ref) {
        Bus& rb = eq.balanced.buses[*ref];
        const double needed = rb.P_L + eq.network.P_out(*ref);
        eq.reference_bus = rb.id;
        eq.reference_adjustment = needed - rb.P_in;
        rb.P_in = needed;
    }
    eq.state = Vector::Zero(2 * static_cast<Eigen::Index>(dyn.size()));
    for (std::size_t k = 0; k < dyn.size(); ++k) eq.state(2 * k) = eq.network.angle(dyn[k]);
    return eq;
}

Vector dynamics(const GridModel& grid, const Vector& state, const NetworkSolution* warm_start) {
    const std::vector<int> dyn = grid.dynamic_indices();
    const auto nd = static_cast<Eigen::Index>(dyn.size());
    if (state.size() != 2 * nd) throw ModelError("dynamics: state has the wrong dimension");
    Vector angles(nd);
    for (Eigen::Index k = 0; k < nd; ++k) angles(k) = state(2 * k);
    SolveOptions opt;
    opt.warm_start = warm_start;
    const NetworkSolution net = solve_network(grid, angles, opt);

    Vector f(2 * nd);
    for (Eigen::Index k = 0; k < nd; ++k) {
        const Bus& b = grid.buses[dyn[k]];
        const double omega = state(2 * k + 1);
        f(2 * k) = omega;
        f(2 * k + 1) = (b.P_in - b.P_L - net.P_out(dyn[k]) - b.b * omega) / b.M;
    }
    return f;
}

}  // namespace gridshs::grid
