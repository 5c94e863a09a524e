#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <doctest.h>

#include "gridshs/errors.hpp"
#include "support.hpp"

using namespace gridshs;

namespace {

// Sending-end complex power from phasors, S = V_i conj((V_i - V_j)/Z + Y V_i).
std::complex<double> phasor_flow(double Vi, double di, double Vj, double dj, const grid::Line& l) {
    const std::complex<double> vi = std::polar(Vi, di), vj = std::polar(Vj, dj);
    const std::complex<double> Z(l.R, l.X);
    const std::complex<double> Y = std::polar(l.shunt_magnitude, l.shunt_angle);
    return vi * std::conj((vi - vj) / Z + Y * vi);
}

// Real-power mismatch per bus (injection minus load minus outflow), computed with phasors.
Vector phasor_mismatch(const grid::GridModel& g, const grid::NetworkSolution& s) {
    Vector m = Vector::Zero(static_cast<Eigen::Index>(g.buses.size()));
    for (std::size_t i = 0; i < g.buses.size(); ++i) m(i) = g.buses[i].P_in - g.buses[i].P_L;
    for (const grid::Line& l : g.lines) {
        const int i = g.index_of(l.from), j = g.index_of(l.to);
        m(i) -= phasor_flow(s.voltage(i), s.angle(i), s.voltage(j), s.angle(j), l).real();
        grid::Line rev = l;
        std::swap(rev.from, rev.to);
        m(j) -= phasor_flow(s.voltage(j), s.angle(j), s.voltage(i), s.angle(i), rev).real();
    }
    if (auto k = g.slack_index()) m(*k) += s.slack_P;
    return m;
}

grid::GridModel two_bus_with_load_bus(double P_L) {
    grid::GridModel g;
    g.name = "radial";
    grid::Bus b1;
    b1.id = 1;
    b1.kind = grid::BusKind::dynamic;
    b1.M = 1;
    b1.b = 0.2;
    grid::Bus b2;
    b2.id = 2;
    b2.kind = grid::BusKind::non_dynamic;
    b2.P_L = P_L;
    g.buses = {b1, b2};
    grid::Line l;
    l.from = 1;
    l.to = 2;
    l.R = 0.01;
    l.X = 0.05;
    g.lines = {l};
    return g;
}

}  // namespace

TEST_CASE("line flow: equal voltages and angles carry no power") {
    grid::Line l;
    l.R = 0.02;
    l.X = 0.06;
    const grid::Flow f = grid::line_flow(1.03, 0.2, 1.03, 0.2, l);
    CHECK(std::abs(f.P) < 1e-12);
    CHECK(std::abs(f.Q) < 1e-12);
}

TEST_CASE("line flow: pure reactance reduces to the sine law") {
    grid::Line l;
    l.X = 0.005;
    for (double d : {-0.3, 0.05, 0.1506}) {
        const grid::Flow f = grid::line_flow(1.0, d, 1.0, 0.0, l);
        CHECK(f.P == doctest::Approx(std::sin(d) / 0.005).epsilon(1e-12));
    }
}

TEST_CASE("line flow agrees with the phasor form including shunts") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int trial = 0; trial < 50; ++trial) {
        grid::Line l;
        l.R = 0.05 + 0.1 * std::abs(u(rng));
        l.X = 0.05 + 0.3 * std::abs(u(rng));
        l.shunt_magnitude = 0.02 * std::abs(u(rng));
        l.shunt_angle = std::numbers::pi / 2 * (u(rng) > 0 ? 1 : -1);
        const double Vi = 1 + 0.1 * u(rng), Vj = 1 + 0.1 * u(rng), di = u(rng), dj = u(rng);
        const grid::Flow f = grid::line_flow(Vi, di, Vj, dj, l);
        const std::complex<double> s = phasor_flow(Vi, di, Vj, dj, l);
        CHECK(f.P == doctest::Approx(s.real()).epsilon(1e-10));
        CHECK(f.Q == doctest::Approx(s.imag()).epsilon(1e-10));
    }
}

TEST_CASE("network solve on a radial line has the closed-form angle") {
    const double P_L = 3.0;
    const grid::GridModel g = two_bus_with_load_bus(P_L);
    const grid::NetworkSolution s = grid::solve_network(g, Vector::Zero(1));
    const grid::Line& l = g.lines[0];
    const double beta = 1.0 / l.z_abs(), beta2 = std::cos(l.theta()) / l.z_abs();
    const double expected = l.theta() - std::acos((beta2 + P_L) / beta);
    CHECK(s.angle(0) - s.angle(1) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(s.residual <= 1e-8);
}

TEST_CASE("network solve with no loads or inputs keeps all angles equal") {
    grid::GridModel g = app::resolve_grid("ieee5");
    for (grid::Bus& b : g.buses) b.P_L = b.Q_L = b.P_in = 0.0;
    for (grid::Bus& b : g.buses) b.voltage_magnitude = 1.0;
    const grid::NetworkSolution s = grid::solve_network(g, Vector::Zero(2));
    CHECK(s.angle.cwiseAbs().maxCoeff() < 1e-10);
    const grid::Equilibrium eq = grid::find_equilibrium(g);
    CHECK(eq.state.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("5-bus non-dynamic angles follow the tabulated operating point") {
    // The tabulated angle column is in degrees.
    const double deg = std::numbers::pi / 180.0;
    const grid::GridModel g = app::resolve_grid("ieee5");
    Vector dyn(2);
    dyn << 0.0, -2.8063 * deg;
    const grid::NetworkSolution s = grid::solve_network(g, dyn);
    CHECK(std::abs(s.angle(2) - (-4.997 * deg)) < 1e-2);
    CHECK(std::abs(s.angle(3) - (-5.3291 * deg)) < 1e-2);
    CHECK(std::abs(s.angle(4) - (-6.1503 * deg)) < 1e-2);
}

TEST_CASE("two-bus equilibrium and linearization match the closed form") {
    const grid::GridModel g = app::resolve_grid("two_bus");
    const grid::Equilibrium eq = grid::find_equilibrium(g);
    const double beta = 200.0;
    const double d = std::asin(30.0 / beta);
    CHECK(eq.state(0) - eq.state(2) == doctest::Approx(d).epsilon(1e-9));
    CHECK(std::abs(eq.state(1)) < 1e-12);
    CHECK(std::abs(eq.state(3)) < 1e-12);

    const grid::LinearizedSystem lin = grid::linearize(g, eq);
    Matrix expected(4, 4);
    const double c = beta * std::cos(d);
    expected << 0, 1, 0, 0, -c / 1.0, -0.2, c / 1.0, 0, 0, 0, 0, 1, c / 1.5, 0, -c / 1.5, -0.31 / 1.5;
    CHECK(testing::max_rel(lin.A, expected) < 1e-6);
    CHECK(lin.B1(1, 0) == doctest::Approx(1.0));
    CHECK(lin.B1(3, 1) == doctest::Approx(1 / 1.5));
    CHECK(lin.D1(1, 0) == doctest::Approx(-1.0));
    CHECK(lin.D1(3, 1) == doctest::Approx(-1 / 1.5));
}

TEST_CASE("structural rows and damping entries on all shipped grids") {
    for (const char* name : {"two_bus", "ieee5", "ieee33"}) {
        CAPTURE(name);
        const grid::GridModel g = app::resolve_grid(name);
        const grid::Equilibrium eq = grid::find_equilibrium(g);
        const grid::LinearizedSystem lin = grid::linearize(g, eq);
        const auto dyn = g.dynamic_indices();
        for (std::size_t i = 0; i < dyn.size(); ++i) {
            const Eigen::Index r = 2 * static_cast<Eigen::Index>(i);
            CHECK(lin.A.row(r) == Eigen::RowVectorXd::Unit(lin.A.cols(), r + 1));
            const grid::Bus& b = g.buses[dyn[i]];
            CHECK(lin.A(r + 1, r + 1) == -b.b / b.M);
        }
    }
}

TEST_CASE("equilibria are stationary, balanced and independently consistent") {
    for (const char* name : {"two_bus", "ieee5", "ieee33"}) {
        CAPTURE(name);
        const grid::GridModel g = app::resolve_grid(name);
        const grid::Equilibrium eq = grid::find_equilibrium(g);
        CHECK(grid::dynamics(eq.balanced, eq.state, &eq.network).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(phasor_mismatch(eq.balanced, eq.network).cwiseAbs().maxCoeff() <= 1e-8);
        double inj = eq.network.slack_P, out = 0.0;
        for (std::size_t i = 0; i < g.buses.size(); ++i) {
            inj += eq.balanced.buses[i].P_in - eq.balanced.buses[i].P_L;
            out += eq.network.P_out(static_cast<Eigen::Index>(i));
        }
        CHECK(std::abs(inj - out) <= 1e-8);
    }
}

TEST_CASE("finite differences converge at second order") {
    const grid::GridModel g = app::resolve_grid("ieee5");
    const grid::Equilibrium eq = grid::find_equilibrium(g);
    std::mt19937_64 rng(23);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        Vector dir(4);
        for (int i = 0; i < 4; ++i) dir(i) = n(rng);
        dir(0) = 0.0;  // reference angle stays fixed
        dir.normalize();
        auto D = [&](double h) {
            return Vector((grid::dynamics(eq.balanced, eq.state + h * dir) - grid::dynamics(eq.balanced, eq.state - h * dir)) /
                          (2 * h));
        };
        const double h = 0.02;
        const Vector d1 = D(h), d2 = D(h / 2), d4 = D(h / 4);
        const double ratio = (d1 - d2).norm() / (d2 - d4).norm();
        CHECK(ratio > 3.5);
        CHECK(ratio < 4.5);
    }
}

TEST_CASE("33-bus case data is imported from the MATPOWER file") {
    const grid::GridModel g = app::resolve_grid("ieee33");
    CHECK(g.buses.size() == 33);
    CHECK(g.lines.size() == 32);
    REQUIRE(g.slack_index().has_value());
    CHECK(g.buses[*g.slack_index()].id == 1);
    CHECK(g.dynamic_indices().size() == 2);
    CHECK(g.base_mva == 10.0);
    const grid::Bus& b18 = g.buses[g.index_of(18)];
    CHECK(b18.M == 1.8);
    CHECK(b18.b == 0.22);
    CHECK_FALSE(g.buses[g.index_of(5)].voltage_fixed);
}

TEST_CASE("grid validation and parser errors") {
    CHECK_THROWS_AS(grid::parse_grid_json("{not json"), ConfigError);
    CHECK_THROWS_AS(grid::parse_grid_json(R"({"buses":[{"id":1,"kind":"weird"}],"lines":[]})"), ConfigError);
    CHECK_THROWS_AS(grid::parse_grid_json(R"({"buses":[{"id":1,"kind":"dynamic","M":0,"b":1},
        {"id":2,"kind":"slack"}],"lines":[{"from":1,"to":2,"X":0.1}]})"),
                    ModelError);
    CHECK_THROWS_AS(grid::parse_grid_json(R"({"buses":[{"id":1,"kind":"slack"},{"id":2,"kind":"slack"}],
        "lines":[{"from":1,"to":2,"X":0.1}]})"),
                    ModelError);
    CHECK_THROWS_AS(grid::parse_grid_json(R"({"buses":[{"id":1,"kind":"slack"},{"id":2}],"lines":[]})"), ModelError);
    CHECK_THROWS_AS(grid::parse_matpower("mpc.bus = [1 3 0 0 0 0 1 1 0 12.66 1 1.1 0.9];"), ConfigError);
    CHECK_THROWS_AS(app::resolve_grid("no_such_grid"), ConfigError);
}

TEST_CASE("infeasible loading reports no equilibrium") {
    const grid::GridModel g = two_bus_with_load_bus(100.0);
    CHECK_THROWS_AS(grid::solve_network(g, Vector::Zero(1)), ModelError);
}
