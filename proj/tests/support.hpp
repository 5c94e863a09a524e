#pragma once

#include <random>

#include "gridshs/app.hpp"

namespace gridshs::testing {

inline Matrix five_bus_A() { return app::load_published_system("ieee5_published").A; }

// Angle sensors on both dynamic buses with the given delivery ratios and noise levels.
inline shs::ScenarioSet angle_sensors(double rho1, double rho2, double s1 = 0.01, double s2 = 0.01,
                                      shs::SigmaOverrides overrides = {{2, {0.0015}}, {3, {0.002}}}) {
    std::vector<shs::SensorChannel> ch(2);
    ch[0].name = "1.delta";
    ch[0].row = Eigen::RowVectorXd::Unit(4, 0);
    ch[0].rho = rho1;
    ch[0].sigma = s1;
    ch[1].name = "2.delta";
    ch[1].row = Eigen::RowVectorXd::Unit(4, 2);
    ch[1].rho = rho2;
    ch[1].sigma = s2;
    return shs::scenarios_from_channels(ch, overrides);
}

inline analysis::ObserverSpec five_bus_spec(std::vector<Complex> poles = {-4.8, -3.6, -4, -4.4},
                                            double rho1 = 0.99, double rho2 = 0.995,
                                            observer::Recombination mode = observer::Recombination::active) {
    analysis::ObserverSpec spec;
    spec.A = five_bus_A();
    spec.set = angle_sensors(rho1, rho2);
    spec.poles.default_poles = std::move(poles);
    spec.tau = 0.6261;
    spec.mode = mode;
    return spec;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix M(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index k = 0; k < c; ++k) M(i, k) = n(rng);
    return M;
}

inline double max_rel(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index k = 0; k < a.cols(); ++k) {
            const double ref = std::abs(b(i, k));
            const double d = std::abs(a(i, k) - b(i, k));
            worst = std::max(worst, ref > 0 ? d / ref : d);
        }
    return worst;
}

}  // namespace gridshs::testing
