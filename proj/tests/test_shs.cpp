#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <doctest.h>

#include "gridshs/errors.hpp"
#include "gridshs/shs.hpp"

using namespace gridshs;

namespace {

shs::SensorChannel channel(const char* name, Eigen::Index n, Eigen::Index at, double rho, double sigma) {
    shs::SensorChannel c;
    c.name = name;
    c.row = Eigen::RowVectorXd::Unit(n, at);
    c.rho = rho;
    c.sigma = sigma;
    return c;
}

std::vector<shs::SensorChannel> two_angles(double r1, double r2) {
    return {channel("1.delta", 4, 0, r1, 0.01), channel("2.delta", 4, 2, r2, 0.01)};
}

}  // namespace

TEST_CASE("two-channel enumeration order and probabilities") {
    const shs::ScenarioSet set = shs::scenarios_from_channels(two_angles(0.99, 0.995));
    REQUIRE(set.size() == 4);
    const double expected[] = {0.99 * 0.995, 0.99 * 0.005, 0.01 * 0.995, 0.01 * 0.005};
    const Eigen::Index rows[] = {2, 1, 1, 0};
    double total = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(set.at(i).index == static_cast<int>(i) + 1);
        CHECK(set.at(i).probability == doctest::Approx(expected[i]).epsilon(1e-14));
        CHECK(set.at(i).C.rows() == rows[i]);
        total += set.at(i).probability;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    // scenario 2 keeps the first channel, scenario 3 the second
    CHECK(set.at(1).C == Eigen::RowVectorXd::Unit(4, 0));
    CHECK(set.at(2).C == Eigen::RowVectorXd::Unit(4, 2));
    CHECK(set.at(2).channels == std::vector<int>{1});
    CHECK(set.noise_column(2, 0) == 1);
}

TEST_CASE("scenario 1 is the all-up scenario for any channel count") {
    for (int c = 1; c <= 6; ++c) {
        std::vector<shs::SensorChannel> ch;
        for (int k = 0; k < c; ++k) ch.push_back(channel("x", c, k, 0.7 + 0.04 * k, 0.1));
        const shs::ScenarioSet set = shs::scenarios_from_channels(ch);
        CHECK(set.size() == (1u << c));
        CHECK(set.at(0).index == 1);
        CHECK(set.at(0).C.rows() == c);
        CHECK(set.scenarios.back().C.rows() == 0);
        double total = 0.0;
        for (const auto& s : set.scenarios) total += s.probability;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("a perfectly reliable channel prunes the scenarios where it is down") {
    const shs::ScenarioSet set = shs::scenarios_from_channels(two_angles(1.0, 0.9));
    REQUIRE(set.size() == 2);
    CHECK(set.at(0).index == 1);
    CHECK(set.at(1).index == 2);
    CHECK(set.at(1).C == Eigen::RowVectorXd::Unit(4, 0));
    CHECK_THROWS_AS(set.position_of(3), ModelError);
}

TEST_CASE("three fair channels give eight equally likely scenarios") {
    std::vector<shs::SensorChannel> ch;
    for (int k = 0; k < 3; ++k) ch.push_back(channel("x", 3, k, 0.5, 0.1));
    const shs::ScenarioSet set = shs::scenarios_from_channels(ch);
    REQUIRE(set.size() == 8);
    for (const auto& s : set.scenarios) CHECK(s.probability == doctest::Approx(0.125).epsilon(1e-15));
}

TEST_CASE("sigma overrides broadcast a single value and accept per-row lists") {
    shs::SigmaOverrides ov{{1, {0.5}}, {2, {0.0015}}, {3, {0.002}}};
    const shs::ScenarioSet set = shs::scenarios_from_channels(two_angles(0.99, 0.995), ov);
    CHECK(set.at(0).sigma(0, 0) == 0.5);
    CHECK(set.at(0).sigma(1, 1) == 0.5);
    CHECK(set.at(0).sigma(0, 1) == 0.0);
    CHECK(set.at(1).sigma(0, 0) == 0.0015);
    CHECK(set.at(2).sigma(0, 0) == 0.002);
    const shs::ScenarioSet set2 = shs::scenarios_from_channels(two_angles(0.99, 0.995), {{1, {0.3, 0.4}}});
    CHECK(set2.at(0).sigma(0, 0) == 0.3);
    CHECK(set2.at(0).sigma(1, 1) == 0.4);
    CHECK(set2.at(1).sigma(0, 0) == 0.01);
}

TEST_CASE("channel and override validation") {
    CHECK_THROWS_AS(shs::scenarios_from_channels({}), ModelError);
    std::vector<shs::SensorChannel> many;
    for (int k = 0; k < 17; ++k) many.push_back(channel("x", 17, k, 0.9, 0.1));
    CHECK_THROWS_AS(shs::scenarios_from_channels(many), ModelError);
    CHECK_THROWS_AS(shs::scenarios_from_channels(two_angles(0.0, 0.9)), ModelError);
    CHECK_THROWS_AS(shs::scenarios_from_channels(two_angles(1.1, 0.9)), ModelError);
    CHECK_THROWS_AS(shs::scenarios_from_channels(two_angles(0.9, 0.9), {{5, {0.1}}}), ModelError);
    CHECK_THROWS_AS(shs::scenarios_from_channels(two_angles(0.9, 0.9), {{1, {0.1, 0.2, 0.3}}}), ModelError);
    auto bad = two_angles(0.9, 0.9);
    bad[1].sigma = -1;
    CHECK_THROWS_AS(shs::scenarios_from_channels(bad), ModelError);
}

TEST_CASE("explicit scenario sets must be a probability distribution") {
    shs::Scenario a;
    a.index = 1;
    a.C = Matrix::Identity(1, 2);
    a.sigma = Matrix::Identity(1, 1);
    a.probability = 0.6;
    shs::Scenario b = a;
    b.index = 2;
    b.probability = 0.3;
    CHECK_THROWS_AS(shs::make_set({a, b}, 2), ModelError);
    b.probability = 0.4;
    const shs::ScenarioSet set = shs::make_set({a, b}, 2);
    CHECK(set.size() == 2);
    CHECK(set.channel_count == 1);
}

TEST_CASE("skeleton frequencies match the scenario probabilities") {
    const shs::ScenarioSet set = shs::scenarios_from_channels({channel("x", 1, 0, 0.494, 0.1)});
    const int K = 100000;
    const auto path = shs::sample_skeleton(set, K, 99);
    const double up = std::count(path.begin(), path.end(), 0) / static_cast<double>(K);
    const double sd = std::sqrt(0.494 * 0.506 / K);
    CHECK(std::abs(up - 0.494) < 4 * sd);

    const shs::ScenarioSet four = shs::scenarios_from_channels(two_angles(0.99, 0.995));
    const int K6 = 1000000;
    const auto p6 = shs::sample_skeleton(four, K6, 7);
    std::array<int, 4> counts{};
    for (int s : p6) ++counts[s];
    const double f4 = counts[3] / static_cast<double>(K6);
    CHECK(f4 >= 1e-5);
    CHECK(f4 <= 1e-4);
    for (int i = 0; i < 4; ++i) {
        const double p = four.at(i).probability;
        CHECK(std::abs(counts[i] / static_cast<double>(K6) - p) < 5 * std::sqrt(p * (1 - p) / K6));
    }
}

TEST_CASE("skeletons from different seeds are independent") {
    const shs::ScenarioSet set = shs::scenarios_from_channels(two_angles(0.6, 0.7));
    const int K = 20000;
    const auto a = shs::sample_skeleton(set, K, 1);
    const auto b = shs::sample_skeleton(set, K, 2);
    CHECK(a == shs::sample_skeleton(set, K, 1));
    CHECK(a != b);
    // chi-square test of independence on the 4 x 4 contingency table, 9 degrees of freedom
    double table[4][4] = {};
    double ra[4] = {}, rb[4] = {};
    for (int k = 0; k < K; ++k) {
        table[a[k]][b[k]] += 1;
        ra[a[k]] += 1;
        rb[b[k]] += 1;
    }
    double chi2 = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const double e = ra[i] * rb[j] / K;
            chi2 += (table[i][j] - e) * (table[i][j] - e) / e;
        }
    CHECK(chi2 < 27.88);  // 0.999 quantile
}

TEST_CASE("seed derivation separates replicas and streams") {
    CHECK(shs::mix64(0) != shs::mix64(1));
    CHECK(shs::replica_seed(5, 0) != shs::replica_seed(5, 1));
    CHECK(shs::replica_seed(5, 0) != shs::replica_seed(6, 0));
    CHECK(shs::stream_seed(5, shs::Stream::switching) != shs::stream_seed(5, shs::Stream::noise));
    CHECK_THROWS_AS(shs::sample_skeleton(shs::scenarios_from_channels(two_angles(0.9, 0.9)), 0, 1), ModelError);
}
