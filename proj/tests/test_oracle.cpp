#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "greenwave/oracle.hpp"

using namespace greenwave;
using Catch::Approx;

namespace {
const PhysicalParams p{};

ControlMesh coarse_mesh() {
    ControlMesh mesh;
    mesh.candidates = {-3.8, -1.9, 0.0, 1.9, 3.8};
    return mesh;
}
}  // namespace

TEST_CASE("minimum travel time", "[oracle][time]") {
    SECTION("accelerate-then-coast from rest at 80 m") {
        CHECK(time_optimal_value(p, {80.0, 0.0}) == Approx(11.5936904886).margin(1e-9));
    }
    SECTION("at the speed limit the bound is pure coasting") {
        VehicleState y{50.0, p.v_bar};
        CHECK(time_optimal_value(p, y) == Approx((y.d - p.d_star) / p.v_bar).margin(1e-12));
    }
    SECTION("speeds above the limit are clamped") {
        CHECK(time_optimal_value(p, {50.0, 25.0}) == Approx(150.0 / p.v_bar).margin(1e-12));
    }
    SECTION("short hop from rest never reaches the limit") {
        CHECK(time_optimal_value(p, {p.d_star + 10.0, 0.0}) ==
              Approx(std::sqrt(20.0 / 3.8)).margin(1e-12));
    }
    SECTION("continuous across the reach-the-limit branch") {
        double v = 10.0;
        double s_star = (p.v_bar * p.v_bar - v * v) / (2.0 * p.beta);
        double lo = time_optimal_value(p, {p.d_star + s_star - 1e-9, v});
        double hi = time_optimal_value(p, {p.d_star + s_star + 1e-9, v});
        CHECK(lo == Approx(hi).margin(1e-9));
    }
    SECTION("zero at and past the target") {
        CHECK(time_optimal_value(p, {p.d_star, 5.0}) == 0.0);
        CHECK(time_optimal_value(p, {p.d_star - 3.0, 0.0}) == 0.0);
    }
}

TEST_CASE("control enumeration", "[oracle][enumeration]") {
    SignalSchedule s;
    ControlMesh mesh = coarse_mesh();

    SECTION("already at the target costs nothing") {
        CostWeights w{1.0, 1.0, 1.0};
        CHECK(enumerate_controls_value({-100.0, 3.0}, 0.0, p, s, w, mesh) == 0.0);
    }
    SECTION("pure time weight after green matches the closed form") {
        CostWeights w{0.0, 0.0, 1.0};
        VehicleState y{80.0, 0.0};
        double t_opt = time_optimal_value(p, y);
        double e = enumerate_controls_value(y, s.t_green(), p, s, w, mesh);
        CHECK(e >= t_opt - 1e-9);
        CHECK(e <= 1.05 * t_opt);
    }
    SECTION("refining the mesh never raises the value") {
        CostWeights w{0.5, 0.2, 1.0};
        VehicleState y{80.0, 10.0};
        ControlMesh fine = mesh;
        fine.candidates = {-3.8, -2.85, -1.9, -0.95, 0.0, 0.95, 1.9, 2.85, 3.8};
        double coarse_v = enumerate_controls_value(y, s.t_green(), p, s, w, mesh);
        double fine_v = enumerate_controls_value(y, s.t_green(), p, s, w, fine);
        CHECK(fine_v <= coarse_v + 1e-12);
    }
    SECTION("a state trapped against the red light is infeasible") {
        CostWeights w{0.0, 0.0, 1.0};
        // deep inside the cannot-stop band at red onset, light green far away
        double e = enumerate_controls_value({10.0, 18.0}, s.t_red() + 1.0, p, s, w, mesh);
        CHECK(is_infeasible(e));
    }
    SECTION("mesh validation rejects bad inputs") {
        CostWeights w{0.0, 0.0, 1.0};
        ControlMesh bad = mesh;
        bad.candidates = {9.0};
        CHECK_THROWS_AS(enumerate_controls_value({80, 0}, 0.0, p, s, w, bad),
                        std::invalid_argument);
        bad = mesh;
        bad.segments = 20;  // 5^20 sequences
        CHECK_THROWS_AS(enumerate_controls_value({80, 0}, 0.0, p, s, w, bad),
                        std::invalid_argument);
    }
}

TEST_CASE("uniform mapping is the documented bit recipe", "[oracle][random]") {
    std::mt19937_64 a(42), b(42);
    double via_helper = uniform01(a);
    double by_hand = static_cast<double>(b() >> 11) * 0x1.0p-53;
    CHECK(via_helper == by_hand);
    CHECK(via_helper >= 0.0);
    CHECK(via_helper < 1.0);
}

TEST_CASE("monte carlo estimator", "[oracle][random]") {
    GreenDurationDistribution two;
    two.times = {2.0, 6.0};
    two.probs = {0.25, 0.75};

    SECTION("seeded runs reproduce bit for bit") {
        auto cost = [](std::size_t i) { return i == 0 ? 3.0 : 11.0; };
        MonteCarloEstimate e1 = expected_cost_monte_carlo(cost, two, 4096, 7);
        MonteCarloEstimate e2 = expected_cost_monte_carlo(cost, two, 4096, 7);
        CHECK(e1.mean == e2.mean);
        CHECK(e1.std_error == e2.std_error);
        CHECK(e1.n_samples == 4096);
    }
    SECTION("each scenario is evaluated at most once") {
        int calls = 0;
        auto cost = [&](std::size_t) {
            ++calls;
            return 1.0;
        };
        expected_cost_monte_carlo(cost, two, 10000, 1);
        CHECK(calls <= 2);
    }
    SECTION("a point mass has zero spread") {
        GreenDurationDistribution one;
        one.times = {4.0};
        one.probs = {1.0};
        auto cost = [](std::size_t i) { return i == 0 ? 5.5 : -1.0; };
        MonteCarloEstimate e = expected_cost_monte_carlo(cost, one, 100, 3);
        CHECK(e.mean == 5.5);
        CHECK(e.std_error == 0.0);
    }
    SECTION("two atoms converge to the weighted mean") {
        auto cost = [](std::size_t i) { return i == 0 ? 3.0 : 11.0; };
        double exact = 0.25 * 3.0 + 0.75 * 11.0;
        MonteCarloEstimate e = expected_cost_monte_carlo(cost, two, 200000, 99);
        CHECK(e.std_error > 0.0);
        CHECK(e.mean == Approx(exact).margin(3.0 * e.std_error + 1e-12));
    }
    SECTION("tiny sample counts are rejected") {
        auto cost = [](std::size_t) { return 1.0; };
        CHECK_THROWS_AS(expected_cost_monte_carlo(cost, two, 1, 0), std::invalid_argument);
    }
}
