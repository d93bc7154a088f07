#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "greenwave/model.hpp"

using namespace greenwave;
using Catch::Approx;

namespace {
const PhysicalParams p{};  // defaults: v_bar 20.12, alpha = beta = 3.8
}

TEST_CASE("constant-acceleration step is exact", "[model][dynamics]") {
    VehicleState y = step_dynamics({10.0, 5.0}, 0.0, 1.0);
    CHECK(y.d == Approx(5.0).margin(1e-15));
    CHECK(y.v == Approx(5.0).margin(1e-15));

    y = step_dynamics({10.0, 0.0}, 3.8, 1.0);
    CHECK(y.d == Approx(8.1).margin(1e-12));
    CHECK(y.v == Approx(3.8).margin(1e-12));

    y = step_dynamics({5.0, 5.0}, -3.8, 1.0);
    CHECK(y.d == Approx(1.9).margin(1e-12));
    CHECK(y.v == Approx(1.2).margin(1e-12));
}

TEST_CASE("half-step composition matches one full step", "[model][dynamics]") {
    VehicleState y{42.0, 7.25};
    double a = 1.3, tau = 0.64;
    VehicleState two = step_dynamics(step_dynamics(y, a, 0.5 * tau), a, 0.5 * tau);
    VehicleState one = step_dynamics(y, a, tau);
    CHECK(two.d == Approx(one.d).margin(1e-12));
    CHECK(two.v == Approx(one.v).margin(1e-12));
}

TEST_CASE("running cost values", "[model][cost]") {
    CostWeights w{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    CHECK(running_cost(w, 3.8) == Approx((3.8 + 14.44 + 1.0) / 3.0).epsilon(1e-12));
    CHECK(running_cost(w, -3.8) == Approx((14.44 + 1.0) / 3.0).epsilon(1e-12));
    CHECK(running_cost(w, 0.0) == Approx(1.0 / 3.0).epsilon(1e-12));

    // positive homogeneity in the weights
    CostWeights w7{7.0 / 3.0, 7.0 / 3.0, 7.0 / 3.0};
    CHECK(running_cost(w7, 1.7) == Approx(7.0 * running_cost(w, 1.7)).epsilon(1e-12));
}

TEST_CASE("stopping curve", "[model][geometry]") {
    CHECK(d_alpha(p, 20.12) == Approx(53.2650526315789).epsilon(1e-12));
    CHECK(d_alpha(p, 10.0) == Approx(100.0 / 7.6).epsilon(1e-12));
    CHECK(d_alpha(p, 0.0) == 0.0);
}

TEST_CASE("crossing curve", "[model][geometry]") {
    SignalSchedule s;  // yellow at 0, red at 3, green at 63

    SECTION("degenerates to the stop line at the red time") {
        CHECK(d_beta(p, 10.0, 3.0, s) == p.d_ell);
        CHECK(d_beta(p, 10.0, 4.0, s) == p.d_ell);
    }
    SECTION("at the speed limit the whole window is coasting") {
        CHECK(d_beta(p, 20.12, 0.0, s) == Approx(60.36).epsilon(1e-12));
    }
    SECTION("from rest the ramp never reaches the limit in 3 s") {
        CHECK(d_beta(p, 0.0, 0.0, s) == Approx(17.1).epsilon(1e-12));
    }
    SECTION("continuous where the ramp meets the cap") {
        // v_c is the speed whose ramp to v_bar takes exactly the window
        double s_r = 2.0;
        double v_c = p.v_bar - p.beta * s_r;
        double lo = d_beta(p, v_c - 1e-9, 1.0, s);
        double hi = d_beta(p, v_c + 1e-9, 1.0, s);
        CHECK(lo == Approx(hi).margin(1e-7));
    }
}

TEST_CASE("boundary costs against a zero continuation", "[model][cost]") {
    SignalSchedule s;
    auto zero = [](const VehicleState&) { return 0.0; };

    SECTION("stop-and-wait from the stopping curve") {
        CostWeights w{0.0, 1.0, 0.0};
        // v = 3.8 brakes for exactly 1 s; green is 10 s away
        double t = s.t_green() - 10.0;
        CHECK(boundary_cost_alpha(p, s, w, 3.8, t, zero) == Approx(14.44).epsilon(1e-12));
        // the continuation is sampled at the stop line, at rest
        bool at_rest = false;
        auto probe = [&](const VehicleState& y) {
            at_rest = std::abs(y.d - p.d_ell) < 1e-12 && y.v == 0.0;
            return 0.0;
        };
        boundary_cost_alpha(p, s, w, 3.8, t, probe);
        CHECK(at_rest);
    }
    SECTION("committed crossing from the crossing curve") {
        CostWeights w{1.0, 1.0, 0.0};
        // v = 12.52 ramps to the limit in exactly the 2 s left to red
        double t = s.t_red() - 2.0;
        CHECK(boundary_cost_beta(p, s, w, 12.52, t, zero) == Approx(36.48).epsilon(1e-12));
        bool at_line = false;
        auto probe = [&](const VehicleState& y) {
            at_line = std::abs(y.d - p.d_ell) < 1e-12 && y.v == Approx(20.12);
            return 0.0;
        };
        boundary_cost_beta(p, s, w, 12.52, t, probe);
        CHECK(at_line);
    }
    SECTION("time weight accrues over the full wait") {
        CostWeights w{0.0, 0.0, 1.0};
        double t = s.t_green() - 10.0;
        CHECK(boundary_cost_alpha(p, s, w, 3.8, t, zero) == Approx(10.0).epsilon(1e-12));
    }
}

TEST_CASE("region membership", "[model][geometry]") {
    SignalSchedule s;
    double red_t = 5.0;     // inside [3, 63)
    double yellow_t = 2.5;  // 0.5 s to red

    SECTION("red: short of the stopping distance is disallowed") {
        CHECK(region_membership({13.0, 10.0}, red_t, s, p) == Region::disallowed_red);
        CHECK(region_membership({13.2, 10.0}, red_t, s, p) == Region::allowed);
        CHECK(region_membership({d_alpha(p, 10.0), 10.0}, red_t, s, p) == Region::allowed);
        CHECK(region_membership({-1.0, 10.0}, red_t, s, p) == Region::allowed);
    }
    SECTION("yellow: the strip between the curves is disallowed") {
        double db = d_beta(p, 10.0, yellow_t, s);  // 5.475
        double da = d_alpha(p, 10.0);              // 13.157...
        REQUIRE(db < da);
        CHECK(region_membership({10.0, 10.0}, yellow_t, s, p) == Region::disallowed_yellow);
        CHECK(region_membership({db, 10.0}, yellow_t, s, p) == Region::allowed);
        CHECK(region_membership({da, 10.0}, yellow_t, s, p) == Region::allowed);
        CHECK(region_membership({4.0, 10.0}, yellow_t, s, p) == Region::allowed);
    }
    SECTION("early yellow leaves no gap at moderate speeds") {
        CHECK(region_membership({20.0, 10.0}, 1.0, s, p) == Region::allowed);
    }
    SECTION("green phases are unconstrained") {
        CHECK(region_membership({13.0, 10.0}, 70.0, s, p) == Region::allowed);
        CHECK(region_membership({13.0, 10.0}, -1.0, s, p) == Region::allowed);
    }
}

TEST_CASE("conditional hazards", "[model][distribution]") {
    GreenDurationDistribution dist;
    dist.times = {2.0, 4.0, 6.0};
    dist.probs = {0.25, 0.25, 0.5};
    std::vector<double> hz = conditional_hazards(dist);
    REQUIRE(hz.size() == 3);
    CHECK(hz[0] == Approx(0.25).epsilon(1e-12));
    CHECK(hz[1] == Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(hz[2] == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("conditioning on elapsed green", "[model][distribution]") {
    GreenDurationDistribution dist;
    dist.times = {2.0, 4.0, 6.0};
    dist.probs = {0.25, 0.25, 0.5};
    dist.elapsed_green = 3.0;
    GreenDurationDistribution c = dist.conditioned();
    REQUIRE(c.times.size() == 2);
    CHECK(c.times[0] == Approx(1.0).epsilon(1e-12));
    CHECK(c.times[1] == Approx(3.0).epsilon(1e-12));
    CHECK(c.probs[0] == Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(c.probs[1] == Approx(2.0 / 3.0).epsilon(1e-12));

    dist.elapsed_green = 7.0;
    CHECK_THROWS_AS(dist.conditioned(), std::invalid_argument);
}

TEST_CASE("validation names the offending field", "[model][validation]") {
    PhysicalParams bad = p;
    bad.alpha = 0.0;
    CHECK_THROWS_WITH(bad.validate(), Catch::Matchers::ContainsSubstring("alpha"));

    GreenDurationDistribution dist;
    dist.times = {2.0};
    dist.probs = {0.5};
    CHECK_THROWS_WITH(dist.validate(), Catch::Matchers::ContainsSubstring("probs"));
}
