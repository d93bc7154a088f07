#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "greenwave/oracle.hpp"
#include "greenwave/tracer.hpp"

using namespace greenwave;
using Catch::Approx;

namespace {

// Solved once per process; sections share them read-only.
const SolutionBundle& det_bundle() {
    static const SolutionBundle b = [] {
        SolveConfig cfg;
        cfg.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
        cfg.n_v = 24;
        return solve_bundle(cfg);
    }();
    return b;
}

const SolutionBundle& tree_bundle() {
    static const SolutionBundle b = [] {
        SolveConfig cfg;
        cfg.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
        cfg.n_v = 24;
        GreenDurationDistribution dist;
        dist.times = {2.0, 4.0, 6.0};
        dist.probs = {0.25, 0.25, 0.5};
        cfg.distribution = dist;
        return solve_bundle(cfg);
    }();
    return b;
}

bool has_event(const Trajectory& tr, TraceEvent e) {
    return std::any_of(tr.events.begin(), tr.events.end(),
                       [&](const TraceMark& m) { return m.event == e; });
}

const TraceMark* find_event(const Trajectory& tr, TraceEvent e) {
    for (const TraceMark& m : tr.events)
        if (m.event == e) return &m;
    return nullptr;
}

}  // namespace

TEST_CASE("event names are stable identifiers", "[tracer]") {
    CHECK(std::string(trace_event_name(TraceEvent::turned_yellow)) == "turned-yellow");
    CHECK(std::string(trace_event_name(TraceEvent::turned_red)) == "turned-red");
    CHECK(std::string(trace_event_name(TraceEvent::turned_green)) == "turned-green");
    CHECK(std::string(trace_event_name(TraceEvent::crossed_intersection)) ==
          "crossed-intersection");
    CHECK(std::string(trace_event_name(TraceEvent::reached_target)) == "reached-target");
}

TEST_CASE("coasting at the speed limit is traced exactly", "[tracer]") {
    SolveConfig cfg;
    cfg.weights = {0.0, 0.0, 1.0};
    cfg.n_v = 24;
    SolutionBundle b;
    b.config = cfg;
    b.stationary = solve_stationary_green(cfg);
    b.snapped = snap_schedule(cfg.schedule, b.stationary.grid.delta_t);

    const PhysicalParams& p = cfg.params;
    Trajectory tr = trace_deterministic({p.d_bar, p.v_bar}, b.snapped.t_green(), b);
    REQUIRE(tr.samples.size() >= 2);
    CHECK(tr.costs.j1 == Approx(0.0).margin(1e-12));
    CHECK(tr.costs.j2 == Approx(0.0).margin(1e-12));
    CHECK(tr.costs.j3 == Approx((p.d_bar - p.d_star) / p.v_bar).margin(1e-9));
    CHECK(has_event(tr, TraceEvent::reached_target));
    CHECK(tr.samples.back().d == Approx(p.d_star).margin(1e-9));
}

TEST_CASE("a stationary-only bundle cannot trace the signal phases", "[tracer]") {
    SolveConfig cfg;
    cfg.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    cfg.n_v = 12;
    SolutionBundle b;
    b.config = cfg;
    b.stationary = solve_stationary_green(cfg);
    b.snapped = snap_schedule(cfg.schedule, b.stationary.grid.delta_t);
    CHECK_THROWS_AS(trace_deterministic({80.0, 5.0}, b.snapped.t_red(), b),
                    std::invalid_argument);
}

TEST_CASE("brake, stop and wait through the red phase", "[tracer]") {
    const SolutionBundle& b = det_bundle();
    Trajectory tr = trace_deterministic({80.0, 15.0}, b.snapped.t_red(), b);

    SECTION("the light events sit on the snapped schedule") {
        const TraceMark* green = find_event(tr, TraceEvent::turned_green);
        REQUIRE(green);
        CHECK(tr.samples[green->sample].t == Approx(b.snapped.t_green()).margin(1e-9));
        CHECK_FALSE(has_event(tr, TraceEvent::turned_red));  // started at red onset
    }
    SECTION("the crossing happens after the green and ends at the target") {
        const TraceMark* cross = find_event(tr, TraceEvent::crossed_intersection);
        const TraceMark* target = find_event(tr, TraceEvent::reached_target);
        REQUIRE(cross);
        REQUIRE(target);
        CHECK(tr.samples[cross->sample].t > b.snapped.t_green());
        CHECK(tr.samples[cross->sample].d == Approx(b.config.params.d_ell).margin(1e-9));
        CHECK(target->sample == tr.samples.size() - 1);
        CHECK(tr.samples.back().d == Approx(b.config.params.d_star).margin(1e-9));
    }
    SECTION("the car actually stops during red") {
        // feedback braking decays the speed geometrically; it settles within
        // nanometres per second of zero rather than hitting it exactly
        double v_min = 1e9;
        for (const TraceSample& s : tr.samples)
            if (s.t < b.snapped.t_green()) v_min = std::min(v_min, s.v);
        CHECK(v_min <= 1e-6);
    }
    SECTION("speeds stay within the box") {
        for (const TraceSample& s : tr.samples) {
            CHECK(s.v >= -1e-9);
            CHECK(s.v <= b.config.params.v_bar + 1e-9);
        }
    }
}

TEST_CASE("samples chain by the exact kinematics", "[tracer]") {
    const SolutionBundle& b = det_bundle();
    Trajectory tr = trace_deterministic({80.0, 15.0}, b.snapped.t_yellow, b);
    REQUIRE(tr.samples.size() >= 3);
    double dt_trace = 0.25 * b.stationary.grid.delta_t;
    for (std::size_t k = 0; k + 1 < tr.samples.size(); ++k) {
        const TraceSample& s0 = tr.samples[k];
        const TraceSample& s1 = tr.samples[k + 1];
        double tau = s1.t - s0.t;
        CHECK(tau >= -1e-12);
        CHECK(tau <= dt_trace + 1e-9);
        VehicleState next = step_dynamics({s0.d, s0.v}, s0.a, tau);
        CHECK(s1.d == Approx(next.d).margin(1e-9));
        CHECK(s1.v == Approx(next.v).margin(1e-9));
    }
}

TEST_CASE("traced cost matches the trapezoid identity", "[tracer]") {
    const SolutionBundle& b = det_bundle();
    Trajectory tr = trace_deterministic({60.0, 10.0}, b.snapped.t_yellow, b);
    const CostWeights& w = b.config.weights;
    double j1 = 0.0, j2 = 0.0;
    for (std::size_t k = 0; k + 1 < tr.samples.size(); ++k) {
        double tau = tr.samples[k + 1].t - tr.samples[k].t;
        j1 += 0.5 * tau * (std::max(tr.samples[k].a, 0.0) + std::max(tr.samples[k + 1].a, 0.0));
        j2 += 0.5 * tau * (tr.samples[k].a * tr.samples[k].a +
                           tr.samples[k + 1].a * tr.samples[k + 1].a);
    }
    double j3 = tr.samples.back().t - tr.samples.front().t;
    CHECK(tr.costs.j1 == Approx(j1).margin(1e-12));
    CHECK(tr.costs.j2 == Approx(j2).margin(1e-12));
    CHECK(tr.costs.j3 == Approx(j3).margin(1e-12));
    CHECK(tr.costs.j == Approx(w.c1 * j1 + w.c2 * j2 + w.c3 * j3).margin(1e-12));
}

TEST_CASE("traced cost approximates the grid value", "[tracer]") {
    const SolutionBundle& b = det_bundle();
    VehicleState y{80.0, 15.0};
    Trajectory tr = trace_deterministic(y, b.snapped.t_yellow, b);
    double u = bilinear_sample(b.timed.grid, b.timed.slice_value(0), y);
    double eps = 3.0 * (b.timed.grid.delta_d + b.timed.grid.delta_t);
    CHECK(std::abs(tr.costs.j - u) <= eps);
}

TEST_CASE("tracing is deterministic", "[tracer]") {
    const SolutionBundle& b = det_bundle();
    Trajectory t1 = trace_deterministic({70.0, 12.0}, b.snapped.t_yellow, b);
    Trajectory t2 = trace_deterministic({70.0, 12.0}, b.snapped.t_yellow, b);
    REQUIRE(t1.samples.size() == t2.samples.size());
    CHECK(std::memcmp(t1.samples.data(), t2.samples.data(),
                      t1.samples.size() * sizeof(TraceSample)) == 0);
    CHECK(t1.costs.j == t2.costs.j);
}

TEST_CASE("trace guards", "[tracer]") {
    const SolutionBundle& b = det_bundle();
    SECTION("starting inside the disallowed band is a hard error") {
        VehicleState bad{10.0, 10.0};  // d_alpha(10) is about 13.2
        CHECK_THROWS_AS(trace_deterministic(bad, b.snapped.t_red() + 1.0, b),
                        std::runtime_error);
    }
    SECTION("the horizon cap aborts an unfinished trace") {
        TraceLimits lim;
        lim.horizon = 5.0;  // the red wait alone is 60 s
        CHECK_THROWS_AS(trace_deterministic({80.0, 15.0}, b.snapped.t_yellow, b, lim),
                        std::runtime_error);
    }
    SECTION("pre-yellow starts need the scenario tracer") {
        CHECK_THROWS_AS(trace_deterministic({80.0, 15.0}, b.snapped.t_yellow - 1.0, b),
                        std::invalid_argument);
    }
    SECTION("a custom trace step is honored") {
        TraceLimits lim;
        lim.dt_trace = 0.5;
        Trajectory tr = trace_deterministic({80.0, 15.0}, b.snapped.t_red(), b, lim);
        for (std::size_t k = 0; k + 1 < tr.samples.size(); ++k)
            CHECK(tr.samples[k + 1].t - tr.samples[k].t <= 0.5 + 1e-9);
    }
}

TEST_CASE("scenario tree structure", "[tracer][tree]") {
    const SolutionBundle& b = tree_bundle();
    const GreenDurationDistribution& dist = *b.snapped_distribution;
    VehicleState start{68.0, 5.0};
    BranchingTrajectory tree = trace_scenario_tree(start, b);

    SECTION("one trunk and one leaf per scenario") {
        REQUIRE(tree.trunks.size() == 3);
        REQUIRE(tree.leaves.size() == 3);
        REQUIRE(tree.leaf_costs.size() == 3);
        for (int i = 0; i < 3; ++i) {
            CHECK(tree.trunks[i].branch_id == i + 1);
            CHECK(tree.leaves[i].branch_id == 4 + i);
        }
    }
    SECTION("probabilities are the snapped reveal probabilities") {
        REQUIRE(tree.probabilities.size() == 3);
        CHECK(tree.probabilities[0] == 0.25);
        CHECK(tree.probabilities[1] == 0.25);
        CHECK(tree.probabilities[2] == 0.5);
        double sum = tree.probabilities[0] + tree.probabilities[1] + tree.probabilities[2];
        CHECK(sum == Approx(1.0).margin(1e-12));
    }
    SECTION("trunks tile the reveal times and leaves start at them") {
        double prev = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            const Trajectory& trunk = tree.trunks[i];
            REQUIRE_FALSE(trunk.samples.empty());
            CHECK(trunk.samples.front().t == Approx(prev).margin(1e-9));
            CHECK(trunk.samples.back().t == Approx(dist.times[i]).margin(1e-9));
            CHECK(tree.leaves[i].samples.front().t == Approx(dist.times[i]).margin(1e-9));
            prev = dist.times[i];
        }
    }
    SECTION("every leaf opens with the yellow reveal and ends at the target") {
        for (const Trajectory& leaf : tree.leaves) {
            const TraceMark* yellow = find_event(leaf, TraceEvent::turned_yellow);
            REQUIRE(yellow);
            CHECK(yellow->sample == 0);
            CHECK(has_event(leaf, TraceEvent::reached_target));
        }
    }
    SECTION("path costs are trunk prefixes plus the leaf") {
        double prefix_j = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            prefix_j += tree.trunks[i].costs.j;
            CHECK(tree.leaf_costs[i].j ==
                  Approx(prefix_j + tree.leaves[i].costs.j).margin(1e-12));
        }
    }
    SECTION("the expected cost is the probability-weighted path cost") {
        double expected = 0.0;
        for (std::size_t i = 0; i < 3; ++i)
            expected += tree.probabilities[i] * tree.leaf_costs[i].j;
        CHECK(tree.expected_cost == Approx(expected).margin(1e-12));
    }
    SECTION("a sampled policy evaluation agrees with the tree") {
        auto cost = [&](std::size_t i) { return tree.leaf_costs[i].j; };
        MonteCarloEstimate mc = expected_cost_monte_carlo(cost, dist, 20000, 5);
        CHECK(std::abs(mc.mean - tree.expected_cost) <= 3.0 * mc.std_error + 1e-9);
    }
    SECTION("the branching trace is deterministic") {
        BranchingTrajectory again = trace_scenario_tree(start, b);
        CHECK(again.expected_cost == tree.expected_cost);
        REQUIRE(again.trunks.size() == tree.trunks.size());
        for (std::size_t i = 0; i < tree.trunks.size(); ++i) {
            REQUIRE(again.trunks[i].samples.size() == tree.trunks[i].samples.size());
            CHECK(std::memcmp(again.trunks[i].samples.data(), tree.trunks[i].samples.data(),
                              tree.trunks[i].samples.size() * sizeof(TraceSample)) == 0);
        }
    }
    SECTION("a bundle without a chain cannot grow a tree") {
        CHECK_THROWS_AS(trace_scenario_tree(start, det_bundle()), std::invalid_argument);
    }
}
