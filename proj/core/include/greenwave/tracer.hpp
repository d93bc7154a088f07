#ifndef GREENWAVE_TRACER_HPP
#define GREENWAVE_TRACER_HPP

/**
 * @file tracer.hpp
 * @brief Trajectory synthesis from stored feedback controls, including the
 *        branching trace across scenario-reveal times.
 *
 * Tracing integrates the exact in-step kinematics with the control held
 * constant over each piece, re-sampled from the feedback fields every
 * dt_trace (default delta_t / 4). Pieces are split exactly at phase
 * boundaries, at the stop line, and at the target, so every sample sits on
 * a kinematic breakpoint and consecutive samples satisfy step_dynamics to
 * roundoff.
 */

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "greenwave/solver.hpp"

namespace greenwave {

enum class TraceEvent {
    turned_yellow,
    turned_red,
    turned_green,
    crossed_intersection,
    reached_target,
};

const char* trace_event_name(TraceEvent e);

/// State at a piece boundary; a is the control applied on [t, t_next). The
/// final sample repeats the last applied control so trapezoid integration of
/// a constant-control trajectory is exact.
struct TraceSample {
    double t = 0.0;
    double d = 0.0;
    double v = 0.0;
    double a = 0.0;
};

struct TraceMark {
    std::size_t sample = 0;  ///< index into Trajectory::samples
    TraceEvent event = TraceEvent::reached_target;
};

struct CostBreakdown {
    double j1 = 0.0;  ///< integral of [a]_+
    double j2 = 0.0;  ///< integral of a^2
    double j3 = 0.0;  ///< elapsed time
    double j = 0.0;   ///< c1*j1 + c2*j2 + c3*j3
};

struct Trajectory {
    std::vector<TraceSample> samples;
    std::vector<TraceMark> events;
    CostBreakdown costs;
    int branch_id = 0;
};

/// Scenario-reveal tree: trunk i runs on [t_{i-1}, t_i] under the matching
/// pre-reveal field; at t_i a revealed-yellow leaf continues
/// deterministically while the trunk proceeds to the next interval. The last
/// trunk always turns yellow at t_n.
struct BranchingTrajectory {
    std::vector<Trajectory> trunks;          ///< trunk i at index i-1, branch_id i
    std::vector<Trajectory> leaves;          ///< leaf i at index i-1, branch_id n+i
    std::vector<double> probabilities;       ///< reveal probabilities, sum 1
    std::vector<CostBreakdown> leaf_costs;   ///< trunk prefix + leaf, full path
    double expected_cost = 0.0;
};

struct TraceLimits {
    double dt_trace = 0.0;      ///< 0 selects delta_t / 4
    double horizon = 600.0;     ///< max traced duration per branch (s)
    std::size_t max_samples = 4000000;
};

/// Thrown when a rollout runs past its horizon or sample cap without
/// reaching the target. Distinct from a hard error: callers bounding a
/// travel time may read it as "longer than measurable".
struct TraceOverflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Trapezoid rule over the sample rates [a]_+, a^2 and 1; exact for a
/// constant control and consistent with the stored per-sample rates.
CostBreakdown accumulate_costs(const Trajectory& traj, const CostWeights& w);

/// Feedback rollout from (start, t0). t0 must lie in the timed slab or after
/// the final green; the stationary feedback takes over at the green time.
/// Ends at d = d_star (reached-target) or fails on the step and horizon
/// caps. Entering a disallowed region is a hard error carrying the state.
Trajectory trace_deterministic(const VehicleState& start, double t0, const SolutionBundle& bundle,
                               const TraceLimits& limits = {});

/// Branching rollout from t = 0 through every reveal time. Requires the
/// bundle's uncertain chain.
BranchingTrajectory trace_scenario_tree(const VehicleState& start, const SolutionBundle& bundle,
                                        const TraceLimits& limits = {});

}  // namespace greenwave

#endif  // GREENWAVE_TRACER_HPP
