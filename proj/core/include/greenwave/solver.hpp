#ifndef GREENWAVE_SOLVER_HPP
#define GREENWAVE_SOLVER_HPP

/**
 * @file solver.hpp
 * @brief Backward value solvers: the stationary green-phase sweep, the
 *        yellow/red time-dependent slab, and the uncertain reveal chain.
 *
 * All solves share one grid coupling (see grid.hpp) so a single step at the
 * control bounds moves exactly one cell. The time-dependent backups walk
 * slice by slice from the terminal condition; the stationary field is swept
 * once, column by column away from the target.
 */

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "greenwave/grid.hpp"
#include "greenwave/model.hpp"

namespace greenwave {

struct SolveConfig {
    PhysicalParams params;
    SignalSchedule schedule;
    CostWeights weights;
    int n_v = 180;
    double gss_tol = 1e-4;  ///< width of the final control bracket
    int n_threads = 1;
    std::optional<GreenDurationDistribution> distribution;

    /// Throws std::invalid_argument naming the offending field. Requires
    /// c3 > 0: with free waiting the minimizer is degenerate.
    void validate() const;
};

struct GssResult {
    double arg = 0.0;
    double value = 0.0;
};

/// Golden-section minimization on [lo, hi] preceded by a 9-point bracketing
/// scan (endpoints included). Returns the best evaluation ever seen, so
/// kinked or multimodal objectives can only improve on the scan. The final
/// bracket width is at most tol.
GssResult gss_minimize(const std::function<double(double)>& f, double lo, double hi, double tol);

struct ControlInterval {
    double lo = 0.0;
    double hi = 0.0;
};

/// One semi-Lagrangian backup at state y: minimizes
///   tau * K(a) + next_value(step_dynamics(y, a, tau))
/// over a in ctrl via gss_minimize. Phase solvers fuse their own variants of
/// this; the free function is the reference form used by tests and tools.
GssResult sl_backup(const VehicleState& y, ControlInterval ctrl, double tau,
                    const CostWeights& w,
                    const std::function<double(const VehicleState&)>& next_value,
                    double gss_tol);

/// Snaps both signal durations to whole grid steps (at least one each).
SignalSchedule snap_schedule(const SignalSchedule& s, double delta_t);

/// Snaps reveal times to whole grid steps, dropping zero-probability
/// scenarios and merging scenarios that land on the same step. Times must
/// snap to at least one step.
GreenDurationDistribution snap_distribution(const GreenDurationDistribution& dist,
                                            double delta_t);

/// Stationary green-phase value Q on the (d, v) grid: single sweep away from
/// the target column, rows from the speed limit down. Q(d_star, v) = 0.
ValueField solve_stationary_green(const SolveConfig& cfg);

/// Red-phase slab on [t_red, t_green], terminal slice Q. Nodes that cannot
/// stop before the line carry the infeasible sentinel; steps are clipped at
/// the stopping parabola and continue with the prescribed boundary cost.
TimeDepField solve_red_phase(const SolveConfig& cfg, const ValueField& stationary);

/// Yellow-phase slab on [t_yellow, t_red]. The terminal slice is copied from
/// the earliest slice of field_at_red (the value at t_red). Two passes per
/// slice: the waiting problem against the stopping parabola, then the
/// committed-crossing problem on the crossable side of d_beta, merged by
/// taking the pointwise minimum.
TimeDepField solve_yellow_phase(const SolveConfig& cfg, const ValueField& stationary,
                                const TimeDepField& field_at_red);

/// Combined slab on [t_yellow, t_green] of the snapped schedule: the red
/// sweep then the yellow two-pass sweep on one field, terminal slice Q.
/// Slab values depend on time only through t_red - t and t_green - t, so a
/// saved slab stays valid under a shift of t_start.
TimeDepField solve_timed_slab(const SolveConfig& cfg, const SignalSchedule& snapped,
                              const ValueField& stationary);

/// Schedule with snapped durations; when a snapped distribution is present
/// the yellow onset is moved to the last reveal tick, where the chain below
/// attaches.
SignalSchedule anchored_schedule(const SolveConfig& cfg, double delta_t,
                                 const std::optional<GreenDurationDistribution>& snapped_dist);

/// Reveal chain for the uncertain green: segment fields w^i on
/// [t_{i-1}, t_i], i = 1..n, solved newest-to-oldest. The terminal slice of
/// w^i mixes the yellow-onset value delta (slice 0 of yellow_red) with
/// w^{i+1} by the conditional hazard of turning at t_i. Requires the
/// yellow_red slab to start at the last reveal time.
std::vector<TimeDepField> solve_uncertain_chain(const SolveConfig& cfg,
                                                const TimeDepField& yellow_red);

/// Wall-clock stage durations, reported in run metadata only; excluded from
/// the byte-determinism guarantee.
struct RunTimings {
    double stationary_s = 0.0;
    double timed_s = 0.0;
    double chain_s = 0.0;
};

/// Everything one solve produces. For deterministic runs `segments` is
/// empty; `timed` always covers [t_yellow, t_green] on the snapped schedule.
struct SolutionBundle {
    SolveConfig config;
    SignalSchedule snapped;
    std::optional<GreenDurationDistribution> snapped_distribution;
    ValueField stationary;
    TimeDepField timed;
    std::vector<TimeDepField> segments;
    std::uint64_t config_hash = 0;
    RunTimings timings;
};

/// Runs the full solve: stationary field, yellow/red slab and, when a
/// distribution is present, the reveal chain (with the schedule re-anchored
/// so the yellow slab starts at the last reveal time).
SolutionBundle solve_bundle(const SolveConfig& cfg);

}  // namespace greenwave

#endif  // GREENWAVE_SOLVER_HPP
