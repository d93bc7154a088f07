#ifndef GREENWAVE_ORACLE_HPP
#define GREENWAVE_ORACLE_HPP

/**
 * @file oracle.hpp
 * @brief Independent reference values: closed-form minimum travel time,
 *        brute-force enumeration over piecewise-constant controls, and a
 *        Monte Carlo estimator for expected scenario costs.
 *
 * Everything here is solver-free on purpose; the grid solutions are tested
 * against these, never the other way around.
 */

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "greenwave/model.hpp"

namespace greenwave {

/// Minimum time to drive from y to d <= d_star ignoring the signal:
/// full throttle to the speed limit, then coast. Zero at or past the target.
double time_optimal_value(const PhysicalParams& p, const VehicleState& y);

/// Search space for enumerate_controls_value: piecewise-constant controls on
/// `segments` windows of `segment_duration` seconds starting at t0, chosen
/// from `candidates`, followed by coasting. Constraints are checked every
/// check_dt along the way.
struct ControlMesh {
    int segments = 6;
    double segment_duration = 2.0;
    std::vector<double> candidates;  ///< accelerations, each within [-alpha, beta]
    double check_dt = 0.05;
    std::uint64_t max_sequences = 4000000;

    void validate(const PhysicalParams& p) const;
};

/// Cheapest feasible trajectory in the mesh's control class: an upper bound
/// on the true value at (y, t0) that tightens as the mesh is refined.
/// Speeds clamp at 0 and v_bar (holding the bound costs no acceleration).
/// Returns k_infeasible when every sequence violates the constraints.
double enumerate_controls_value(const VehicleState& y, double t0, const PhysicalParams& p,
                                const SignalSchedule& s, const CostWeights& w,
                                const ControlMesh& mesh);

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int n_samples = 0;
};

/// Uniform double in [0, 1) from the top 53 bits of one mt19937_64 draw.
/// Fixed mapping so that seeded runs reproduce bit-for-bit everywhere.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Samples scenario indices from dist by inverse CDF using mt19937_64 and
/// averages scenario_cost over n_samples draws. scenario_cost(i) must be the
/// policy's total cost when the light turns at dist.times[i]; it is invoked
/// once per distinct scenario and the results are reused in draw order.
MonteCarloEstimate expected_cost_monte_carlo(
    const std::function<double(std::size_t)>& scenario_cost,
    const GreenDurationDistribution& dist, int n_samples, std::uint64_t seed);

}  // namespace greenwave

#endif  // GREENWAVE_ORACLE_HPP
