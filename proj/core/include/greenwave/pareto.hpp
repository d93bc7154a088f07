#ifndef GREENWAVE_PARETO_HPP
#define GREENWAVE_PARETO_HPP

/**
 * @file pareto.hpp
 * @brief Time-budget constrained Pareto front over the fuel and discomfort
 *        costs, produced by calibrating the time weight.
 *
 * Scaling all weights by a positive factor rescales values without moving
 * any argmin, so c2 is pinned to 1 during calibration and only c3 is
 * searched. Reported weights are renormalized to sum 1.
 */

#include <string>
#include <vector>

#include "greenwave/solver.hpp"
#include "greenwave/tracer.hpp"

namespace greenwave {

struct ParetoPoint {
    double ratio = 0.0;       ///< c1 / c2
    CostWeights weights;      ///< calibrated, renormalized to sum 1
    CostBreakdown costs;      ///< from the trace at the calibrated weights
    std::string note;         ///< residual or monotonicity annotations
};

struct ParetoFront {
    std::vector<ParetoPoint> points;  ///< sorted by j1
    std::vector<std::string> errors;  ///< per-ratio failures, front stays partial
};

struct ParetoOptions {
    double tol_rel = 0.005;      ///< |J3 - budget| tolerance, relative to the budget
    bool use_pipeline = false;   ///< false: green-phase stationary problem only
    double c3_lo = 1e-4;
    double c3_hi = 1.0;
    double c3_hi_cap = 1e9;
    double c3_lo_floor = 1e-12;
};

/// Bisects c3 (with c2 = 1, c1 = ratio) until the traced time cost meets the
/// budget within tolerance. A budget under the time-optimal bound plus one
/// cell of slack is an error citing the bound; an unreachable budget on the
/// slack side returns the nearest achievable point with the residual noted.
ParetoPoint calibrate_c3(double ratio, double t_budget, const VehicleState& start,
                         const SolveConfig& base, const ParetoOptions& opt = {});

/// One calibrated point per ratio, sorted by j1. Per-ratio failures land in
/// errors and the front stays partial.
ParetoFront pareto_front(const std::vector<double>& ratios, double t_budget,
                         const VehicleState& start, const SolveConfig& base,
                         const ParetoOptions& opt = {});

}  // namespace greenwave

#endif  // GREENWAVE_PARETO_HPP
