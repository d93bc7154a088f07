#include "greenwave/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "greenwave/oracle.hpp"

namespace greenwave {

namespace {

// Traced costs of the K-optimal trajectory under the given weights.
CostBreakdown evaluate_weights(const SolveConfig& base, const CostWeights& w,
                               const VehicleState& start, bool use_pipeline) {
    SolveConfig cfg = base;
    cfg.weights = w;
    try {
        if (use_pipeline) {
            SolutionBundle b = solve_bundle(cfg);
            if (cfg.distribution) {
                BranchingTrajectory tree = trace_scenario_tree(start, b);
                CostBreakdown expect;
                for (std::size_t i = 0; i < tree.leaves.size(); ++i) {
                    double p = tree.probabilities[i];
                    expect.j1 += p * tree.leaf_costs[i].j1;
                    expect.j2 += p * tree.leaf_costs[i].j2;
                    expect.j3 += p * tree.leaf_costs[i].j3;
                    expect.j += p * tree.leaf_costs[i].j;
                }
                return expect;
            }
            return trace_deterministic(start, b.snapped.t_yellow, b).costs;
        }
        // Green-phase problem: stationary field only, traced after the light.
        SolutionBundle b;
        b.config = cfg;
        b.stationary = solve_stationary_green(cfg);
        b.snapped = snap_schedule(cfg.schedule, b.stationary.grid.delta_t);
        return trace_deterministic(start, b.snapped.t_green(), b).costs;
    } catch (const TraceOverflow&) {
        // A near-zero time weight lets the policy creep past any fixed
        // horizon. Report the travel time as unbounded so the budget
        // bracket raises c3 instead of aborting.
        double inf = std::numeric_limits<double>::infinity();
        return {inf, inf, inf, inf};
    }
}

}  // namespace

ParetoPoint calibrate_c3(double ratio, double t_budget, const VehicleState& start,
                         const SolveConfig& base, const ParetoOptions& opt) {
    if (!(ratio >= 0.0)) throw std::invalid_argument("ratio must be nonnegative");
    if (!(t_budget > 0.0)) throw std::invalid_argument("t_budget must be positive");

    // Feasibility floor: no weighting beats the time-optimal bound.
    GridSpec g = build_grid(base.params, base.n_v, 0.0, 0.0);
    double t_min = time_optimal_value(base.params, start);
    double slack = g.delta_t + g.delta_d / base.params.v_bar;  // one cell, in time units
    if (t_budget < t_min + slack) {
        std::ostringstream os;
        os << "t_budget " << t_budget << " is below the time-optimal bound " << t_min
           << " plus one grid cell (" << slack << ")";
        throw std::invalid_argument(os.str());
    }

    auto eval = [&](double c3) {
        return evaluate_weights(base, CostWeights{ratio, 1.0, c3}, start, opt.use_pipeline);
    };
    double tol = opt.tol_rel * t_budget;
    std::vector<std::pair<double, double>> samples;  // (c3, j3), for the monotonicity note

    double lo = opt.c3_lo;
    double hi = opt.c3_hi;
    CostBreakdown at_lo = eval(lo);
    samples.emplace_back(lo, at_lo.j3);
    double best_c3 = lo;
    CostBreakdown best = at_lo;

    auto keep_best = [&](double c3, const CostBreakdown& c) {
        if (std::abs(c.j3 - t_budget) < std::abs(best.j3 - t_budget)) {
            best_c3 = c3;
            best = c;
        }
    };

    std::string note;
    if (at_lo.j3 < t_budget - tol) {
        // Even a near-zero time weight undershoots: shrink toward the floor.
        while (lo > opt.c3_lo_floor && at_lo.j3 < t_budget - tol) {
            lo /= 8.0;
            at_lo = eval(lo);
            samples.emplace_back(lo, at_lo.j3);
            keep_best(lo, at_lo);
        }
        if (at_lo.j3 < t_budget - tol) {
            std::ostringstream os;
            os << "budget is slack: nearest achievable j3 " << at_lo.j3 << " at c3 " << lo
               << ", residual " << (t_budget - at_lo.j3);
            note = os.str();
            best_c3 = lo;
            best = at_lo;
        }
    }
    if (note.empty()) {
        CostBreakdown at_hi = eval(hi);
        samples.emplace_back(hi, at_hi.j3);
        keep_best(hi, at_hi);
        while (at_hi.j3 > t_budget + tol && hi < opt.c3_hi_cap) {
            hi *= 8.0;
            at_hi = eval(hi);
            samples.emplace_back(hi, at_hi.j3);
            keep_best(hi, at_hi);
        }
        if (at_hi.j3 > t_budget + tol) {
            std::ostringstream os;
            os << "cannot bracket the budget: j3 " << at_hi.j3 << " at c3 cap " << hi;
            throw std::runtime_error(os.str());
        }
        while (std::abs(best.j3 - t_budget) > tol && hi - lo > 1e-12 * hi) {
            double mid = 0.5 * (lo + hi);
            CostBreakdown at_mid = eval(mid);
            samples.emplace_back(mid, at_mid.j3);
            keep_best(mid, at_mid);
            if (at_mid.j3 > t_budget)
                lo = mid;
            else
                hi = mid;
        }
        if (std::abs(best.j3 - t_budget) > tol) {
            std::ostringstream os;
            os << "bracket exhausted: nearest j3 " << best.j3 << ", residual "
               << (best.j3 - t_budget);
            note = os.str();
        }
    }

    // The bisection premise: j3 nonincreasing in c3 along the sampled points.
    std::sort(samples.begin(), samples.end());
    for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
        if (samples[k + 1].second > samples[k].second + 1e-9) {
            std::ostringstream os;
            if (!note.empty()) os << note << "; ";
            os << "warning: j3 not monotone between c3=" << samples[k].first << " and "
               << samples[k + 1].first;
            note = os.str();
            break;
        }
    }

    ParetoPoint pt;
    pt.ratio = ratio;
    double sum = ratio + 1.0 + best_c3;
    pt.weights = CostWeights{ratio / sum, 1.0 / sum, best_c3 / sum};
    pt.costs = best;
    pt.costs.j = pt.weights.c1 * best.j1 + pt.weights.c2 * best.j2 + pt.weights.c3 * best.j3;
    pt.note = note;
    return pt;
}

ParetoFront pareto_front(const std::vector<double>& ratios, double t_budget,
                         const VehicleState& start, const SolveConfig& base,
                         const ParetoOptions& opt) {
    if (ratios.empty()) throw std::invalid_argument("ratios must be nonempty");
    if (!std::is_sorted(ratios.begin(), ratios.end()))
        throw std::invalid_argument("ratios must be sorted");
    ParetoFront front;
    for (double r : ratios) {
        try {
            front.points.push_back(calibrate_c3(r, t_budget, start, base, opt));
        } catch (const std::exception& e) {
            std::ostringstream os;
            os << "ratio " << r << ": " << e.what();
            front.errors.push_back(os.str());
        }
    }
    std::sort(front.points.begin(), front.points.end(),
              [](const ParetoPoint& a, const ParetoPoint& b) { return a.costs.j1 < b.costs.j1; });
    return front;
}

}  // namespace greenwave
