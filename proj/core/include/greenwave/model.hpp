#ifndef GREENWAVE_MODEL_HPP
#define GREENWAVE_MODEL_HPP

/**
 * @file model.hpp
 * @brief Vehicle kinematics, running cost, signal schedule and the constraint
 *        geometry around a single signalized intersection.
 *
 * The state is y = (d, v): distance left to the target point and speed.
 * Driving forward shrinks d, so the dynamics are d' = -v, v' = a with
 * a in [-alpha, beta]. All quantities are SI (m, s, m/s, m/s^2).
 */

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

namespace greenwave {

/// Sentinel stored at nodes whose state is disallowed at the slice time.
/// A large finite value keeps interpolation arithmetic NaN-free; anything
/// above half of it is treated as infeasible.
constexpr double k_infeasible = 1e30;

inline bool is_infeasible(double value) { return value >= 0.5 * k_infeasible; }

/// Problem box and vehicle limits.
struct PhysicalParams {
    double d_star = -100.0;  ///< target distance, d_star < d_ell
    double d_bar = 100.0;    ///< far edge of the computational box
    double d_ell = 0.0;      ///< stop line position
    double v_bar = 20.12;    ///< speed limit (45 mph)
    double alpha = 3.8;      ///< braking limit, a >= -alpha
    double beta = 3.8;       ///< acceleration limit, a <= beta

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Vehicle state: distance to target and speed.
struct VehicleState {
    double d = 0.0;
    double v = 0.0;
};

/// Running cost weights: K(a) = c1*[a]+ + c2*a^2 + c3.
struct CostWeights {
    double c1 = 1.0;  ///< fuel proxy, positive part of acceleration
    double c2 = 1.0;  ///< comfort, squared acceleration
    double c3 = 1.0;  ///< time

    void validate() const;
};

/// Deterministic signal timing. The yellow interval is [t_yellow, t_red),
/// red is [t_red, t_green), green afterwards.
struct SignalSchedule {
    double t_yellow = 0.0;
    double d_yellow = 3.0;
    double d_red = 60.0;

    double t_red() const { return t_yellow + d_yellow; }
    double t_green() const { return (t_yellow + d_yellow) + d_red; }

    void validate() const;
};

/// Discrete distribution over the remaining green duration. times[i] is the
/// i-th candidate reveal instant measured from the decision time; probs[i]
/// its probability. elapsed_green, when set, records how long the light has
/// already been green and is consumed by conditioned() only.
struct GreenDurationDistribution {
    std::vector<double> times;
    std::vector<double> probs;
    std::optional<double> elapsed_green;

    void validate() const;

    /// Conditions on the elapsed green time: keeps durations > elapsed_green,
    /// shifts them to remaining times and renormalizes by the survival mass.
    /// Throws if no probability mass survives.
    GreenDurationDistribution conditioned() const;
};

/// Feasibility classes of a state at a given time.
enum class Region {
    allowed,
    disallowed_red,     ///< red light, cannot stop before the line anymore
    disallowed_yellow,  ///< yellow, can neither stop nor clear the line by red
};

/// Exact constant-acceleration step over tau seconds.
inline VehicleState step_dynamics(const VehicleState& y, double a, double tau) {
    return {y.d - tau * (y.v + 0.5 * a * tau), y.v + a * tau};
}

/// Instantaneous running cost K(a).
inline double running_cost(const CostWeights& w, double a) {
    return w.c1 * std::max(a, 0.0) + w.c2 * a * a + w.c3;
}

/// Minimal-stopping-distance curve: from (d_alpha(v), v) full braking stops
/// exactly at the stop line. Left of it a red light cannot be obeyed.
inline double d_alpha(const PhysicalParams& p, double v) {
    return p.d_ell + v * v / (2.0 * p.alpha);
}

/// Maximal-progress curve at time t before t_red: from (d_beta(v,t), v) full
/// throttle (capped at v_bar) reaches the stop line exactly at t_red. Right
/// of it the line cannot be cleared before red. Degenerates to d = d_ell at
/// t = t_red.
double d_beta(const PhysicalParams& p, double v, double t, const SignalSchedule& s);

/// Cost of the unique admissible continuation from a point on d_alpha during
/// [t_yellow, t_green): brake at -alpha until stopped, wait out the red, then
/// continue optimally. value_at_green samples the post-green value at t_green.
template <class Sampler>
double boundary_cost_alpha(const PhysicalParams& p, const SignalSchedule& s,
                           const CostWeights& w, double v, double t,
                           Sampler&& value_at_green) {
    double s_g = s.t_green() - t;
    double s_hat = std::min(v / p.alpha, s_g);
    double v_g = std::max(0.0, v - p.alpha * s_g);
    double cost = w.c2 * p.alpha * p.alpha * s_hat + w.c3 * s_g;
    return cost + value_at_green(VehicleState{p.d_ell + v_g * v_g / (2.0 * p.alpha), v_g});
}

/// Cost of the committed crossing from a point on d_beta during yellow:
/// full throttle (capped at v_bar) until the stop line, reached exactly at
/// t_red. value_at_red samples the continuation at (d_ell, arrival speed).
template <class Sampler>
double boundary_cost_beta(const PhysicalParams& p, const SignalSchedule& s,
                          const CostWeights& w, double v, double t,
                          Sampler&& value_at_red) {
    double s_r = s.t_red() - t;
    double s_hat = std::min((p.v_bar - v) / p.beta, s_r);
    double v_r = std::min(p.v_bar, v + p.beta * s_r);
    double cost = (w.c1 * p.beta + w.c2 * p.beta * p.beta) * s_hat + w.c3 * s_r;
    return cost + value_at_red(VehicleState{p.d_ell, v_r});
}

/// Classifies a state against the signal constraints at time t. The curves
/// d_alpha and d_beta themselves are allowed; states past the stop line
/// (d < d_ell, and d == d_ell at rest) are unconstrained.
Region region_membership(const VehicleState& y, double t, const SignalSchedule& s,
                         const PhysicalParams& p);

/// Hazard chain of the reveal process: probability that the light turns at
/// t_i conditioned on still being green just before. The last hazard is 1.
/// Rejects distributions with a nonpositive suffix sum.
std::vector<double> conditional_hazards(const GreenDurationDistribution& dist);

}  // namespace greenwave

#endif  // GREENWAVE_MODEL_HPP
