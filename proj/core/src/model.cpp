#include "greenwave/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace greenwave {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void PhysicalParams::validate() const {
    require(finite(d_star) && finite(d_bar) && finite(d_ell), "params: distances must be finite");
    require(d_star < d_ell, "params.d_star must lie strictly past the stop line (d_star < d_ell)");
    require(d_ell < d_bar, "params.d_ell must lie inside the box (d_ell < d_bar)");
    require(finite(v_bar) && v_bar > 0.0, "params.v_bar must be positive");
    require(finite(alpha) && alpha > 0.0, "params.alpha must be positive");
    require(finite(beta) && beta > 0.0, "params.beta must be positive");
}

void CostWeights::validate() const {
    require(finite(c1) && c1 >= 0.0, "weights.c1 must be nonnegative");
    require(finite(c2) && c2 >= 0.0, "weights.c2 must be nonnegative");
    require(finite(c3) && c3 >= 0.0, "weights.c3 must be nonnegative");
}

void SignalSchedule::validate() const {
    require(finite(t_yellow), "schedule.t_yellow must be finite");
    require(finite(d_yellow) && d_yellow > 0.0, "schedule.d_yellow must be positive");
    require(finite(d_red) && d_red > 0.0, "schedule.d_red must be positive");
}

void GreenDurationDistribution::validate() const {
    require(!times.empty(), "distribution.times must be nonempty");
    require(times.size() == probs.size(), "distribution.probs must match distribution.times in length");
    double sum = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        require(finite(times[i]) && times[i] > 0.0, "distribution.times must be positive");
        if (i > 0) require(times[i] > times[i - 1], "distribution.times must be strictly increasing");
        require(finite(probs[i]) && probs[i] >= 0.0, "distribution.probs must be nonnegative");
        sum += probs[i];
    }
    require(std::abs(sum - 1.0) <= 1e-12, "distribution.probs must sum to 1 within 1e-12");
    if (elapsed_green) {
        require(finite(*elapsed_green) && *elapsed_green >= 0.0,
                "distribution.elapsed_green must be nonnegative");
    }
}

GreenDurationDistribution GreenDurationDistribution::conditioned() const {
    validate();
    if (!elapsed_green) return *this;
    double xi = *elapsed_green;
    GreenDurationDistribution out;
    double mass = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] > xi) {
            out.times.push_back(times[i] - xi);
            out.probs.push_back(probs[i]);
            mass += probs[i];
        }
    }
    require(mass > 0.0, "distribution.elapsed_green exceeds every candidate duration");
    for (double& p : out.probs) p /= mass;
    return out;
}

double d_beta(const PhysicalParams& p, double v, double t, const SignalSchedule& s) {
    double s_r = s.t_red() - t;
    if (s_r <= 0.0) return p.d_ell;
    double s_b = (p.v_bar - v) / p.beta;  // time to reach the speed limit
    if (s_b >= s_r) return p.d_ell + v * s_r + 0.5 * p.beta * s_r * s_r;
    return p.d_ell + v * s_b + 0.5 * p.beta * s_b * s_b + p.v_bar * (s_r - s_b);
}

Region region_membership(const VehicleState& y, double t, const SignalSchedule& s,
                         const PhysicalParams& p) {
    if (t < s.t_yellow || t >= s.t_green()) return Region::allowed;
    if (y.d < p.d_ell) return Region::allowed;
    if (t >= s.t_red()) {
        // Red: everything that cannot stop before the line is lost.
        if (y.d < d_alpha(p, y.v)) return Region::disallowed_red;
        return Region::allowed;
    }
    // Yellow: between the curves one can neither stop nor clear the line.
    if (y.d > d_beta(p, y.v, t, s) && y.d < d_alpha(p, y.v)) return Region::disallowed_yellow;
    return Region::allowed;
}

std::vector<double> conditional_hazards(const GreenDurationDistribution& dist) {
    dist.validate();
    std::size_t n = dist.probs.size();
    std::vector<double> suffix(n + 1, 0.0);
    for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] + dist.probs[i];
    std::vector<double> hazards(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (suffix[i] <= 0.0)
            throw std::invalid_argument("distribution.probs has a nonpositive suffix sum");
        hazards[i] = dist.probs[i] / suffix[i];
    }
    hazards[n - 1] = 1.0;
    return hazards;
}

}  // namespace greenwave
