#include "greenwave/tracer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace greenwave {

namespace {

constexpr double k_tiny = 1e-12;
constexpr double k_graze = 1e-9;  // roundoff slack when grazing a constraint curve

// First s in (0, tau] with d(s) = d_target under constant a, or a negative
// value when the piece never reaches it. Citardauq form keeps the smaller
// root stable for every sign of a.
double hit_time(const VehicleState& y, double a, double tau, double d_target) {
    double c = y.d - d_target;
    if (c <= 0.0) return -1.0;
    double disc = y.v * y.v + 2.0 * a * c;
    if (disc < 0.0) return -1.0;  // turns around before reaching it
    double denom = y.v + std::sqrt(disc);
    if (denom <= 0.0) return -1.0;
    double s = 2.0 * c / denom;
    return s <= tau ? s : -1.0;
}

struct BranchClock {
    double offset = 0.0;      ///< field time = wall time + offset
    SignalSchedule wall;      ///< schedule in this branch's wall clock
};

class Tracer {
public:
    Tracer(const SolutionBundle& b, const TraceLimits& lim)
        : b_(b), p_(b.config.params), lim_(lim) {
        dt_trace_ = lim.dt_trace > 0.0 ? lim.dt_trace : 0.25 * b.stationary.grid.delta_t;
        shell_ = b.stationary.grid.delta_d;  // one-cell safety margin at the parabola
    }

    Trajectory run(VehicleState y, double t0, double t_stop, const BranchClock& ck,
                   bool seed_yellow_event) const {
        Trajectory tr;
        std::vector<TraceEvent> pending;
        if (seed_yellow_event) pending.push_back(TraceEvent::turned_yellow);
        if (y.d <= p_.d_star + k_tiny) return tr;  // already at the target

        const SignalSchedule& w = ck.wall;
        double t = t0;
        double a_last = 0.0;
        bool crossed = y.d < p_.d_ell;
        check_allowed(y, t, w);

        auto push = [&](double a) {
            tr.samples.push_back({t, y.d, y.v, a});
            for (TraceEvent e : pending)
                tr.events.push_back({tr.samples.size() - 1, e});
            pending.clear();
        };

        while (t < t_stop - k_tiny) {
            if (t - t0 > lim_.horizon || tr.samples.size() >= lim_.max_samples)
                throw TraceOverflow(diagnostic("trace exceeded its step cap", y, t));

            double a = control_at(y, t, ck);
            double tau = dt_trace_;
            for (double tb : {w.t_yellow, w.t_red(), w.t_green(), t_stop}) {
                if (tb > t + k_tiny) tau = std::min(tau, tb - t);
            }
            // Project onto the speed bounds with the single control that
            // lands exactly on the bound.
            if (y.v + a * tau > p_.v_bar) a = (p_.v_bar - y.v) / tau;
            if (y.v + a * tau < 0.0) a = -y.v / tau;
            a = guard_gap(y, t, a, tau, w);

            double s_target = hit_time(y, a, tau, p_.d_star);
            if (s_target > 0.0) {
                push(a);
                y = step_dynamics(y, a, s_target);
                t += s_target;
                a_last = a;
                pending.push_back(TraceEvent::reached_target);
                break;
            }
            double s_line = crossed ? -1.0 : hit_time(y, a, tau, p_.d_ell);
            if (s_line > 0.0) tau = s_line;

            push(a);
            y = step_dynamics(y, a, tau);
            t += tau;
            a_last = a;
            if (s_line > 0.0) {
                crossed = true;
                pending.push_back(TraceEvent::crossed_intersection);
            }
            for (auto [tb, e] : {std::pair{w.t_yellow, TraceEvent::turned_yellow},
                                 {w.t_red(), TraceEvent::turned_red},
                                 {w.t_green(), TraceEvent::turned_green}}) {
                if (tb > t0 + k_tiny && std::abs(t - tb) <= k_tiny && tb < t_stop - k_tiny)
                    pending.push_back(e);
            }
            check_allowed(y, t, w);
        }
        push(a_last);
        tr.costs = accumulate_costs(tr, b_.config.weights);
        return tr;
    }

private:
    std::string diagnostic(const char* what, const VehicleState& y, double t) const {
        std::ostringstream os;
        os << what << " at t=" << t << " d=" << y.d << " v=" << y.v;
        return os.str();
    }

    void check_allowed(const VehicleState& y, double t, const SignalSchedule& w) const {
        if (region_membership(y, t, w, p_) == Region::allowed) return;
        VehicleState up{y.d + k_graze, y.v};
        VehicleState dn{y.d - k_graze, y.v};
        if (region_membership(up, t, w, p_) == Region::allowed ||
            region_membership(dn, t, w, p_) == Region::allowed)
            return;
        throw std::runtime_error(diagnostic("trace entered a disallowed region", y, t));
    }

    // Feedback lookup in the field owning time t, then the constraint-side
    // overrides: near the stopping parabola the boundary braking policy
    // wins; on the crossing side of d_beta a control whose endpoint falls in
    // the dead strip is replaced by full throttle, which preserves the
    // margin to d_beta exactly.
    double control_at(const VehicleState& y, double t, const BranchClock& ck) const {
        const SignalSchedule& w = ck.wall;
        double a;
        if (t >= w.t_green() - k_tiny) {
            a = feedback_sample(b_.stationary, y);
        } else {
            double tf = t + ck.offset;
            if (b_.timed.value.empty())
                throw std::invalid_argument("bundle has no timed field for tracing before green");
            if (tf >= b_.timed.grid.t_start - k_graze) {
                a = feedback_sample(b_.timed, b_.snapped, y, tf);
            } else {
                a = feedback_sample(segment_for(tf), b_.snapped, y, tf);
            }
        }
        bool red = t >= w.t_red() - k_tiny && t < w.t_green() - k_tiny;
        bool yellow = t >= w.t_yellow - k_tiny && t < w.t_red() - k_tiny;
        if ((red || (yellow && y.d > d_beta(p_, y.v, t, w) + k_graze)) && y.d >= p_.d_ell &&
            y.d - d_alpha(p_, y.v) < shell_) {
            a = y.v > 0.0 ? -p_.alpha : 0.0;
        }
        return a;
    }

    double guard_gap(const VehicleState& y, double t, double a, double tau,
                     const SignalSchedule& w) const {
        bool yellow = t >= w.t_yellow - k_tiny && t < w.t_red() - k_tiny;
        if (!yellow || y.d > d_beta(p_, y.v, t, w) + k_graze) return a;
        VehicleState end = step_dynamics(y, a, tau);
        if (region_membership(end, t + tau, w, p_) == Region::allowed) return a;
        return p_.beta;
    }

    const TimeDepField& segment_for(double tf) const {
        for (const TimeDepField& seg : b_.segments) {
            double hi = seg.grid.t(seg.grid.n_t);
            if (tf <= hi + k_graze) return seg;
        }
        if (!b_.segments.empty()) return b_.segments.back();
        throw std::invalid_argument("bundle has no pre-reveal fields for tracing before yellow");
    }

    const SolutionBundle& b_;
    const PhysicalParams& p_;
    TraceLimits lim_;
    double dt_trace_ = 0.0;
    double shell_ = 0.0;
};

}  // namespace

const char* trace_event_name(TraceEvent e) {
    switch (e) {
        case TraceEvent::turned_yellow: return "turned-yellow";
        case TraceEvent::turned_red: return "turned-red";
        case TraceEvent::turned_green: return "turned-green";
        case TraceEvent::crossed_intersection: return "crossed-intersection";
        case TraceEvent::reached_target: return "reached-target";
    }
    return "unknown";
}

CostBreakdown accumulate_costs(const Trajectory& traj, const CostWeights& w) {
    CostBreakdown c;
    const auto& s = traj.samples;
    if (s.size() < 2) return c;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        double tau = s[k + 1].t - s[k].t;
        c.j1 += 0.5 * tau * (std::max(s[k].a, 0.0) + std::max(s[k + 1].a, 0.0));
        c.j2 += 0.5 * tau * (s[k].a * s[k].a + s[k + 1].a * s[k + 1].a);
    }
    c.j3 = s.back().t - s.front().t;
    c.j = w.c1 * c.j1 + w.c2 * c.j2 + w.c3 * c.j3;
    return c;
}

Trajectory trace_deterministic(const VehicleState& start, double t0, const SolutionBundle& bundle,
                               const TraceLimits& limits) {
    const SignalSchedule& w = bundle.snapped;
    if (t0 < w.t_yellow - k_graze && t0 < w.t_green())
        throw std::invalid_argument(
            "t0 precedes the yellow onset; pre-reveal starts need the scenario tracer");
    Tracer tracer(bundle, limits);
    return tracer.run(start, t0, std::numeric_limits<double>::infinity(),
                      BranchClock{0.0, bundle.snapped}, false);
}

BranchingTrajectory trace_scenario_tree(const VehicleState& start, const SolutionBundle& bundle,
                                        const TraceLimits& limits) {
    if (bundle.segments.empty() || !bundle.snapped_distribution)
        throw std::invalid_argument("bundle carries no uncertain chain to trace");
    const GreenDurationDistribution& dist = *bundle.snapped_distribution;
    std::size_t n = dist.times.size();
    double t_last = dist.times[n - 1];

    Tracer tracer(bundle, limits);
    BranchingTrajectory out;
    CostBreakdown prefix;
    VehicleState y = start;
    double t = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        double t_i = dist.times[i - 1];
        Trajectory trunk =
            tracer.run(y, t, t_i, BranchClock{0.0, bundle.snapped}, false);
        trunk.branch_id = static_cast<int>(i);
        if (!trunk.samples.empty()) {
            y = {trunk.samples.back().d, trunk.samples.back().v};
            t = trunk.samples.back().t;
        }
        prefix.j1 += trunk.costs.j1;
        prefix.j2 += trunk.costs.j2;
        prefix.j3 += trunk.costs.j3;
        prefix.j += trunk.costs.j;
        out.trunks.push_back(std::move(trunk));

        SignalSchedule wall = bundle.snapped;
        wall.t_yellow = t_i;
        Trajectory leaf = tracer.run(y, t_i, std::numeric_limits<double>::infinity(),
                                     BranchClock{t_last - t_i, wall}, true);
        leaf.branch_id = static_cast<int>(n + i);
        CostBreakdown path{prefix.j1 + leaf.costs.j1, prefix.j2 + leaf.costs.j2,
                           prefix.j3 + leaf.costs.j3, prefix.j + leaf.costs.j};
        out.leaves.push_back(std::move(leaf));
        out.leaf_costs.push_back(path);
        out.probabilities.push_back(dist.probs[i - 1]);
    }
    out.expected_cost = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        out.expected_cost += out.probabilities[i] * out.leaf_costs[i].j;
    return out;
}

}  // namespace greenwave
