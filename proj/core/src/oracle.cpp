#include "greenwave/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace greenwave {

double time_optimal_value(const PhysicalParams& p, const VehicleState& y) {
    if (y.d <= p.d_star) return 0.0;
    double s = y.d - p.d_star;
    double v = std::clamp(y.v, 0.0, p.v_bar);
    double t_limit = (p.v_bar - v) / p.beta;
    double s_limit = t_limit * (v + 0.5 * p.beta * t_limit);
    if (s_limit >= s)  // target reached while still accelerating
        return 2.0 * s / (v + std::sqrt(v * v + 2.0 * p.beta * s));
    return t_limit + (s - s_limit) / p.v_bar;
}

void ControlMesh::validate(const PhysicalParams& p) const {
    if (segments < 1) throw std::invalid_argument("mesh.segments must be positive");
    if (!(segment_duration > 0.0))
        throw std::invalid_argument("mesh.segment_duration must be positive");
    if (candidates.empty()) throw std::invalid_argument("mesh.candidates must be nonempty");
    for (double a : candidates) {
        if (a < -p.alpha - 1e-12 || a > p.beta + 1e-12)
            throw std::invalid_argument("mesh.candidates must lie within [-alpha, beta]");
    }
    if (!(check_dt > 0.0)) throw std::invalid_argument("mesh.check_dt must be positive");
    double total = std::pow(static_cast<double>(candidates.size()), segments);
    if (total > static_cast<double>(max_sequences))
        throw std::invalid_argument("mesh.candidates^segments exceeds mesh.max_sequences");
}

namespace {

struct SimState {
    double t = 0.0;
    double d = 0.0;
    double v = 0.0;
    double cost = 0.0;
};

enum class Advance { violated, reached, ok };

class MeshSearch {
public:
    MeshSearch(const PhysicalParams& p, const SignalSchedule& s, const CostWeights& w,
               const ControlMesh& mesh)
        : p_(p), s_(s), w_(w), mesh_(mesh) {}

    double run(const VehicleState& y, double t0) {
        best_ = k_infeasible;
        SimState st{t0, y.d, y.v, 0.0};
        if (st.d <= p_.d_star) return 0.0;
        descend(st, 0);
        return best_;
    }

private:
    // States a hair across a curve still count as on it.
    bool allowed(double d, double v, double t) const {
        for (double nudge : {0.0, 1e-7, -1e-7}) {
            if (region_membership({d + nudge, v}, t, s_, p_) == Region::allowed) return true;
        }
        return false;
    }

    // Constant-acceleration run over tau with constraint checks every check_dt.
    bool run_piece(SimState& st, double a, double tau) {
        for (double s = mesh_.check_dt; s < tau; s += mesh_.check_dt) {
            if (!allowed(st.d - s * (st.v + 0.5 * a * s), st.v + a * s, st.t + s)) return false;
        }
        double d_end = st.d - tau * (st.v + 0.5 * a * tau);
        double v_end = st.v + a * tau;
        if (!allowed(d_end, v_end, st.t + tau)) return false;
        st.cost += running_cost(w_, a) * tau;
        st.t += tau;
        st.d = d_end;
        st.v = v_end;
        return true;
    }

    // One control window of the mesh, splitting where v pins at 0 or v_bar.
    Advance advance(SimState& st, double a, double duration) {
        double remaining = duration;
        while (remaining > 1e-15) {
            double a_eff = a;
            if (st.v <= 0.0 && a < 0.0) a_eff = 0.0;
            if (st.v >= p_.v_bar && a > 0.0) a_eff = 0.0;
            double to_bound = remaining;
            double v_pin = -1.0;  // speed to land on exactly when the step ends at a bound
            if (a_eff > 0.0) {
                to_bound = (p_.v_bar - st.v) / a_eff;
                v_pin = p_.v_bar;
            } else if (a_eff < 0.0) {
                to_bound = st.v / (-a_eff);
                v_pin = 0.0;
            }
            double step = std::min(remaining, to_bound);
            double s_target = st.d - p_.d_star;
            if (step * (st.v + 0.5 * a_eff * step) >= s_target) {
                double disc = st.v * st.v + 2.0 * a_eff * s_target;
                double tau = a_eff == 0.0 ? s_target / st.v
                                          : 2.0 * s_target /
                                                (st.v + std::sqrt(std::max(0.0, disc)));
                if (!run_piece(st, a_eff, tau)) return Advance::violated;
                return Advance::reached;
            }
            if (!run_piece(st, a_eff, step)) return Advance::violated;
            // rounding in v + a*tau can leave v an ulp short of the bound and
            // stall the loop on ever-tinier steps
            if (step == to_bound && v_pin >= 0.0) st.v = v_pin;
            remaining -= step;
        }
        return Advance::ok;
    }

    // Coast at the final speed until the target; parked short of it is a dead end.
    void tail(SimState st) {
        while (st.t < s_.t_green() && st.d >= p_.d_ell) {
            if (st.v <= 0.0) return;
            switch (advance(st, 0.0, mesh_.check_dt)) {
                case Advance::violated: return;
                case Advance::reached: best_ = std::min(best_, st.cost); return;
                case Advance::ok: break;
            }
        }
        if (st.v <= 0.0) return;
        st.cost += w_.c3 * (st.d - p_.d_star) / st.v;
        best_ = std::min(best_, st.cost);
    }

    void descend(const SimState& st, int depth) {
        if (depth == mesh_.segments) {
            tail(st);
            return;
        }
        for (double a : mesh_.candidates) {
            SimState next = st;
            switch (advance(next, a, mesh_.segment_duration)) {
                case Advance::violated: continue;
                case Advance::reached: best_ = std::min(best_, next.cost); continue;
                case Advance::ok: break;
            }
            if (next.cost + w_.c3 * time_optimal_value(p_, {next.d, next.v}) >= best_) continue;
            descend(next, depth + 1);
        }
    }

    const PhysicalParams& p_;
    const SignalSchedule& s_;
    const CostWeights& w_;
    const ControlMesh& mesh_;
    double best_ = k_infeasible;
};

}  // namespace

double enumerate_controls_value(const VehicleState& y, double t0, const PhysicalParams& p,
                                const SignalSchedule& s, const CostWeights& w,
                                const ControlMesh& mesh) {
    p.validate();
    s.validate();
    w.validate();
    mesh.validate(p);
    return MeshSearch(p, s, w, mesh).run(y, t0);
}

MonteCarloEstimate expected_cost_monte_carlo(
    const std::function<double(std::size_t)>& scenario_cost,
    const GreenDurationDistribution& dist, int n_samples, std::uint64_t seed) {
    dist.validate();
    if (n_samples < 2) throw std::invalid_argument("monte carlo needs n_samples >= 2");
    std::vector<double> cdf(dist.probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.probs.size(); ++i) {
        acc += dist.probs[i];
        cdf[i] = acc;
    }
    cdf.back() = 1.0;

    std::vector<double> memo(dist.probs.size(), -1.0);
    std::vector<bool> known(dist.probs.size(), false);
    std::mt19937_64 rng(seed);
    double mean = 0.0, m2 = 0.0;  // Welford, in draw order for reproducibility
    for (int n = 1; n <= n_samples; ++n) {
        double u = uniform01(rng);
        std::size_t i = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        i = std::min(i, cdf.size() - 1);
        if (!known[i]) {
            memo[i] = scenario_cost(i);
            known[i] = true;
        }
        double x = memo[i];
        double delta = x - mean;
        mean += delta / n;
        m2 += delta * (x - mean);
    }
    double variance = m2 / (n_samples - 1);
    return {mean, std::sqrt(std::max(0.0, variance) / n_samples), n_samples};
}

}  // namespace greenwave
