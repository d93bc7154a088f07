#include "greenwave/solver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <thread>

namespace greenwave {

namespace {

constexpr double k_gold = 0.6180339887498949;  // (sqrt(5) - 1) / 2

// Geometric tolerance (m) when classifying a landed state against the
// curves. Riding d_beta at full throttle preserves the gap exactly in the
// continuum; this absorbs the roundoff of the discrete step.
constexpr double k_eps_geo = 1e-7;

// Node-on-curve tolerance (m): such nodes carry the prescribed boundary cost.
constexpr double k_eps_node = 1e-9;

template <class F>
GssResult gss_core(F&& f, double lo, double hi, double tol) {
    if (!(hi > lo)) return {lo, f(lo)};
    constexpr int n_scan = 9;
    double span = hi - lo;
    double fs[n_scan];
    int best_k = 0;
    for (int k = 0; k < n_scan; ++k) {
        fs[k] = f(lo + span * k / (n_scan - 1));
        if (fs[k] < fs[best_k]) best_k = k;
    }
    double best_x = lo + span * best_k / (n_scan - 1);
    double best_f = fs[best_k];
    double a = lo + span * std::max(0, best_k - 1) / (n_scan - 1);
    double b = lo + span * std::min(n_scan - 1, best_k + 1) / (n_scan - 1);
    double x1 = b - k_gold * (b - a);
    double x2 = a + k_gold * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    if (f1 < best_f) { best_f = f1; best_x = x1; }
    if (f2 < best_f) { best_f = f2; best_x = x2; }
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - k_gold * (b - a);
            f1 = f(x1);
            if (f1 < best_f) { best_f = f1; best_x = x1; }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + k_gold * (b - a);
            f2 = f(x2);
            if (f2 < best_f) { best_f = f2; best_x = x2; }
        }
    }
    return {best_x, best_f};
}

// Rows of one slice are independent; dynamic partition, results identical
// regardless of the schedule since every row is a pure function of the
// previous slice.
template <class Fn>
void parallel_rows(int n_rows, int n_threads, Fn&& fn) {
    n_threads = std::max(1, std::min(n_threads, n_rows));
    if (n_threads == 1) {
        for (int j = 0; j < n_rows; ++j) fn(j);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (int j = next.fetch_add(1); j < n_rows; j = next.fetch_add(1)) fn(j);
        });
    }
    for (auto& th : pool) th.join();
}

ControlInterval row_controls(const PhysicalParams& p, int j, int n_v) {
    if (j == 0) return {0.0, p.beta};
    if (j == n_v) return {-p.alpha, 0.0};
    return {-p.alpha, p.beta};
}

}  // namespace

void SolveConfig::validate() const {
    params.validate();
    schedule.validate();
    weights.validate();
    if (!(weights.c3 > 0.0))
        throw std::invalid_argument("weights.c3 must be positive: free waiting is degenerate");
    if (n_v < 2) throw std::invalid_argument("config.n_v must be at least 2");
    if (!(gss_tol > 0.0)) throw std::invalid_argument("config.gss_tol must be positive");
    if (n_threads < 1) throw std::invalid_argument("config.n_threads must be positive");
    if (distribution) distribution->validate();
}

GssResult gss_minimize(const std::function<double(double)>& f, double lo, double hi,
                       double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("gss tol must be positive");
    if (!(hi >= lo)) throw std::invalid_argument("gss interval is empty");
    return gss_core(f, lo, hi, tol);
}

GssResult sl_backup(const VehicleState& y, ControlInterval ctrl, double tau,
                    const CostWeights& w,
                    const std::function<double(const VehicleState&)>& next_value,
                    double gss_tol) {
    return gss_core(
        [&](double a) { return tau * running_cost(w, a) + next_value(step_dynamics(y, a, tau)); },
        ctrl.lo, ctrl.hi, gss_tol);
}

SignalSchedule snap_schedule(const SignalSchedule& s, double delta_t) {
    s.validate();
    SignalSchedule out = s;
    long long m_y = std::max(1LL, std::llround(s.d_yellow / delta_t));
    long long m_r = std::max(1LL, std::llround(s.d_red / delta_t));
    out.d_yellow = static_cast<double>(m_y) * delta_t;
    out.d_red = static_cast<double>(m_r) * delta_t;
    return out;
}

GreenDurationDistribution snap_distribution(const GreenDurationDistribution& dist,
                                            double delta_t) {
    dist.validate();
    GreenDurationDistribution out;
    long long prev = 0;
    for (std::size_t i = 0; i < dist.times.size(); ++i) {
        if (dist.probs[i] == 0.0) continue;  // unreachable scenario, drop exactly
        long long tick = std::llround(dist.times[i] / delta_t);
        if (tick < 1)
            throw std::invalid_argument("distribution.times must snap to at least one grid step");
        if (!out.times.empty() && tick == prev) {
            out.probs.back() += dist.probs[i];
            continue;
        }
        out.times.push_back(static_cast<double>(tick) * delta_t);
        out.probs.push_back(dist.probs[i]);
        prev = tick;
    }
    if (out.times.empty())
        throw std::invalid_argument("distribution has no positive-probability scenario");
    return out;
}

ValueField solve_stationary_green(const SolveConfig& cfg) {
    cfg.validate();
    const PhysicalParams& p = cfg.params;
    const CostWeights& w = cfg.weights;
    ValueField f;
    f.grid = build_grid(p, cfg.n_v, 0.0, 0.0);
    const GridSpec& g = f.grid;
    const int n_d = g.n_d, n_v = g.n_v, n_d1 = n_d + 1;
    f.value.assign(g.n_nodes(), 0.0);
    f.feedback.assign(g.n_nodes(), 0.0f);

    const double dt = g.delta_t;
    const double inv_dd = 1.0 / g.delta_d;
    const double inv_dv = 1.0 / g.delta_v;
    double* q = f.value.data();

    for (int i = 1; i <= n_d; ++i) {
        // Speed-limit row: coasting, one cell per step by construction.
        q[n_v * n_d1 + i] = dt * running_cost(w, 0.0) + q[n_v * n_d1 + i - 1];
        f.feedback[n_v * n_d1 + i] = 0.0f;
        for (int j = n_v - 1; j >= 0; --j) {
            double v = g.v(j);
            const double* row_up = q + (j + 1) * n_d1 + i;
            const double* row_same = q + j * n_d1 + i;
            auto obj = [&](double a) {
                double xi = dt * (v + 0.5 * a * dt) * inv_dd;
                double eta = a * dt * inv_dv;
                double denom = 1.0 - (1.0 - xi) * (1.0 - eta);
                if (denom < 1e-14) return k_infeasible;  // holding still never ends
                double num = dt * running_cost(w, a) + (1.0 - xi) * eta * row_up[0] +
                             xi * eta * row_up[-1] + xi * (1.0 - eta) * row_same[-1];
                return num / denom;
            };
            GssResult r = gss_core(obj, 0.0, p.beta, cfg.gss_tol);
            q[j * n_d1 + i] = r.value;
            f.feedback[j * n_d1 + i] = static_cast<float>(r.arg);
        }
    }
    return f;
}

namespace {

// Shared machinery for the red slab, the two yellow passes and the reveal
// chain segments. The field's slices are filled newest to oldest; all row
// sweeps within a slice run in parallel.
//
// All time arithmetic runs on a rebased axis where slice 0 sits at t = 0:
// the schedule handed in must be expressed relative to the slab start. This
// keeps slab bytes independent of the anchor, which the resume path relies
// on when it re-attaches a saved slab at a different yellow onset.
class SlabEngine {
public:
    SlabEngine(const SolveConfig& cfg, const SignalSchedule& snapped, const ValueField& Q,
               TimeDepField& field)
        : cfg_(cfg),
          p_(cfg.params),
          w_(cfg.weights),
          s_(snapped),
          q_(Q),
          f_(field),
          g_(field.grid),
          n_d_(field.grid.n_d),
          n_v_(field.grid.n_v),
          n_d1_(field.grid.n_d + 1) {
        dt_ = g_.delta_t;
        inv_dd_ = 1.0 / g_.delta_d;
        inv_dv_ = 1.0 / g_.delta_v;
        alpha_pos_.resize(n_v_ + 1);
        for (int j = 0; j <= n_v_; ++j) alpha_pos_[j] = d_alpha(p_, g_.v(j));
        i_line_ = col_ceil(p_.d_ell) - 1;  // last column strictly left of the stop line
        // First column from which a node's whole stencil clears the parabola
        // and no step can be clipped at it.
        i_fast_min_.resize(n_v_ + 1);
        double margin = (1.0 + p_.beta / p_.alpha) * g_.delta_d + 1e-6;
        for (int j = 0; j <= n_v_; ++j) {
            int safe_stencil = col_ceil(alpha_pos_[std::min(j + 1, n_v_)]) + 1;
            int safe_clip = col_ceil(alpha_pos_[j] + margin);
            i_fast_min_[j] = std::max(safe_stencil, safe_clip);
        }
        alpha_anchor_.resize(n_v_ + 1);
        beta_pos_.resize(n_v_ + 1);
        beta_anchor_.resize(n_v_ + 1);
    }

    // Red-phase rule for every slice in [k_lo, k_hi], newest first. Also the
    // yellow waiting pass: the infeasible strip between the line and the
    // parabola is identical, only the crossing pass fills parts of it later.
    void sweep_wait(int k_hi, int k_lo) {
        for (int k = k_hi; k >= k_lo; --k) backup_wait_slice(k);
    }

    // Two-pass yellow on [k_lo, k_hi]; slice k_hi + 1 must already hold the
    // value at t_red.
    void sweep_yellow(int k_hi, int k_lo) {
        pass1_lo_ = k_lo;
        pass1_.assign(static_cast<std::size_t>(k_hi + 2 - k_lo) * g_.n_nodes(), 0.0);
        for (int k = k_hi; k >= k_lo; --k) {
            backup_wait_slice(k);
            std::memcpy(pass1_slice(k), f_.slice_value(k), sizeof(double) * g_.n_nodes());
        }
        std::memcpy(pass1_slice(k_hi + 1), f_.slice_value(k_hi + 1),
                    sizeof(double) * g_.n_nodes());
        for (int k = k_hi; k >= k_lo; --k) backup_cross_slice(k);
        pass1_.clear();
        pass1_.shrink_to_fit();
    }

    // Unconstrained sweep (pre-yellow green): every node takes the plain
    // kernel.
    void sweep_free(int k_hi, int k_lo) {
        for (int k = k_hi; k >= k_lo; --k) {
            const double* next = f_.slice_value(k + 1);
            double* cur = f_.slice_value(k);
            float* ctl = f_.slice_feedback(k);
            parallel_rows(n_v_ + 1, cfg_.n_threads, [&](int j) {
                ControlInterval c = row_controls(p_, j, n_v_);
                double v = g_.v(j);
                cur[j * n_d1_] = 0.0;
                ctl[j * n_d1_] = 0.0f;
                for (int i = 1; i <= n_d_; ++i) {
                    GssResult r = plain_backup(next, i, j, v, c);
                    cur[j * n_d1_ + i] = r.value;
                    ctl[j * n_d1_ + i] = static_cast<float>(r.arg);
                }
            });
        }
    }

private:
    int col_ceil(double d) const {
        return static_cast<int>(std::ceil((d - p_.d_star) * inv_dd_ - 1e-12));
    }

    double t_rel(int k) const { return static_cast<double>(k) * dt_; }

    double* pass1_slice(int k) {
        return pass1_.data() + static_cast<std::size_t>(k - pass1_lo_) * g_.n_nodes();
    }
    const double* pass1_slice(int k) const {
        return pass1_.data() + static_cast<std::size_t>(k - pass1_lo_) * g_.n_nodes();
    }

    double q_sample(const VehicleState& y) const { return bilinear_sample(q_, y); }

    double c_alpha(double v, double t) const {
        return boundary_cost_alpha(p_, s_, w_, v, t,
                                   [this](const VehicleState& y) { return q_sample(y); });
    }

    double c_beta(double v, double t) const {
        return boundary_cost_beta(p_, s_, w_, v, t,
                                  [this](const VehicleState& y) { return q_sample(y); });
    }

    // Plain semi-Lagrangian backup: landing stays within columns (i-1, i)
    // and the rows adjacent to j, all of them finite.
    GssResult plain_backup(const double* next, int i, int j, double v,
                           ControlInterval c) const {
        const double* row_same = next + j * n_d1_ + i;
        auto obj = [&](double a) {
            double xi = dt_ * (v + 0.5 * a * dt_) * inv_dd_;
            double eta = std::abs(a) * dt_ * inv_dv_;
            int jb = a > 0.0 ? j + 1 : (a < 0.0 ? j - 1 : j);
            const double* row_b = next + jb * n_d1_ + i;
            double va = row_same[0] + xi * (row_same[-1] - row_same[0]);
            double vb = row_b[0] + xi * (row_b[-1] - row_b[0]);
            return dt_ * running_cost(w_, a) + va + eta * (vb - va);
        };
        return gss_core(obj, c.lo, c.hi, cfg_.gss_tol);
    }

    // Row value at distance d for the waiting problem: plain right of the
    // parabola, anchored at the curve when it enters the cell. False when
    // the row's feasible support starts right of d.
    bool row_wait(const double* values, int r, double d, int i, double fx, double& out) const {
        double cpos = alpha_pos_[r];
        const double* row = values + r * n_d1_;
        if (cpos <= g_.d(i)) {
            out = row[i] + fx * (row[i + 1] - row[i]);
            return true;
        }
        if (cpos <= d + k_eps_geo) {
            double denom = g_.d(i + 1) - cpos;
            double frac = denom > 1e-15 ? std::clamp((d - cpos) / denom, 0.0, 1.0) : 1.0;
            out = alpha_anchor_[r] + frac * (row[i + 1] - alpha_anchor_[r]);
            return true;
        }
        return false;
    }

    // Value of the waiting field at (d, v), time t_next. alpha_anchor_ must
    // hold C_alpha(v_row, t_next). Queries sit on or right of the parabola.
    double sample_wait(const double* values, double d, double v, double t_next) const {
        double x = std::clamp((d - p_.d_star) * inv_dd_, 0.0, static_cast<double>(n_d_));
        double wv = std::clamp(v * inv_dv_, 0.0, static_cast<double>(n_v_));
        int i = std::min(static_cast<int>(x), n_d_ - 1);
        int r = std::min(static_cast<int>(wv), n_v_ - 1);
        double fx = x - i;
        double fw = wv - r;
        double lo;
        if (!row_wait(values, r, d, i, fx, lo)) {
            // Query essentially on the curve: both rows start right of it.
            double vx = std::sqrt(2.0 * p_.alpha * std::max(0.0, d - p_.d_ell));
            return c_alpha(vx, t_next);
        }
        if (fw <= 0.0) return lo;
        double hi;
        if (row_wait(values, r + 1, d, i, fx, hi)) return lo + fw * (hi - lo);
        // Upper row unusable: interpolate vertically toward the curve point
        // directly above the query.
        double vx = std::sqrt(2.0 * p_.alpha * std::max(0.0, d - p_.d_ell));
        double cval = c_alpha(vx, t_next);
        double denom = vx - g_.v(r);
        double frac = denom > 1e-15 ? std::clamp((v - g_.v(r)) / denom, 0.0, 1.0) : 1.0;
        return lo + frac * (cval - lo);
    }

    // Row value for the committed-crossing problem: plain while the whole
    // cell is crossable, anchored at d_beta when it enters the cell. False
    // when the row's crossing lies left of d.
    bool row_cross(const double* values, int r, double d, int i, double fx, double& out) const {
        double cpos = beta_pos_[r];
        const double* row = values + r * n_d1_;
        if (g_.d(i + 1) <= cpos) {
            out = row[i] + fx * (row[i + 1] - row[i]);
            return true;
        }
        if (d <= cpos + k_eps_geo) {
            double denom = cpos - g_.d(i);
            double frac = denom > 1e-15 ? std::clamp((d - g_.d(i)) / denom, 0.0, 1.0) : 1.0;
            out = row[i] + frac * (beta_anchor_[r] - row[i]);
            return true;
        }
        return false;
    }

    // Value of the crossing field at (d, v), time t_next; beta_pos_ and
    // beta_anchor_ must be current for t_next. Queries sit on or left of
    // d_beta.
    double sample_cross(const double* values, double d, double v, double t_next) const {
        double x = std::clamp((d - p_.d_star) * inv_dd_, 0.0, static_cast<double>(n_d_));
        double wv = std::clamp(v * inv_dv_, 0.0, static_cast<double>(n_v_));
        int i = std::min(static_cast<int>(x), n_d_ - 1);
        int r = std::min(static_cast<int>(wv), n_v_ - 1);
        double fx = x - i;
        double fw = wv - r;
        double hi;
        bool ok_hi = row_cross(values, r + 1, d, i, fx, hi);
        double lo;
        if (row_cross(values, r, d, i, fx, lo)) {
            if (fw <= 0.0) return lo;
            if (ok_hi) return lo + fw * (hi - lo);
            return lo;  // degenerate: upper row blocked only by roundoff
        }
        // Lower row's crossing lies left of the query: interpolate from the
        // curve point directly below up to the usable upper row.
        auto vx = curve_speed(p_, s_, CurveId::beta, d, t_next);
        double v_curve = vx ? std::clamp(*vx, g_.v(r), g_.v(r + 1)) : g_.v(r);
        double cval = c_beta(v_curve, t_next);
        if (!ok_hi) return cval;
        double denom = g_.v(r + 1) - v_curve;
        double frac = denom > 1e-15 ? std::clamp((v - v_curve) / denom, 0.0, 1.0) : 1.0;
        return cval + frac * (hi - cval);
    }

    void compute_alpha_anchors(double t_next) {
        for (int j = 0; j <= n_v_; ++j) alpha_anchor_[j] = c_alpha(g_.v(j), t_next);
    }

    void compute_beta_anchors(double t_next) {
        for (int j = 0; j <= n_v_; ++j) {
            beta_pos_[j] = d_beta(p_, g_.v(j), t_next, s_);
            beta_anchor_[j] = c_beta(g_.v(j), t_next);
        }
    }

    // One waiting-problem slice: sentinel between the line and the parabola,
    // boundary cost on the parabola, clipped backups near it, plain
    // elsewhere.
    void backup_wait_slice(int k) {
        double t = t_rel(k);
        double tn = t_rel(k + 1);
        compute_alpha_anchors(tn);
        const double* next = f_.slice_value(k + 1);
        double* cur = f_.slice_value(k);
        float* ctl = f_.slice_feedback(k);
        parallel_rows(n_v_ + 1, cfg_.n_threads, [&](int j) {
            double v = g_.v(j);
            ControlInterval c = row_controls(p_, j, n_v_);
            double cpos = alpha_pos_[j];
            int fast_from = i_fast_min_[j];
            cur[j * n_d1_] = 0.0;
            ctl[j * n_d1_] = 0.0f;
            for (int i = 1; i <= n_d_; ++i) {
                int idx = j * n_d1_ + i;
                double d = g_.d(i);
                if (i <= i_line_ || i >= fast_from) {
                    GssResult r = plain_backup(next, i, j, v, c);
                    cur[idx] = r.value;
                    ctl[idx] = static_cast<float>(r.arg);
                    continue;
                }
                if (d < cpos - k_eps_node) {
                    cur[idx] = k_infeasible;
                    ctl[idx] = 0.0f;
                    continue;
                }
                if (d <= cpos + k_eps_node) {
                    cur[idx] = c_alpha(v, t);
                    ctl[idx] = static_cast<float>(-p_.alpha);
                    continue;
                }
                auto obj = [&](double a) {
                    double tau = adaptive_step_to_parabola({d, v}, a, dt_, p_);
                    if (tau < dt_) {
                        VehicleState land = step_dynamics({d, v}, a, tau);
                        return tau * running_cost(w_, a) + c_alpha(land.v, t + tau);
                    }
                    VehicleState land = step_dynamics({d, v}, a, dt_);
                    return dt_ * running_cost(w_, a) + sample_wait(next, land.d, land.v, tn);
                };
                GssResult r = gss_core(obj, c.lo, c.hi, cfg_.gss_tol);
                cur[idx] = r.value;
                ctl[idx] = static_cast<float>(r.arg);
            }
        });
    }

    // One crossing-pass slice: re-solve every node on the crossable side of
    // d_beta against the merged next slice, then keep the pointwise minimum.
    // Landings across the curve read the retained first pass; landings in
    // the dead strip disqualify the control.
    void backup_cross_slice(int k) {
        double t = t_rel(k);
        double tn = t_rel(k + 1);
        compute_alpha_anchors(tn);
        compute_beta_anchors(tn);
        const double* merged = f_.slice_value(k + 1);
        const double* wait_next = pass1_slice(k + 1);
        double* cur = f_.slice_value(k);
        float* ctl = f_.slice_feedback(k);
        parallel_rows(n_v_ + 1, cfg_.n_threads, [&](int j) {
            double v = g_.v(j);
            ControlInterval c = row_controls(p_, j, n_v_);
            double db_now = d_beta(p_, v, t, s_);
            int i_max = std::min(
                n_d_, static_cast<int>(std::floor((db_now + k_eps_geo - p_.d_star) * inv_dd_)));
            for (int i = std::max(1, i_line_ + 1); i <= i_max; ++i) {
                double d = g_.d(i);
                if (d >= db_now) continue;  // merge only strictly inside
                auto obj = [&](double a) {
                    VehicleState land = step_dynamics({d, v}, a, dt_);
                    double dbq = d_beta(p_, land.v, tn, s_);
                    if (land.d <= dbq + k_eps_geo)
                        return dt_ * running_cost(w_, a) +
                               sample_cross(merged, land.d, land.v, tn);
                    if (land.d < d_alpha(p_, land.v) - k_eps_geo) return k_infeasible;
                    return dt_ * running_cost(w_, a) +
                           sample_wait(wait_next, land.d, land.v, tn);
                };
                GssResult r = gss_core(obj, c.lo, c.hi, cfg_.gss_tol);
                int idx = j * n_d1_ + i;
                if (r.value < cur[idx]) {
                    cur[idx] = r.value;
                    ctl[idx] = static_cast<float>(r.arg);
                }
            }
        });
    }

    const SolveConfig& cfg_;
    const PhysicalParams& p_;
    const CostWeights& w_;
    SignalSchedule s_;
    const ValueField& q_;
    TimeDepField& f_;
    const GridSpec& g_;
    int n_d_, n_v_, n_d1_;
    double dt_ = 0.0, inv_dd_ = 0.0, inv_dv_ = 0.0;
    int i_line_ = 0;
    std::vector<double> alpha_pos_;
    std::vector<int> i_fast_min_;
    std::vector<double> alpha_anchor_;
    std::vector<double> beta_pos_, beta_anchor_;
    std::vector<double> pass1_;
    int pass1_lo_ = 0;
};

TimeDepField make_slab(const SolveConfig& cfg, double t_start, long long steps,
                       FieldKind kind) {
    TimeDepField f;
    f.grid = build_grid(cfg.params, cfg.n_v, 0.0, t_start);
    f.grid.n_t = static_cast<int>(steps);
    f.kind = kind;
    f.allocate();
    return f;
}

void copy_terminal(TimeDepField& f, const double* values, const float* feedback) {
    std::memcpy(f.slice_value(f.grid.n_t), values, sizeof(double) * f.grid.n_nodes());
    std::memcpy(f.slice_feedback(f.grid.n_t), feedback, sizeof(float) * f.grid.n_nodes());
}

}  // namespace

TimeDepField solve_red_phase(const SolveConfig& cfg, const ValueField& stationary) {
    cfg.validate();
    if (stationary.grid.n_v != cfg.n_v)
        throw std::invalid_argument("stationary field was solved on a different grid");
    SignalSchedule snapped = snap_schedule(cfg.schedule, stationary.grid.delta_t);
    long long m_r = stationary.grid.snap_steps(snapped.d_red);
    TimeDepField f = make_slab(cfg, snapped.t_red(), m_r, FieldKind::red);
    copy_terminal(f, stationary.value.data(), stationary.feedback.data());
    SignalSchedule rebased{-snapped.d_yellow, snapped.d_yellow, snapped.d_red};
    SlabEngine engine(cfg, rebased, stationary, f);
    engine.sweep_wait(f.grid.n_t - 1, 0);
    return f;
}

TimeDepField solve_yellow_phase(const SolveConfig& cfg, const ValueField& stationary,
                                const TimeDepField& field_at_red) {
    cfg.validate();
    if (stationary.grid.n_v != cfg.n_v)
        throw std::invalid_argument("stationary field was solved on a different grid");
    if (field_at_red.grid.n_nodes() != stationary.grid.n_nodes())
        throw std::invalid_argument("field_at_red does not match the stationary grid");
    SignalSchedule snapped = snap_schedule(cfg.schedule, stationary.grid.delta_t);
    long long m_y = stationary.grid.snap_steps(snapped.d_yellow);
    TimeDepField f = make_slab(cfg, snapped.t_yellow, m_y, FieldKind::yellow);
    copy_terminal(f, field_at_red.slice_value(0), field_at_red.slice_feedback(0));
    SignalSchedule rebased{0.0, snapped.d_yellow, snapped.d_red};
    SlabEngine engine(cfg, rebased, stationary, f);
    engine.sweep_yellow(f.grid.n_t - 1, 0);
    return f;
}

std::vector<TimeDepField> solve_uncertain_chain(const SolveConfig& cfg,
                                                const TimeDepField& yellow_red) {
    cfg.validate();
    if (!cfg.distribution)
        throw std::invalid_argument("config.distribution is required for the uncertain chain");
    if (yellow_red.kind != FieldKind::yellow_red && yellow_red.kind != FieldKind::yellow)
        throw std::invalid_argument("chain needs the field anchored at the yellow onset");
    const GridSpec& g = yellow_red.grid;
    GreenDurationDistribution dist = snap_distribution(cfg.distribution->conditioned(), g.delta_t);
    std::vector<double> hazards = conditional_hazards(dist);
    std::size_t n = dist.times.size();
    long long tick_n = g.snap_steps(dist.times[n - 1]);
    if (std::abs(g.t_start - static_cast<double>(tick_n) * g.delta_t) > 1e-9)
        throw std::invalid_argument(
            "yellow slab must start at the last reveal time of the distribution");

    const double* delta = yellow_red.slice_value(0);
    // The engine takes a stationary field for boundary costs; the
    // unconstrained sweep never evaluates them.
    ValueField unused_q;
    std::vector<TimeDepField> segments;  // built newest first, reversed at the end
    long long tick_hi = tick_n;
    for (std::size_t idx = n; idx-- > 0;) {
        long long tick_lo = idx == 0 ? 0 : g.snap_steps(dist.times[idx - 1]);
        TimeDepField seg = make_slab(cfg, static_cast<double>(tick_lo) * g.delta_t,
                                     tick_hi - tick_lo, FieldKind::uncertain);
        seg.segment = static_cast<int>(idx + 1);
        double* term = seg.slice_value(seg.grid.n_t);
        double hz = hazards[idx];
        if (segments.empty()) {
            std::memcpy(term, delta, sizeof(double) * g.n_nodes());
        } else {
            const double* cont = segments.back().slice_value(0);
            for (int m = 0; m < g.n_nodes(); ++m) {
                term[m] = (is_infeasible(delta[m]) || is_infeasible(cont[m]))
                              ? k_infeasible
                              : hz * delta[m] + (1.0 - hz) * cont[m];
            }
        }
        SignalSchedule snapped = snap_schedule(cfg.schedule, g.delta_t);
        snapped.t_yellow = static_cast<double>(tick_n - tick_lo) * g.delta_t;
        SlabEngine engine(cfg, snapped, unused_q, seg);
        engine.sweep_free(seg.grid.n_t - 1, 0);
        std::memcpy(seg.slice_feedback(seg.grid.n_t), seg.slice_feedback(seg.grid.n_t - 1),
                    sizeof(float) * g.n_nodes());
        segments.push_back(std::move(seg));
        tick_hi = tick_lo;
    }
    std::reverse(segments.begin(), segments.end());
    return segments;
}

TimeDepField solve_timed_slab(const SolveConfig& cfg, const SignalSchedule& snapped,
                              const ValueField& stationary) {
    cfg.validate();
    if (stationary.grid.n_v != cfg.n_v)
        throw std::invalid_argument("stationary field was solved on a different grid");
    long long m_y = stationary.grid.snap_steps(snapped.d_yellow);
    long long m_r = stationary.grid.snap_steps(snapped.d_red);
    TimeDepField f = make_slab(cfg, snapped.t_yellow, m_y + m_r, FieldKind::yellow_red);
    copy_terminal(f, stationary.value.data(), stationary.feedback.data());
    SignalSchedule rebased{0.0, snapped.d_yellow, snapped.d_red};
    SlabEngine engine(cfg, rebased, stationary, f);
    engine.sweep_wait(f.grid.n_t - 1, static_cast<int>(m_y));
    engine.sweep_yellow(static_cast<int>(m_y) - 1, 0);
    return f;
}

SignalSchedule anchored_schedule(const SolveConfig& cfg, double delta_t,
                                 const std::optional<GreenDurationDistribution>& snapped_dist) {
    SignalSchedule snapped = snap_schedule(cfg.schedule, delta_t);
    if (snapped_dist) {
        long long tick_n = std::llround(snapped_dist->times.back() / delta_t);
        snapped.t_yellow = static_cast<double>(tick_n) * delta_t;
    }
    return snapped;
}

SolutionBundle solve_bundle(const SolveConfig& cfg) {
    cfg.validate();
    using clock = std::chrono::steady_clock;
    SolutionBundle b;
    b.config = cfg;

    auto t0 = clock::now();
    b.stationary = solve_stationary_green(cfg);
    auto t1 = clock::now();
    b.timings.stationary_s = std::chrono::duration<double>(t1 - t0).count();

    double dt = b.stationary.grid.delta_t;
    if (cfg.distribution)
        b.snapped_distribution = snap_distribution(cfg.distribution->conditioned(), dt);
    b.snapped = anchored_schedule(cfg, dt, b.snapped_distribution);

    b.timed = solve_timed_slab(cfg, b.snapped, b.stationary);
    auto t2 = clock::now();
    b.timings.timed_s = std::chrono::duration<double>(t2 - t1).count();

    if (cfg.distribution) {
        b.segments = solve_uncertain_chain(cfg, b.timed);
        b.timings.chain_s = std::chrono::duration<double>(clock::now() - t2).count();
    }
    return b;
}

}  // namespace greenwave
