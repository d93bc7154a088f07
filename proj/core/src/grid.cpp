#include "greenwave/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace greenwave {

namespace {

// Slack, in cells, accepted beyond the box edge before a query counts as
// out of bounds. Absorbs roundoff from speed clamping and time snapping.
constexpr double k_edge_slack = 1e-7;

// -1: committed side of the boundary (will cross / has crossed the line),
// +1: waiting side, 0: no commit boundary at this time.
int commit_side(const VehicleState& y, double t, const SignalSchedule& s,
                const PhysicalParams& p) {
    if (t < s.t_yellow || t >= s.t_green()) return 0;
    if (t >= s.t_red()) return y.d < p.d_ell ? -1 : +1;
    return y.d <= d_beta(p, y.v, t, s) ? -1 : +1;
}

}  // namespace

long long GridSpec::snap_steps(double duration) const {
    return std::llround(duration / delta_t);
}

GridSpec build_grid(const PhysicalParams& p, int n_v, double horizon, double t_start) {
    p.validate();
    if (n_v < 2) throw std::invalid_argument("grid.n_v must be at least 2");
    if (!(horizon >= 0.0)) throw std::invalid_argument("grid horizon must be nonnegative");
    GridSpec g;
    g.params = p;
    g.n_v = n_v;
    g.delta_v = p.v_bar / n_v;
    g.delta_t = g.delta_v / std::max(p.alpha, p.beta);
    g.delta_d = p.v_bar * g.delta_t;
    g.n_d = static_cast<int>(std::ceil((p.d_bar - p.d_star) / g.delta_d));
    while (g.d(g.n_d) < p.d_bar - 1e-9) ++g.n_d;
    g.n_t = static_cast<int>(std::llround(horizon / g.delta_t));
    g.t_start = t_start;
    return g;
}

double bilinear_sample(const GridSpec& g, const double* values, const VehicleState& y) {
    double x = (y.d - g.params.d_star) / g.delta_d;
    double w = y.v / g.delta_v;
    if (x < -k_edge_slack || x > g.n_d + k_edge_slack || w < -k_edge_slack ||
        w > g.n_v + k_edge_slack)
        throw std::out_of_range("bilinear_sample: query outside the grid box");
    x = std::clamp(x, 0.0, static_cast<double>(g.n_d));
    w = std::clamp(w, 0.0, static_cast<double>(g.n_v));
    int i = std::min(static_cast<int>(x), g.n_d - 1);
    int j = std::min(static_cast<int>(w), g.n_v - 1);
    double fx = x - i;
    double fw = w - j;
    const double* lo = values + g.index(i, j);
    const double* hi = values + g.index(i, j + 1);
    double below = lo[0] * (1.0 - fx) + lo[1] * fx;
    double above = hi[0] * (1.0 - fx) + hi[1] * fx;
    return below * (1.0 - fw) + above * fw;
}

double feedback_sample(const ValueField& f, const VehicleState& y) {
    const GridSpec& g = f.grid;
    double x = std::clamp((y.d - g.params.d_star) / g.delta_d, 0.0, static_cast<double>(g.n_d));
    double w = std::clamp(y.v / g.delta_v, 0.0, static_cast<double>(g.n_v));
    int i = std::min(static_cast<int>(x), g.n_d - 1);
    int j = std::min(static_cast<int>(w), g.n_v - 1);
    double fx = x - i;
    double fw = w - j;
    double num = 0.0, den = 0.0;
    for (int dj = 0; dj <= 1; ++dj) {
        for (int di = 0; di <= 1; ++di) {
            int idx = g.index(i + di, j + dj);
            if (is_infeasible(f.value[idx])) continue;
            double wt = (di ? fx : 1.0 - fx) * (dj ? fw : 1.0 - fw);
            num += wt * f.feedback[idx];
            den += wt;
        }
    }
    if (den <= 0.0) throw std::runtime_error("feedback_sample: no feasible stencil node");
    return num / den;
}

double feedback_sample(const TimeDepField& f, const SignalSchedule& s, const VehicleState& y,
                       double t) {
    const GridSpec& g = f.grid;
    const PhysicalParams& p = g.params;
    double tc = std::clamp(t, g.t(0), g.t(g.n_t));
    double z = g.n_t > 0 ? (tc - g.t_start) / g.delta_t : 0.0;
    int k = std::min(static_cast<int>(z), std::max(0, g.n_t - 1));
    double fz = g.n_t > 0 ? z - k : 0.0;

    double x = std::clamp((y.d - p.d_star) / g.delta_d, 0.0, static_cast<double>(g.n_d));
    double w = std::clamp(y.v / g.delta_v, 0.0, static_cast<double>(g.n_v));
    int i = std::min(static_cast<int>(x), g.n_d - 1);
    int j = std::min(static_cast<int>(w), g.n_v - 1);
    double fx = x - i;
    double fw = w - j;

    double num = 0.0, den = 0.0;
    for (int dk = 0; dk <= 1; ++dk) {
        double wt_t = dk ? fz : 1.0 - fz;
        if (wt_t <= 0.0) continue;
        int slice = std::min(k + dk, g.n_t);
        double ts = g.t(slice);
        int qside = commit_side(y, ts, s, p);
        const double* val = f.slice_value(slice);
        const float* ctl = f.slice_feedback(slice);
        for (int dj = 0; dj <= 1; ++dj) {
            for (int di = 0; di <= 1; ++di) {
                int idx = g.index(i + di, j + dj);
                if (is_infeasible(val[idx])) continue;
                if (qside != 0 &&
                    commit_side({g.d(i + di), g.v(j + dj)}, ts, s, p) != qside)
                    continue;
                double wt = wt_t * (di ? fx : 1.0 - fx) * (dj ? fw : 1.0 - fw);
                num += wt * ctl[idx];
                den += wt;
            }
        }
    }
    if (den > 0.0) return num / den;

    // Entire stencil dropped (possible hard against a curve): take the
    // nearest same-side feasible node in the two stencil rows.
    double best_dist = 0.0;
    double best_ctl = 0.0;
    bool found = false;
    for (int dk = 0; dk <= 1; ++dk) {
        int slice = std::min(k + dk, g.n_t);
        double ts = g.t(slice);
        int qside = commit_side(y, ts, s, p);
        const double* val = f.slice_value(slice);
        const float* ctl = f.slice_feedback(slice);
        for (int dj = 0; dj <= 1; ++dj) {
            int row = std::min(j + dj, g.n_v);
            for (int ii = 0; ii <= g.n_d; ++ii) {
                int idx = g.index(ii, row);
                if (is_infeasible(val[idx])) continue;
                if (qside != 0 && commit_side({g.d(ii), g.v(row)}, ts, s, p) != qside) continue;
                double dist = std::abs(g.d(ii) - y.d);
                if (!found || dist < best_dist) {
                    best_dist = dist;
                    best_ctl = ctl[idx];
                    found = true;
                }
            }
        }
    }
    if (!found) throw std::runtime_error("feedback_sample: no feasible stencil node");
    return best_ctl;
}

double adaptive_step_to_parabola(const VehicleState& y, double a, double delta_t,
                                 const PhysicalParams& p) {
    double gap = y.d - d_alpha(p, y.v);
    double factor = 1.0 + a / p.alpha;  // d - d_alpha(v) shrinks by factor * distance driven
    if (gap <= 0.0) {
        bool slides = factor <= 0.0 || (y.v <= 0.0 && a <= 0.0);
        return slides ? delta_t : 0.0;
    }
    if (factor <= 0.0) return delta_t;
    double s_star = gap / factor;
    double disp_max = delta_t * (y.v + 0.5 * a * delta_t);
    if (s_star >= disp_max) return delta_t;
    double disc = y.v * y.v + 2.0 * a * s_star;
    double tau = 2.0 * s_star / (y.v + std::sqrt(std::max(0.0, disc)));
    return std::min(tau, delta_t);
}

namespace {

double curve_position(const PhysicalParams& p, const SignalSchedule& s, CurveId curve, double v,
                      double t) {
    return curve == CurveId::alpha ? d_alpha(p, v) : d_beta(p, v, t, s);
}

}  // namespace

std::optional<double> curve_speed(const PhysicalParams& p, const SignalSchedule& s,
                                  CurveId curve, double d, double t) {
    if (curve == CurveId::alpha) {
        if (d < p.d_ell) return std::nullopt;
        return std::sqrt(2.0 * p.alpha * (d - p.d_ell));
    }
    double s_r = s.t_red() - t;
    if (s_r <= 0.0) return std::nullopt;  // vertical line, no single speed
    double v_c = p.v_bar - p.beta * s_r;  // speed limit reached exactly at t_red
    double v1 = (d - p.d_ell) / s_r - 0.5 * p.beta * s_r;
    if (v1 <= v_c) return v1;  // full throttle stays below the cap until t_red
    double radicand = 2.0 * p.beta * (p.d_ell + p.v_bar * s_r - d);
    if (radicand < 0.0) return std::nullopt;
    return p.v_bar - std::sqrt(radicand);
}

CutCell cut_cell_boundary_points(const GridSpec& g, const SignalSchedule& s, CurveId curve,
                                 int i, int j, double t) {
    if (i < 0 || i >= g.n_d || j < 0 || j >= g.n_v)
        throw std::out_of_range("cut_cell_boundary_points: cell outside the grid");
    const PhysicalParams& p = g.params;
    double d_lo = g.d(i), d_hi = g.d(i + 1);
    double v_lo = g.v(j), v_hi = g.v(j + 1);

    CutCell cell;
    cell.i = i;
    cell.j = j;
    cell.curve = curve;

    auto push = [&](double d, double v, int edge, double param) {
        for (int n = 0; n < cell.n_points; ++n) {
            if (std::abs(cell.points[n].point.d - d) < 1e-9 &&
                std::abs(cell.points[n].point.v - v) < 1e-9)
                return;  // corner hit already recorded via the other edge
        }
        if (cell.n_points < 2)
            cell.points[cell.n_points++] = {{d, v}, edge, std::clamp(param, 0.0, 1.0)};
    };

    bool degenerate_beta = curve == CurveId::beta && s.t_red() - t <= 0.0;
    if (degenerate_beta) {
        // Vertical line d = d_ell crossing the horizontal edges.
        if (d_lo <= p.d_ell && p.d_ell <= d_hi) {
            push(p.d_ell, v_lo, 0, (p.d_ell - d_lo) / g.delta_d);
            push(p.d_ell, v_hi, 2, (d_hi - p.d_ell) / g.delta_d);
        }
    } else {
        double c_lo = curve_position(p, s, curve, v_lo, t);
        double c_hi = curve_position(p, s, curve, v_hi, t);
        if (d_lo <= c_lo && c_lo <= d_hi) push(c_lo, v_lo, 0, (c_lo - d_lo) / g.delta_d);
        if (d_lo <= c_hi && c_hi <= d_hi) push(c_hi, v_hi, 2, (d_hi - c_hi) / g.delta_d);
        const double v_slack = 1e-9 * g.delta_v;
        if (auto v_r = curve_speed(p, s, curve, d_hi, t)) {
            if (*v_r >= v_lo - v_slack && *v_r <= v_hi + v_slack) {
                double v = std::clamp(*v_r, v_lo, v_hi);
                push(d_hi, v, 1, (v - v_lo) / g.delta_v);
            }
        }
        if (auto v_l = curve_speed(p, s, curve, d_lo, t)) {
            if (*v_l >= v_lo - v_slack && *v_l <= v_hi + v_slack) {
                double v = std::clamp(*v_l, v_lo, v_hi);
                push(d_lo, v, 3, (v_hi - v) / g.delta_v);
            }
        }
    }

    if (cell.n_points == 0)
        throw std::invalid_argument("cut_cell_boundary_points: curve does not cross the cell");
    return cell;
}

}  // namespace greenwave
