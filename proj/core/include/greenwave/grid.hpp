#ifndef GREENWAVE_GRID_HPP
#define GREENWAVE_GRID_HPP

/**
 * @file grid.hpp
 * @brief Coupled space-time grid, value field containers, interpolation and
 *        the geometric helpers tied to the constraint curves.
 *
 * The grid spacings are locked together: delta_v = v_bar / N_v,
 * delta_t = delta_v / max(alpha, beta), delta_d = v_bar * delta_t. One step
 * at the extreme controls then moves a state exactly one cell, so the
 * semi-Lagrangian stencil never leaves the neighboring columns and rows.
 */

#include <array>
#include <optional>
#include <vector>

#include "greenwave/model.hpp"

namespace greenwave {

struct GridSpec {
    PhysicalParams params;
    int n_d = 0;  ///< columns are 0..n_d, column 0 at d_star
    int n_v = 0;  ///< rows are 0..n_v, row n_v at the speed limit
    int n_t = 0;  ///< time steps; a time-dependent field holds n_t + 1 slices
    double delta_d = 0.0;
    double delta_v = 0.0;
    double delta_t = 0.0;
    double t_start = 0.0;

    double d(int i) const { return params.d_star + i * delta_d; }
    double v(int j) const { return j * delta_v; }
    double t(int k) const { return t_start + k * delta_t; }
    int n_nodes() const { return (n_d + 1) * (n_v + 1); }
    int index(int i, int j) const { return j * (n_d + 1) + i; }

    /// Nearest whole number of steps covering a duration.
    long long snap_steps(double duration) const;
};

/// delta_v, delta_t, delta_d follow from n_v; n_d covers [d_star, d_bar] and
/// n_t covers the horizon with whole steps. Requires n_v >= 2.
GridSpec build_grid(const PhysicalParams& p, int n_v, double horizon, double t_start);

/// Stationary value function with its minimizing control per node.
struct ValueField {
    GridSpec grid;
    std::vector<double> value;
    std::vector<float> feedback;

    double at(int i, int j) const { return value[grid.index(i, j)]; }
};

enum class FieldKind {
    stationary,
    yellow,      ///< [t_yellow, t_red]
    red,         ///< [t_red, t_green]
    yellow_red,  ///< combined [t_yellow, t_green]
    uncertain,   ///< one reveal segment [t_{i-1}, t_i]
};

/// Backward-solved value slices on [t_start, t_start + n_t * delta_t].
/// Slice n_t is the terminal condition, stored exactly as supplied.
struct TimeDepField {
    GridSpec grid;
    FieldKind kind = FieldKind::red;
    int segment = 0;  ///< 1-based scenario index for uncertain segments
    std::vector<double> value;
    std::vector<float> feedback;

    int n_slices() const { return grid.n_t + 1; }
    double slice_time(int k) const { return grid.t(k); }
    double* slice_value(int k) { return value.data() + static_cast<std::size_t>(k) * grid.n_nodes(); }
    const double* slice_value(int k) const {
        return value.data() + static_cast<std::size_t>(k) * grid.n_nodes();
    }
    float* slice_feedback(int k) { return feedback.data() + static_cast<std::size_t>(k) * grid.n_nodes(); }
    const float* slice_feedback(int k) const {
        return feedback.data() + static_cast<std::size_t>(k) * grid.n_nodes();
    }

    void allocate() {
        value.assign(static_cast<std::size_t>(n_slices()) * grid.n_nodes(), 0.0);
        feedback.assign(static_cast<std::size_t>(n_slices()) * grid.n_nodes(), 0.0f);
    }
};

/// Bilinear interpolation of one node array. Queries must lie inside the
/// grid box; anything beyond a roundoff-sized slack is rejected rather than
/// extrapolated.
double bilinear_sample(const GridSpec& g, const double* values, const VehicleState& y);

inline double bilinear_sample(const ValueField& f, const VehicleState& y) {
    return bilinear_sample(f.grid, f.value.data(), y);
}

/// Bilinear sample of the stationary feedback with infeasible nodes dropped.
double feedback_sample(const ValueField& f, const VehicleState& y);

/// Trilinear feedback lookup in a time-dependent field, clamped to the slab
/// in time. Stencil nodes are dropped when infeasible or when they lie on
/// the other side of the commit boundary (d_beta during yellow, the stop
/// line during red) than the query, and the weights are renormalized.
double feedback_sample(const TimeDepField& f, const SignalSchedule& s, const VehicleState& y,
                       double t);

/// Largest admissible step toward the stopping parabola. Returns the first
/// crossing time of d = d_alpha(v) under constant a, capped at delta_t; 0
/// when the state sits on the curve and a would cross immediately. Sliding
/// controls (a == -alpha, or holding still) never cross.
double adaptive_step_to_parabola(const VehicleState& y, double a, double delta_t,
                                 const PhysicalParams& p);

enum class CurveId { alpha, beta };

/// Speed at which the curve reaches distance d, or nullopt when it never
/// does (d left of the line for d_alpha, or a degenerate d_beta at t_red).
std::optional<double> curve_speed(const PhysicalParams& p, const SignalSchedule& s,
                                  CurveId curve, double d, double t);

/// One intersection of a constraint curve with a cell edge. Edges are
/// numbered 0 bottom, 1 right, 2 top, 3 left, counterclockwise from the
/// lower-left corner; param in [0, 1] runs along the edge direction.
struct CutPoint {
    VehicleState point;
    int edge = 0;
    double param = 0.0;
};

struct CutCell {
    int i = 0;  ///< lower-left corner column
    int j = 0;  ///< lower-left corner row
    CurveId curve = CurveId::alpha;
    int n_points = 0;
    std::array<CutPoint, 2> points{};
    std::array<double, 2> boundary_value{};  ///< prescribed cost at each point
};

/// Intersections of d_alpha (or d_beta at time t) with the edges of cell
/// (i, j). Both curves are monotone in v, so there are at most two. Throws
/// if the curve misses the cell entirely. boundary_value is left zero;
/// callers attach costs to the returned points.
CutCell cut_cell_boundary_points(const GridSpec& g, const SignalSchedule& s, CurveId curve,
                                 int i, int j, double t);

}  // namespace greenwave

#endif  // GREENWAVE_GRID_HPP
