/**
 * @file bench_main.cpp
 * @brief Microbenchmarks for the hot paths: the stationary sweep, the timed
 *        slab backups, interpolation, and trace throughput.
 */

#include <benchmark/benchmark.h>

#include "greenwave/solver.hpp"
#include "greenwave/tracer.hpp"

namespace {

using namespace greenwave;

SolveConfig base_config(int n_v) {
    SolveConfig cfg;
    cfg.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    cfg.n_v = n_v;
    return cfg;
}

void bm_stationary_sweep(benchmark::State& state) {
    SolveConfig cfg = base_config(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        ValueField q = solve_stationary_green(cfg);
        benchmark::DoNotOptimize(q.value.data());
    }
    GridSpec g = build_grid(cfg.params, cfg.n_v, 0.0, 0.0);
    state.SetItemsProcessed(state.iterations() * g.n_nodes());
}

void bm_slab_slices(benchmark::State& state) {
    SolveConfig cfg = base_config(static_cast<int>(state.range(0)));
    cfg.schedule.d_red = 5.0;  // short red keeps one iteration slab-bound, not setup-bound
    ValueField q = solve_stationary_green(cfg);
    SignalSchedule snapped = snap_schedule(cfg.schedule, q.grid.delta_t);
    long long slices = 0;
    for (auto _ : state) {
        TimeDepField f = solve_timed_slab(cfg, snapped, q);
        slices = f.grid.n_t;
        benchmark::DoNotOptimize(f.value.data());
    }
    state.SetItemsProcessed(state.iterations() * slices * q.grid.n_nodes());
}

void bm_bilinear_sample(benchmark::State& state) {
    SolveConfig cfg = base_config(60);
    ValueField q = solve_stationary_green(cfg);
    double span_d = cfg.params.d_bar - cfg.params.d_star;
    std::size_t k = 0;
    for (auto _ : state) {
        // walk a deterministic lattice of query points
        double fd = static_cast<double>((k * 2654435761u) % 1000u) / 1000.0;
        double fv = static_cast<double>((k * 40503u) % 1000u) / 1000.0;
        ++k;
        VehicleState y{cfg.params.d_star + fd * span_d, fv * cfg.params.v_bar};
        benchmark::DoNotOptimize(bilinear_sample(q, y));
    }
    state.SetItemsProcessed(state.iterations());
}

void bm_trace_deterministic(benchmark::State& state) {
    SolveConfig cfg = base_config(60);
    cfg.weights = {0.025, 0.025, 0.95};
    SolutionBundle b;
    b.config = cfg;
    b.stationary = solve_stationary_green(cfg);
    b.snapped = snap_schedule(cfg.schedule, b.stationary.grid.delta_t);
    std::size_t samples = 0;
    for (auto _ : state) {
        Trajectory tr = trace_deterministic({80.0, 0.0}, b.snapped.t_green(), b);
        samples = tr.samples.size();
        benchmark::DoNotOptimize(tr.costs.j);
    }
    state.SetItemsProcessed(state.iterations() * samples);
}

BENCHMARK(bm_stationary_sweep)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_slab_slices)->Arg(60)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_bilinear_sample);
BENCHMARK(bm_trace_deterministic)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
