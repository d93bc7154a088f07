#ifndef GREENWAVE_RUN_HPP
#define GREENWAVE_RUN_HPP

/**
 * @file run.hpp
 * @brief Run configuration files and pipeline orchestration: staged solves,
 *        trace and slice exports, and stage-3 resumes from a saved bundle.
 *
 * A run owns its output directory exclusively. Every artifact names the
 * producing config hash; apart from the wall-clock timings in metadata.json,
 * artifacts are byte-identical across runs of the same config and seed.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "greenwave/pareto.hpp"
#include "greenwave/solver.hpp"
#include "greenwave/tracer.hpp"

namespace greenwave {

/// One requested trace. Without t0 the start is traced through the scenario
/// tree when a distribution is present, else deterministically from the
/// yellow onset.
struct TraceStart {
    VehicleState state;
    std::optional<double> t0;
};

struct ParetoSettings {
    std::vector<double> ratios;  ///< c1/c2 ratios, ascending
    double budget = 0.0;         ///< target J3 in seconds
    bool use_pipeline = false;   ///< evaluate under the full uncertain pipeline
    double tol_rel = 0.005;
};

/// Full description of one run, as parsed from a config file. The schema is
/// documented in the README; all quantities are SI.
struct RunConfig {
    SolveConfig solve;
    std::vector<TraceStart> starts;
    double trace_dt = 0.0;       ///< sampling interval; 0 picks delta_t / 4
    double trace_horizon = 600.0;
    std::optional<ParetoSettings> pareto;
    std::string out_dir = "out";
    std::uint64_t seed = 0;      ///< echoed to metadata; consumed by sampling tools

    void validate() const;
};

/// Parses the JSON text of a config file. Unknown or ill-typed fields throw
/// std::invalid_argument naming the offending field.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

std::string software_version();

/// Paths of everything a run wrote, bundle first.
struct RunArtifacts {
    std::string out_dir;
    std::vector<std::string> files;
};

/// Executes the staged pipeline: stationary solve, signal slab, reveal chain
/// (when a distribution is present), then traces, slice exports, the pareto
/// front when requested, and metadata. A failing stage aborts with the stage
/// name in the diagnostic. Skips the slab when nothing can ever need it (no
/// distribution and every trace starts at or after t_green).
RunArtifacts run_pipeline(const RunConfig& cfg);

/// CSV of (d, v, value, feedback) at the snapped slice nearest to t, taken
/// from the reveal segments, the signal slab, or the stationary field for
/// t >= t_green. Throws when t falls outside everything the bundle holds.
void export_value_slice(const SolutionBundle& bundle, double t, const std::string& path);

/// Traces cfg.starts against an already-solved bundle, writing only the
/// trajectory CSVs (and tree JSONs) into cfg.out_dir. The bundle's own solve
/// settings govern the traces; cfg supplies starts and output options.
RunArtifacts write_trace_artifacts(const RunConfig& cfg, const SolutionBundle& bundle);

/// Calibrates the pareto front of cfg (requires cfg.pareto and a start) and
/// writes pareto.csv into cfg.out_dir.
RunArtifacts write_pareto_artifact(const RunConfig& cfg);

/// Reruns Stage 3 against the Stage-1/2 fields of a saved bundle using the
/// distribution of `cfg`. Refuses with a field-by-field diff when the bundle
/// was produced under different stage-1/2 inputs. The slab is re-anchored to
/// the new last reveal time; its values transfer exactly (see
/// solve_timed_slab on shift invariance).
RunArtifacts resume_stage3(const std::string& bundle_path, const RunConfig& cfg);

}  // namespace greenwave

#endif  // GREENWAVE_RUN_HPP
