#ifndef GREENWAVE_BUNDLE_IO_HPP
#define GREENWAVE_BUNDLE_IO_HPP

/**
 * @file bundle_io.hpp
 * @brief Solution-bundle persistence, canonical config serialization and
 *        hashing, and plot-ready slice export.
 *
 * The bundle file is little-endian binary: a magic string, the two config
 * hashes, the canonical config JSON, then each field as its grid header
 * followed by values (64-bit floats, row-major over v then d) and feedback
 * (32-bit floats, same order). Timings are run metadata, not solution data,
 * and are not stored. A loaded bundle is bitwise identical to the saved one.
 */

#include <cstdint>
#include <iosfwd>
#include <string>

#include "greenwave/solver.hpp"

namespace greenwave {

std::uint64_t fnv1a64(const std::string& bytes);

/// Canonical config serialization: fixed key order, shortest round-trip
/// number formatting, thread count omitted (it never affects results).
std::string solve_config_to_canonical_json(const SolveConfig& cfg);
SolveConfig solve_config_from_json_text(const std::string& text);

/// Hash of the full canonical config, distribution included.
std::uint64_t config_hash(const SolveConfig& cfg);

/// Hash over the inputs that determine the stationary and timed fields:
/// params, signal durations, weights, n_v, gss_tol. The distribution and the
/// yellow anchor are excluded so a saved bundle can host new reveal chains.
std::uint64_t stage12_hash(const SolveConfig& cfg);

void save_bundle(const SolutionBundle& bundle, const std::string& path);
SolutionBundle load_bundle(const std::string& path);

/// CSV rows d,v,value,feedback over one slice, v-major to match the storage
/// order. Values print with %.17g so re-export is byte-identical; infeasible
/// nodes print INF.
void write_slice_csv(std::ostream& os, const GridSpec& g, const double* values,
                     const float* feedback);

}  // namespace greenwave

#endif  // GREENWAVE_BUNDLE_IO_HPP
