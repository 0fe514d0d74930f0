#pragma once

// Output writers and the snapshot text format.  All numeric output goes
// through locale-independent formatting (%.17g via snprintf under the "C"
// numeric conventions, full double round trip); filesystem failures raise
// IoError naming the path.

#include <string>
#include <utility>
#include <vector>

#include "sch/driver.hpp"

namespace sch {

// Shortest round-trip-exact decimal form of a double.
std::string format_number(double v);

// mkdir -p; IoError on failure.
void ensure_directory(const std::string& dir);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Self-contained text snapshot: time stamps, the active triangulation and
// the nodal fields.  Re-reading reconstructs an evaluable mesh (topology
// rebuilt, generation 0); loaded meshes are for evaluation, not for further
// refinement.
void write_snapshot_file(const std::string& path, const Snapshot& snap);

struct SnapshotData {
    double requested_t = 0.0;
    double t = 0.0;
    Mesh mesh;
    std::vector<std::pair<std::string, FeFunction>> fields;

    const FeFunction& field(const std::string& name) const; // IoError if absent
};
SnapshotData read_snapshot_file(const std::string& path);

// Legacy-VTK ASCII export of (mesh, u) for external visualization.
void write_vtk_file(const std::string& path, const Mesh& mesh, const FeFunction& u);

// Per-path output set under dir: config.ini, series.csv, indicators.csv,
// eigtrace.csv, summary.csv, snapshot files, optional VTK, and a MANIFEST
// documenting every file and CSV column.  Returns the file names written.
std::vector<std::string> write_path_outputs(const std::string& dir, const RunConfig& cfg,
                                            const PathResult& path);

// Ensemble layout: path_NNN/ subdirectories with the per-path set, plus
// histogram.csv, summary.csv, bounds.csv and the top-level MANIFEST.
std::vector<std::string> write_ensemble_outputs(const std::string& dir, const RunConfig& cfg,
                                                const EnsembleResult& ens);

} // namespace sch
