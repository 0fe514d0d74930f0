#pragma once

// Run configuration and its flat key = value text format.  One struct drives
// everything: equation parameters, initial data, noise, discretization, the
// per-module option blocks, ensemble size and output layout.  parse_config
// accepts the full file text (not a path) so the CLI can append overrides as
// extra lines; serialize_config writes a file that parses back to an equal
// configuration (parse-print-parse fixpoint).

#include <cstdint>
#include <string>
#include <vector>

#include "sch/adaptivity.hpp"
#include "sch/estimators.hpp"
#include "sch/schemes.hpp"
#include "sch/spectral.hpp"

namespace sch {

struct RunConfig {
    // Equation and experiment.
    double eps = 1.0 / 32.0;
    double t_final = 0.012;
    double gamma = 1.0; // noise scaling exponent of eps^gamma
    double sigma = 1.0; // noise intensity amplitude

    // Initial condition: two concentric circles of radii r1 < r2.
    double r1 = 0.2;
    double r2 = 0.55;

    // Noise: cosine modes with indices 1..lmax per direction.  truncation -1
    // keeps every listed mode; otherwise the schemes see the first
    // noise_truncation of them.
    int noise_lmax = 4;
    int noise_truncation = -1;

    // Discretization.  tilde_resolution 0 runs the linear sub-solves on the
    // coupled mesh; a positive value gives them a dedicated fixed mesh of
    // that resolution.
    int resolution = 32;
    int tilde_resolution = 0;
    double tau_init = 1e-6;

    NewtonOptions newton;
    TimestepControl stepper{.tau_min = 1e-9,
                            .tau_max = std::numeric_limits<double>::infinity()};

    // Ensemble.
    int paths = 1;
    std::uint64_t seed = 1;
    int workers = 1;

    bool adapt_enabled = true;
    AdaptConfig adapt;
    EigenOptions eig;
    EstimatorConfig estimators;

    // Snapshot times; empty means none.  resolve() fills the scaled default
    // set {0, 0.003, 0.009, 0.012} * (t_final / 0.012) unless the text said
    // "snapshots = none".
    std::vector<double> snapshot_times;
    bool no_snapshots = false;

    bool write_vtk = false;
    std::string out_dir = "out";

    // Fill the defaults that depend on other fields: tau_max (t_final / 50
    // when unset or infinite) and the snapshot times.
    void resolve();
    // Range and consistency checks; throws ConfigError naming the field.
    void validate() const;
};

// Resolved and validated defaults (the empty-text configuration).
RunConfig default_config();

// Parse the text of a config file: `key = value` lines, `#` comments, blank
// lines ignored.  Unknown keys and malformed values are rejected with the
// line number and key named.  The result is resolved and validated.
RunConfig parse_config(const std::string& text);

// Read a file and parse it; IoError when unreadable.
RunConfig load_config(const std::string& path);

// Canonical text form; parse_config(serialize_config(c)) equals c field-wise.
std::string serialize_config(const RunConfig& cfg);

} // namespace sch
