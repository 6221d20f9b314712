#pragma once

// Run configuration: a JSON file whose physical quantities all carry their
// unit in the key name. Everything is converted to nondimensional units and
// validated on load, before any compute. Unknown keys are rejected.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "robust_lt/search.hpp"
#include "robust_lt/solver.hpp"
#include "robust_lt/transcription.hpp"

namespace robust_lt {

struct RunConfig {
    std::filesystem::path file;  // where the config was read from, if anywhere
    DynamicsParams dynamics;
    BoundaryConditions boundary;  // departure in ND units, target orbit loaded
    std::filesystem::path target_orbit_file;
    LegLayout reference;          // caps in TU and MU
    double integration_tolerance = 1e-12;
    FeasibilityTolerances tolerances;  // ND
    std::vector<MteScenario> scenarios;
    SearchConfig search;          // includes the solver settings
    std::filesystem::path archive;
    std::filesystem::path output_directory;

    /// Transcription of one scenario; depth 0 is always allowed.
    RobustTranscription problem(const MteScenario& scenario) const;
    /// Configured scenarios of depth k, or the single depth-0 scenario when k = 0.
    std::vector<MteScenario> scenarios_at_depth(int k) const;
};

/// Parse and validate. Relative paths resolve against base_dir. Throws Config
/// with a message naming the offending key.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

/// Read a file and parse it with its directory as base.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace robust_lt
