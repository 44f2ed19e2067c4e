// Batch experiment runner behind the command-line front-end.
//
// One experiment per invocation, described by a single JSON config file.
// Each run builds its meshes, executes the requested computation, evaluates
// the configured property checks, and emits a JSON report (header with the
// resolved config and library version, every result verbatim, one entry per
// check), a CSV table of headline numbers, and optional SVG plots.  With a
// fixed config and seed every output file is byte-identical across runs.
//
// Config layout (JSON object):
//   kind      : one of capacity | compact_capacity | point_decay | mu |
//               triangle | classify | converge   (must match the CLI kind)
//   seed      : unsigned integer; required for the stochastic kinds
//               (mu, triangle) and overridable from the command line
//   factor    : {"type": "flat"}
//             | {"type": "radial_bump", "amplitude": a, "width": w,
//                "center": [...]}
//             | {"type": "random_smooth", "seed": s, "amplitude": a,
//                "region_radius": r}
//   solver    : optional overrides of the minimizer defaults
//               (epsilon_schedule, gradient_tolerance, max_iterations,
//                quasi_newton_memory, value_tolerance)
//   output    : {"report": name, "table": name, "plots": bool}
//   domain    : {"dim": 2|3, "shape": "ball"|"annulus"|"box"|
//                "box_minus_ball", ...shape fields..., "edge_length": h,
//                "refine": k}
//   exhaustion: {"dim": 2|3, "type": "ball"|"shell", "center": [...],
//                "r_inner": r (shell), "radii": [...] or "radii_exp": [...],
//                "edge_length": h}
//   regions (plates, compact sets) are named shapes evaluated on mesh
//   vertices: {"shape": "ball"|"shell"|"segment_tube"|"box", ...}.
//
// Per-kind fields and checks are documented next to their runners in the
// implementation; every check failure is reported, never silently dropped.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "capnum/report.hpp"

namespace capnum {

// Malformed configuration; `field_path` names the offending entry
// ("exhaustion.radii[2]", "plate0.shape", ...).
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::invalid_argument(path.empty() ? message : path + ": " + message),
        path_(std::move(path)) {}
  const std::string& field_path() const { return path_; }

 private:
  std::string path_;
};

struct CheckLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentOutcome {
  bool passed = false;                 // all checks passed
  Json report;                         // full JSON report document
  CsvTable table;                      // headline CSV
  std::vector<std::pair<std::string, std::string>> plots;  // (file name, svg)
  std::vector<CheckLine> checks;
};

// Runs the experiment described by `config`.  `kind` must equal the config's
// kind when both are present.  `seed_override` replaces the config seed.
// Throws ConfigError on malformed input; numerical failures (non-convergence,
// violated properties) are reported as failed checks, not exceptions.
ExperimentOutcome run_experiment(const Json& config, const std::string& kind = "",
                                 std::optional<std::uint64_t> seed_override = {});

// Command-line driver: loads the config file, runs the experiment, writes
// report/table/plot files under `out_dir`, prints one line per check plus a
// final verdict.  Exit codes: 0 all checks passed, 1 a check failed,
// 2 invalid config, 3 file I/O failure.
int run_experiment_cli(const std::string& kind, const std::string& config_path,
                       const std::string& out_dir,
                       std::optional<std::uint64_t> seed_override);

}  // namespace capnum
