// Command-line front-end for the capacity experiments.
//
//   capcli <kind> --config <path> [--out <dir>] [--seed <u64>]
//
// Runs the experiment described by the JSON config, writes the report,
// table, and plot files into the output directory, and prints one line per
// configured check.  Exit codes: 0 all checks passed, 1 a check failed,
// 2 invalid config or usage, 3 output I/O failure.
#include <cstdint>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "capnum/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"conformal capacity and pseudometric experiments"};
  app.footer(
      "Kinds: capacity, compact_capacity, point_decay, mu, triangle, classify, converge.\n"
      "With a fixed config and seed, all output files are byte-identical across runs.");

  std::string kind;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;

  app.add_option("kind", kind, "experiment kind")
      ->required()
      ->check(CLI::IsMember({"capacity", "compact_capacity", "point_decay", "mu", "triangle",
                             "classify", "converge"}));
  app.add_option("--config", config_path, "path to the JSON experiment config")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "directory for report, table, and plot files");
  app.add_option("--seed", seed, "override the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  return capnum::run_experiment_cli(kind, config_path, out_dir, seed);
}
