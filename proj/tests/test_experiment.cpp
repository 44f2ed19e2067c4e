#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "capnum/experiment.hpp"
#include "capnum/oracle.hpp"

using namespace capnum;

namespace {

Json small_capacity_config() {
  return Json::parse(R"({
    "kind": "capacity",
    "domain": {"dim": 2, "shape": "annulus", "r_inner": 0.25, "r_outer": 1.0,
               "edge_length": 0.1},
    "plate1": {"boundary_region": {"shape": "ball", "radius": 0.5}},
    "plate0": {"boundary_region": {"shape": "shell", "r_inner": 0.9, "r_outer": 1.1}},
    "reference": 4.5323601418271938,
    "rel_tol": 0.05
  })");
}

Json load_config(const std::string& name) {
  std::ifstream in(std::string(CAPNUM_CONFIG_DIR) + "/" + name);
  REQUIRE(in.good());
  return Json::parse(in);
}

std::string field_path_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.field_path();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("config errors carry the offending field path") {
  Json base = small_capacity_config();

  CHECK(field_path_of([&] {
          Json c = base;
          c.erase("kind");
          run_experiment(c);
        }) == "kind");
  CHECK(field_path_of([&] {
          Json c = base;
          c["domain"]["r_inner"] = -1.0;
          run_experiment(c);
        }) == "domain.r_inner");
  CHECK(field_path_of([&] {
          Json c = base;
          c["domain"]["shape"] = "pentagon";
          run_experiment(c);
        }) == "domain.shape");
  CHECK(field_path_of([&] {
          Json c = base;
          c["plate:typo"] = 1;
          run_experiment(c);
        }) == "plate:typo");
  CHECK(field_path_of([&] {
          Json c = base;
          c["plate1"] = Json::parse(R"({"boundary_region":
              {"shape": "ball", "center": [5.0, 5.0], "radius": 0.1}})");
          run_experiment(c);
        }) == "plate1");
  CHECK(field_path_of([&] { run_experiment(base, "mu"); }) == "kind");

  // Stochastic kinds demand a seed.
  Json mu = load_config("mu2d.json");
  mu.erase("seed");
  CHECK(field_path_of([&] { run_experiment(mu); }) == "seed");

  // Overlapping plates are rejected before solving.
  Json overlap = base;
  overlap["plate0"] = Json::parse(R"({"boundary": "all"})");
  CHECK(field_path_of([&] { run_experiment(overlap); }) == "plate1");

  // Decreasing-radius contract for point decay.
  Json pd = load_config("point2d.json");
  pd["radii"] = Json::parse("[0.2, 0.3]");
  CHECK(field_path_of([&] { run_experiment(pd); }) == "radii");
}

TEST_CASE("capacity experiment reports value, header, and csv schema") {
  ExperimentOutcome out = run_experiment(small_capacity_config());
  CHECK(out.passed);
  for (const CheckLine& c : out.checks) CHECK(c.passed);

  const Json& header = out.report["header"];
  CHECK(header["kind"] == "capacity");
  CHECK(header["library_version"] == kLibraryVersion);
  CHECK(header["config"]["solver"]["gradient_tolerance"].get<double>() == 1e-7);
  CHECK(header["config"]["domain"]["shape"] == "annulus");
  CHECK(out.report["passed"].get<bool>());

  RadialCondenserSpec spec;
  spec.dim = 2;
  double exact = radial_capacity(spec);
  double value = out.report["results"]["capacity"]["value"].get<double>();
  CHECK(std::fabs(value - exact) / exact < 0.05);

  CHECK(out.table.to_string().rfind(
            "case,n,epsilon_final,value,iterations,grad_norm,admissible\n", 0) == 0);
  REQUIRE(!out.table.rows.empty());
  CHECK(out.table.rows[0][0] == "capacity");
  REQUIRE(!out.plots.empty());
  CHECK(out.plots[0].first == "capacity_stages.svg");
}

TEST_CASE("conformal factors leave the reported value untouched") {
  Json cfg = load_config("ring2d_invariance.json");
  ExperimentOutcome out = run_experiment(cfg);
  CHECK(out.passed);
  bool found = false;
  for (const CheckLine& c : out.checks) {
    if (c.name == "conformal_invariance") {
      found = true;
      CHECK(c.passed);
    }
  }
  CHECK(found);
  double a = out.report["results"]["capacity"]["value"].get<double>();
  double b = out.report["results"]["flat_reference"]["value"].get<double>();
  CHECK(std::fabs(a - b) <= 1e-10 * std::fabs(b));
}

TEST_CASE("identical config and seed reproduce byte-identical outputs") {
  Json cfg = load_config("mu2d.json");
  ExperimentOutcome a = run_experiment(cfg);
  ExperimentOutcome b = run_experiment(cfg);
  CHECK(a.report.dump(2) == b.report.dump(2));
  CHECK(a.table.to_string() == b.table.to_string());
  REQUIRE(a.plots.size() == b.plots.size());
  for (size_t i = 0; i < a.plots.size(); ++i) CHECK(a.plots[i].second == b.plots[i].second);
  CHECK(a.passed);

  ExperimentOutcome c = run_experiment(cfg, "mu", 99);
  CHECK(c.report["header"]["seed"].get<std::uint64_t>() == 99);
  CHECK(c.report["header"]["config"]["seed"].get<std::uint64_t>() == 99);
}

TEST_CASE("every shipped config runs its checks clean") {
  for (const char* name :
       {"ring2d.json", "ring2d_invariance.json", "compact2d.json", "point2d.json", "mu2d.json",
        "triangle2d.json", "classify_plane2d.json", "classify_punctured2d.json",
        "converge2d.json"}) {
    CAPTURE(name);
    ExperimentOutcome out = run_experiment(load_config(name));
    for (const CheckLine& c : out.checks) {
      CAPTURE(c.name);
      CAPTURE(c.detail);
      CHECK(c.passed);
    }
    CHECK(out.passed);
  }
}

TEST_CASE("classify experiments land the expected verdicts") {
  ExperimentOutcome plane = run_experiment(load_config("classify_plane2d.json"));
  CHECK(plane.report["results"]["classification"]["verdict"] == "ClassI_evidence");
  ExperimentOutcome punctured = run_experiment(load_config("classify_punctured2d.json"));
  CHECK(punctured.report["results"]["classification"]["verdict"] == "ClassII_evidence");
  CHECK(punctured.report["results"]["classification"]["floor_estimate"].get<double>() > 0.0);
}

TEST_CASE("cli driver writes reports and returns check-based exit codes") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "capnum_experiment_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  fs::path cfg_path = dir / "cfg.json";

  {
    std::ofstream out(cfg_path);
    out << small_capacity_config().dump(2);
  }
  int code = run_experiment_cli("capacity", cfg_path.string(), (dir / "out").string(), {});
  CHECK(code == 0);
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(fs::exists(dir / "out" / "summary.csv"));
  CHECK(fs::exists(dir / "out" / "capacity_stages.svg"));
  {
    std::ifstream in(dir / "out" / "report.json");
    Json report = Json::parse(in);
    CHECK(report["passed"].get<bool>());
  }

  // A failing check exits 1 but still writes the report.
  {
    Json bad = small_capacity_config();
    bad["reference"] = 100.0;
    std::ofstream out(cfg_path);
    out << bad.dump(2);
  }
  code = run_experiment_cli("capacity", cfg_path.string(), (dir / "out2").string(), {});
  CHECK(code == 1);
  {
    std::ifstream in(dir / "out2" / "report.json");
    Json report = Json::parse(in);
    CHECK(!report["passed"].get<bool>());
  }

  // Malformed JSON and wrong kinds exit 2.
  {
    std::ofstream out(cfg_path);
    out << "{ not json";
  }
  CHECK(run_experiment_cli("capacity", cfg_path.string(), dir.string(), {}) == 2);
  CHECK(run_experiment_cli("capacity", (dir / "missing.json").string(), dir.string(), {}) == 2);
  {
    std::ofstream out(cfg_path);
    out << small_capacity_config().dump(2);
  }
  CHECK(run_experiment_cli("mu", cfg_path.string(), dir.string(), {}) == 2);

  fs::remove_all(dir);
}
