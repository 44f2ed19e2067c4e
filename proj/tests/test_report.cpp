#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "capnum/ferrand.hpp"
#include "capnum/mesh.hpp"
#include "capnum/report.hpp"
#include "capnum/solver.hpp"

using namespace capnum;

namespace {

SimplicialMesh tiny_ring() {
  DomainSpec d;
  d.dim = 2;
  d.shape = AnnulusSpec{{}, 0.25, 1.0};
  d.target_edge_length = 0.2;
  return build_mesh(d);
}

CapacityResult tiny_result(const SimplicialMesh& mesh) {
  Condenser c;
  for (int v : mesh.boundary_nodes) {
    (mesh.vertices[v].norm() < 0.5 ? c.plate1 : c.plate0).push_back(v);
  }
  return solve_condenser(mesh, ConformalStructure::flat(), c);
}

}  // namespace

TEST_CASE("doubles survive a format round-trip at 17 significant digits") {
  for (double v : {1.0 / 3.0, 4.5323601418271938, 1e-300, 0.1, -2.5e17,
                   6.5388135001368910}) {
    std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  CHECK(format_double(4.5) == "4.5");
}

TEST_CASE("capacity results serialize with stable keys and byte-identical dumps") {
  SimplicialMesh mesh = tiny_ring();
  CapacityResult r = tiny_result(mesh);

  Json j = to_json(r);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  std::vector<std::string> expected{"value",      "admissible",          "converged",
                                    "degenerate_plate", "iterations",    "final_gradient_norm",
                                    "epsilon_final",    "stages",        "field"};
  CHECK(keys == expected);
  CHECK(j["value"].get<double>() == r.value);
  CHECK(j["field"].size() == r.field.values.size());
  CHECK(j["stages"].size() == r.stages.size());

  CHECK(to_json(r).dump(2) == j.dump(2));
  CHECK(to_json(r, false).contains("field") == false);
}

TEST_CASE("mu estimates serialize the witness as a node-index list") {
  SimplicialMesh mesh = tiny_ring();
  MuEstimate e;
  e.value = 2.5;
  e.witness.node_sequence = {4, 9, 13};
  e.stage_values = {{1.0, 3.0}, {2.0, 2.5}};
  e.search_diagnostics.seed = 7;
  Json j = to_json(e);
  REQUIRE(j["witness"].is_array());
  CHECK(j["witness"].size() == 3);
  CHECK(j["witness"][0].get<int>() == 4);
  CHECK(j["stage_values"][1][1].get<double>() == 2.5);
  CHECK(j["search_diagnostics"]["seed"].get<std::uint64_t>() == 7);
}

TEST_CASE("headline csv matches the published schema") {
  SimplicialMesh mesh = tiny_ring();
  CapacityResult r = tiny_result(mesh);

  CsvTable t = headline_table();
  append_headline_row(t, "annulus", 2, r);
  append_energy_row(t, "raw, energy", 2, EnergyBreakdown{1.5, {}}, 0.0);
  std::string text = t.to_string();

  CHECK(text.rfind("case,n,epsilon_final,value,iterations,grad_norm,admissible\n", 0) == 0);
  // The numeric cell reproduces the double exactly.
  std::string row = text.substr(text.find('\n') + 1);
  std::string value_cell = row;
  for (int skip = 0; skip < 3; ++skip) value_cell = value_cell.substr(value_cell.find(',') + 1);
  value_cell = value_cell.substr(0, value_cell.find(','));
  CHECK(std::strtod(value_cell.c_str(), nullptr) == r.value);
  // Cells containing commas are quoted.
  CHECK(text.find("\"raw, energy\"") != std::string::npos);
  CHECK_THROWS_AS(t.add_row({"too", "short"}), std::invalid_argument);
}

TEST_CASE("svg plots are deterministic and skip unplottable points") {
  PlotSeries a{"capacity", {1.0, 2.0, 4.0, 8.0}, {4.5, 3.1, 2.2, 1.6}};
  PlotSeries b{"fit <model>", {1.0, 8.0}, {4.4, 1.5}};
  std::string svg = render_line_plot("decay", "outer radius", "capacity", {a, b}, true, false);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("fit &lt;model&gt;") != std::string::npos);
  CHECK(svg == render_line_plot("decay", "outer radius", "capacity", {a, b}, true, false));

  PlotSeries bad{"gaps", {1.0, 2.0, 3.0}, {1.0, std::nan(""), 2.0}};
  std::string svg2 = render_line_plot("gaps", "x", "y", {bad});
  CHECK(svg2.find(",nan") == std::string::npos);
  CHECK(svg2.find("nan,") == std::string::npos);
  CHECK(svg2.find(">nan<") == std::string::npos);

  std::string empty = render_line_plot("empty", "x", "y", {});
  CHECK(empty.find("no data") != std::string::npos);
}

TEST_CASE("atomic writes land complete files and clean up temps") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "capnum_report_test";
  fs::remove_all(dir);
  fs::path target = dir / "nested" / "report.json";

  write_file_atomic(target.string(), "{\"a\": 1}\n");
  std::ifstream in(target);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(content == "{\"a\": 1}\n");

  write_file_atomic(target.string(), "replaced");
  std::ifstream in2(target);
  std::string content2((std::istreambuf_iterator<char>(in2)), std::istreambuf_iterator<char>());
  CHECK(content2 == "replaced");

  int leftovers = 0;
  for (const auto& entry : fs::directory_iterator(target.parent_path())) {
    if (entry.path().extension() == ".tmp") ++leftovers;
  }
  CHECK(leftovers == 0);
  fs::remove_all(dir);
}
