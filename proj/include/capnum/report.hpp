// Machine-readable result reporting.
//
// Three output forms, all deterministic byte-for-byte given identical
// inputs: JSON documents with stable (declaration-order) keys, CSV tables
// with 17-significant-digit numbers, and static SVG line plots.  Files are
// written atomically (temp file in the target directory, then rename), so
// a crashed run never leaves a half-written report behind.
#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "capnum/conformal.hpp"
#include "capnum/ferrand.hpp"
#include "capnum/oracle.hpp"
#include "capnum/solver.hpp"

namespace capnum {

// Stable key order requires the ordered document type everywhere.
using Json = nlohmann::ordered_json;

// Version string embedded in every report header.
inline constexpr const char* kLibraryVersion = "0.1.0";

// 17 significant digits: enough to reproduce the double exactly on read-back.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// JSON serialization.  Field names and order follow the struct declarations.
// Nodal witness fields serialize as plain arrays of vertex values; path
// witnesses serialize as the node-index list.

Json to_json(const StageDiagnostics& d);
Json to_json(const CapacityResult& r, bool include_field = true);
Json to_json(const CompactCapacityResult& r, bool include_fields = false);
Json to_json(const PointDecayResult& r, bool include_fields = false);
Json to_json(const NestedCheckResult& r);
Json to_json(const SearchDiagnostics& d);
Json to_json(const MuEstimate& e, bool include_field = true);
Json to_json(const TriangleCheckResult& r);
Json to_json(const ClassificationReport& r);
Json to_json(const ConvergenceFit& f);

// ---------------------------------------------------------------------------
// CSV.  Header row, comma separation, `.` decimal point, 17 significant
// digits.  Cells containing a separator, quote, or newline are quoted.

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  // Throws std::invalid_argument if the cell count differs from the header.
  void add_row(std::vector<std::string> cells);
  std::string to_string() const;
};

// The headline table shared by all experiments:
//   case,n,epsilon_final,value,iterations,grad_norm,admissible
CsvTable headline_table();

void append_headline_row(CsvTable& table, const std::string& case_name, int dim,
                         const CapacityResult& r);

// Raw-energy variant: an evaluated field has no solver trail, so the
// iteration, gradient, and admissibility cells are left empty.
void append_energy_row(CsvTable& table, const std::string& case_name, int dim,
                       const EnergyBreakdown& energy, double epsilon);

// ---------------------------------------------------------------------------
// SVG line plots.  Static standalone documents; no display dependency.

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Renders the series as polylines with axes, ticks, and a legend.  Log axes
// plot log10 of the data and label ticks in original units.  Points that do
// not map to finite plot coordinates (non-finite values, or non-positive
// values on a log axis) are dropped; if nothing survives, the frame renders
// with a "no data" note instead of failing the run.
std::string render_line_plot(const std::string& title, const std::string& x_label,
                             const std::string& y_label,
                             const std::vector<PlotSeries>& series, bool log_x = false,
                             bool log_y = false);

// ---------------------------------------------------------------------------
// Atomic file output.  Creates missing parent directories.  Throws
// std::runtime_error on I/O failure.

void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace capnum
