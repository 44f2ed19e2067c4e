#include "capnum/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace capnum {

namespace {

void append_fmt(std::string& out, const char* fmt, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), fmt, v);
  out += buf;
}

Json radius_value_pairs(const std::vector<std::pair<double, double>>& seq) {
  Json arr = Json::array();
  for (const auto& [r, v] : seq) arr.push_back(Json::array({r, v}));
  return arr;
}

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string quoted = "\"";
  for (char c : cell) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

}  // namespace

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// JSON

Json to_json(const StageDiagnostics& d) {
  Json j;
  j["epsilon"] = d.epsilon;
  j["iterations"] = d.iterations;
  j["initial_gradient_norm"] = d.initial_gradient_norm;
  j["final_gradient_norm"] = d.final_gradient_norm;
  j["initial_energy"] = d.initial_energy;
  j["final_energy"] = d.final_energy;
  j["converged"] = d.converged;
  return j;
}

Json to_json(const CapacityResult& r, bool include_field) {
  Json j;
  j["value"] = r.value;
  j["admissible"] = r.admissible;
  j["converged"] = r.converged;
  j["degenerate_plate"] = r.degenerate_plate;
  j["iterations"] = r.total_iterations();
  j["final_gradient_norm"] = r.final_gradient_norm();
  j["epsilon_final"] = r.final_epsilon();
  Json stages = Json::array();
  for (const StageDiagnostics& s : r.stages) stages.push_back(to_json(s));
  j["stages"] = std::move(stages);
  if (include_field) j["field"] = r.field.values;
  return j;
}

Json to_json(const CompactCapacityResult& r, bool include_fields) {
  Json j;
  Json stages = Json::array();
  for (const CompactStage& s : r.stages) {
    Json stage;
    stage["radius"] = s.radius;
    stage["result"] = to_json(s.result, include_fields);
    stages.push_back(std::move(stage));
  }
  j["stages"] = std::move(stages);
  j["monotone_decreasing"] = r.monotone_decreasing;
  j["decay_coefficient"] = r.decay_coefficient;
  j["decay_limit"] = r.decay_limit;
  j["fit_residual"] = r.fit_residual;
  return j;
}

Json to_json(const PointDecayResult& r, bool include_fields) {
  Json j;
  j["radii"] = r.radii;
  j["values"] = r.values;
  j["strictly_decreasing"] = r.strictly_decreasing;
  j["fitted_exponent"] = r.fitted_exponent;
  Json results = Json::array();
  for (const CapacityResult& c : r.results) results.push_back(to_json(c, include_fields));
  j["results"] = std::move(results);
  return j;
}

Json to_json(const NestedCheckResult& r) {
  Json j;
  j["cap_small_domain"] = r.cap_small_domain;
  j["cap_large_domain"] = r.cap_large_domain;
  j["holds"] = r.holds;
  j["small_result"] = to_json(r.small_result, false);
  j["large_result"] = to_json(r.large_result, false);
  return j;
}

Json to_json(const SearchDiagnostics& d) {
  Json j;
  j["proposals_attempted"] = d.proposals_attempted;
  j["proposals_accepted"] = d.proposals_accepted;
  j["seed"] = d.seed;
  j["budget_exhausted"] = d.budget_exhausted;
  j["initial_value"] = d.initial_value;
  return j;
}

Json to_json(const MuEstimate& e, bool include_field) {
  Json j;
  j["value"] = e.value;
  j["witness"] = e.witness.node_sequence;
  j["search_diagnostics"] = to_json(e.search_diagnostics);
  j["stage_values"] = radius_value_pairs(e.stage_values);
  j["capacity_result"] = to_json(e.capacity_result, include_field);
  return j;
}

Json to_json(const TriangleCheckResult& r) {
  Json j;
  j["mu_xy"] = to_json(r.mu_xy, false);
  j["mu_yz"] = to_json(r.mu_yz, false);
  j["mu_xz"] = to_json(r.mu_xz, false);
  j["holds"] = r.holds;
  return j;
}

Json to_json(const ClassificationReport& r) {
  Json j;
  j["verdict"] = to_string(r.verdict);
  j["capacity_sequence"] = radius_value_pairs(r.capacity_sequence);
  j["decay_coefficient"] = r.decay_coefficient;
  j["decay_residual"] = r.decay_residual;
  j["floor_constant"] = r.floor_constant;
  j["floor_residual"] = r.floor_residual;
  j["floor_estimate"] = r.floor_estimate;
  j["fitted_limit"] = r.fitted_limit;
  j["decreasing"] = r.decreasing;
  j["all_converged"] = r.all_converged;
  return j;
}

Json to_json(const ConvergenceFit& f) {
  Json j;
  j["order"] = f.order;
  j["intercept"] = f.intercept;
  j["excluded"] = f.excluded;
  j["non_convergent"] = f.non_convergent;
  return j;
}

// ---------------------------------------------------------------------------
// CSV

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns.size()) {
    throw std::invalid_argument("csv row has " + std::to_string(cells.size()) +
                                " cells for " + std::to_string(columns.size()) + " columns");
  }
  rows.push_back(std::move(cells));
}

std::string CsvTable::to_string() const {
  std::string out;
  for (size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(columns[i]);
  }
  out += '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(row[i]);
    }
    out += '\n';
  }
  return out;
}

CsvTable headline_table() {
  CsvTable t;
  t.columns = {"case", "n", "epsilon_final", "value", "iterations", "grad_norm", "admissible"};
  return t;
}

void append_headline_row(CsvTable& table, const std::string& case_name, int dim,
                         const CapacityResult& r) {
  table.add_row({case_name, std::to_string(dim), format_double(r.final_epsilon()),
                 format_double(r.value), std::to_string(r.total_iterations()),
                 format_double(r.final_gradient_norm()), r.admissible ? "true" : "false"});
}

void append_energy_row(CsvTable& table, const std::string& case_name, int dim,
                       const EnergyBreakdown& energy, double epsilon) {
  table.add_row({case_name, std::to_string(dim), format_double(epsilon),
                 format_double(energy.total), "", "", ""});
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 24.0;
constexpr double kTop = 44.0;
constexpr double kBottom = 56.0;

const char* kPalette[] = {"#1b6ca8", "#c23b22", "#2e8540", "#8e44ad", "#d98e04", "#5d6d7e"};
constexpr int kPaletteSize = 6;

void append_xy(std::string& out, double x, double y) {
  append_fmt(out, "%.2f", x);
  out += ',';
  append_fmt(out, "%.2f", y);
}

std::string tick_label(double t, bool log_axis) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", log_axis ? std::pow(10.0, t) : t);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_line_plot(const std::string& title, const std::string& x_label,
                             const std::string& y_label,
                             const std::vector<PlotSeries>& series, bool log_x, bool log_y) {
  // Collect the finite transformed points of every series.
  struct Pt {
    double x, y;
  };
  std::vector<std::vector<Pt>> pts(series.size());
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (size_t s = 0; s < series.size(); ++s) {
    size_t count = std::min(series[s].x.size(), series[s].y.size());
    for (size_t i = 0; i < count; ++i) {
      double tx = log_x ? std::log10(series[s].x[i]) : series[s].x[i];
      double ty = log_y ? std::log10(series[s].y[i]) : series[s].y[i];
      if (!std::isfinite(tx) || !std::isfinite(ty)) continue;
      pts[s].push_back({tx, ty});
      xmin = std::min(xmin, tx);
      xmax = std::max(xmax, tx);
      ymin = std::min(ymin, ty);
      ymax = std::max(ymax, ty);
    }
  }
  bool has_data = std::isfinite(xmin);
  if (!has_data) {
    xmin = 0.0;
    xmax = 1.0;
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double tx) { return kLeft + pw * (tx - xmin) / (xmax - xmin); };
  auto py = [&](double ty) { return kTop + ph * (ymax - ty) / (ymax - ymin); };

  std::string svg;
  svg.reserve(8192);
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
         "viewBox=\"0 0 640 420\" font-family=\"sans-serif\">\n";
  svg += "<rect width=\"640\" height=\"420\" fill=\"#ffffff\"/>\n";
  svg += "<text x=\"320\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">" +
         xml_escape(title) + "</text>\n";

  // Grid, ticks, and tick labels (five per axis).
  for (int i = 0; i <= 4; ++i) {
    double fx = xmin + (xmax - xmin) * i / 4.0;
    double fy = ymin + (ymax - ymin) * i / 4.0;
    std::string gx, gy;
    append_fmt(gx, "%.2f", px(fx));
    append_fmt(gy, "%.2f", py(fy));
    svg += "<line x1=\"" + gx + "\" y1=\"" + std::to_string(int(kTop)) + "\" x2=\"" + gx +
           "\" y2=\"" + std::to_string(int(kTop + ph)) +
           "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
    svg += "<line x1=\"" + std::to_string(int(kLeft)) + "\" y1=\"" + gy + "\" x2=\"" +
           std::to_string(int(kLeft + pw)) + "\" y2=\"" + gy +
           "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + gx + "\" y=\"" + std::to_string(int(kTop + ph + 18)) +
           "\" font-size=\"11\" text-anchor=\"middle\">" + tick_label(fx, log_x) + "</text>\n";
    svg += "<text x=\"" + std::to_string(int(kLeft - 6)) + "\" y=\"" + gy +
           "\" font-size=\"11\" text-anchor=\"end\" dominant-baseline=\"middle\">" +
           tick_label(fy, log_y) + "</text>\n";
  }

  // Axes frame.
  {
    std::string frame;
    frame += "<rect x=\"" + std::to_string(int(kLeft)) + "\" y=\"" + std::to_string(int(kTop)) +
             "\" width=\"" + std::to_string(int(pw)) + "\" height=\"" + std::to_string(int(ph)) +
             "\" fill=\"none\" stroke=\"#404040\" stroke-width=\"1\"/>\n";
    svg += frame;
  }
  svg += "<text x=\"" + std::to_string(int(kLeft + pw / 2)) + "\" y=\"" +
         std::to_string(int(kHeight - 12)) + "\" font-size=\"12\" text-anchor=\"middle\">" +
         xml_escape(x_label) + (log_x ? " (log)" : "") + "</text>\n";
  svg += "<text x=\"16\" y=\"" + std::to_string(int(kTop + ph / 2)) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         std::to_string(int(kTop + ph / 2)) + ")\">" + xml_escape(y_label) +
         (log_y ? " (log)" : "") + "</text>\n";

  if (!has_data) {
    svg += "<text x=\"320\" y=\"210\" font-size=\"13\" text-anchor=\"middle\" "
           "fill=\"#808080\">no data</text>\n";
  }

  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    if (pts[s].size() >= 2) {
      svg += "<polyline fill=\"none\" stroke=\"";
      svg += color;
      svg += "\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < pts[s].size(); ++i) {
        if (i) svg += ' ';
        append_xy(svg, px(pts[s][i].x), py(pts[s][i].y));
      }
      svg += "\"/>\n";
    }
    for (const Pt& p : pts[s]) {
      svg += "<circle cx=\"";
      append_fmt(svg, "%.2f", px(p.x));
      svg += "\" cy=\"";
      append_fmt(svg, "%.2f", py(p.y));
      svg += "\" r=\"2.5\" fill=\"";
      svg += color;
      svg += "\"/>\n";
    }
    // Legend entry.
    double ly = kTop + 14.0 + 16.0 * double(s);
    std::string lys;
    append_fmt(lys, "%.2f", ly);
    svg += "<line x1=\"" + std::to_string(int(kLeft + pw - 130)) + "\" y1=\"" + lys + "\" x2=\"" +
           std::to_string(int(kLeft + pw - 110)) + "\" y2=\"" + lys + "\" stroke=\"";
    svg += color;
    svg += "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + std::to_string(int(kLeft + pw - 104)) + "\" y=\"" + lys +
           "\" font-size=\"11\" dominant-baseline=\"middle\">" + xml_escape(series[s].label) +
           "</text>\n";
  }

  svg += "</svg>\n";
  return svg;
}

// ---------------------------------------------------------------------------
// Atomic writes

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path dir = target.parent_path();
  std::error_code ec;
  if (!dir.empty()) {
    fs::create_directories(dir, ec);
    if (ec) {
      throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
    }
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot move report into place at " + target.string());
  }
}

}  // namespace capnum
