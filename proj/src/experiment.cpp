#include "capnum/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "capnum/ferrand.hpp"
#include "capnum/mesh.hpp"
#include "capnum/oracle.hpp"
#include "capnum/solver.hpp"

namespace capnum {

namespace {

// ---------------------------------------------------------------------------
// Path-tracked config access

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

const Json& require_object(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  return j;
}

void check_keys(const Json& j, const std::string& path, const std::vector<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ConfigError(join(path, it.key()), "unknown field");
    }
  }
}

const Json* find_field(const Json& j, const std::string& key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

const Json& require_field(const Json& j, const std::string& path, const std::string& key) {
  const Json* f = find_field(j, key);
  if (!f) throw ConfigError(join(path, key), "missing required field");
  return *f;
}

double parse_number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
  return v;
}

double parse_positive(const Json& j, const std::string& path) {
  double v = parse_number(j, path);
  if (v <= 0.0) throw ConfigError(path, "expected a positive number");
  return v;
}

int parse_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<int>();
}

bool parse_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

std::string parse_string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

std::uint64_t parse_seed(const Json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !j.is_number_integer()) {
    throw ConfigError(path, "expected an unsigned integer");
  }
  if (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0) {
    throw ConfigError(path, "expected a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

Vec3 parse_point(const Json& j, const std::string& path, int dim) {
  if (!j.is_array() || (j.size() != 2 && j.size() != 3)) {
    throw ConfigError(path, "expected an array of 2 or 3 coordinates");
  }
  Vec3 p{};
  p.x = parse_number(j[0], path + "[0]");
  p.y = parse_number(j[1], path + "[1]");
  if (j.size() == 3) p.z = parse_number(j[2], path + "[2]");
  if (dim == 2 && p.z != 0.0) throw ConfigError(path, "z must be 0 in dimension 2");
  return p;
}

Json point_json(const Vec3& p, int dim) {
  return dim == 2 ? Json::array({p.x, p.y}) : Json::array({p.x, p.y, p.z});
}

// ---------------------------------------------------------------------------
// Region shapes (named primitives evaluated on mesh vertices)

struct RegionShape {
  enum Kind { Ball, Shell, SegmentTube, Box } kind = Ball;
  Vec3 a;  // center / segment start / min corner
  Vec3 b;  // segment end / max corner
  double r0 = 0.0;  // inner radius (shell)
  double r1 = 0.0;  // radius / outer radius / tube radius
  int dim = 2;

  bool contains(const Vec3& p) const {
    const double slack = 1e-9;
    switch (kind) {
      case Ball:
        return distance(p, a) <= r1 * (1.0 + slack) + 1e-12;
      case Shell: {
        double d = distance(p, a);
        return d >= r0 * (1.0 - slack) - 1e-12 && d <= r1 * (1.0 + slack) + 1e-12;
      }
      case SegmentTube: {
        Vec3 ab = b - a;
        double len2 = ab.dot(ab);
        double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        return distance(p, a + ab * t) <= r1 * (1.0 + slack) + 1e-12;
      }
      case Box: {
        double tol = 1e-9 * std::max({b.x - a.x, b.y - a.y, b.z - a.z, 1.0}) + 1e-12;
        return p.x >= a.x - tol && p.x <= b.x + tol && p.y >= a.y - tol && p.y <= b.y + tol &&
               p.z >= a.z - tol && p.z <= b.z + tol;
      }
    }
    return false;
  }

  Json to_json() const {
    Json j;
    switch (kind) {
      case Ball:
        j["shape"] = "ball";
        j["center"] = point_json(a, dim);
        j["radius"] = r1;
        break;
      case Shell:
        j["shape"] = "shell";
        j["center"] = point_json(a, dim);
        j["r_inner"] = r0;
        j["r_outer"] = r1;
        break;
      case SegmentTube:
        j["shape"] = "segment_tube";
        j["a"] = point_json(a, dim);
        j["b"] = point_json(b, dim);
        j["radius"] = r1;
        break;
      case Box:
        j["shape"] = "box";
        j["min_corner"] = point_json(a, dim);
        j["max_corner"] = point_json(b, dim);
        break;
    }
    return j;
  }
};

RegionShape parse_region(const Json& j, const std::string& path, int dim) {
  require_object(j, path);
  std::string shape = parse_string(require_field(j, path, "shape"), join(path, "shape"));
  RegionShape r;
  r.dim = dim;
  if (shape == "ball") {
    check_keys(j, path, {"shape", "center", "radius"});
    r.kind = RegionShape::Ball;
    if (const Json* c = find_field(j, "center")) r.a = parse_point(*c, join(path, "center"), dim);
    r.r1 = parse_positive(require_field(j, path, "radius"), join(path, "radius"));
  } else if (shape == "shell") {
    check_keys(j, path, {"shape", "center", "r_inner", "r_outer"});
    r.kind = RegionShape::Shell;
    if (const Json* c = find_field(j, "center")) r.a = parse_point(*c, join(path, "center"), dim);
    r.r0 = parse_positive(require_field(j, path, "r_inner"), join(path, "r_inner"));
    r.r1 = parse_positive(require_field(j, path, "r_outer"), join(path, "r_outer"));
    if (r.r0 >= r.r1) throw ConfigError(join(path, "r_inner"), "must be smaller than r_outer");
  } else if (shape == "segment_tube") {
    check_keys(j, path, {"shape", "a", "b", "radius"});
    r.kind = RegionShape::SegmentTube;
    r.a = parse_point(require_field(j, path, "a"), join(path, "a"), dim);
    r.b = parse_point(require_field(j, path, "b"), join(path, "b"), dim);
    r.r1 = parse_positive(require_field(j, path, "radius"), join(path, "radius"));
  } else if (shape == "box") {
    check_keys(j, path, {"shape", "min_corner", "max_corner"});
    r.kind = RegionShape::Box;
    r.a = parse_point(require_field(j, path, "min_corner"), join(path, "min_corner"), dim);
    r.b = parse_point(require_field(j, path, "max_corner"), join(path, "max_corner"), dim);
    if (r.a.x >= r.b.x || r.a.y >= r.b.y || (dim == 3 && r.a.z >= r.b.z)) {
      throw ConfigError(path, "box corners are not strictly ordered");
    }
  } else {
    throw ConfigError(join(path, "shape"),
                      "unknown shape '" + shape + "' (ball, shell, segment_tube, box)");
  }
  return r;
}

// A plate is a vertex selection: the whole mesh boundary, a region of all
// vertices, or a region restricted to boundary vertices.
struct PlateSpec {
  enum Mode { BoundaryAll, Region, BoundaryRegion } mode = BoundaryAll;
  RegionShape shape;

  Json to_json() const {
    Json j;
    if (mode == BoundaryAll) {
      j["boundary"] = "all";
    } else if (mode == Region) {
      j["region"] = shape.to_json();
    } else {
      j["boundary_region"] = shape.to_json();
    }
    return j;
  }
};

PlateSpec parse_plate(const Json& j, const std::string& path, int dim) {
  require_object(j, path);
  check_keys(j, path, {"boundary", "region", "boundary_region"});
  PlateSpec p;
  int given = 0;
  if (const Json* f = find_field(j, "boundary")) {
    ++given;
    if (parse_string(*f, join(path, "boundary")) != "all") {
      throw ConfigError(join(path, "boundary"), "the only literal selector is \"all\"");
    }
    p.mode = PlateSpec::BoundaryAll;
  }
  if (const Json* f = find_field(j, "region")) {
    ++given;
    p.mode = PlateSpec::Region;
    p.shape = parse_region(*f, join(path, "region"), dim);
  }
  if (const Json* f = find_field(j, "boundary_region")) {
    ++given;
    p.mode = PlateSpec::BoundaryRegion;
    p.shape = parse_region(*f, join(path, "boundary_region"), dim);
  }
  if (given != 1) {
    throw ConfigError(path, "give exactly one of boundary, region, boundary_region");
  }
  return p;
}

std::vector<int> select_plate(const SimplicialMesh& mesh, const PlateSpec& spec,
                              const std::string& path) {
  std::vector<int> out;
  if (spec.mode == PlateSpec::BoundaryAll) {
    out = mesh.boundary_nodes;
  } else if (spec.mode == PlateSpec::Region) {
    for (int v = 0; v < mesh.vertex_count(); ++v) {
      if (spec.shape.contains(mesh.vertices[v])) out.push_back(v);
    }
  } else {
    for (int v : mesh.boundary_nodes) {
      if (spec.shape.contains(mesh.vertices[v])) out.push_back(v);
    }
  }
  if (out.empty()) throw ConfigError(path, "selects no vertices on the mesh");
  return out;
}

// ---------------------------------------------------------------------------
// Domains, exhaustions, factors, solver, output

struct DomainConfig {
  DomainSpec spec;
  int refinements = 0;

  SimplicialMesh build() const {
    SimplicialMesh m = build_mesh(spec);
    for (int k = 0; k < refinements; ++k) m = refine(m);
    return m;
  }

  Json to_json() const {
    Json j;
    j["dim"] = spec.dim;
    if (const auto* b = std::get_if<BallSpec>(&spec.shape)) {
      j["shape"] = "ball";
      j["center"] = point_json(b->center, spec.dim);
      j["radius"] = b->radius;
    } else if (const auto* a = std::get_if<AnnulusSpec>(&spec.shape)) {
      j["shape"] = "annulus";
      j["center"] = point_json(a->center, spec.dim);
      j["r_inner"] = a->r_inner;
      j["r_outer"] = a->r_outer;
    } else if (const auto* x = std::get_if<BoxSpec>(&spec.shape)) {
      j["shape"] = "box";
      j["min_corner"] = point_json(x->min_corner, spec.dim);
      j["max_corner"] = point_json(x->max_corner, spec.dim);
    } else if (const auto* m = std::get_if<BoxMinusBallSpec>(&spec.shape)) {
      j["shape"] = "box_minus_ball";
      j["min_corner"] = point_json(m->box.min_corner, spec.dim);
      j["max_corner"] = point_json(m->box.max_corner, spec.dim);
      j["ball_center"] = point_json(m->ball.center, spec.dim);
      j["ball_radius"] = m->ball.radius;
    }
    j["edge_length"] = spec.target_edge_length;
    j["refine"] = refinements;
    return j;
  }
};

DomainConfig parse_domain(const Json& j, const std::string& path) {
  require_object(j, path);
  DomainConfig d;
  d.spec.dim = parse_int(require_field(j, path, "dim"), join(path, "dim"));
  if (d.spec.dim != 2 && d.spec.dim != 3) throw ConfigError(join(path, "dim"), "must be 2 or 3");
  std::string shape = parse_string(require_field(j, path, "shape"), join(path, "shape"));
  int dim = d.spec.dim;
  if (shape == "ball") {
    check_keys(j, path, {"dim", "shape", "center", "radius", "edge_length", "refine"});
    BallSpec b;
    if (const Json* c = find_field(j, "center")) b.center = parse_point(*c, join(path, "center"), dim);
    b.radius = parse_positive(require_field(j, path, "radius"), join(path, "radius"));
    d.spec.shape = b;
  } else if (shape == "annulus") {
    check_keys(j, path, {"dim", "shape", "center", "r_inner", "r_outer", "edge_length", "refine"});
    AnnulusSpec a;
    if (const Json* c = find_field(j, "center")) a.center = parse_point(*c, join(path, "center"), dim);
    a.r_inner = parse_positive(require_field(j, path, "r_inner"), join(path, "r_inner"));
    a.r_outer = parse_positive(require_field(j, path, "r_outer"), join(path, "r_outer"));
    if (a.r_inner >= a.r_outer) {
      throw ConfigError(join(path, "r_inner"), "must be smaller than r_outer");
    }
    d.spec.shape = a;
  } else if (shape == "box") {
    check_keys(j, path, {"dim", "shape", "min_corner", "max_corner", "edge_length", "refine"});
    BoxSpec b;
    b.min_corner = parse_point(require_field(j, path, "min_corner"), join(path, "min_corner"), dim);
    b.max_corner = parse_point(require_field(j, path, "max_corner"), join(path, "max_corner"), dim);
    d.spec.shape = b;
  } else if (shape == "box_minus_ball") {
    check_keys(j, path, {"dim", "shape", "min_corner", "max_corner", "ball_center", "ball_radius",
                         "edge_length", "refine"});
    BoxMinusBallSpec m;
    m.box.min_corner =
        parse_point(require_field(j, path, "min_corner"), join(path, "min_corner"), dim);
    m.box.max_corner =
        parse_point(require_field(j, path, "max_corner"), join(path, "max_corner"), dim);
    m.ball.center =
        parse_point(require_field(j, path, "ball_center"), join(path, "ball_center"), dim);
    m.ball.radius =
        parse_positive(require_field(j, path, "ball_radius"), join(path, "ball_radius"));
    d.spec.shape = m;
  } else {
    throw ConfigError(join(path, "shape"),
                      "unknown shape '" + shape + "' (ball, annulus, box, box_minus_ball)");
  }
  d.spec.target_edge_length =
      parse_positive(require_field(j, path, "edge_length"), join(path, "edge_length"));
  if (const Json* r = find_field(j, "refine")) {
    d.refinements = parse_int(*r, join(path, "refine"));
    if (d.refinements < 0 || d.refinements > 8) {
      throw ConfigError(join(path, "refine"), "must lie in [0, 8]");
    }
  }
  try {
    d.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return d;
}

struct ExhaustionConfig {
  int dim = 2;
  bool shell = false;
  Vec3 center;
  double r_inner = 0.0;  // shell only
  std::vector<double> radii;
  double edge_length = 0.1;

  std::vector<SimplicialMesh> build() const {
    return shell ? build_shell_exhaustion(dim, center, r_inner, radii, edge_length)
                 : build_ball_exhaustion(dim, center, radii, edge_length);
  }

  Json to_json() const {
    Json j;
    j["dim"] = dim;
    j["type"] = shell ? "shell" : "ball";
    j["center"] = point_json(center, dim);
    if (shell) j["r_inner"] = r_inner;
    j["radii"] = radii;
    j["edge_length"] = edge_length;
    return j;
  }
};

ExhaustionConfig parse_exhaustion(const Json& j, const std::string& path) {
  require_object(j, path);
  check_keys(j, path, {"dim", "type", "center", "r_inner", "radii", "radii_exp", "edge_length"});
  ExhaustionConfig e;
  e.dim = parse_int(require_field(j, path, "dim"), join(path, "dim"));
  if (e.dim != 2 && e.dim != 3) throw ConfigError(join(path, "dim"), "must be 2 or 3");
  std::string type = parse_string(require_field(j, path, "type"), join(path, "type"));
  if (type == "shell") {
    e.shell = true;
    e.r_inner = parse_positive(require_field(j, path, "r_inner"), join(path, "r_inner"));
  } else if (type == "ball") {
    if (find_field(j, "r_inner")) {
      throw ConfigError(join(path, "r_inner"), "only shell exhaustions have an inner radius");
    }
  } else {
    throw ConfigError(join(path, "type"), "unknown type '" + type + "' (ball, shell)");
  }
  if (const Json* c = find_field(j, "center")) e.center = parse_point(*c, join(path, "center"), e.dim);
  const Json* radii = find_field(j, "radii");
  const Json* radii_exp = find_field(j, "radii_exp");
  if ((radii == nullptr) == (radii_exp == nullptr)) {
    throw ConfigError(path, "give exactly one of radii, radii_exp");
  }
  const Json& arr = radii ? *radii : *radii_exp;
  std::string arr_path = join(path, radii ? "radii" : "radii_exp");
  if (!arr.is_array() || arr.empty()) throw ConfigError(arr_path, "expected a nonempty array");
  for (size_t i = 0; i < arr.size(); ++i) {
    double v = parse_number(arr[i], arr_path + "[" + std::to_string(i) + "]");
    e.radii.push_back(radii ? v : std::exp(v));
  }
  for (size_t i = 0; i + 1 < e.radii.size(); ++i) {
    if (e.radii[i] >= e.radii[i + 1]) {
      throw ConfigError(arr_path, "radii must be strictly increasing");
    }
  }
  if (e.radii.front() <= 0.0) throw ConfigError(arr_path, "radii must be positive");
  if (e.shell && e.radii.front() <= e.r_inner) {
    throw ConfigError(arr_path, "the first radius must exceed r_inner");
  }
  e.edge_length = parse_positive(require_field(j, path, "edge_length"), join(path, "edge_length"));
  return e;
}

struct FactorConfig {
  std::string type = "flat";
  double amplitude = 0.0;
  double width = 0.0;
  Vec3 center;
  std::uint64_t seed = 0;
  double region_radius = 1.0;
  int dim = 2;

  ConformalStructure build() const {
    if (type == "radial_bump") return ConformalStructure::radial_bump(amplitude, width, center);
    if (type == "random_smooth") {
      return ConformalStructure::random_smooth(seed, amplitude, region_radius);
    }
    return ConformalStructure::flat();
  }

  Json to_json() const {
    Json j;
    j["type"] = type;
    if (type == "radial_bump") {
      j["amplitude"] = amplitude;
      j["width"] = width;
      j["center"] = point_json(center, dim);
    } else if (type == "random_smooth") {
      j["seed"] = seed;
      j["amplitude"] = amplitude;
      j["region_radius"] = region_radius;
    }
    return j;
  }
};

FactorConfig parse_factor(const Json* j, const std::string& path, int dim) {
  FactorConfig f;
  f.dim = dim;
  if (!j) return f;
  require_object(*j, path);
  f.type = parse_string(require_field(*j, path, "type"), join(path, "type"));
  if (f.type == "flat") {
    check_keys(*j, path, {"type"});
  } else if (f.type == "radial_bump") {
    check_keys(*j, path, {"type", "amplitude", "width", "center"});
    f.amplitude = parse_number(require_field(*j, path, "amplitude"), join(path, "amplitude"));
    f.width = parse_positive(require_field(*j, path, "width"), join(path, "width"));
    if (const Json* c = find_field(*j, "center")) {
      f.center = parse_point(*c, join(path, "center"), dim);
    }
  } else if (f.type == "random_smooth") {
    check_keys(*j, path, {"type", "seed", "amplitude", "region_radius"});
    f.seed = parse_seed(require_field(*j, path, "seed"), join(path, "seed"));
    f.amplitude = parse_number(require_field(*j, path, "amplitude"), join(path, "amplitude"));
    if (const Json* r = find_field(*j, "region_radius")) {
      f.region_radius = parse_positive(*r, join(path, "region_radius"));
    }
  } else {
    throw ConfigError(join(path, "type"),
                      "unknown factor '" + f.type + "' (flat, radial_bump, random_smooth)");
  }
  return f;
}

SolverConfig parse_solver(const Json* j, const std::string& path) {
  SolverConfig c;
  if (!j) return c;
  require_object(*j, path);
  check_keys(*j, path, {"epsilon_schedule", "gradient_tolerance", "max_iterations",
                        "quasi_newton_memory", "value_tolerance"});
  if (const Json* f = find_field(*j, "epsilon_schedule")) {
    if (!f->is_array() || f->empty()) {
      throw ConfigError(join(path, "epsilon_schedule"), "expected a nonempty array");
    }
    c.epsilon_schedule.clear();
    for (size_t i = 0; i < f->size(); ++i) {
      c.epsilon_schedule.push_back(
          parse_positive((*f)[i], join(path, "epsilon_schedule") + "[" + std::to_string(i) + "]"));
    }
  }
  if (const Json* f = find_field(*j, "gradient_tolerance")) {
    c.gradient_tolerance = parse_positive(*f, join(path, "gradient_tolerance"));
  }
  if (const Json* f = find_field(*j, "max_iterations")) {
    c.max_iterations = parse_int(*f, join(path, "max_iterations"));
  }
  if (const Json* f = find_field(*j, "quasi_newton_memory")) {
    c.quasi_newton_memory = parse_int(*f, join(path, "quasi_newton_memory"));
  }
  if (const Json* f = find_field(*j, "value_tolerance")) {
    c.value_tolerance = parse_positive(*f, join(path, "value_tolerance"));
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return c;
}

Json solver_json(const SolverConfig& c) {
  Json j;
  j["epsilon_schedule"] = c.epsilon_schedule;
  j["gradient_tolerance"] = c.gradient_tolerance;
  j["max_iterations"] = c.max_iterations;
  j["quasi_newton_memory"] = c.quasi_newton_memory;
  j["value_tolerance"] = c.value_tolerance;
  return j;
}

struct OutputConfig {
  std::string report = "report.json";
  std::string table = "summary.csv";
  bool plots = true;

  Json to_json() const {
    Json j;
    j["report"] = report;
    j["table"] = table;
    j["plots"] = plots;
    return j;
  }
};

OutputConfig parse_output(const Json* j, const std::string& path) {
  OutputConfig o;
  if (!j) return o;
  require_object(*j, path);
  check_keys(*j, path, {"report", "table", "plots"});
  if (const Json* f = find_field(*j, "report")) o.report = parse_string(*f, join(path, "report"));
  if (const Json* f = find_field(*j, "table")) o.table = parse_string(*f, join(path, "table"));
  if (const Json* f = find_field(*j, "plots")) o.plots = parse_bool(*f, join(path, "plots"));
  if (o.report.empty() || o.table.empty()) {
    throw ConfigError(path, "report and table file names must be nonempty");
  }
  return o;
}

// ---------------------------------------------------------------------------
// Shared run machinery

struct RunContext {
  std::string kind;
  std::uint64_t seed = 0;
  bool seed_given = false;
  FactorConfig factor;
  ConformalStructure structure;
  SolverConfig solver;
  OutputConfig output;
  ExperimentOutcome outcome;
  Json results;
  Json resolved;  // canonical config echoed into the report header

  void check(const std::string& name, bool passed, const std::string& detail) {
    outcome.checks.push_back({name, passed, detail});
  }
};

std::string fmt(const char* format, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, a);
  return buf;
}

std::string fmt2(const char* format, double a, double b) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), format, a, b);
  return buf;
}

std::string describe_stages(const CapacityResult& r) {
  std::string out;
  char buf[96];
  for (const StageDiagnostics& s : r.stages) {
    std::snprintf(buf, sizeof(buf), "[eps=%.1e it=%d gnorm=%.3e %s]", s.epsilon, s.iterations,
                  s.final_gradient_norm, s.converged ? "ok" : "STUCK");
    out += buf;
  }
  return out;
}

void check_capacity_health(RunContext& ctx, const std::string& label, const CapacityResult& r) {
  ctx.check(label + "_admissible", r.admissible,
            r.admissible ? "witness satisfies plate constraints and bounds"
                         : "witness violates plate constraints or bounds");
  ctx.check(label + "_converged", r.converged,
            r.converged ? fmt("all stages met the gradient tolerance (final gnorm %.3e)",
                              r.final_gradient_norm())
                        : "stage diagnostics: " + describe_stages(r));
}

void check_reference(RunContext& ctx, const std::string& name, double value, double reference,
                     double rel_tol) {
  double err = std::fabs(value - reference) / std::fabs(reference);
  ctx.check(name, err <= rel_tol,
            fmt2("value %.8g vs reference %.8g", value, reference) +
                fmt2(" (rel err %.3e, tol %.1e)", err, rel_tol));
}

int nearest_interior_vertex(const SimplicialMesh& mesh, const Vec3& p, const std::string& path) {
  std::vector<char> on_boundary(mesh.vertex_count(), 0);
  for (int v : mesh.boundary_nodes) on_boundary[v] = 1;
  int best = -1;
  double bd = std::numeric_limits<double>::infinity();
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (on_boundary[v]) continue;
    double d = distance(mesh.vertices[v], p);
    if (d < bd) {
      bd = d;
      best = v;
    }
  }
  if (best < 0) throw ConfigError(path, "the mesh has no interior vertex");
  return best;
}

// All interior vertices on the circle of vertices nearest `radius`, ordered
// by angle.  Valid as a closed-ring probe on the concentric 2-D meshes the
// builders produce.
std::vector<int> ring_probe(const SimplicialMesh& mesh, double radius, const std::string& path) {
  if (mesh.dim != 2) throw ConfigError(path, "ring probes require dimension 2");
  std::vector<char> on_boundary(mesh.vertex_count(), 0);
  for (int v : mesh.boundary_nodes) on_boundary[v] = 1;
  int nearest = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (on_boundary[v]) continue;
    double d = std::fabs(distance(mesh.vertices[v], Vec3{}) - radius);
    if (d < best) {
      best = d;
      nearest = v;
    }
  }
  if (nearest < 0) throw ConfigError(path, "the mesh has no interior vertex");
  double rstar = distance(mesh.vertices[nearest], Vec3{});
  std::vector<int> ring;
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (!on_boundary[v] &&
        std::fabs(distance(mesh.vertices[v], Vec3{}) - rstar) <= 1e-9 * rstar + 1e-12) {
      ring.push_back(v);
    }
  }
  std::sort(ring.begin(), ring.end(), [&](int va, int vb) {
    return std::atan2(mesh.vertices[va].y, mesh.vertices[va].x) <
           std::atan2(mesh.vertices[vb].y, mesh.vertices[vb].x);
  });
  if (ring.size() < 3) throw ConfigError(path, "no vertex ring near the requested radius");
  return ring;
}

void add_stage_rows(RunContext& ctx, const std::string& prefix, int dim,
                    const CompactCapacityResult& res) {
  for (const CompactStage& s : res.stages) {
    append_headline_row(ctx.outcome.table, prefix + "_R=" + fmt("%.6g", s.radius), dim, s.result);
  }
}

void add_decay_plot(RunContext& ctx, const std::string& file, const std::string& title, int dim,
                    const std::vector<std::pair<double, double>>& seq, double coeff, double limit) {
  PlotSeries data{"probe capacity", {}, {}};
  PlotSeries fit{"fit a*(log R)^(1-n)+b", {}, {}};
  for (const auto& [r, v] : seq) {
    data.x.push_back(r);
    data.y.push_back(v);
    double lr = std::log(r);
    if (lr > 0.0) {
      fit.x.push_back(r);
      fit.y.push_back(coeff * std::pow(lr, 1 - dim) + limit);
    }
  }
  ctx.outcome.plots.emplace_back(
      file, render_line_plot(title, "outer radius", "capacity", {data, fit}, true, false));
}

// ---------------------------------------------------------------------------
// Kind runners.  Each fills ctx.results, the CSV table, plots, and checks.

// capacity: solve one condenser.
//   fields: domain, plate0, plate1, invariance_check, reference, rel_tol
//   checks: admissible, converged, optional reference, optional conformal
//           invariance against the flat factor (<= 1e-10 relative)
void run_capacity(RunContext& ctx, const Json& cfg) {
  DomainConfig domain = parse_domain(require_field(cfg, "", "domain"), "domain");
  int dim = domain.spec.dim;
  PlateSpec p0 = parse_plate(require_field(cfg, "", "plate0"), "plate0", dim);
  PlateSpec p1 = parse_plate(require_field(cfg, "", "plate1"), "plate1", dim);
  bool invariance = false;
  if (const Json* f = find_field(cfg, "invariance_check")) {
    invariance = parse_bool(*f, "invariance_check");
  }
  ctx.resolved["domain"] = domain.to_json();
  ctx.resolved["plate0"] = p0.to_json();
  ctx.resolved["plate1"] = p1.to_json();
  ctx.resolved["invariance_check"] = invariance;

  SimplicialMesh mesh = domain.build();
  Condenser cond;
  cond.plate0 = select_plate(mesh, p0, "plate0");
  cond.plate1 = select_plate(mesh, p1, "plate1");
  std::vector<int> overlap;
  std::set_intersection(cond.plate0.begin(), cond.plate0.end(), cond.plate1.begin(),
                        cond.plate1.end(), std::back_inserter(overlap));
  if (!overlap.empty()) {
    throw ConfigError("plate1", "overlaps plate0 on " + std::to_string(overlap.size()) +
                                    " vertices; separate the regions");
  }

  CapacityResult res = solve_condenser(mesh, ctx.structure, cond, ctx.solver);
  ctx.results["capacity"] = to_json(res);
  append_headline_row(ctx.outcome.table, "capacity", dim, res);
  check_capacity_health(ctx, "capacity", res);

  if (const Json* ref = find_field(cfg, "reference")) {
    double reference = parse_number(*ref, "reference");
    double rel_tol = 0.01;
    if (const Json* t = find_field(cfg, "rel_tol")) rel_tol = parse_positive(*t, "rel_tol");
    ctx.resolved["reference"] = reference;
    ctx.resolved["rel_tol"] = rel_tol;
    check_reference(ctx, "reference_value", res.value, reference, rel_tol);
  }

  if (invariance) {
    CapacityResult flat = solve_condenser(mesh, ConformalStructure::flat(), cond, ctx.solver);
    ctx.results["flat_reference"] = to_json(flat, false);
    append_headline_row(ctx.outcome.table, "capacity_flat", dim, flat);
    double rel = std::fabs(res.value - flat.value) / std::max(std::fabs(flat.value), 1e-300);
    ctx.check("conformal_invariance", rel <= 1e-10,
              fmt2("factor value %.17g vs flat %.17g", res.value, flat.value) +
                  fmt(" (rel diff %.3e, tol 1e-10)", rel));
  }

  if (ctx.output.plots) {
    PlotSeries energies{"stage energy", {}, {}};
    for (size_t i = 0; i < res.stages.size(); ++i) {
      energies.x.push_back(double(i + 1));
      energies.y.push_back(res.stages[i].final_energy);
    }
    ctx.outcome.plots.emplace_back(
        "capacity_stages.svg",
        render_line_plot("continuation stages", "stage", "regularized energy", {energies}));
  }
}

// compact_capacity: capacity of a compact vertex set over an exhaustion.
//   fields: exhaustion, compact, reference, rel_tol
//   checks: per-stage admissible+converged, monotone decrease, optional
//           reference compared against the final stage value
void run_compact(RunContext& ctx, const Json& cfg) {
  ExhaustionConfig ex = parse_exhaustion(require_field(cfg, "", "exhaustion"), "exhaustion");
  RegionShape compact = parse_region(require_field(cfg, "", "compact"), "compact", ex.dim);
  ctx.resolved["exhaustion"] = ex.to_json();
  ctx.resolved["compact"] = compact.to_json();

  std::vector<SimplicialMesh> stages = ex.build();
  const SimplicialMesh& inner = stages.front();
  std::vector<int> nodes;
  for (int v = 0; v < inner.vertex_count(); ++v) {
    if (compact.contains(inner.vertices[v])) nodes.push_back(v);
  }
  if (nodes.empty()) throw ConfigError("compact", "selects no vertices on the innermost stage");
  std::vector<int> clash;
  std::set_intersection(nodes.begin(), nodes.end(), inner.boundary_nodes.begin(),
                        inner.boundary_nodes.end(), std::back_inserter(clash));
  if (!clash.empty()) {
    throw ConfigError("compact", "touches the innermost stage boundary on " +
                                     std::to_string(clash.size()) +
                                     " vertices; shrink the region or grow the first radius");
  }

  CompactCapacityResult res = compact_capacity(stages, ctx.structure, nodes, ctx.solver);
  ctx.results["compact_capacity"] = to_json(res);
  add_stage_rows(ctx, "cap", ex.dim, res);

  bool all_ok = true;
  for (const CompactStage& s : res.stages) {
    if (!s.result.admissible || !s.result.converged) all_ok = false;
  }
  ctx.check("stages_admissible_converged", all_ok,
            all_ok ? "every stage solved cleanly" : "a stage failed; see the JSON report");
  ctx.check("monotone_decreasing", res.monotone_decreasing,
            res.monotone_decreasing ? "capacities decrease along the exhaustion"
                                    : "capacity increased beyond slack along the exhaustion");

  if (const Json* ref = find_field(cfg, "reference")) {
    double reference = parse_number(*ref, "reference");
    double rel_tol = 0.01;
    if (const Json* t = find_field(cfg, "rel_tol")) rel_tol = parse_positive(*t, "rel_tol");
    ctx.resolved["reference"] = reference;
    ctx.resolved["rel_tol"] = rel_tol;
    check_reference(ctx, "reference_value", res.stages.back().result.value, reference, rel_tol);
  }

  if (ctx.output.plots) {
    std::vector<std::pair<double, double>> seq;
    for (const CompactStage& s : res.stages) seq.emplace_back(s.radius, s.result.value);
    add_decay_plot(ctx, "decay.svg", "compact capacity over the exhaustion", ex.dim, seq,
                   res.decay_coefficient, res.decay_limit);
  }
}

// point_decay: capacity of shrinking balls around a point.
//   fields: domain, point, radii (strictly decreasing), exponent_check,
//           exponent_rel_tol
//   checks: strictly decreasing values; fitted exponent near -(n-1)
void run_point_decay(RunContext& ctx, const Json& cfg) {
  DomainConfig domain = parse_domain(require_field(cfg, "", "domain"), "domain");
  int dim = domain.spec.dim;
  Vec3 point = parse_point(require_field(cfg, "", "point"), "point", dim);
  const Json& rj = require_field(cfg, "", "radii");
  if (!rj.is_array() || rj.size() < 2) {
    throw ConfigError("radii", "expected an array of at least 2 radii");
  }
  std::vector<double> radii;
  for (size_t i = 0; i < rj.size(); ++i) {
    radii.push_back(parse_positive(rj[i], "radii[" + std::to_string(i) + "]"));
  }
  for (size_t i = 0; i + 1 < radii.size(); ++i) {
    if (radii[i] <= radii[i + 1]) throw ConfigError("radii", "must be strictly decreasing");
  }
  bool exponent_check = true;
  if (const Json* f = find_field(cfg, "exponent_check")) {
    exponent_check = parse_bool(*f, "exponent_check");
  }
  double exponent_rel_tol = 0.10;
  if (const Json* f = find_field(cfg, "exponent_rel_tol")) {
    exponent_rel_tol = parse_positive(*f, "exponent_rel_tol");
  }
  ctx.resolved["domain"] = domain.to_json();
  ctx.resolved["point"] = point_json(point, dim);
  ctx.resolved["radii"] = radii;
  ctx.resolved["exponent_check"] = exponent_check;
  ctx.resolved["exponent_rel_tol"] = exponent_rel_tol;

  SimplicialMesh mesh = domain.build();
  PointDecayResult res;
  try {
    res = point_capacity_decay(mesh, ctx.structure, point, radii, ctx.solver);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("radii", e.what());
  }
  ctx.results["point_decay"] = to_json(res);
  for (size_t i = 0; i < res.radii.size(); ++i) {
    append_headline_row(ctx.outcome.table, "ball_r=" + fmt("%.6g", res.radii[i]), dim,
                        res.results[i]);
  }

  bool solved = true;
  for (const CapacityResult& r : res.results) {
    if (!r.admissible || !r.converged) solved = false;
  }
  ctx.check("stages_admissible_converged", solved,
            solved ? "every radius solved cleanly" : "a radius failed; see the JSON report");
  ctx.check("strictly_decreasing", res.strictly_decreasing,
            res.strictly_decreasing ? "capacity falls as the ball shrinks"
                                    : "capacity failed to fall as the ball shrinks");
  if (exponent_check) {
    double expected = double(1 - dim);
    double err = std::fabs(res.fitted_exponent - expected) / std::fabs(expected);
    ctx.check("decay_exponent", err <= exponent_rel_tol,
              fmt2("fitted exponent %.4g vs expected %.4g", res.fitted_exponent, expected) +
                  fmt2(" (rel err %.3e, tol %.1e)", err, exponent_rel_tol));
  }

  if (ctx.output.plots) {
    PlotSeries s{"ball capacity", res.radii, res.values};
    ctx.outcome.plots.emplace_back(
        "point_decay.svg",
        render_line_plot("capacity of shrinking balls", "ball radius", "capacity", {s}, true,
                         true));
  }
}

// mu: pseudometric estimate for one pair of points.
//   fields: domain or exhaustion, x, y, search_budget, symmetry_check,
//           decreasing_check (exhaustion only)
//   checks: finite positive value, witness validity, solver health, the
//           search never worsens its start, optional exact symmetry and
//           stage decrease
void run_mu(RunContext& ctx, const Json& cfg) {
  const Json* dj = find_field(cfg, "domain");
  const Json* ej = find_field(cfg, "exhaustion");
  if ((dj == nullptr) == (ej == nullptr)) {
    throw ConfigError("", "give exactly one of domain, exhaustion");
  }
  int budget = 120;
  if (const Json* f = find_field(cfg, "search_budget")) {
    budget = parse_int(*f, "search_budget");
    if (budget < 0) throw ConfigError("search_budget", "must be nonnegative");
  }
  bool symmetry_check = true;
  if (const Json* f = find_field(cfg, "symmetry_check")) {
    symmetry_check = parse_bool(*f, "symmetry_check");
  }
  bool decreasing_check = false;
  if (const Json* f = find_field(cfg, "decreasing_check")) {
    decreasing_check = parse_bool(*f, "decreasing_check");
  }

  std::vector<SimplicialMesh> stages;
  std::optional<DomainConfig> domain;
  std::optional<ExhaustionConfig> ex;
  if (dj) {
    domain = parse_domain(*dj, "domain");
    stages.push_back(domain->build());
    ctx.resolved["domain"] = domain->to_json();
  } else {
    ex = parse_exhaustion(*ej, "exhaustion");
    stages = ex->build();
    ctx.resolved["exhaustion"] = ex->to_json();
  }
  int dim = stages.front().dim;
  Vec3 px = parse_point(require_field(cfg, "", "x"), "x", dim);
  Vec3 py = parse_point(require_field(cfg, "", "y"), "y", dim);
  ctx.resolved["x"] = point_json(px, dim);
  ctx.resolved["y"] = point_json(py, dim);
  ctx.resolved["search_budget"] = budget;
  ctx.resolved["symmetry_check"] = symmetry_check;
  if (ej) ctx.resolved["decreasing_check"] = decreasing_check;

  const SimplicialMesh& inner = stages.front();
  int vx = nearest_interior_vertex(inner, px, "x");
  int vy = nearest_interior_vertex(inner, py, "y");
  if (vx == vy) {
    throw ConfigError("y", "snaps to the same interior vertex as x; separate the points");
  }

  MuEstimate est = dj ? estimate_mu(inner, ctx.structure, vx, vy, ctx.solver, budget, ctx.seed)
                      : estimate_mu(stages, ctx.structure, vx, vy, ctx.solver, budget, ctx.seed);
  ctx.results["mu"] = to_json(est);
  ctx.results["snapped_vertices"] = Json::array({vx, vy});
  append_headline_row(ctx.outcome.table, "mu", dim, est.capacity_result);
  for (const auto& [r, v] : est.stage_values) {
    ctx.outcome.table.add_row({"mu_R=" + fmt("%.6g", r), std::to_string(dim), "",
                               format_double(v), "", "", ""});
  }

  ctx.check("finite_positive", std::isfinite(est.value) && est.value > 0.0,
            fmt("estimate %.8g", est.value));
  bool witness_ok = true;
  std::string witness_msg = "witness is a valid edge-path joining the snapped points";
  try {
    est.witness.validate(inner);
    if (est.witness.endpoint_a() != vx || est.witness.endpoint_b() != vy) {
      witness_ok = false;
      witness_msg = "witness endpoints do not match the snapped points";
    }
  } catch (const std::invalid_argument& e) {
    witness_ok = false;
    witness_msg = e.what();
  }
  ctx.check("witness_valid", witness_ok, witness_msg);
  check_capacity_health(ctx, "mu", est.capacity_result);
  ctx.check("search_improves", est.value <= est.search_diagnostics.initial_value * (1.0 + 1e-12),
            fmt2("final %.8g vs initial %.8g", est.value, est.search_diagnostics.initial_value));

  if (symmetry_check) {
    MuEstimate swapped = dj
                             ? estimate_mu(inner, ctx.structure, vy, vx, ctx.solver, budget, ctx.seed)
                             : estimate_mu(stages, ctx.structure, vy, vx, ctx.solver, budget,
                                           ctx.seed);
    double slack = 2.0 * ctx.solver.value_tolerance * (1.0 + std::fabs(est.value));
    ctx.check("symmetry", std::fabs(swapped.value - est.value) <= slack,
              fmt2("mu(x,y) %.17g vs mu(y,x) %.17g", est.value, swapped.value));
  }
  if (ej && decreasing_check) {
    bool dec = true;
    for (size_t i = 0; i + 1 < est.stage_values.size(); ++i) {
      if (est.stage_values[i + 1].second >= est.stage_values[i].second) dec = false;
    }
    ctx.check("stage_decreasing", dec,
              dec ? "witness capacity falls along the exhaustion"
                  : "witness capacity failed to fall along the exhaustion");
  }

  if (ctx.output.plots && !est.stage_values.empty()) {
    PlotSeries s{"witness capacity", {}, {}};
    for (const auto& [r, v] : est.stage_values) {
      s.x.push_back(r);
      s.y.push_back(v);
    }
    ctx.outcome.plots.emplace_back(
        "mu_stages.svg",
        render_line_plot("pseudometric estimate over the exhaustion", "outer radius",
                         "witness capacity", {s}, true, false));
  }
}

// triangle: pseudometric triangle inequality for one triple.
//   fields: domain, x, y, z, search_budget
//   checks: the inequality with concatenation seeding, positivity
void run_triangle(RunContext& ctx, const Json& cfg) {
  DomainConfig domain = parse_domain(require_field(cfg, "", "domain"), "domain");
  int dim = domain.spec.dim;
  Vec3 px = parse_point(require_field(cfg, "", "x"), "x", dim);
  Vec3 py = parse_point(require_field(cfg, "", "y"), "y", dim);
  Vec3 pz = parse_point(require_field(cfg, "", "z"), "z", dim);
  int budget = 120;
  if (const Json* f = find_field(cfg, "search_budget")) {
    budget = parse_int(*f, "search_budget");
    if (budget < 0) throw ConfigError("search_budget", "must be nonnegative");
  }
  ctx.resolved["domain"] = domain.to_json();
  ctx.resolved["x"] = point_json(px, dim);
  ctx.resolved["y"] = point_json(py, dim);
  ctx.resolved["z"] = point_json(pz, dim);
  ctx.resolved["search_budget"] = budget;

  SimplicialMesh mesh = domain.build();
  int vx = nearest_interior_vertex(mesh, px, "x");
  int vy = nearest_interior_vertex(mesh, py, "y");
  int vz = nearest_interior_vertex(mesh, pz, "z");
  if (vx == vy || vy == vz || vx == vz) {
    throw ConfigError("z", "the three points snap to fewer than three distinct vertices");
  }

  TriangleCheckResult res = triangle_check(mesh, ctx.structure, vx, vy, vz, ctx.solver, budget,
                                           ctx.seed);
  ctx.results["triangle"] = to_json(res);
  ctx.results["snapped_vertices"] = Json::array({vx, vy, vz});
  append_headline_row(ctx.outcome.table, "mu_xy", dim, res.mu_xy.capacity_result);
  append_headline_row(ctx.outcome.table, "mu_yz", dim, res.mu_yz.capacity_result);
  append_headline_row(ctx.outcome.table, "mu_xz", dim, res.mu_xz.capacity_result);

  bool positive = res.mu_xy.value > 0.0 && res.mu_yz.value > 0.0 && res.mu_xz.value > 0.0;
  ctx.check("finite_positive", positive,
            fmt("mu_xy %.6g", res.mu_xy.value) + fmt(", mu_yz %.6g", res.mu_yz.value) +
                fmt(", mu_xz %.6g", res.mu_xz.value));
  ctx.check("triangle_inequality", res.holds,
            fmt2("mu_xz %.8g vs mu_xy + mu_yz %.8g", res.mu_xz.value,
                 res.mu_xy.value + res.mu_yz.value));
}

// classify: Class I / Class II evidence from probe capacities.
//   fields: exhaustion, probe ({"type": "ring", radius} or
//           {"type": "segment", a, b}), expected_verdict
//   checks: per-stage solver health, optional verdict match
void run_classify(RunContext& ctx, const Json& cfg) {
  ExhaustionConfig ex = parse_exhaustion(require_field(cfg, "", "exhaustion"), "exhaustion");
  const Json& pj = require_object(require_field(cfg, "", "probe"), "probe");
  ctx.resolved["exhaustion"] = ex.to_json();

  std::vector<SimplicialMesh> stages = ex.build();
  const SimplicialMesh& inner = stages.front();

  std::string type = parse_string(require_field(pj, "probe", "type"), "probe.type");
  PathContinuum probe;
  probe.mesh = &inner;
  Json probe_resolved;
  probe_resolved["type"] = type;
  if (type == "ring") {
    check_keys(pj, "probe", {"type", "radius"});
    double radius = parse_positive(require_field(pj, "probe", "radius"), "probe.radius");
    probe.node_sequence = ring_probe(inner, radius, "probe.radius");
    probe_resolved["radius"] = radius;
  } else if (type == "segment") {
    check_keys(pj, "probe", {"type", "a", "b"});
    Vec3 pa = parse_point(require_field(pj, "probe", "a"), "probe.a", ex.dim);
    Vec3 pb = parse_point(require_field(pj, "probe", "b"), "probe.b", ex.dim);
    int va = nearest_interior_vertex(inner, pa, "probe.a");
    int vb = nearest_interior_vertex(inner, pb, "probe.b");
    if (va == vb) throw ConfigError("probe.b", "snaps to the same vertex as probe.a");
    probe.node_sequence = shortest_edge_path(inner, va, vb);
    std::vector<char> on_boundary(inner.vertex_count(), 0);
    for (int v : inner.boundary_nodes) on_boundary[v] = 1;
    for (int v : probe.node_sequence) {
      if (on_boundary[v]) {
        throw ConfigError("probe",
                          "the segment path touches the innermost stage boundary; move the "
                          "endpoints inward");
      }
    }
    probe_resolved["a"] = point_json(pa, ex.dim);
    probe_resolved["b"] = point_json(pb, ex.dim);
  } else {
    throw ConfigError("probe.type", "unknown probe '" + type + "' (ring, segment)");
  }
  ctx.resolved["probe"] = probe_resolved;

  std::optional<std::string> expected;
  if (const Json* f = find_field(cfg, "expected_verdict")) {
    expected = parse_string(*f, "expected_verdict");
    if (*expected != "ClassI_evidence" && *expected != "ClassII_evidence" &&
        *expected != "inconclusive") {
      throw ConfigError("expected_verdict",
                        "must be ClassI_evidence, ClassII_evidence, or inconclusive");
    }
    ctx.resolved["expected_verdict"] = *expected;
  }

  ClassificationReport rep = classify(stages, ctx.structure, probe, ctx.solver);
  ctx.results["classification"] = to_json(rep);
  ctx.results["probe_nodes"] = probe.node_sequence;
  for (const auto& [r, v] : rep.capacity_sequence) {
    ctx.outcome.table.add_row({"probe_R=" + fmt("%.6g", r), std::to_string(ex.dim), "",
                               format_double(v), "", "", ""});
  }

  ctx.check("stages_converged", rep.all_converged,
            rep.all_converged ? "every stage solved cleanly"
                              : "a stage missed its gradient tolerance; see the JSON report");
  if (expected) {
    ctx.check("expected_verdict", to_string(rep.verdict) == *expected,
              std::string("verdict ") + to_string(rep.verdict) + ", expected " + *expected);
  }

  if (ctx.output.plots) {
    add_decay_plot(ctx, "classify.svg", "probe capacity over the exhaustion", ex.dim,
                   rep.capacity_sequence, rep.decay_coefficient, rep.fitted_limit);
  }
}

// converge: capacity of one condenser across uniform refinements.
//   fields: domain, refinements, plate0, plate1, reference or
//           radial_reference {r_inner, r_outer}, min_order, rel_tol
//   checks: per-level solver health, fitted order (optionally >= min_order),
//           final value against the reference
void run_converge(RunContext& ctx, const Json& cfg) {
  DomainConfig domain = parse_domain(require_field(cfg, "", "domain"), "domain");
  int dim = domain.spec.dim;
  if (domain.refinements != 0) {
    throw ConfigError("domain.refine", "use the top-level refinements field for this kind");
  }
  int levels = 3;
  if (const Json* f = find_field(cfg, "refinements")) {
    levels = parse_int(*f, "refinements");
    if (levels < 2 || levels > 8) throw ConfigError("refinements", "must lie in [2, 8]");
  }
  PlateSpec p0 = parse_plate(require_field(cfg, "", "plate0"), "plate0", dim);
  PlateSpec p1 = parse_plate(require_field(cfg, "", "plate1"), "plate1", dim);

  const Json* ref = find_field(cfg, "reference");
  const Json* radial = find_field(cfg, "radial_reference");
  if ((ref == nullptr) == (radial == nullptr)) {
    throw ConfigError("", "give exactly one of reference, radial_reference");
  }
  double reference;
  if (ref) {
    reference = parse_number(*ref, "reference");
    ctx.resolved["reference"] = reference;
  } else {
    require_object(*radial, "radial_reference");
    check_keys(*radial, "radial_reference", {"r_inner", "r_outer"});
    RadialCondenserSpec rc;
    rc.dim = dim;
    rc.r_inner = parse_positive(require_field(*radial, "radial_reference", "r_inner"),
                                "radial_reference.r_inner");
    rc.r_outer = parse_positive(require_field(*radial, "radial_reference", "r_outer"),
                                "radial_reference.r_outer");
    if (rc.r_inner >= rc.r_outer) {
      throw ConfigError("radial_reference.r_inner", "must be smaller than r_outer");
    }
    reference = radial_capacity(rc);
    Json rr;
    rr["r_inner"] = rc.r_inner;
    rr["r_outer"] = rc.r_outer;
    ctx.resolved["radial_reference"] = rr;
    ctx.resolved["reference_value"] = reference;
  }
  std::optional<double> min_order;
  if (const Json* f = find_field(cfg, "min_order")) {
    min_order = parse_positive(*f, "min_order");
    ctx.resolved["min_order"] = *min_order;
  }
  double rel_tol = 0.01;
  if (const Json* f = find_field(cfg, "rel_tol")) rel_tol = parse_positive(*f, "rel_tol");
  ctx.resolved["domain"] = domain.to_json();
  ctx.resolved["refinements"] = levels;
  ctx.resolved["plate0"] = p0.to_json();
  ctx.resolved["plate1"] = p1.to_json();
  ctx.resolved["rel_tol"] = rel_tol;

  std::vector<double> h_list, values;
  Json level_results = Json::array();
  SimplicialMesh mesh = domain.build();
  bool solved = true;
  for (int level = 0; level < levels; ++level) {
    if (level > 0) mesh = refine(mesh);
    double h = domain.spec.target_edge_length / std::pow(2.0, level);
    Condenser cond;
    cond.plate0 = select_plate(mesh, p0, "plate0");
    cond.plate1 = select_plate(mesh, p1, "plate1");
    CapacityResult res = solve_condenser(mesh, ctx.structure, cond, ctx.solver);
    if (!res.admissible || !res.converged) solved = false;
    h_list.push_back(h);
    values.push_back(res.value);
    Json lr;
    lr["level"] = level;
    lr["h"] = h;
    lr["elements"] = mesh.simplex_count();
    lr["result"] = to_json(res, false);
    level_results.push_back(std::move(lr));
    append_headline_row(ctx.outcome.table, "level" + std::to_string(level) + "_h=" + fmt("%.6g", h),
                        dim, res);
  }
  ConvergenceFit fit = convergence_order(values, h_list, reference);
  ctx.results["levels"] = std::move(level_results);
  ctx.results["reference"] = reference;
  ctx.results["fit"] = to_json(fit);

  ctx.check("levels_admissible_converged", solved,
            solved ? "every level solved cleanly" : "a level failed; see the JSON report");
  ctx.check("convergent", !fit.non_convergent,
            fmt2("fitted order %.4g (intercept %.4g)", fit.order, fit.intercept));
  if (min_order) {
    ctx.check("min_order", fit.order >= *min_order,
              fmt2("fitted order %.4g vs required %.4g", fit.order, *min_order));
  }
  check_reference(ctx, "reference_value", values.back(), reference, rel_tol);

  if (ctx.output.plots) {
    PlotSeries err{"|value - reference|", {}, {}};
    PlotSeries fitted{"fitted power law", {}, {}};
    for (size_t i = 0; i < h_list.size(); ++i) {
      double e = std::fabs(values[i] - reference);
      if (e > 0.0) {
        err.x.push_back(h_list[i]);
        err.y.push_back(e);
      }
      fitted.x.push_back(h_list[i]);
      fitted.y.push_back(std::exp(fit.intercept) * std::pow(h_list[i], fit.order));
    }
    ctx.outcome.plots.emplace_back(
        "convergence.svg",
        render_line_plot("capacity error under refinement", "edge length", "absolute error",
                         {err, fitted}, true, true));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentOutcome run_experiment(const Json& config, const std::string& kind,
                                 std::optional<std::uint64_t> seed_override) {
  require_object(config, "");

  RunContext ctx;
  const Json* kind_field = find_field(config, "kind");
  if (kind_field) {
    ctx.kind = parse_string(*kind_field, "kind");
    if (!kind.empty() && kind != ctx.kind) {
      throw ConfigError("kind", "config says '" + ctx.kind + "' but the command line says '" +
                                    kind + "'");
    }
  } else if (!kind.empty()) {
    ctx.kind = kind;
  } else {
    throw ConfigError("kind", "missing required field");
  }

  const Json* seed_field = find_field(config, "seed");
  if (seed_field) {
    ctx.seed = parse_seed(*seed_field, "seed");
    ctx.seed_given = true;
  }
  if (seed_override) {
    ctx.seed = *seed_override;
    ctx.seed_given = true;
  }
  bool stochastic = ctx.kind == "mu" || ctx.kind == "triangle";
  if (stochastic && !ctx.seed_given) {
    throw ConfigError("seed", "required for the stochastic kinds (mu, triangle)");
  }

  {
    std::vector<std::string> allowed{"kind", "seed", "factor", "solver", "output"};
    auto extend = [&](std::initializer_list<const char*> keys) {
      for (const char* k : keys) allowed.push_back(k);
    };
    if (ctx.kind == "capacity") {
      extend({"domain", "plate0", "plate1", "invariance_check", "reference", "rel_tol"});
    } else if (ctx.kind == "compact_capacity") {
      extend({"exhaustion", "compact", "reference", "rel_tol"});
    } else if (ctx.kind == "point_decay") {
      extend({"domain", "point", "radii", "exponent_check", "exponent_rel_tol"});
    } else if (ctx.kind == "mu") {
      extend({"domain", "exhaustion", "x", "y", "search_budget", "symmetry_check",
              "decreasing_check"});
    } else if (ctx.kind == "triangle") {
      extend({"domain", "x", "y", "z", "search_budget"});
    } else if (ctx.kind == "classify") {
      extend({"exhaustion", "probe", "expected_verdict"});
    } else if (ctx.kind == "converge") {
      extend({"domain", "refinements", "plate0", "plate1", "reference", "radial_reference",
              "min_order", "rel_tol"});
    }
    check_keys(config, "", allowed);
  }

  // Factor dimension for canonical echo only; runners re-check the domain.
  int echo_dim = 3;
  if (const Json* d = find_field(config, "domain")) {
    if (d->is_object()) {
      if (const Json* dd = find_field(*d, "dim")) {
        if (dd->is_number_integer()) echo_dim = dd->get<int>();
      }
    }
  } else if (const Json* e = find_field(config, "exhaustion")) {
    if (e->is_object()) {
      if (const Json* dd = find_field(*e, "dim")) {
        if (dd->is_number_integer()) echo_dim = dd->get<int>();
      }
    }
  }
  ctx.factor = parse_factor(find_field(config, "factor"), "factor", echo_dim);
  ctx.structure = ctx.factor.build();
  ctx.solver = parse_solver(find_field(config, "solver"), "solver");
  ctx.output = parse_output(find_field(config, "output"), "output");

  ctx.resolved["kind"] = ctx.kind;
  ctx.resolved["seed"] = ctx.seed;
  ctx.resolved["factor"] = ctx.factor.to_json();
  ctx.resolved["solver"] = solver_json(ctx.solver);
  ctx.resolved["output"] = ctx.output.to_json();
  ctx.outcome.table = headline_table();

  if (ctx.kind == "capacity") {
    run_capacity(ctx, config);
  } else if (ctx.kind == "compact_capacity") {
    run_compact(ctx, config);
  } else if (ctx.kind == "point_decay") {
    run_point_decay(ctx, config);
  } else if (ctx.kind == "mu") {
    run_mu(ctx, config);
  } else if (ctx.kind == "triangle") {
    run_triangle(ctx, config);
  } else if (ctx.kind == "classify") {
    run_classify(ctx, config);
  } else if (ctx.kind == "converge") {
    run_converge(ctx, config);
  } else {
    throw ConfigError("kind", "unknown kind '" + ctx.kind +
                                  "' (capacity, compact_capacity, point_decay, mu, triangle, "
                                  "classify, converge)");
  }

  bool all = true;
  Json checks = Json::array();
  for (const CheckLine& c : ctx.outcome.checks) {
    all = all && c.passed;
    Json jc;
    jc["name"] = c.name;
    jc["passed"] = c.passed;
    jc["detail"] = c.detail;
    checks.push_back(std::move(jc));
  }
  ctx.outcome.passed = all;

  Json header;
  header["kind"] = ctx.kind;
  header["library_version"] = kLibraryVersion;
  header["seed"] = ctx.seed;
  header["config"] = std::move(ctx.resolved);
  ctx.outcome.report["header"] = std::move(header);
  ctx.outcome.report["results"] = std::move(ctx.results);
  ctx.outcome.report["checks"] = std::move(checks);
  ctx.outcome.report["passed"] = all;
  if (!ctx.output.plots) ctx.outcome.plots.clear();
  return ctx.outcome;
}

int run_experiment_cli(const std::string& kind, const std::string& config_path,
                       const std::string& out_dir,
                       std::optional<std::uint64_t> seed_override) {
  Json config;
  {
    std::ifstream in(config_path);
    if (!in) {
      std::fprintf(stderr, "error: cannot open config file %s\n", config_path.c_str());
      return 2;
    }
    try {
      config = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      std::fprintf(stderr, "config parse error in %s: %s\n", config_path.c_str(), e.what());
      return 2;
    }
  }

  ExperimentOutcome outcome;
  std::string report_name, table_name;
  try {
    outcome = run_experiment(config, kind, seed_override);
    report_name = outcome.report["header"]["config"]["output"]["report"].get<std::string>();
    table_name = outcome.report["header"]["config"]["output"]["table"].get<std::string>();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  namespace fs = std::filesystem;
  try {
    fs::path out(out_dir);
    write_file_atomic((out / report_name).string(), outcome.report.dump(2) + "\n");
    write_file_atomic((out / table_name).string(), outcome.table.to_string());
    for (const auto& [name, svg] : outcome.plots) {
      write_file_atomic((out / name).string(), svg);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "output error: %s\n", e.what());
    return 3;
  }

  for (const CheckLine& c : outcome.checks) {
    std::printf("[%s] %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
  }
  std::printf("RESULT: %s\n", outcome.passed ? "PASS" : "FAIL");
  return outcome.passed ? 0 : 1;
}

}  // namespace capnum
