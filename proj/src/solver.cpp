#include "capnum/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <deque>
#include <set>
#include <stdexcept>

namespace capnum {

namespace {

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

void gather(const std::vector<double>& full, const std::vector<int>& idx,
            std::vector<double>& out) {
  out.resize(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[i] = full[idx[i]];
}

struct LbfgsMemory {
  std::deque<std::vector<double>> s, y;
  std::deque<double> rho;
  int capacity = 8;

  void clear() {
    s.clear();
    y.clear();
    rho.clear();
  }
  void push(std::vector<double> si, std::vector<double> yi) {
    double sy = dot(si, yi);
    if (!(sy > 1e-12 * norm2(si) * norm2(yi))) return;  // skip non-curvature pairs
    s.push_back(std::move(si));
    y.push_back(std::move(yi));
    rho.push_back(1.0 / sy);
    if (static_cast<int>(s.size()) > capacity) {
      s.pop_front();
      y.pop_front();
      rho.pop_front();
    }
  }

  // Two-loop recursion with diagonal preconditioner `precond` (H0 scale).
  std::vector<double> direction(const std::vector<double>& g,
                                const std::vector<double>& precond) const {
    std::vector<double> q = g;
    int k = static_cast<int>(s.size());
    std::vector<double> alpha(k);
    for (int i = k - 1; i >= 0; --i) {
      alpha[i] = rho[i] * dot(s[i], q);
      for (size_t j = 0; j < q.size(); ++j) q[j] -= alpha[i] * y[i][j];
    }
    double gamma = 1.0;
    if (k > 0) {
      double ydy = 0.0;
      for (size_t j = 0; j < q.size(); ++j) ydy += y[k - 1][j] * y[k - 1][j] * precond[j];
      double sy = dot(s[k - 1], y[k - 1]);
      if (ydy > 0.0) gamma = sy / ydy;
    }
    for (size_t j = 0; j < q.size(); ++j) q[j] *= gamma * precond[j];
    for (int i = 0; i < k; ++i) {
      double beta = rho[i] * dot(y[i], q);
      for (size_t j = 0; j < q.size(); ++j) q[j] += (alpha[i] - beta) * s[i][j];
    }
    for (auto& v : q) v = -v;
    return q;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Validation

void Condenser::validate(const SimplicialMesh& mesh) const {
  int nv = mesh.vertex_count();
  for (const auto* plate : {&plate0, &plate1}) {
    for (int v : *plate) {
      if (v < 0 || v >= nv) {
        throw std::invalid_argument("condenser plate index " + std::to_string(v) +
                                    " out of range for " + std::to_string(nv) + " vertices");
      }
    }
  }
  std::set<int> p0(plate0.begin(), plate0.end());
  for (int v : plate1) {
    if (p0.count(v)) {
      throw std::invalid_argument("condenser plates overlap at vertex " + std::to_string(v));
    }
  }
}

void SolverConfig::validate() const {
  if (epsilon_schedule.empty()) {
    throw std::invalid_argument("solver config: epsilon schedule must not be empty");
  }
  for (double e : epsilon_schedule) {
    if (!(e > 0.0)) throw std::invalid_argument("solver config: epsilons must be positive");
  }
  if (!(gradient_tolerance > 0.0)) {
    throw std::invalid_argument("solver config: gradient_tolerance must be positive");
  }
  if (max_iterations < 1) throw std::invalid_argument("solver config: max_iterations must be >= 1");
  if (!(line_search.shrink > 0.0 && line_search.shrink < 1.0)) {
    throw std::invalid_argument("solver config: line search shrink must lie in (0, 1)");
  }
  if (!(line_search.sufficient_decrease > 0.0 && line_search.sufficient_decrease < 1.0)) {
    throw std::invalid_argument("solver config: sufficient decrease must lie in (0, 1)");
  }
  if (line_search.max_backtracks < 1) {
    throw std::invalid_argument("solver config: max_backtracks must be >= 1");
  }
  if (quasi_newton_memory < 1) {
    throw std::invalid_argument("solver config: quasi_newton_memory must be >= 1");
  }
  if (!(value_tolerance > 0.0)) {
    throw std::invalid_argument("solver config: value_tolerance must be positive");
  }
}

// ---------------------------------------------------------------------------
// CapacityResult helpers

int CapacityResult::total_iterations() const {
  int n = 0;
  for (const auto& s : stages) n += s.iterations;
  return n;
}

double CapacityResult::final_gradient_norm() const {
  return stages.empty() ? 0.0 : stages.back().final_gradient_norm;
}

double CapacityResult::final_epsilon() const {
  return stages.empty() ? 0.0 : stages.back().epsilon;
}

// ---------------------------------------------------------------------------
// Core solve

CapacityResult solve_condenser_cached(const MeshCache& cache, const ConformalStructure& structure,
                                      const Condenser& condenser, const SolverConfig& config,
                                      const std::vector<double>* warm_start) {
  const SimplicialMesh& mesh = cache.mesh();
  config.validate();
  condenser.validate(mesh);
  validate_structure(cache, structure);

  std::vector<int> p0 = sorted_unique(condenser.plate0);
  std::vector<int> p1 = sorted_unique(condenser.plate1);
  int nv = mesh.vertex_count();

  CapacityResult out;
  out.field = ScalarField(mesh, 0.0);

  if (p0.empty() || p1.empty()) {
    // Convention: with a missing plate the constant 0 / 1 field is
    // admissible, so the capacity vanishes identically.
    out.degenerate_plate = true;
    double fill = p1.empty() ? 0.0 : 1.0;
    std::fill(out.field.values.begin(), out.field.values.end(), fill);
    for (int v : p1) out.field.values[v] = 1.0;
    out.value = 0.0;
    out.admissible = true;
    out.converged = true;
    return out;
  }

  std::vector<char> fixed(nv, 0);
  for (int v : p0) fixed[v] = 1;
  for (int v : p1) fixed[v] = 2;
  std::vector<int> free_nodes;
  for (int v = 0; v < nv; ++v) {
    if (!fixed[v]) free_nodes.push_back(v);
  }

  std::vector<double>& x = out.field.values;
  if (warm_start) {
    if (static_cast<int>(warm_start->size()) != nv) {
      throw std::invalid_argument("warm start vector length does not match the mesh");
    }
    x = *warm_start;
    for (double v : x) {
      if (!std::isfinite(v)) throw std::invalid_argument("warm start vector is not finite");
    }
    for (auto& v : x) v = std::clamp(v, 0.0, 1.0);
  } else {
    // 0/1 plate indicator followed by one Jacobi averaging pass.
    std::vector<double> indicator(nv, 0.0);
    for (int v : p1) indicator[v] = 1.0;
    auto adjacency = mesh.vertex_adjacency();
    x.assign(nv, 0.0);
    for (int v : free_nodes) {
      const auto& nb = adjacency[v];
      double s = 0.0;
      for (int w : nb) s += indicator[w];
      x[v] = nb.empty() ? 0.0 : s / static_cast<double>(nb.size());
    }
  }
  for (int v : p0) x[v] = 0.0;
  for (int v : p1) x[v] = 1.0;

  if (free_nodes.empty()) {
    out.value = energy_total_cached(cache, x, 0.0);
    out.admissible = true;
    out.converged = true;
    return out;
  }

  // Preconditioner: inverse lumped stiffness diagonal on the free nodes.
  std::vector<double> precond(free_nodes.size());
  for (size_t i = 0; i < free_nodes.size(); ++i) {
    double d = cache.lumped_diagonal()[free_nodes[i]];
    precond[i] = 1.0 / d;
  }

  std::vector<double> grad_full, g, g_new, d, x_trial(x);
  double tol_abs = -1.0;  // anchored to the first stage's initial gradient

  for (double eps : config.epsilon_schedule) {
    StageDiagnostics diag;
    diag.epsilon = eps;
    LbfgsMemory mem;
    mem.capacity = config.quasi_newton_memory;

    double energy = energy_total_cached(cache, x, eps);
    energy_gradient_cached(cache, x, eps, grad_full);
    gather(grad_full, free_nodes, g);
    double gn = norm2(g);
    diag.initial_gradient_norm = gn;
    diag.initial_energy = energy;
    if (tol_abs < 0.0) tol_abs = config.gradient_tolerance * (1.0 + gn);

    int it = 0;
    bool stalled = false;
    // Exit the stage when 20 consecutive iterations neither improve the
    // gradient norm by 1% nor reduce the energy by a measurable relative
    // amount: at double precision the landscape bottoms out slightly above
    // the requested tolerance on some meshes, and grinding on cannot help.
    // On badly conditioned (strongly graded) meshes the gradient norm
    // oscillates with a slow downward envelope, so energy progress alone
    // must keep the stage alive.
    int no_progress = 0;
    double best_gn = gn;
    double best_energy = energy;
    while (it < config.max_iterations && gn > tol_abs && !stalled) {
      d = mem.direction(g, precond);
      double gd = dot(g, d);
      if (!(gd < 0.0)) {
        // Not a descent direction: fall back to preconditioned steepest descent.
        mem.clear();
        for (size_t i = 0; i < d.size(); ++i) d[i] = -g[i] * precond[i];
        gd = dot(g, d);
        if (!(gd < 0.0)) break;  // gradient numerically zero
      }

      double t = 1.0;
      bool accepted = false;
      double e_trial = 0.0;
      for (int bt = 0; bt <= config.line_search.max_backtracks; ++bt) {
        x_trial = x;
        for (size_t i = 0; i < free_nodes.size(); ++i) x_trial[free_nodes[i]] += t * d[i];
        e_trial = energy_total_cached(cache, x_trial, eps);
        if (e_trial <= energy + config.line_search.sufficient_decrease * t * gd) {
          accepted = true;
          break;
        }
        t *= config.line_search.shrink;
      }
      if (!accepted) {
        if (mem.s.empty()) {
          stalled = true;  // even pure descent cannot decrease: at numerical floor
        } else {
          mem.clear();  // retry next iteration with a fresh direction
          ++it;
          if (++no_progress >= 20) stalled = true;
        }
        continue;
      }

      std::vector<double> step(free_nodes.size());
      for (size_t i = 0; i < free_nodes.size(); ++i) step[i] = t * d[i];
      x.swap(x_trial);
      energy = e_trial;
      energy_gradient_cached(cache, x, eps, grad_full);
      gather(grad_full, free_nodes, g_new);
      std::vector<double> yv(free_nodes.size());
      for (size_t i = 0; i < free_nodes.size(); ++i) yv[i] = g_new[i] - g[i];
      mem.push(std::move(step), std::move(yv));
      g.swap(g_new);
      gn = norm2(g);
      bool improved = false;
      if (gn <= 0.99 * best_gn) {
        best_gn = gn;
        improved = true;
      }
      // Armijo steps decrease energy monotonically; advancing the reference
      // only on threshold crossings lets sub-threshold decrements accumulate
      // across the window instead of being lost individually.
      if (energy <= best_energy - 1e-15 * (1.0 + std::abs(best_energy))) {
        best_energy = energy;
        improved = true;
      }
      if (improved) {
        no_progress = 0;
      } else if (++no_progress >= 20) {
        stalled = true;
      }
      ++it;
    }

    // Keep iterates inside the admissible box between stages.
    for (int v : free_nodes) x[v] = std::clamp(x[v], 0.0, 1.0);

    diag.iterations = it;
    diag.final_gradient_norm = gn;
    diag.final_energy = energy_total_cached(cache, x, eps);
    diag.converged = gn <= tol_abs;
    out.stages.push_back(diag);
  }

  out.value = energy_total_cached(cache, x, 0.0);
  out.converged = true;
  for (const auto& s : out.stages) out.converged = out.converged && s.converged;

  out.admissible = true;
  for (int v : p0) out.admissible = out.admissible && x[v] == 0.0;
  for (int v : p1) out.admissible = out.admissible && x[v] == 1.0;
  for (double v : x) out.admissible = out.admissible && std::isfinite(v) && v >= 0.0 && v <= 1.0;
  return out;
}

CapacityResult solve_condenser(const SimplicialMesh& mesh, const ConformalStructure& structure,
                               const Condenser& condenser, const SolverConfig& config) {
  MeshCache cache(mesh);
  CapacityResult r = solve_condenser_cached(cache, structure, condenser, config);
  r.field.mesh = &mesh;  // rebind: the cache referenced the same mesh object
  return r;
}

// ---------------------------------------------------------------------------
// max_combine

ScalarField max_combine(const ScalarField& a, const ScalarField& b) {
  if (a.mesh == nullptr || b.mesh == nullptr) {
    throw std::invalid_argument("max_combine: fields must carry meshes");
  }
  bool same = a.mesh == b.mesh;
  if (!same) {
    same = a.mesh->dim == b.mesh->dim && a.mesh->vertex_count() == b.mesh->vertex_count() &&
           a.mesh->vertices == b.mesh->vertices;
  }
  if (!same || a.values.size() != b.values.size()) {
    throw std::invalid_argument("max_combine: fields live on different meshes");
  }
  ScalarField out = a;
  for (size_t i = 0; i < out.values.size(); ++i) out.values[i] = std::max(a.values[i], b.values[i]);
  return out;
}

// ---------------------------------------------------------------------------
// compact_capacity

namespace {

double stage_radius(const SimplicialMesh& mesh) {
  if (mesh.domain) {
    if (const auto* b = std::get_if<BallSpec>(&mesh.domain->shape)) return b->radius;
    if (const auto* a = std::get_if<AnnulusSpec>(&mesh.domain->shape)) return a->r_outer;
  }
  // Fallback: largest distance of a boundary vertex from the origin-of-mass.
  Vec3 c{};
  for (const auto& v : mesh.vertices) c += v;
  c = c / static_cast<double>(mesh.vertex_count());
  double r = 0.0;
  for (int v : mesh.boundary_nodes) r = std::max(r, (mesh.vertices[v] - c).norm());
  return r;
}

// Least squares y ~ a x + b.
void linear_fit(const std::vector<double>& xs, const std::vector<double>& ys, double& a,
                double& b) {
  double n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double denom = n * sxx - sx * sx;
  if (denom == 0.0) {
    a = 0.0;
    b = sy / n;
    return;
  }
  a = (n * sxy - sx * sy) / denom;
  b = (sy - a * sx) / n;
}

}  // namespace

CompactCapacityResult compact_capacity(const std::vector<SimplicialMesh>& exhaustion,
                                       const ConformalStructure& structure,
                                       const std::vector<int>& compact_nodes,
                                       const SolverConfig& config) {
  config.validate();
  if (exhaustion.empty()) throw std::invalid_argument("compact_capacity: empty exhaustion");
  if (compact_nodes.empty()) throw std::invalid_argument("compact_capacity: empty compact set");
  for (size_t i = 0; i + 1 < exhaustion.size(); ++i) {
    if (!is_prefix_mesh(exhaustion[i], exhaustion[i + 1])) {
      throw std::invalid_argument(
          "compact_capacity: exhaustion stages must be prefix-nested (stage " +
          std::to_string(i) + " is not a prefix of stage " + std::to_string(i + 1) + ")");
    }
  }
  for (int v : compact_nodes) {
    if (v < 0 || v >= exhaustion.front().vertex_count()) {
      throw std::invalid_argument("compact_capacity: compact node outside the innermost stage");
    }
  }

  CompactCapacityResult out;
  std::vector<double> warm;
  for (size_t i = 0; i < exhaustion.size(); ++i) {
    const SimplicialMesh& mesh = exhaustion[i];
    std::set<int> boundary(mesh.boundary_nodes.begin(), mesh.boundary_nodes.end());
    for (int v : compact_nodes) {
      if (boundary.count(v)) {
        throw std::invalid_argument(
            "compact_capacity: the compact set touches the domain boundary at vertex " +
            std::to_string(v) + " (stage " + std::to_string(i) + ")");
      }
    }
    Condenser cond;
    cond.plate0 = mesh.boundary_nodes;
    cond.plate1 = compact_nodes;
    MeshCache cache(mesh);
    warm.resize(mesh.vertex_count(), 0.0);  // zero-extension of the previous witness
    CapacityResult r = solve_condenser_cached(cache, structure, cond, config,
                                              i == 0 ? nullptr : &warm);
    r.field.mesh = &mesh;
    warm = r.field.values;
    CompactStage st;
    st.radius = stage_radius(mesh);
    st.result = std::move(r);
    out.stages.push_back(std::move(st));
  }

  out.monotone_decreasing = true;
  for (size_t i = 0; i + 1 < out.stages.size(); ++i) {
    double a = out.stages[i].result.value, b = out.stages[i + 1].result.value;
    double slack = config.value_tolerance * std::max(1.0, std::fabs(a));
    if (b > a + slack) out.monotone_decreasing = false;
  }

  // Regress stage values against (log R)^{1-n}.  Stages with log R <= 0 have
  // no finite regressor and are excluded; with fewer than two usable stages
  // there is no fit and the extrapolated limit is the last computed value.
  int n = exhaustion.front().dim;
  std::vector<double> xs, ys;
  for (const auto& st : out.stages) {
    double lr = std::log(st.radius);
    if (!(lr > 0.0)) continue;
    xs.push_back(std::pow(lr, 1 - n));
    ys.push_back(st.result.value);
  }
  if (xs.size() >= 2) {
    linear_fit(xs, ys, out.decay_coefficient, out.decay_limit);
    double rss = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
      double pred = out.decay_coefficient * xs[i] + out.decay_limit;
      double scale = std::max(1e-300, std::fabs(ys[i]));
      double rel = (ys[i] - pred) / scale;
      rss += rel * rel;
    }
    out.fit_residual = std::sqrt(rss / xs.size());
  } else {
    out.decay_coefficient = 0.0;
    out.fit_residual = 0.0;
    out.decay_limit = out.stages.back().result.value;
  }
  return out;
}

// ---------------------------------------------------------------------------
// point_capacity_decay

PointDecayResult point_capacity_decay(const SimplicialMesh& mesh,
                                      const ConformalStructure& structure, const Vec3& point,
                                      const std::vector<double>& radii,
                                      const SolverConfig& config) {
  config.validate();
  if (radii.empty()) throw std::invalid_argument("point_capacity_decay: no radii given");
  for (size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw std::invalid_argument("point_capacity_decay: radii must be positive");
    if (i > 0 && !(radii[i] < radii[i - 1])) {
      throw std::invalid_argument("point_capacity_decay: radii must be strictly decreasing");
    }
  }

  double nearest = std::numeric_limits<double>::infinity();
  for (const auto& v : mesh.vertices) nearest = std::min(nearest, (v - point).norm());

  std::set<int> boundary(mesh.boundary_nodes.begin(), mesh.boundary_nodes.end());
  double outer_radius = 0.0;
  for (int v : mesh.boundary_nodes) {
    outer_radius = std::max(outer_radius, (mesh.vertices[v] - point).norm());
  }

  PointDecayResult out;
  out.radii = radii;
  MeshCache cache(mesh);
  std::vector<double> warm;
  for (size_t i = 0; i < radii.size(); ++i) {
    double r = radii[i];
    Condenser cond;
    cond.plate0 = mesh.boundary_nodes;
    double capture = r * (1.0 + 1e-12);
    for (int v = 0; v < mesh.vertex_count(); ++v) {
      if ((mesh.vertices[v] - point).norm() <= capture) {
        if (boundary.count(v)) {
          throw std::invalid_argument(
              "point_capacity_decay: the ball of radius " + std::to_string(r) +
              " reaches the domain boundary");
        }
        cond.plate1.push_back(v);
      }
    }
    if (cond.plate1.empty()) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "point_capacity_decay: radius %.6g captures no vertex; the smallest "
                    "resolvable radius near this point is %.6g",
                    r, nearest);
      throw std::invalid_argument(buf);
    }
    CapacityResult res = solve_condenser_cached(cache, structure, cond, config,
                                                i == 0 ? nullptr : &warm);
    res.field.mesh = &mesh;
    warm = res.field.values;
    out.values.push_back(res.value);
    out.results.push_back(std::move(res));
  }

  out.strictly_decreasing = true;
  for (size_t i = 0; i + 1 < out.values.size(); ++i) {
    if (!(out.values[i + 1] < out.values[i])) out.strictly_decreasing = false;
  }

  if (out.values.size() >= 2) {
    std::vector<double> xs, ys;
    for (size_t i = 0; i < out.values.size(); ++i) {
      if (out.values[i] > 0.0 && outer_radius > radii[i]) {
        xs.push_back(std::log(std::log(outer_radius / radii[i])));
        ys.push_back(std::log(out.values[i]));
      }
    }
    if (xs.size() >= 2) {
      double b = 0.0;
      linear_fit(xs, ys, out.fitted_exponent, b);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// nested_domain_monotonicity_check

NestedCheckResult nested_domain_monotonicity_check(const SimplicialMesh& mesh_small,
                                                   const SimplicialMesh& mesh_large,
                                                   const ConformalStructure& structure,
                                                   const std::string& plate0_tag,
                                                   const std::string& plate1_tag,
                                                   const SolverConfig& config) {
  config.validate();
  auto map = nested_vertex_map(mesh_small, mesh_large);
  if (!map) {
    throw std::invalid_argument(
        "nested_domain_monotonicity_check: the first mesh is not a sub-mesh of the second");
  }
  for (const std::string& tag : {plate0_tag, plate1_tag}) {
    if (!mesh_small.has_region(tag) || !mesh_large.has_region(tag)) {
      throw std::invalid_argument("nested_domain_monotonicity_check: both meshes need region '" +
                                  tag + "'");
    }
    std::vector<int> mapped;
    for (int v : mesh_small.region(tag)) mapped.push_back((*map)[v]);
    std::sort(mapped.begin(), mapped.end());
    if (mapped != mesh_large.region(tag)) {
      throw std::invalid_argument("nested_domain_monotonicity_check: region '" + tag +
                                  "' differs between the meshes");
    }
  }

  Condenser cond_small{mesh_small.region(plate0_tag), mesh_small.region(plate1_tag)};
  Condenser cond_large{mesh_large.region(plate0_tag), mesh_large.region(plate1_tag)};

  NestedCheckResult out;
  out.small_result = solve_condenser(mesh_small, structure, cond_small, config);
  out.large_result = solve_condenser(mesh_large, structure, cond_large, config);
  out.cap_small_domain = out.small_result.value;
  out.cap_large_domain = out.large_result.value;
  double slack = config.value_tolerance * std::max(1.0, std::fabs(out.cap_large_domain));
  out.holds = out.cap_small_domain >= out.cap_large_domain - slack;
  return out;
}

}  // namespace capnum
