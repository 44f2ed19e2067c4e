#include "capnum/ferrand.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <stdexcept>

#include "capnum/rng.hpp"

namespace capnum {

namespace {

constexpr double kAcceptDecrease = 1e-12;  // strict-improvement threshold

std::uint64_t pair_label(int x, int y) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32) ^
         static_cast<std::uint64_t>(static_cast<std::uint32_t>(y));
}

bool edge_between(const std::vector<std::vector<int>>& adj, int a, int b) {
  const auto& na = adj[a];
  return std::binary_search(na.begin(), na.end(), b);
}

// Nodes adjacent to both a and b (sorted lists intersected), excluding
// forbidden vertices.
std::vector<int> common_neighbors(const std::vector<std::vector<int>>& adj,
                                  const std::vector<char>& forbidden, int a, int b) {
  std::vector<int> out;
  std::set_intersection(adj[a].begin(), adj[a].end(), adj[b].begin(), adj[b].end(),
                        std::back_inserter(out));
  out.erase(std::remove_if(out.begin(), out.end(),
                           [&](int v) { return forbidden[v] != 0; }),
            out.end());
  return out;
}

// Deterministic Dijkstra over mesh edges with Euclidean weights, skipping
// forbidden vertices.  Returns the path a..b inclusive, or empty if none.
std::vector<int> masked_shortest_path(const SimplicialMesh& mesh,
                                      const std::vector<std::vector<int>>& adj,
                                      const std::vector<char>& forbidden, int a, int b) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(mesh.vertex_count(), inf);
  std::vector<int> prev(mesh.vertex_count(), -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  dist[a] = 0.0;
  pq.push({0.0, a});
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    if (v == b) break;
    for (int w : adj[v]) {
      if (forbidden[w]) continue;
      double nd = d + distance(mesh.vertices[v], mesh.vertices[w]);
      if (nd < dist[w]) {
        dist[w] = nd;
        prev[w] = v;
        pq.push({nd, w});
      }
    }
  }
  if (dist[b] == inf) return {};
  std::vector<int> path;
  for (int v = b; v != -1; v = prev[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

// One condenser evaluation context: a fixed grounded plate on a fixed mesh,
// re-solved for varying unit plates with warm starts.
struct Evaluator {
  MeshCache cache;
  const ConformalStructure* structure;
  std::vector<int> plate0;
  SolverConfig config;
  std::vector<double> warm;
  bool has_warm = false;

  Evaluator(const SimplicialMesh& mesh, const ConformalStructure& s,
            std::vector<int> p0, const SolverConfig& cfg)
      : cache(mesh), structure(&s), plate0(std::move(p0)), config(cfg) {}

  CapacityResult solve(const std::vector<int>& plate1) {
    Condenser c;
    c.plate0 = plate0;
    c.plate1 = plate1;
    return solve_condenser_cached(cache, *structure, c, config,
                                  has_warm ? &warm : nullptr);
  }

  void adopt(const CapacityResult& r) {
    warm = r.field.values;
    has_warm = true;
  }
};

struct SearchOutcome {
  std::vector<int> path;
  double value = 0.0;
  CapacityResult result;
  SearchDiagnostics diagnostics;
};

// Stochastic local search over edge-paths with fixed endpoints.  Proposals
// insert, delete, or relocate a single node, each preserving connectivity;
// only strict capacity decreases are accepted.
SearchOutcome search_path(const std::vector<std::vector<int>>& adj,
                          const std::vector<char>& forbidden, Evaluator& eval,
                          std::vector<int> path, Rng rng, int budget,
                          std::uint64_t seed_used) {
  SearchOutcome out;
  out.diagnostics.seed = seed_used;

  std::vector<int> set = path;
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());

  out.result = eval.solve(set);
  out.value = out.result.value;
  out.diagnostics.initial_value = out.value;
  eval.adopt(out.result);

  const int streak_limit = std::max(64, budget / 4);
  int streak = 0;
  int attempted = 0;
  while (attempted < budget && streak < streak_limit) {
    ++attempted;
    int len = static_cast<int>(path.size());
    std::vector<int> proposal = path;
    int kind = rng.next_below(3);
    bool formed = false;

    if (kind == 0 && len >= 2) {  // insert a detour node on a random edge
      int i = rng.next_below(len - 1);
      std::vector<int> cand = common_neighbors(adj, forbidden, path[i], path[i + 1]);
      if (!cand.empty()) {
        int w = cand[rng.next_below(static_cast<int>(cand.size()))];
        proposal.insert(proposal.begin() + i + 1, w);
        formed = true;
      }
    } else if (kind == 1 && len >= 3) {  // delete an interior node
      int i = 1 + rng.next_below(len - 2);
      if (path[i - 1] == path[i + 1]) {
        proposal.erase(proposal.begin() + i, proposal.begin() + i + 2);
        formed = true;
      } else if (edge_between(adj, path[i - 1], path[i + 1])) {
        proposal.erase(proposal.begin() + i);
        formed = true;
      }
    } else if (kind == 2 && len >= 3) {  // relocate an interior node
      int i = 1 + rng.next_below(len - 2);
      std::vector<int> cand = common_neighbors(adj, forbidden, path[i - 1], path[i + 1]);
      cand.erase(std::remove(cand.begin(), cand.end(), path[i]), cand.end());
      if (!cand.empty()) {
        proposal[i] = cand[rng.next_below(static_cast<int>(cand.size()))];
        formed = true;
      }
    }

    if (!formed) {
      ++streak;
      continue;
    }
    std::vector<int> pset = proposal;
    std::sort(pset.begin(), pset.end());
    pset.erase(std::unique(pset.begin(), pset.end()), pset.end());
    if (pset == set) {  // same vertex set, same capacity: nothing to solve
      ++streak;
      continue;
    }

    CapacityResult r = eval.solve(pset);
    if (r.value < out.value - kAcceptDecrease) {
      path = std::move(proposal);
      set = std::move(pset);
      out.value = r.value;
      eval.adopt(r);
      out.result = std::move(r);
      ++out.diagnostics.proposals_accepted;
      streak = 0;
    } else {
      ++streak;
    }
  }
  out.diagnostics.proposals_attempted = attempted;
  out.diagnostics.budget_exhausted = attempted >= budget;
  out.path = std::move(path);
  return out;
}

std::vector<char> forbidden_mask(const SimplicialMesh& mesh) {
  std::vector<char> mask(mesh.vertex_count(), 0);
  for (int v : mesh.boundary_nodes) mask[v] = 1;
  return mask;
}

void check_endpoint(const SimplicialMesh& mesh, const std::vector<char>& forbidden,
                    int v, const char* name) {
  if (v < 0 || v >= mesh.vertex_count()) {
    throw std::invalid_argument(std::string("mu estimate: vertex ") + name +
                                " out of range");
  }
  if (forbidden[v]) {
    throw std::invalid_argument(std::string("mu estimate: vertex ") + name +
                                " lies on the grounded boundary");
  }
}

double relative_rms(const std::vector<double>& values,
                    const std::vector<double>& predictions) {
  double rss = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    double scale = std::max(1e-300, std::fabs(values[i]));
    double rel = (values[i] - predictions[i]) / scale;
    rss += rel * rel;
  }
  return std::sqrt(rss / static_cast<double>(values.size()));
}

}  // namespace

// ---------------------------------------------------------------------------
// PathContinuum

std::vector<int> PathContinuum::node_set() const {
  std::vector<int> s = node_sequence;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

void PathContinuum::validate(const SimplicialMesh& against) const {
  if (node_sequence.empty()) {
    throw std::invalid_argument("path continuum: empty node sequence");
  }
  for (int v : node_sequence) {
    if (v < 0 || v >= against.vertex_count()) {
      throw std::invalid_argument("path continuum: vertex index out of range");
    }
  }
  if (node_sequence.size() == 1) return;
  std::vector<std::vector<int>> adj = against.vertex_adjacency();
  for (size_t i = 0; i + 1 < node_sequence.size(); ++i) {
    int a = node_sequence[i], b = node_sequence[i + 1];
    if (a == b) {
      throw std::invalid_argument("path continuum: repeated consecutive node");
    }
    if (!edge_between(adj, a, b)) {
      char buf[96];
      std::snprintf(buf, sizeof buf,
                    "path continuum: nodes %d and %d are consecutive but share no edge",
                    a, b);
      throw std::invalid_argument(buf);
    }
  }
}

void PathContinuum::validate() const {
  if (mesh == nullptr) {
    throw std::invalid_argument("path continuum: no mesh attached");
  }
  validate(*mesh);
}

// ---------------------------------------------------------------------------
// continuum_capacity

CapacityResult continuum_capacity(const SimplicialMesh& mesh,
                                  const ConformalStructure& structure,
                                  const PathContinuum& path,
                                  const std::vector<int>& outer_plate,
                                  const SolverConfig& config) {
  path.validate(mesh);
  std::vector<int> plate1 = path.node_set();
  std::vector<int> plate0 = outer_plate;
  std::sort(plate0.begin(), plate0.end());
  for (int v : plate1) {
    if (std::binary_search(plate0.begin(), plate0.end(), v)) {
      throw std::invalid_argument("continuum capacity: path overlaps the outer plate");
    }
  }
  Condenser cond;
  cond.plate0 = std::move(plate0);
  cond.plate1 = std::move(plate1);
  return solve_condenser(mesh, structure, cond, config);
}

// ---------------------------------------------------------------------------
// estimate_mu

namespace {

// Shared implementation: `geometry` carries the adjacency the path lives on;
// `eval` solves capacities (its mesh may be a larger exhaustion stage).
MuEstimate estimate_on(const SimplicialMesh& geometry, Evaluator& eval, int x, int y,
                       int search_budget, std::uint64_t seed) {
  std::vector<char> forbidden = forbidden_mask(geometry);
  check_endpoint(geometry, forbidden, x, "x");
  check_endpoint(geometry, forbidden, y, "y");
  if (search_budget < 0) {
    throw std::invalid_argument("mu estimate: negative search budget");
  }

  MuEstimate est;
  est.search_diagnostics.seed = seed;

  if (x == y) {
    // Degenerate continuum {x}: no search; its capacity is the single-node
    // plate value, which shrinks to zero as the mesh resolves the point.
    est.witness.node_sequence = {x};
    est.capacity_result = eval.solve({x});
    est.value = est.capacity_result.value;
    return est;
  }

  // Canonicalize the endpoint order so that swapping x and y runs the
  // identical search: symmetry of the estimate is then structural.
  int a = std::min(x, y), b = std::max(x, y);
  std::vector<std::vector<int>> adj = geometry.vertex_adjacency();
  std::vector<int> init = masked_shortest_path(geometry, adj, forbidden, a, b);
  if (init.empty()) {
    throw std::invalid_argument(
        "mu estimate: no edge-path joins the endpoints away from the grounded boundary");
  }
  Rng rng = Rng(seed).fork(pair_label(a, b));
  SearchOutcome found = search_path(adj, forbidden, eval, std::move(init), rng,
                                    search_budget, seed);
  if (x > y) std::reverse(found.path.begin(), found.path.end());
  est.witness.node_sequence = std::move(found.path);
  est.capacity_result = std::move(found.result);
  est.value = found.value;
  est.search_diagnostics = found.diagnostics;
  return est;
}

}  // namespace

MuEstimate estimate_mu(const SimplicialMesh& mesh, const ConformalStructure& structure,
                       int x, int y, const SolverConfig& config, int search_budget,
                       std::uint64_t seed) {
  config.validate();
  Evaluator eval(mesh, structure, mesh.boundary_nodes, config);
  MuEstimate est = estimate_on(mesh, eval, x, y, search_budget, seed);
  est.witness.mesh = &mesh;
  est.capacity_result.field.mesh = &mesh;
  return est;
}

MuEstimate estimate_mu(const std::vector<SimplicialMesh>& exhaustion,
                       const ConformalStructure& structure, int x, int y,
                       const SolverConfig& config, int search_budget,
                       std::uint64_t seed) {
  if (exhaustion.empty()) {
    throw std::invalid_argument("mu estimate: empty exhaustion");
  }
  config.validate();
  const SimplicialMesh& inner = exhaustion.front();
  const SimplicialMesh& outer = exhaustion.back();

  // The search minimizes the capacity on the largest stage; the path itself
  // stays inside the innermost stage, clear of every grounded boundary.
  Evaluator eval(outer, structure, outer.boundary_nodes, config);
  MuEstimate est = estimate_on(inner, eval, x, y, search_budget, seed);

  // Re-evaluate the witness on every stage: the decay view of the estimate.
  CompactCapacityResult per_stage =
      compact_capacity(exhaustion, structure, est.witness.node_set(), config);
  for (const CompactStage& st : per_stage.stages) {
    est.stage_values.push_back({st.radius, st.result.value});
  }
  est.capacity_result = per_stage.stages.back().result;
  est.value = est.capacity_result.value;
  est.witness.mesh = &inner;
  return est;
}

// ---------------------------------------------------------------------------
// triangle_check

TriangleCheckResult triangle_check(const SimplicialMesh& mesh,
                                   const ConformalStructure& structure, int x, int y,
                                   int z, const SolverConfig& config,
                                   int search_budget, std::uint64_t seed) {
  if (x == y || y == z || x == z) {
    throw std::invalid_argument("triangle check: vertices must be distinct");
  }
  TriangleCheckResult out;
  out.mu_xy = estimate_mu(mesh, structure, x, y, config, search_budget, seed);
  out.mu_yz = estimate_mu(mesh, structure, y, z, config, search_budget, seed);
  out.mu_xz = estimate_mu(mesh, structure, x, z, config, search_budget, seed);

  // Additionally search from the concatenated witnesses: they share y, so
  // joining them yields a connected path from x to z whose capacity is
  // subadditively controlled by the two summands.
  std::vector<int> concat = out.mu_xy.witness.node_sequence;
  concat.insert(concat.end(), out.mu_yz.witness.node_sequence.begin() + 1,
                out.mu_yz.witness.node_sequence.end());
  std::vector<char> forbidden = forbidden_mask(mesh);
  std::vector<std::vector<int>> adj = mesh.vertex_adjacency();
  Evaluator eval(mesh, structure, mesh.boundary_nodes, config);
  Rng rng = Rng(seed).fork(pair_label(x, z)).fork(0x636f6e636174ULL);
  SearchOutcome seeded = search_path(adj, forbidden, eval, std::move(concat), rng,
                                     search_budget, seed);
  if (seeded.value < out.mu_xz.value) {
    out.mu_xz.value = seeded.value;
    out.mu_xz.witness.node_sequence = std::move(seeded.path);
    out.mu_xz.witness.mesh = &mesh;
    out.mu_xz.capacity_result = std::move(seeded.result);
    out.mu_xz.capacity_result.field.mesh = &mesh;
    out.mu_xz.search_diagnostics = seeded.diagnostics;
  }

  double slack =
      2.0 * config.value_tolerance * (1.0 + out.mu_xy.value + out.mu_yz.value);
  out.holds = out.mu_xz.value <= out.mu_xy.value + out.mu_yz.value + slack;
  return out;
}

// ---------------------------------------------------------------------------
// classify

const char* to_string(ClassVerdict v) {
  switch (v) {
    case ClassVerdict::ClassI_evidence: return "ClassI_evidence";
    case ClassVerdict::ClassII_evidence: return "ClassII_evidence";
    default: return "inconclusive";
  }
}

ClassificationReport classify(const std::vector<SimplicialMesh>& exhaustion,
                              const ConformalStructure& structure,
                              const PathContinuum& probe, const SolverConfig& config) {
  if (exhaustion.size() < 3) {
    throw std::invalid_argument("classification needs at least 3 exhaustion stages");
  }
  probe.validate(exhaustion.front());

  CompactCapacityResult seq =
      compact_capacity(exhaustion, structure, probe.node_set(), config);

  ClassificationReport rep;
  rep.decreasing = seq.monotone_decreasing;
  rep.fitted_limit = seq.decay_limit;
  rep.all_converged = true;
  for (const CompactStage& st : seq.stages) {
    rep.capacity_sequence.push_back({st.radius, st.result.value});
    rep.all_converged = rep.all_converged && st.result.converged;
  }
  const size_t k = rep.capacity_sequence.size();
  const int n = exhaustion.front().dim;

  // Through-origin decay model on stages with a finite regressor.
  std::vector<double> xs, ys;
  for (const auto& [radius, value] : rep.capacity_sequence) {
    double lr = std::log(radius);
    if (!(lr > 0.0)) continue;
    xs.push_back(std::pow(lr, 1 - n));
    ys.push_back(value);
  }
  if (xs.size() >= 2) {
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    rep.decay_coefficient = sxx > 0.0 ? sxy / sxx : 0.0;
    std::vector<double> pred(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) pred[i] = rep.decay_coefficient * xs[i];
    rep.decay_residual = relative_rms(ys, pred);
  } else {
    rep.decay_coefficient = 0.0;
    rep.decay_residual = std::numeric_limits<double>::infinity();
  }

  // Constant-floor model over all stages.
  std::vector<double> all(k), mpred(k);
  double mean = 0.0;
  for (size_t i = 0; i < k; ++i) {
    all[i] = rep.capacity_sequence[i].second;
    mean += all[i];
  }
  mean /= static_cast<double>(k);
  rep.floor_constant = mean;
  std::fill(mpred.begin(), mpred.end(), mean);
  rep.floor_residual = relative_rms(all, mpred);
  rep.floor_estimate = 0.5 * (all[k - 2] + all[k - 1]);

  double first = all.front();
  double last = all[k - 1], prev = all[k - 2];
  bool class_one = rep.decreasing && rep.fitted_limit <= 0.1 * first;
  bool stable =
      std::fabs(last - prev) <= 0.05 * std::max(std::fabs(last), std::fabs(prev));
  bool class_two = stable && rep.floor_estimate > 0.0;

  if (class_one && class_two) {
    rep.verdict = rep.decay_residual <= rep.floor_residual
                      ? ClassVerdict::ClassI_evidence
                      : ClassVerdict::ClassII_evidence;
  } else if (class_one) {
    rep.verdict = ClassVerdict::ClassI_evidence;
  } else if (class_two) {
    rep.verdict = ClassVerdict::ClassII_evidence;
  } else {
    rep.verdict = ClassVerdict::inconclusive;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// mu_continuity_probe

std::vector<ContinuityProbePoint> mu_continuity_probe(
    const SimplicialMesh& mesh, const ConformalStructure& structure, int z,
    const std::vector<double>& radii, const SolverConfig& config,
    int pairs_per_radius, int search_budget, std::uint64_t seed) {
  config.validate();
  std::vector<char> forbidden = forbidden_mask(mesh);
  check_endpoint(mesh, forbidden, z, "z");
  if (radii.empty()) throw std::invalid_argument("continuity probe: no radii given");
  for (size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) {
      throw std::invalid_argument("continuity probe: radii must be positive");
    }
    if (i > 0 && !(radii[i] < radii[i - 1])) {
      throw std::invalid_argument("continuity probe: radii must be strictly decreasing");
    }
  }
  if (pairs_per_radius < 1) {
    throw std::invalid_argument("continuity probe: need at least one pair per radius");
  }

  const Vec3 center = mesh.vertices[z];

  // Fixed sampling directions shared by every radius, so the sampled pairs
  // shrink coherently as the radius does.
  Rng dir_rng = Rng(seed).fork(0x646972ULL);
  std::vector<Vec3> dirs;
  for (int d = 0; d < pairs_per_radius; ++d) {
    if (mesh.dim == 2) {
      double a = dir_rng.uniform(0.0, 2.0 * std::numbers::pi);
      dirs.push_back({std::cos(a), std::sin(a), 0.0});
    } else {
      double w = dir_rng.uniform(-1.0, 1.0);
      double a = dir_rng.uniform(0.0, 2.0 * std::numbers::pi);
      double s = std::sqrt(std::max(0.0, 1.0 - w * w));
      dirs.push_back({s * std::cos(a), s * std::sin(a), w});
    }
  }

  std::vector<ContinuityProbePoint> out;
  std::map<std::pair<int, int>, double> memo;
  for (double r : radii) {
    // Non-boundary vertices inside the ball; the radius must resolve at
    // least one vertex besides z.
    std::vector<int> ball;
    double nearest_other = std::numeric_limits<double>::infinity();
    for (int v = 0; v < mesh.vertex_count(); ++v) {
      if (forbidden[v]) continue;
      double d = distance(mesh.vertices[v], center);
      if (v != z) nearest_other = std::min(nearest_other, d);
      if (d <= r) ball.push_back(v);
    }
    if (ball.size() < 2) {
      char buf[128];
      std::snprintf(buf, sizeof buf,
                    "continuity probe: radius %.6g is below the mesh resolution; "
                    "the smallest resolvable radius here is %.6g",
                    r, nearest_other);
      throw std::invalid_argument(buf);
    }

    auto nearest_in_ball = [&](const Vec3& target) {
      int best = ball.front();
      double bd = distance(mesh.vertices[best], target);
      for (int v : ball) {
        double d = distance(mesh.vertices[v], target);
        if (d < bd) {
          bd = d;
          best = v;
        }
      }
      return best;
    };

    double sup = 0.0;
    for (const Vec3& u : dirs) {
      Vec3 pa{center.x + 0.7 * r * u.x, center.y + 0.7 * r * u.y,
              center.z + 0.7 * r * u.z};
      Vec3 pb{center.x - 0.7 * r * u.x, center.y - 0.7 * r * u.y,
              center.z - 0.7 * r * u.z};
      int x = nearest_in_ball(pa);
      int y = nearest_in_ball(pb);
      std::pair<int, int> key{std::min(x, y), std::max(x, y)};
      auto it = memo.find(key);
      double value;
      if (it != memo.end()) {
        value = it->second;
      } else {
        value = estimate_mu(mesh, structure, key.first, key.second, config,
                            search_budget, seed)
                    .value;
        memo.emplace(key, value);
      }
      sup = std::max(sup, value);
    }
    out.push_back({r, sup});
  }
  return out;
}

}  // namespace capnum
