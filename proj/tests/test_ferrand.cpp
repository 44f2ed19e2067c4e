#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "capnum/ferrand.hpp"
#include "capnum/mesh.hpp"
#include "capnum/oracle.hpp"
#include "capnum/solver.hpp"

using namespace capnum;

namespace {

SimplicialMesh disk_mesh(double radius, double h) {
  DomainSpec d;
  d.dim = 2;
  d.shape = BallSpec{{}, radius};
  d.target_edge_length = h;
  return build_mesh(d);
}

SimplicialMesh ring_mesh(double r, double R, double h) {
  DomainSpec d;
  d.dim = 2;
  d.shape = AnnulusSpec{{}, r, R};
  d.target_edge_length = h;
  return build_mesh(d);
}

// All interior vertices lying on the circle of radius nearest `target`,
// ordered by angle (consecutive ring nodes share mesh edges).
std::vector<int> ring_path(const SimplicialMesh& mesh, double target) {
  std::vector<char> on_boundary(mesh.vertex_count(), 0);
  for (int v : mesh.boundary_nodes) on_boundary[v] = 1;
  int nearest = -1;
  double best = 1e300;
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (on_boundary[v]) continue;
    double d = std::fabs(mesh.vertices[v].norm() - target);
    if (d < best) {
      best = d;
      nearest = v;
    }
  }
  REQUIRE(nearest >= 0);
  double rstar = mesh.vertices[nearest].norm();
  std::vector<int> ring;
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (!on_boundary[v] && std::fabs(mesh.vertices[v].norm() - rstar) <= 1e-9 * rstar) {
      ring.push_back(v);
    }
  }
  std::sort(ring.begin(), ring.end(), [&](int a, int b) {
    return std::atan2(mesh.vertices[a].y, mesh.vertices[a].x) <
           std::atan2(mesh.vertices[b].y, mesh.vertices[b].x);
  });
  return ring;
}

int vertex_nearest(const SimplicialMesh& mesh, const Vec3& p) {
  std::vector<char> on_boundary(mesh.vertex_count(), 0);
  for (int v : mesh.boundary_nodes) on_boundary[v] = 1;
  int best = -1;
  double bd = 1e300;
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (on_boundary[v]) continue;
    double d = distance(mesh.vertices[v], p);
    if (d < bd) {
      bd = d;
      best = v;
    }
  }
  REQUIRE(best >= 0);
  return best;
}

}  // namespace

TEST_CASE("path continuum validation accepts edge-paths and rejects everything else") {
  SimplicialMesh mesh = disk_mesh(1.0, 0.2);
  std::vector<std::vector<int>> adj = mesh.vertex_adjacency();

  PathContinuum ok;
  ok.mesh = &mesh;
  ok.node_sequence = {0, adj[0].front()};
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.endpoint_a() == 0);
  CHECK(ok.endpoint_b() == adj[0].front());

  PathContinuum single;
  single.node_sequence = {3};
  CHECK_NOTHROW(single.validate(mesh));

  PathContinuum empty;
  CHECK_THROWS_AS(empty.validate(mesh), std::invalid_argument);

  PathContinuum out_of_range;
  out_of_range.node_sequence = {0, mesh.vertex_count()};
  CHECK_THROWS_AS(out_of_range.validate(mesh), std::invalid_argument);

  PathContinuum repeated;
  repeated.node_sequence = {0, 0};
  CHECK_THROWS_AS(repeated.validate(mesh), std::invalid_argument);

  // Two vertices on opposite sides of the disk share no edge.
  int far_v = vertex_nearest(mesh, {0.7, 0.0, 0.0});
  int far_w = vertex_nearest(mesh, {-0.7, 0.0, 0.0});
  PathContinuum disconnected;
  disconnected.node_sequence = {far_v, far_w};
  CHECK_THROWS_AS(disconnected.validate(mesh), std::invalid_argument);

  PathContinuum no_mesh;
  no_mesh.node_sequence = {0};
  CHECK_THROWS_AS(no_mesh.validate(), std::invalid_argument);

  PathContinuum dup;
  dup.node_sequence = {0, adj[0].front(), 0};
  std::vector<int> set = dup.node_set();
  CHECK(set == std::vector<int>{0, adj[0].front()});
}

TEST_CASE("continuum capacity of the full inner ring matches the radial closed form") {
  SimplicialMesh mesh = ring_mesh(0.25, 1.0, 0.05);
  PathContinuum rim;
  rim.mesh = &mesh;
  std::vector<int> inner, outer;
  for (int v : mesh.boundary_nodes) {
    if (mesh.vertices[v].norm() < 0.5) {
      inner.push_back(v);
    } else {
      outer.push_back(v);
    }
  }
  std::sort(inner.begin(), inner.end(), [&](int a, int b) {
    return std::atan2(mesh.vertices[a].y, mesh.vertices[a].x) <
           std::atan2(mesh.vertices[b].y, mesh.vertices[b].x);
  });
  rim.node_sequence = inner;
  CHECK_NOTHROW(rim.validate());

  CapacityResult res = continuum_capacity(mesh, ConformalStructure::flat(), rim, outer);
  RadialCondenserSpec spec;
  spec.dim = 2;
  spec.r_inner = 0.25;
  spec.r_outer = 1.0;
  double exact = radial_capacity(spec);
  CHECK(res.admissible);
  CHECK(std::fabs(res.value - exact) / exact < 0.02);

  // Path overlapping the outer plate is rejected.
  PathContinuum bad;
  bad.node_sequence = {outer.front()};
  CHECK_THROWS_AS(
      continuum_capacity(mesh, ConformalStructure::flat(), bad, outer),
      std::invalid_argument);
}

TEST_CASE("mu estimates are deterministic, symmetric, and certified upper bounds") {
  SimplicialMesh mesh = disk_mesh(1.0, 0.1);
  int x = vertex_nearest(mesh, {-0.4, 0.05, 0.0});
  int y = vertex_nearest(mesh, {0.45, -0.1, 0.0});
  REQUIRE(x != y);

  MuEstimate a = estimate_mu(mesh, ConformalStructure::flat(), x, y, {}, 60, 7);
  MuEstimate b = estimate_mu(mesh, ConformalStructure::flat(), x, y, {}, 60, 7);
  CHECK(a.value == b.value);
  CHECK(a.witness.node_sequence == b.witness.node_sequence);
  CHECK(a.search_diagnostics.proposals_attempted == b.search_diagnostics.proposals_attempted);
  CHECK(a.search_diagnostics.proposals_accepted == b.search_diagnostics.proposals_accepted);

  // Swapped endpoints run the identical canonicalized search.
  MuEstimate c = estimate_mu(mesh, ConformalStructure::flat(), y, x, {}, 60, 7);
  CHECK(c.value == a.value);
  std::vector<int> reversed = c.witness.node_sequence;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(reversed == a.witness.node_sequence);
  CHECK(a.witness.endpoint_a() == x);
  CHECK(c.witness.endpoint_a() == y);

  // The search never worsens the initial path, and the witness re-solves to
  // the reported value.
  CHECK(a.value <= a.search_diagnostics.initial_value * (1.0 + 1e-12));
  CHECK(a.value > 0.0);
  CapacityResult re = continuum_capacity(mesh, ConformalStructure::flat(), a.witness,
                                         mesh.boundary_nodes);
  CHECK(std::fabs(re.value - a.value) <= 1e-6 * (1.0 + a.value));

  // The witness is a valid path joining the endpoints.
  CHECK_NOTHROW(a.witness.validate(mesh));
}

TEST_CASE("degenerate mu estimate returns the single-node continuum and shrinks under refinement") {
  SimplicialMesh coarse = disk_mesh(1.0, 0.2);
  MuEstimate e0 = estimate_mu(coarse, ConformalStructure::flat(), 0, 0, {}, 40, 3);
  CHECK(e0.witness.node_sequence == std::vector<int>{0});
  CHECK(e0.value > 0.0);
  CHECK(e0.search_diagnostics.proposals_attempted == 0);

  SimplicialMesh fine = refine(coarse);
  SimplicialMesh finer = refine(fine);
  MuEstimate e1 = estimate_mu(fine, ConformalStructure::flat(), 0, 0, {}, 40, 3);
  MuEstimate e2 = estimate_mu(finer, ConformalStructure::flat(), 0, 0, {}, 40, 3);
  CHECK(e1.value < e0.value);
  CHECK(e2.value < e1.value);
}

TEST_CASE("mu estimate rejects boundary endpoints and bad budgets") {
  SimplicialMesh mesh = disk_mesh(1.0, 0.2);
  int bd = mesh.boundary_nodes.front();
  CHECK_THROWS_AS(estimate_mu(mesh, ConformalStructure::flat(), bd, 0, {}, 10, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(estimate_mu(mesh, ConformalStructure::flat(), 0, bd, {}, 10, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(estimate_mu(mesh, ConformalStructure::flat(), 0, 1, {}, -1, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(estimate_mu(mesh, ConformalStructure::flat(), -1, 0, {}, 10, 0),
                  std::invalid_argument);
}

TEST_CASE("mu estimate over an exhaustion reports a decaying stage sequence") {
  auto stages = build_ball_exhaustion(2, {}, {1.0, 2.0, 4.0}, 0.15);
  const SimplicialMesh& inner = stages.front();
  int x = vertex_nearest(inner, {-0.35, 0.0, 0.0});
  int y = vertex_nearest(inner, {0.35, 0.1, 0.0});
  REQUIRE(x != y);

  MuEstimate est = estimate_mu(stages, ConformalStructure::flat(), x, y, {}, 30, 11);
  REQUIRE(est.stage_values.size() == 3);
  CHECK(est.stage_values[0].first == 1.0);
  CHECK(est.stage_values[2].first == 4.0);
  // Capacity falls as the ground recedes (Class I decay of the plane).
  CHECK(est.stage_values[0].second > est.stage_values[1].second);
  CHECK(est.stage_values[1].second > est.stage_values[2].second);
  CHECK(est.value == est.stage_values[2].second);
  // The witness lives in the innermost stage.
  for (int v : est.witness.node_sequence) CHECK(v < inner.vertex_count());
  CHECK_NOTHROW(est.witness.validate(inner));
}

TEST_CASE("triangle inequality holds with concatenation seeding") {
  SimplicialMesh mesh = disk_mesh(1.0, 0.12);
  ConformalStructure flat = ConformalStructure::flat();

  // A few scattered triples, plus a collinear one.
  struct Triple {
    Vec3 a, b, c;
  };
  std::vector<Triple> triples{
      {{-0.5, 0.1, 0.0}, {0.1, 0.4, 0.0}, {0.4, -0.35, 0.0}},
      {{-0.3, -0.4, 0.0}, {0.0, 0.0, 0.0}, {0.45, 0.2, 0.0}},
      {{-0.5, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.5, 0.0, 0.0}},  // collinear
  };
  int seed = 0;
  for (const Triple& t : triples) {
    int x = vertex_nearest(mesh, t.a);
    int y = vertex_nearest(mesh, t.b);
    int z = vertex_nearest(mesh, t.c);
    REQUIRE(x != y);
    REQUIRE(y != z);
    REQUIRE(x != z);
    TriangleCheckResult res = triangle_check(mesh, flat, x, y, z, {}, 30, 100 + seed++);
    CHECK(res.holds);
    CHECK(res.mu_xy.value > 0.0);
    CHECK(res.mu_yz.value > 0.0);
    CHECK(res.mu_xz.value > 0.0);
    CHECK(res.mu_xz.value <= res.mu_xy.value + res.mu_yz.value +
                                 2e-6 * (1.0 + res.mu_xy.value + res.mu_yz.value));
  }

  CHECK_THROWS_AS(triangle_check(mesh, flat, 0, 0, 1, {}, 10, 0), std::invalid_argument);
}

TEST_CASE("classifier reports decay evidence for the plane") {
  auto stages = build_ball_exhaustion(2, {}, {2.0, 4.0, 8.0}, 0.15);
  PathContinuum probe;
  probe.mesh = &stages.front();
  probe.node_sequence = ring_path(stages.front(), 1.0);
  REQUIRE(probe.node_sequence.size() >= 6);
  CHECK_NOTHROW(probe.validate(stages.front()));

  ClassificationReport rep = classify(stages, ConformalStructure::flat(), probe);
  CHECK(rep.verdict == ClassVerdict::ClassI_evidence);
  CHECK(rep.decreasing);
  REQUIRE(rep.capacity_sequence.size() == 3);
  CHECK(rep.capacity_sequence[0].second > rep.capacity_sequence[2].second);
  CHECK(rep.fitted_limit <= 0.1 * rep.capacity_sequence[0].second);
  CHECK(rep.decay_coefficient > 0.0);
  CHECK(std::string(to_string(rep.verdict)) == "ClassI_evidence");
}

TEST_CASE("classifier reports a stable floor for the plane minus a disk") {
  double e8 = std::exp(8.0), e16 = std::exp(16.0), e32 = std::exp(32.0);
  auto stages = build_shell_exhaustion(2, {}, 0.5, {e8, e16, e32}, 0.15);
  PathContinuum probe;
  probe.mesh = &stages.front();
  probe.node_sequence = ring_path(stages.front(), 1.0);
  REQUIRE(probe.node_sequence.size() >= 6);

  ClassificationReport rep = classify(stages, ConformalStructure::flat(), probe);
  CHECK(rep.verdict == ClassVerdict::ClassII_evidence);
  REQUIRE(rep.capacity_sequence.size() == 3);
  double last = rep.capacity_sequence[2].second;
  double prev = rep.capacity_sequence[1].second;
  CHECK(std::fabs(last - prev) <= 0.05 * std::max(last, prev));
  CHECK(rep.floor_estimate > 0.0);
  // The floor is the capacity against the excised disk's rim; the probe ring
  // sits at roughly unit radius, so compare against the radial closed form.
  RadialCondenserSpec spec;
  spec.dim = 2;
  spec.r_inner = 0.5;
  spec.r_outer = 1.0;
  double floor_reference = radial_capacity(spec);
  CHECK(rep.floor_estimate > 0.8 * floor_reference);

  CHECK_THROWS_AS(
      classify({stages[0], stages[1]}, ConformalStructure::flat(), probe),
      std::invalid_argument);
}

TEST_CASE("mu continuity probe decreases toward the diagonal") {
  SimplicialMesh mesh = disk_mesh(1.0, 0.1);
  int z = vertex_nearest(mesh, {0.0, 0.0, 0.0});
  auto probe = mu_continuity_probe(mesh, ConformalStructure::flat(), z,
                                   {0.5, 0.25, 0.125}, {}, 3, 20, 5);
  REQUIRE(probe.size() == 3);
  CHECK(probe[0].radius == 0.5);
  CHECK(probe[0].sup_mu > probe[1].sup_mu);
  CHECK(probe[1].sup_mu > probe[2].sup_mu);
  CHECK(probe[2].sup_mu > 0.0);

  // A radius below the local mesh resolution is rejected with a diagnostic.
  CHECK_THROWS_AS(mu_continuity_probe(mesh, ConformalStructure::flat(), z, {1e-6}, {},
                                      2, 10, 5),
                  std::invalid_argument);
  // Boundary base points are rejected.
  CHECK_THROWS_AS(mu_continuity_probe(mesh, ConformalStructure::flat(),
                                      mesh.boundary_nodes.front(), {0.3}, {}, 2, 10, 5),
                  std::invalid_argument);
}
