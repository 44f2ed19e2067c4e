#pragma once

// Estimation of the Ferrand pseudometric mu(x, y): the infimum, over compact
// connected sets containing both points, of the conformal capacity of the
// set.  Discrete continua are connected edge-paths of mesh vertices; a
// seeded stochastic local search deforms the path to lower its capacity, so
// every reported value is a certified upper bound (the witness path is
// returned and re-solvable).  The same machinery classifies a discretized
// manifold by the asymptotics of probe capacities over an exhaustion:
// decay to zero ("Class I evidence") versus stabilization at a positive
// floor ("Class II evidence").

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "capnum/conformal.hpp"
#include "capnum/mesh.hpp"
#include "capnum/solver.hpp"

namespace capnum {

// A connected edge-path of vertices: the discrete stand-in for a continuum.
// Consecutive entries must be distinct and joined by a mesh edge.  A single
// node is legal and represents the degenerate continuum {x}.
struct PathContinuum {
  const SimplicialMesh* mesh = nullptr;  // non-owning; mesh must outlive path
  std::vector<int> node_sequence;

  int endpoint_a() const { return node_sequence.front(); }
  int endpoint_b() const { return node_sequence.back(); }

  // Sorted unique vertex set of the path (what capacities are taken of).
  std::vector<int> node_set() const;

  // Throws std::invalid_argument unless the sequence is nonempty, indices
  // are valid for `against`, and consecutive nodes share a mesh edge.
  void validate(const SimplicialMesh& against) const;
  void validate() const;  // against *mesh; throws if mesh is null
};

struct SearchDiagnostics {
  int proposals_attempted = 0;
  int proposals_accepted = 0;
  std::uint64_t seed = 0;
  // True when the proposal budget ran out while the search was still finding
  // improvements; false when the search settled (a long rejection streak)
  // before the budget was spent.
  bool budget_exhausted = false;
  double initial_value = 0.0;  // capacity of the initial path
};

struct MuEstimate {
  double value = 0.0;  // capacity of `witness`: an upper bound on discrete mu
  PathContinuum witness;
  CapacityResult capacity_result;
  SearchDiagnostics search_diagnostics;
  // For exhaustion-based estimates: (outer radius, capacity of the witness)
  // per stage, the tail of which is `value`.  Empty for single-mesh calls.
  std::vector<std::pair<double, double>> stage_values;
};

// Capacity of the condenser (outer_plate -> 0, path nodes -> 1).  Throws
// std::invalid_argument when the path overlaps the outer plate.
CapacityResult continuum_capacity(const SimplicialMesh& mesh,
                                  const ConformalStructure& structure,
                                  const PathContinuum& path,
                                  const std::vector<int>& outer_plate,
                                  const SolverConfig& config = {});

// Upper-bound estimate of mu(x, y) on one mesh, grounding the condenser at
// the mesh boundary.  Starts from a shortest edge-path between the points
// (avoiding the boundary), then runs `search_budget` seeded proposals --
// single-node detour insertions, deletions, and relocations, connectivity-
// preserving -- accepting only strict capacity decreases (>= 1e-12, solved
// with warm starts).  x == y is legal and returns the degenerate single-node
// continuum, whose capacity shrinks to zero under refinement.  Deterministic
// given (seed, {x, y}): the endpoint pair is canonicalized, so swapping x
// and y reproduces the identical value with the witness reversed.  Throws
// std::invalid_argument when an endpoint lies on the outer plate or no
// admissible path exists.
MuEstimate estimate_mu(const SimplicialMesh& mesh, const ConformalStructure& structure,
                       int x, int y, const SolverConfig& config = {},
                       int search_budget = 120, std::uint64_t seed = 0);

// Same over an exhaustion (stages from the exhaustion builders): the path
// lives in the innermost stage away from every stage's grounded boundary,
// the search minimizes the capacity on the largest stage (the best upper
// bound for the underlying unbounded manifold), and the returned witness is
// re-evaluated on every stage, giving the decay sequence `stage_values`.
MuEstimate estimate_mu(const std::vector<SimplicialMesh>& exhaustion,
                       const ConformalStructure& structure, int x, int y,
                       const SolverConfig& config = {}, int search_budget = 120,
                       std::uint64_t seed = 0);

struct TriangleCheckResult {
  MuEstimate mu_xy;
  MuEstimate mu_yz;
  MuEstimate mu_xz;
  bool holds = false;  // mu_xz <= mu_xy + mu_yz + slack
};

// Estimates the three pairwise values and checks the triangle inequality.
// The (x, z) search additionally starts from the concatenation of the
// (x, y) and (y, z) witnesses (they share y, so the concatenation is a
// connected path), which makes the inequality structurally robust: the
// union of the two witnesses is itself a candidate whose capacity is
// subadditive up to discretization slack.  `holds` uses a slack of
// 2 * value_tolerance * (1 + mu_xy + mu_yz).
TriangleCheckResult triangle_check(const SimplicialMesh& mesh,
                                   const ConformalStructure& structure, int x, int y,
                                   int z, const SolverConfig& config = {},
                                   int search_budget = 120, std::uint64_t seed = 0);

enum class ClassVerdict { ClassI_evidence, ClassII_evidence, inconclusive };
const char* to_string(ClassVerdict v);

// Asymptotics of probe capacities over an exhaustion, with two competing
// models fitted to the sequence c_i at outer radii R_i:
//   decay to zero:   c ~ a * (log R)^(1-n)   (through the origin)
//   constant floor:  c ~ m
// The affine regression c ~ a * (log R)^(1-n) + b supplies `fitted_limit`.
// Stages whose radius has nonpositive log carry no finite regressor and are
// excluded from the decay fits.
struct ClassificationReport {
  ClassVerdict verdict = ClassVerdict::inconclusive;
  std::vector<std::pair<double, double>> capacity_sequence;  // (R_i, c_i)
  double decay_coefficient = 0.0;  // a of the through-origin decay model
  double decay_residual = 0.0;     // rms relative misfit of that model
  double floor_constant = 0.0;     // m of the constant model (all stages)
  double floor_residual = 0.0;     // rms relative misfit of that model
  double floor_estimate = 0.0;     // mean of the last two values
  double fitted_limit = 0.0;       // extrapolated limit of the affine fit
  bool decreasing = false;         // monotone within solver slack
  bool all_converged = false;
};

// Verdict rules: "Class I evidence" requires a decreasing sequence whose
// extrapolated limit is at most 10% of the first value; "Class II evidence"
// requires the last two values to agree within 5% and the stabilized floor
// to be strictly positive.  When both hold, the model with the smaller
// relative residual wins; when neither does, the report is inconclusive.
// Throws std::invalid_argument with fewer than 3 stages or when the probe
// is invalid on the innermost stage.
ClassificationReport classify(const std::vector<SimplicialMesh>& exhaustion,
                              const ConformalStructure& structure,
                              const PathContinuum& probe,
                              const SolverConfig& config = {});

struct ContinuityProbePoint {
  double radius = 0.0;
  double sup_mu = 0.0;  // largest mu estimate over the sampled pairs
};

// Continuity of mu at the diagonal: for each radius r (strictly decreasing
// list) sample pairs (x_d, y_d) near z +- 0.7 r u_d along seeded fixed
// directions u_d, estimate mu for each pair, and report the largest value.
// Pairs shrink coherently with r, so the sequence decreases down to the
// mesh-resolution floor.  Throws std::invalid_argument when a radius is
// below the mesh resolution at z (no other vertex is that close).
std::vector<ContinuityProbePoint> mu_continuity_probe(
    const SimplicialMesh& mesh, const ConformalStructure& structure, int z,
    const std::vector<double>& radii, const SolverConfig& config = {},
    int pairs_per_radius = 4, int search_budget = 40, std::uint64_t seed = 0);

}  // namespace capnum
