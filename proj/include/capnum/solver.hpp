// Discrete condenser capacities by energy minimization.
//
// A condenser fixes a field to 0 on plate0 and 1 on plate1; the capacity is
// the infimum of the conformal n-energy over such fields.  The solver runs
// epsilon-continuation (warm-started stages over a decreasing regularization
// schedule) with a limited-memory quasi-Newton descent, preconditioned by
// the lumped stiffness diagonal, and Armijo backtracking.  Free nodal values
// are clamped to [0, 1] after every stage; the reported value is always the
// exact (epsilon = 0) energy of the returned witness, so it is an upper
// bound for the discrete capacity regardless of convergence.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "capnum/conformal.hpp"
#include "capnum/mesh.hpp"

namespace capnum {

struct Condenser {
  std::vector<int> plate0;  // field = 0 here
  std::vector<int> plate1;  // field = 1 here

  // Throws std::invalid_argument on out-of-range indices or overlapping
  // plates.  Empty plates are legal (the capacity is 0 by convention).
  void validate(const SimplicialMesh& mesh) const;
};

struct LineSearchConfig {
  double shrink = 0.5;               // step multiplier per backtrack
  double sufficient_decrease = 1e-4; // Armijo constant
  int max_backtracks = 40;
};

struct SolverConfig {
  std::vector<double> epsilon_schedule{1e-1, 1e-2, 1e-3, 1e-4};
  // Relative target: a stage stops at tol * (1 + |g_initial|), anchored to
  // the first stage's starting gradient.  The default sits safely above the
  // double-precision evaluation floor of mid-sized problems while keeping
  // the induced value error orders of magnitude below discretization error.
  double gradient_tolerance = 1e-7;
  int max_iterations = 500;          // per continuation stage
  LineSearchConfig line_search;
  int quasi_newton_memory = 8;
  // Slack used by downstream comparisons (monotonicity, symmetry, triangle
  // checks); scaled by the magnitude of the values involved.
  double value_tolerance = 1e-6;

  void validate() const;  // throws std::invalid_argument
};

struct StageDiagnostics {
  double epsilon = 0.0;
  int iterations = 0;
  double initial_gradient_norm = 0.0;
  double final_gradient_norm = 0.0;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  bool converged = false;
};

struct CapacityResult {
  double value = 0.0;   // exact energy of `field` (never an epsilon value)
  ScalarField field;
  std::vector<StageDiagnostics> stages;
  bool admissible = false;        // plate constraints hold and values lie in [0, 1]
  bool converged = false;         // every stage met its gradient tolerance
  bool degenerate_plate = false;  // a plate was empty; value 0 by convention

  int total_iterations() const;
  double final_gradient_norm() const;
  double final_epsilon() const;
};

CapacityResult solve_condenser(const SimplicialMesh& mesh, const ConformalStructure& structure,
                               const Condenser& condenser, const SolverConfig& config = {});

// Same, over a prebuilt cache, optionally warm-started from a full-length
// nodal vector (plate values are overwritten by the constraints).
CapacityResult solve_condenser_cached(const MeshCache& cache, const ConformalStructure& structure,
                                      const Condenser& condenser, const SolverConfig& config,
                                      const std::vector<double>* warm_start = nullptr);

// Nodal maximum of two fields on the same mesh (used to certify
// subadditivity: the max of two admissible witnesses is admissible for the
// union condenser).  Throws std::invalid_argument on mismatched meshes.
ScalarField max_combine(const ScalarField& a, const ScalarField& b);

// ---------------------------------------------------------------------------
// Compact-set capacity via an exhaustion.
//
// The stages must share their inner structure (each one an exact prefix of
// the next, as produced by the exhaustion builders).  Stage i solves the
// condenser (boundary of stage i, compact_nodes); zero-extension of a
// witness to the next stage costs no extra energy, so the value sequence
// decreases up to solver slack.  The limit is estimated by fitting
//   value ~ a * (log R)^(1-n) + b.

struct CompactStage {
  double radius = 0.0;
  CapacityResult result;
};

struct CompactCapacityResult {
  std::vector<CompactStage> stages;
  bool monotone_decreasing = true;  // within value_tolerance-scaled slack
  double decay_coefficient = 0.0;   // fitted a
  double decay_limit = 0.0;         // fitted b: the extrapolated capacity
  double fit_residual = 0.0;        // rms relative misfit
};

CompactCapacityResult compact_capacity(const std::vector<SimplicialMesh>& exhaustion,
                                       const ConformalStructure& structure,
                                       const std::vector<int>& compact_nodes,
                                       const SolverConfig& config = {});

// ---------------------------------------------------------------------------
// Capacity of shrinking balls around a point (singleton capacity probe).
// `radii` strictly decreasing.  Throws std::invalid_argument when a radius
// captures no vertex, naming the smallest resolvable radius.

struct PointDecayResult {
  std::vector<double> radii;
  std::vector<double> values;
  std::vector<CapacityResult> results;
  bool strictly_decreasing = false;
  double fitted_exponent = 0.0;  // slope of log(value) vs log(log(R/r))
};

PointDecayResult point_capacity_decay(const SimplicialMesh& mesh,
                                      const ConformalStructure& structure, const Vec3& point,
                                      const std::vector<double>& radii,
                                      const SolverConfig& config = {});

// ---------------------------------------------------------------------------
// Monotonicity check for a condenser living in a sub-domain.
//
// `mesh_small` must be a sub-mesh of `mesh_large` (exact vertex matching);
// both carry the same two plates under the given tags.  Restricting the
// admissible class to the smaller domain cannot lower the discrete optimum,
// so cap(small) >= cap(large) - slack must hold whenever the plates shield
// the interface (the configurations this check is designed for).

struct NestedCheckResult {
  double cap_small_domain = 0.0;
  double cap_large_domain = 0.0;
  bool holds = false;
  CapacityResult small_result;
  CapacityResult large_result;
};

NestedCheckResult nested_domain_monotonicity_check(const SimplicialMesh& mesh_small,
                                                   const SimplicialMesh& mesh_large,
                                                   const ConformalStructure& structure,
                                                   const std::string& plate0_tag,
                                                   const std::string& plate1_tag,
                                                   const SolverConfig& config = {});

}  // namespace capnum
