// Closed-form reference values for radially symmetric condensers and a
// log-log slope fit for convergence studies.
//
// For the round condenser (inner sphere radius r, outer sphere radius R,
// flat metric) the extremal field is radial,
//   u(t) = log(t/r) / log(R/r),
// and the n-capacity is  omega_{n-1} * (log(R/r))^{1-n}  with
// omega_1 = 2 pi (circle length), omega_2 = 4 pi (sphere area).
#pragma once

#include <vector>

#include "capnum/conformal.hpp"
#include "capnum/geometry.hpp"
#include "capnum/mesh.hpp"

namespace capnum {

struct RadialCondenserSpec {
  int dim = 2;
  Vec3 center;
  double r_inner = 0.25;
  double r_outer = 1.0;

  // Throws std::invalid_argument unless dim is 2 or 3 and 0 < r_inner < r_outer.
  void validate() const;
};

// omega_{n-1}: measure of the unit sphere boundary in R^n.
double sphere_area_constant(int dim);

double radial_capacity(const RadialCondenserSpec& spec);

// Nodal interpolation of the exact radial minimizer, clamped to [0, 1]
// (vertices inside the inner ball get 0, outside the outer sphere 1).
ScalarField radial_witness(const SimplicialMesh& mesh, const RadialCondenserSpec& spec);

struct ConvergenceFit {
  double order = 0.0;       // least-squares slope of log(error) vs log(h)
  double intercept = 0.0;   // fitted log-error at log(h) = 0
  std::vector<int> excluded;  // samples with error exactly zero, left out
  bool non_convergent = false;  // slope below 0.25, or too few usable samples
};

// Fit the observed convergence order of `values` toward `reference` on
// meshes of size `mesh_sizes` (same length, all positive).  Samples that
// match the reference exactly have no log-error and are excluded (their
// indices reported).  Throws std::invalid_argument on length mismatch,
// fewer than two samples, or non-positive mesh sizes.
ConvergenceFit convergence_order(const std::vector<double>& values,
                                 const std::vector<double>& mesh_sizes, double reference);

}  // namespace capnum
