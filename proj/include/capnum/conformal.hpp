// Conformal Dirichlet-type energy of piecewise-linear fields.
//
// The metric is e^{2 phi} times the flat chart metric.  For the n-energy
// integral |grad f|_g^n dV_g the factors e^{-n phi} (gradient) and e^{n phi}
// (volume) cancel pointwise, so the energy equals the flat-chart integral of
// |grad f|^n.  The implementation computes the flat form directly: phi is
// evaluated only to check finiteness at quadrature points, never entering
// the arithmetic, which makes conformal invariance exact to the last bit.
//
// Regularized energy (used for continuation in dimension 3):
//   density_eps = (eps^2 + |grad f|^2)^(n/2) - eps^n   per unit chart volume.
// For n = 2 this reduces algebraically to |grad f|^2 and is computed in that
// simplified form, so regularization is a no-op there by construction.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "capnum/geometry.hpp"
#include "capnum/mesh.hpp"

namespace capnum {

struct ConformalStructure {
  // Natural logarithm of the conformal factor: metric = e^{2 log_factor} delta.
  std::function<double(const Vec3&)> log_factor;
  std::string id = "flat";

  static ConformalStructure flat();
  // A single smooth radial bump: amplitude * exp(-|p - center|^2 / (2 width^2)).
  static ConformalStructure radial_bump(double amplitude, double width,
                                        const Vec3& center = {});
  // Sum of a few random Gaussian bumps with centers in a ball of the given
  // radius; smooth, bounded, deterministic in the seed.
  static ConformalStructure random_smooth(std::uint64_t seed, double amplitude,
                                          double region_radius = 1.0);

  double phi(const Vec3& p) const { return log_factor(p); }
};

struct ScalarField {
  const SimplicialMesh* mesh = nullptr;  // non-owning; mesh must outlive field
  std::vector<double> values;            // one value per vertex

  ScalarField() = default;
  explicit ScalarField(const SimplicialMesh& m, double fill = 0.0)
      : mesh(&m), values(m.vertex_count(), fill) {}
};

// Nodal interpolation of a function.
ScalarField sample_field(const SimplicialMesh& mesh, const std::function<double(const Vec3&)>& fn);

struct EnergyBreakdown {
  double total = 0.0;
  std::vector<double> per_element;
};

// ---------------------------------------------------------------------------
// Element geometry cache.  Built once per mesh; shared by energy evaluation
// and the capacity solver's inner loop.

class MeshCache {
 public:
  explicit MeshCache(const SimplicialMesh& mesh);

  const SimplicialMesh& mesh() const { return *mesh_; }
  int element_count() const { return static_cast<int>(vol_.size()); }
  int node_count() const { return mesh_->vertex_count(); }
  int dim() const { return mesh_->dim; }
  double volume(int e) const { return vol_[e]; }
  // Gradients of the dim+1 barycentric basis functions on element e.
  const std::array<Vec3, 4>& basis_gradients(int e) const { return grad_[e]; }
  // Per-node sum over incident elements of |grad lambda_i|^2 * vol; a robust
  // stiffness-diagonal surrogate used for preconditioning.
  const std::vector<double>& lumped_diagonal() const { return lumped_; }

  Vec3 field_gradient(int e, std::span<const double> values) const {
    const auto& s = mesh_->simplices[e];
    Vec3 g{};
    for (int i = 0; i <= mesh_->dim; ++i) g += grad_[e][i] * values[s[i]];
    return g;
  }

 private:
  const SimplicialMesh* mesh_;
  std::vector<double> vol_;
  std::vector<std::array<Vec3, 4>> grad_;
  std::vector<double> lumped_;
};

// ---------------------------------------------------------------------------
// Energy evaluation.  The exponent n equals the mesh dimension.

// Unregularized pointwise density |grad f|^n (per unit conformal volume the
// conformal factors cancel; the returned number is the element's density
// times 1, i.e. the integrand without the volume weight).
double energy_density(const ScalarField& field, int simplex_index,
                      const ConformalStructure& structure);

// Total (and per-element) regularized energy.  epsilon >= 0; epsilon = 0
// gives the exact n-energy.  Throws std::invalid_argument on negative
// epsilon, mismatched field size, or non-finite phi at an element centroid.
EnergyBreakdown total_energy(const ScalarField& field, const ConformalStructure& structure,
                             double epsilon = 0.0);

// Partial derivatives of the regularized total with respect to the listed
// nodes, in list order.  Throws std::invalid_argument on negative epsilon,
// out-of-range nodes, or (per the energy contract) epsilon = 0 with n > 2
// and a zero-gradient element, where the caller must regularize.
std::vector<double> energy_gradient(const ScalarField& field, const ConformalStructure& structure,
                                    double epsilon, const std::vector<int>& free_nodes);

// ---------------------------------------------------------------------------
// Allocation-free kernels over a prebuilt cache (solver hot path).  These
// assume phi was validated once via validate_structure and skip per-call
// checks.

void validate_structure(const MeshCache& cache, const ConformalStructure& structure);

double energy_total_cached(const MeshCache& cache, std::span<const double> values,
                           double epsilon);

// Full-length gradient (one entry per node); the caller masks fixed nodes.
void energy_gradient_cached(const MeshCache& cache, std::span<const double> values,
                            double epsilon, std::vector<double>& grad_out);

}  // namespace capnum
