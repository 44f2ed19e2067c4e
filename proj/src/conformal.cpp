#include "capnum/conformal.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "capnum/rng.hpp"

namespace capnum {

namespace {

Vec3 rot90(const Vec3& v) { return {-v.y, v.x, 0.0}; }

// Regularized density per unit volume as a function of s = |grad f|^2.
// n = 2 uses the algebraically simplified form so that epsilon is inert.
inline double density_from_s(double s, int n, double epsilon) {
  if (n == 2) return s;
  double t = epsilon * epsilon + s;
  return t * std::sqrt(t) - epsilon * epsilon * epsilon;
}

// d(density)/ds.
inline double density_slope_from_s(double s, int n, double epsilon) {
  if (n == 2) return 1.0;
  return 1.5 * std::sqrt(epsilon * epsilon + s);
}

}  // namespace

// ---------------------------------------------------------------------------
// ConformalStructure factories

ConformalStructure ConformalStructure::flat() {
  ConformalStructure g;
  g.log_factor = [](const Vec3&) { return 0.0; };
  g.id = "flat";
  return g;
}

ConformalStructure ConformalStructure::radial_bump(double amplitude, double width,
                                                   const Vec3& center) {
  if (!(width > 0.0)) throw std::invalid_argument("radial_bump: width must be positive");
  ConformalStructure g;
  g.log_factor = [amplitude, width, center](const Vec3& p) {
    double d2 = (p - center).norm2();
    return amplitude * std::exp(-d2 / (2.0 * width * width));
  };
  g.id = "radial_bump";
  return g;
}

ConformalStructure ConformalStructure::random_smooth(std::uint64_t seed, double amplitude,
                                                     double region_radius) {
  if (!(region_radius > 0.0)) {
    throw std::invalid_argument("random_smooth: region_radius must be positive");
  }
  struct Bump {
    Vec3 center;
    double amp, inv_two_w2;
  };
  std::vector<Bump> bumps;
  Rng rng(seed);
  for (int i = 0; i < 6; ++i) {
    Bump b;
    b.center = {rng.uniform(-0.8, 0.8) * region_radius, rng.uniform(-0.8, 0.8) * region_radius,
                rng.uniform(-0.8, 0.8) * region_radius};
    b.amp = rng.uniform(-1.0, 1.0) * amplitude;
    double w = rng.uniform(0.3, 0.8) * region_radius;
    b.inv_two_w2 = 1.0 / (2.0 * w * w);
    bumps.push_back(b);
  }
  ConformalStructure g;
  g.log_factor = [bumps](const Vec3& p) {
    double phi = 0.0;
    for (const auto& b : bumps) phi += b.amp * std::exp(-(p - b.center).norm2() * b.inv_two_w2);
    return phi;
  };
  g.id = "random_smooth_" + std::to_string(seed);
  return g;
}

ScalarField sample_field(const SimplicialMesh& mesh,
                         const std::function<double(const Vec3&)>& fn) {
  ScalarField f(mesh);
  for (int v = 0; v < mesh.vertex_count(); ++v) f.values[v] = fn(mesh.vertices[v]);
  return f;
}

// ---------------------------------------------------------------------------
// MeshCache

MeshCache::MeshCache(const SimplicialMesh& mesh) : mesh_(&mesh) {
  int ne = mesh.simplex_count();
  vol_.resize(ne);
  grad_.resize(ne);
  lumped_.assign(mesh.vertex_count(), 0.0);
  for (int e = 0; e < ne; ++e) {
    const auto& s = mesh.simplices[e];
    if (mesh.dim == 2) {
      const Vec3 &a = mesh.vertices[s[0]], &b = mesh.vertices[s[1]], &c = mesh.vertices[s[2]];
      double two_area = ((b - a).cross(c - a)).z;
      assert(two_area > 0.0);
      vol_[e] = 0.5 * two_area;
      grad_[e][0] = rot90(c - b) / two_area;
      grad_[e][1] = rot90(a - c) / two_area;
      grad_[e][2] = rot90(b - a) / two_area;
      grad_[e][3] = Vec3{};
    } else {
      const Vec3 &a = mesh.vertices[s[0]], &b = mesh.vertices[s[1]], &c = mesh.vertices[s[2]],
                 &d = mesh.vertices[s[3]];
      double six_vol = (b - a).cross(c - a).dot(d - a);
      assert(six_vol > 0.0);
      vol_[e] = six_vol / 6.0;
      grad_[e][0] = (d - b).cross(c - b) / six_vol;
      grad_[e][1] = (c - a).cross(d - a) / six_vol;
      grad_[e][2] = (d - a).cross(b - a) / six_vol;
      grad_[e][3] = (b - a).cross(c - a) / six_vol;
    }
    for (int i = 0; i <= mesh.dim; ++i) {
      lumped_[s[i]] += grad_[e][i].norm2() * vol_[e];
    }
  }
}

// ---------------------------------------------------------------------------
// Checked public evaluation

namespace {

void check_field(const ScalarField& field) {
  if (field.mesh == nullptr) throw std::invalid_argument("field has no mesh");
  if (static_cast<int>(field.values.size()) != field.mesh->vertex_count()) {
    throw std::invalid_argument("field has " + std::to_string(field.values.size()) +
                                " values for " + std::to_string(field.mesh->vertex_count()) +
                                " vertices");
  }
}

void check_phi_finite(const ConformalStructure& structure, const Vec3& p) {
  if (!std::isfinite(structure.phi(p))) {
    throw std::invalid_argument("conformal factor is not finite at a quadrature point");
  }
}

}  // namespace

double energy_density(const ScalarField& field, int simplex_index,
                      const ConformalStructure& structure) {
  check_field(field);
  const SimplicialMesh& m = *field.mesh;
  if (simplex_index < 0 || simplex_index >= m.simplex_count()) {
    throw std::invalid_argument("simplex index out of range");
  }
  check_phi_finite(structure, m.simplex_centroid(simplex_index));
  MeshCache cache(m);  // single-element queries are not hot paths
  Vec3 g = cache.field_gradient(simplex_index, field.values);
  return density_from_s(g.norm2(), m.dim, 0.0);
}

EnergyBreakdown total_energy(const ScalarField& field, const ConformalStructure& structure,
                             double epsilon) {
  check_field(field);
  if (epsilon < 0.0) throw std::invalid_argument("epsilon must be non-negative");
  const SimplicialMesh& m = *field.mesh;
  MeshCache cache(m);
  EnergyBreakdown out;
  out.per_element.resize(m.simplex_count());
  double total = 0.0;
  for (int e = 0; e < m.simplex_count(); ++e) {
    check_phi_finite(structure, m.simplex_centroid(e));
    Vec3 g = cache.field_gradient(e, field.values);
    double de = density_from_s(g.norm2(), m.dim, epsilon) * cache.volume(e);
    out.per_element[e] = de;
    total += de;
  }
  out.total = total;
  return out;
}

std::vector<double> energy_gradient(const ScalarField& field, const ConformalStructure& structure,
                                    double epsilon, const std::vector<int>& free_nodes) {
  check_field(field);
  if (epsilon < 0.0) throw std::invalid_argument("epsilon must be non-negative");
  const SimplicialMesh& m = *field.mesh;
  for (int v : free_nodes) {
    if (v < 0 || v >= m.vertex_count()) {
      throw std::invalid_argument("free node index out of range");
    }
  }
  MeshCache cache(m);
  for (int e = 0; e < m.simplex_count(); ++e) {
    check_phi_finite(structure, m.simplex_centroid(e));
  }
  if (epsilon == 0.0 && m.dim > 2) {
    for (int e = 0; e < m.simplex_count(); ++e) {
      // A field constant on the element has exactly zero gradient there.
      const auto& s = m.simplices[e];
      bool constant = true;
      for (int i = 1; i <= m.dim; ++i) {
        if (field.values[s[i]] != field.values[s[0]]) {
          constant = false;
          break;
        }
      }
      if (constant || cache.field_gradient(e, field.values).norm2() == 0.0) {
        throw std::invalid_argument(
            "gradient of the unregularized energy is undefined on a zero-gradient element for "
            "n > 2; pass epsilon > 0");
      }
    }
  }
  std::vector<double> full;
  energy_gradient_cached(cache, field.values, epsilon, full);
  std::vector<double> out(free_nodes.size());
  for (size_t i = 0; i < free_nodes.size(); ++i) out[i] = full[free_nodes[i]];
  return out;
}

// ---------------------------------------------------------------------------
// Cached kernels

void validate_structure(const MeshCache& cache, const ConformalStructure& structure) {
  const SimplicialMesh& m = cache.mesh();
  for (int e = 0; e < m.simplex_count(); ++e) {
    check_phi_finite(structure, m.simplex_centroid(e));
  }
}

double energy_total_cached(const MeshCache& cache, std::span<const double> values,
                           double epsilon) {
  int n = cache.dim();
  double total = 0.0;
  for (int e = 0; e < cache.element_count(); ++e) {
    Vec3 g = cache.field_gradient(e, values);
    total += density_from_s(g.norm2(), n, epsilon) * cache.volume(e);
  }
  return total;
}

void energy_gradient_cached(const MeshCache& cache, std::span<const double> values,
                            double epsilon, std::vector<double>& grad_out) {
  const SimplicialMesh& m = cache.mesh();
  int n = cache.dim();
  grad_out.assign(m.vertex_count(), 0.0);
  for (int e = 0; e < cache.element_count(); ++e) {
    const auto& s = m.simplices[e];
    Vec3 g = cache.field_gradient(e, values);
    // d/df_i [density(|g|^2) vol] = density'(s) * 2 (g . grad lambda_i) * vol
    double w = density_slope_from_s(g.norm2(), n, epsilon) * 2.0 * cache.volume(e);
    for (int i = 0; i <= m.dim; ++i) {
      grad_out[s[i]] += w * g.dot(cache.basis_gradients(e)[i]);
    }
  }
}

}  // namespace capnum
