#include "capnum/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace capnum {

void RadialCondenserSpec::validate() const {
  if (dim != 2 && dim != 3) {
    throw std::invalid_argument("RadialCondenserSpec: dim must be 2 or 3");
  }
  if (!(r_inner > 0.0) || !(r_outer > r_inner)) {
    throw std::invalid_argument("RadialCondenserSpec: need 0 < r_inner < r_outer");
  }
}

double sphere_area_constant(int dim) {
  if (dim == 2) return 2.0 * std::numbers::pi;
  if (dim == 3) return 4.0 * std::numbers::pi;
  throw std::invalid_argument("sphere_area_constant: dim must be 2 or 3");
}

double radial_capacity(const RadialCondenserSpec& spec) {
  spec.validate();
  double span = std::log(spec.r_outer / spec.r_inner);
  return sphere_area_constant(spec.dim) * std::pow(span, 1 - spec.dim);
}

ScalarField radial_witness(const SimplicialMesh& mesh, const RadialCondenserSpec& spec) {
  spec.validate();
  double span = std::log(spec.r_outer / spec.r_inner);
  return sample_field(mesh, [&](const Vec3& p) {
    double t = (p - spec.center).norm();
    if (t <= spec.r_inner) return 0.0;
    double u = std::log(t / spec.r_inner) / span;
    return std::clamp(u, 0.0, 1.0);
  });
}

ConvergenceFit convergence_order(const std::vector<double>& values,
                                 const std::vector<double>& mesh_sizes, double reference) {
  if (values.size() != mesh_sizes.size()) {
    throw std::invalid_argument("convergence_order: values and mesh_sizes differ in length");
  }
  if (values.size() < 2) {
    throw std::invalid_argument("convergence_order: need at least two samples");
  }
  for (double h : mesh_sizes) {
    if (!(h > 0.0)) throw std::invalid_argument("convergence_order: mesh sizes must be positive");
  }
  ConvergenceFit fit;
  std::vector<double> xs, ys;
  for (size_t i = 0; i < values.size(); ++i) {
    double err = std::fabs(values[i] - reference);
    if (err == 0.0) {
      fit.excluded.push_back(static_cast<int>(i));
      continue;
    }
    xs.push_back(std::log(mesh_sizes[i]));
    ys.push_back(std::log(err));
  }
  if (xs.size() < 2) {
    fit.non_convergent = true;
    return fit;
  }
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
    fit.non_convergent = true;
    return fit;
  }
  fit.order = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.order * sx) / n;
  fit.non_convergent = fit.order < 0.25;
  return fit;
}

}  // namespace capnum
