#include "capnum/mesh.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace capnum {

namespace {

constexpr double kPi = std::numbers::pi;

double signed_area2(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * ((b - a).cross(c - a)).z;
}

double signed_volume3(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a) / 6.0;
}

double signed_measure(const SimplicialMesh& m, const std::array<int, 4>& s) {
  if (m.dim == 2) {
    return signed_area2(m.vertices[s[0]], m.vertices[s[1]], m.vertices[s[2]]);
  }
  return signed_volume3(m.vertices[s[0]], m.vertices[s[1]], m.vertices[s[2]],
                        m.vertices[s[3]]);
}

// Flip vertex order where needed so every simplex has positive orientation.
void fix_orientation(SimplicialMesh& m) {
  for (auto& s : m.simplices) {
    if (signed_measure(m, s) < 0.0) std::swap(s[1], s[2]);
  }
}

using Facet = std::array<int, 3>;  // sorted vertex ids; [2] == -1 in dim 2

std::vector<Facet> simplex_facets(int dim, const std::array<int, 4>& s) {
  std::vector<Facet> out;
  if (dim == 2) {
    out = {{s[0], s[1], -1}, {s[1], s[2], -1}, {s[0], s[2], -1}};
    for (auto& f : out) {
      if (f[0] > f[1]) std::swap(f[0], f[1]);
    }
  } else {
    out = {{s[1], s[2], s[3]}, {s[0], s[2], s[3]}, {s[0], s[1], s[3]}, {s[0], s[1], s[2]}};
    for (auto& f : out) std::sort(f.begin(), f.end());
  }
  return out;
}

std::map<Facet, int> facet_counts(const SimplicialMesh& m) {
  std::map<Facet, int> counts;
  for (const auto& s : m.simplices) {
    for (const auto& f : simplex_facets(m.dim, s)) counts[f]++;
  }
  return counts;
}

void compute_boundary(SimplicialMesh& m) {
  std::set<int> nodes;
  for (const auto& [facet, count] : facet_counts(m)) {
    if (count == 1) {
      for (int v : facet) {
        if (v >= 0) nodes.insert(v);
      }
    }
  }
  m.boundary_nodes.assign(nodes.begin(), nodes.end());
}

int checked_positive_count(double value, int minimum) {
  return std::max(minimum, static_cast<int>(std::lround(value)));
}

// ---------------------------------------------------------------------------
// 2D generators

// Hexagonal disk: ring k carries 6k vertices; concentric rings triangulated
// sector by sector.  V = 1 + 3m(m+1), T = 6m^2.
SimplicialMesh hex_disk(const Vec3& c, double radius, int rings) {
  SimplicialMesh m;
  m.dim = 2;
  m.vertices.push_back(c);
  auto ring_start = [](int k) { return 1 + 3 * k * (k - 1); };
  for (int k = 1; k <= rings; ++k) {
    double r = radius * k / rings;
    int count = 6 * k;
    for (int j = 0; j < count; ++j) {
      double a = 2.0 * kPi * j / count;
      m.vertices.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a), 0.0});
    }
  }
  // Innermost ring: fan around the center.
  for (int j = 0; j < 6; ++j) {
    m.simplices.push_back({0, 1 + j, 1 + (j + 1) % 6, -1});
  }
  for (int k = 2; k <= rings; ++k) {
    int outer = ring_start(k), inner = ring_start(k - 1);
    int on = 6 * k, in = 6 * (k - 1);
    for (int s = 0; s < 6; ++s) {
      // Sector s: outer local nodes 0..k, inner local nodes 0..k-1 (inclusive
      // ends shared with neighboring sectors via the wraparound below).
      auto ov = [&](int t) { return outer + (s * k + t) % on; };
      auto iv = [&](int t) { return inner + (s * (k - 1) + t) % in; };
      for (int t = 0; t < k; ++t) {
        m.simplices.push_back({ov(t), ov(t + 1), iv(t), -1});
      }
      for (int t = 0; t + 1 < k; ++t) {
        m.simplices.push_back({ov(t + 1), iv(t + 1), iv(t), -1});
      }
    }
  }
  fix_orientation(m);
  compute_boundary(m);
  return m;
}

// Append a ring of N vertices at radius r (angles 2*pi*j/N) and a band of
// triangles joining it to the current outermost ring.  `ring` holds the
// current outer ring's vertex ids in angular order and is replaced.
void append_ring_band_2d(SimplicialMesh& m, std::vector<int>& ring, const Vec3& c,
                         double r) {
  int n = static_cast<int>(ring.size());
  std::vector<int> next(n);
  for (int j = 0; j < n; ++j) {
    double a = 2.0 * kPi * j / n;
    next[j] = m.vertex_count();
    m.vertices.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a), 0.0});
  }
  for (int j = 0; j < n; ++j) {
    int j1 = (j + 1) % n;
    m.simplices.push_back({ring[j], ring[j1], next[j1], -1});
    m.simplices.push_back({ring[j], next[j1], next[j], -1});
  }
  ring = next;
}

// Same, but vertex positions are given explicitly (used for the blended
// circle-to-box layers of box-minus-ball domains).
void append_positions_band_2d(SimplicialMesh& m, std::vector<int>& ring,
                              const std::vector<Vec3>& positions) {
  int n = static_cast<int>(ring.size());
  std::vector<int> next(n);
  for (int j = 0; j < n; ++j) {
    next[j] = m.vertex_count();
    m.vertices.push_back(positions[j]);
  }
  for (int j = 0; j < n; ++j) {
    int j1 = (j + 1) % n;
    m.simplices.push_back({ring[j], ring[j1], next[j1], -1});
    m.simplices.push_back({ring[j], next[j1], next[j], -1});
  }
  ring = next;
}

SimplicialMesh start_annulus_ring(const Vec3& c, double r, int n) {
  SimplicialMesh m;
  m.dim = 2;
  std::vector<int> ring(n);
  for (int j = 0; j < n; ++j) {
    double a = 2.0 * kPi * j / n;
    ring[j] = j;
    m.vertices.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a), 0.0});
  }
  return m;
}

SimplicialMesh box_grid_2d(const Vec3& lo, const Vec3& hi, double h) {
  int nx = checked_positive_count((hi.x - lo.x) / h, 1);
  int ny = checked_positive_count((hi.y - lo.y) / h, 1);
  SimplicialMesh m;
  m.dim = 2;
  auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      m.vertices.push_back({lo.x + (hi.x - lo.x) * i / nx, lo.y + (hi.y - lo.y) * j / ny, 0.0});
    }
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      m.simplices.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), -1});
      m.simplices.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1), -1});
    }
  }
  fix_orientation(m);
  compute_boundary(m);
  return m;
}

// Distance from `c` along direction `u` to the boundary of the box.
double ray_to_box(const Vec3& c, const Vec3& u, const Vec3& lo, const Vec3& hi, int dim) {
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](double cu, double uu, double wall) {
    if (std::fabs(uu) > 1e-300) {
      double t = (wall - cu) / uu;
      if (t > 0.0) best = std::min(best, t);
    }
  };
  consider(c.x, u.x, lo.x);
  consider(c.x, u.x, hi.x);
  consider(c.y, u.y, lo.y);
  consider(c.y, u.y, hi.y);
  if (dim == 3) {
    consider(c.z, u.z, lo.z);
    consider(c.z, u.z, hi.z);
  }
  return best;
}

// ---------------------------------------------------------------------------
// 3D generators

// Freudenthal split of the unit cell [0,1]^3 into 6 tetrahedra sharing the
// main diagonal; identical per-cell orientation keeps the global mesh
// conforming.
constexpr std::array<std::array<int, 3>, 6> kAxisOrders = {{
    {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

// Mapped cube ball: grid on [-1,1]^3 pushed onto the ball of radius R by
// p -> R * p * (|p|_inf / |p|_2), which sends grid cube shells to spheres
// of radius R * |p|_inf and keeps the vertex lattice structure.
SimplicialMesh cube_ball(const Vec3& c, double radius, int cells) {
  assert(cells >= 2 && cells % 2 == 0);
  SimplicialMesh m;
  m.dim = 3;
  int np = cells + 1;
  auto vid = [&](int i, int j, int l) { return (l * np + j) * np + i; };
  for (int l = 0; l <= cells; ++l) {
    for (int j = 0; j <= cells; ++j) {
      for (int i = 0; i <= cells; ++i) {
        Vec3 p{-1.0 + 2.0 * i / cells, -1.0 + 2.0 * j / cells, -1.0 + 2.0 * l / cells};
        double n2 = p.norm();
        Vec3 q = (n2 == 0.0) ? Vec3{} : p * (radius * p.norm_inf() / n2);
        m.vertices.push_back(c + q);
      }
    }
  }
  for (int l = 0; l < cells; ++l) {
    for (int j = 0; j < cells; ++j) {
      for (int i = 0; i < cells; ++i) {
        std::array<int, 3> base{i, j, l};
        for (const auto& order : kAxisOrders) {
          std::array<int, 4> tet;
          std::array<int, 3> p = base;
          tet[0] = vid(p[0], p[1], p[2]);
          for (int step = 0; step < 3; ++step) {
            p[order[step]] += 1;
            tet[step + 1] = vid(p[0], p[1], p[2]);
          }
          m.simplices.push_back(tet);
        }
      }
    }
  }
  fix_orientation(m);
  compute_boundary(m);
  return m;
}

SimplicialMesh box_grid_3d(const Vec3& lo, const Vec3& hi, double h) {
  int nx = checked_positive_count((hi.x - lo.x) / h, 1);
  int ny = checked_positive_count((hi.y - lo.y) / h, 1);
  int nz = checked_positive_count((hi.z - lo.z) / h, 1);
  SimplicialMesh m;
  m.dim = 3;
  auto vid = [&](int i, int j, int l) { return (l * (ny + 1) + j) * (nx + 1) + i; };
  for (int l = 0; l <= nz; ++l) {
    for (int j = 0; j <= ny; ++j) {
      for (int i = 0; i <= nx; ++i) {
        m.vertices.push_back({lo.x + (hi.x - lo.x) * i / nx, lo.y + (hi.y - lo.y) * j / ny,
                              lo.z + (hi.z - lo.z) * l / nz});
      }
    }
  }
  for (int l = 0; l < nz; ++l) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        std::array<int, 3> base{i, j, l};
        for (const auto& order : kAxisOrders) {
          std::array<int, 4> tet;
          std::array<int, 3> p = base;
          tet[0] = vid(p[0], p[1], p[2]);
          for (int step = 0; step < 3; ++step) {
            p[order[step]] += 1;
            tet[step + 1] = vid(p[0], p[1], p[2]);
          }
          m.simplices.push_back(tet);
        }
      }
    }
  }
  fix_orientation(m);
  compute_boundary(m);
  return m;
}

// Surface layer bookkeeping for radially extruded 3D meshes.  `tris` index
// into the layer arrays; prisms split into three tetrahedra with quad-face
// diagonals chosen through the smaller local surface index, which makes the
// split conforming across neighboring prisms and successive layers.
struct SurfaceLayer {
  std::vector<int> node_ids;               // global ids of current top layer
  std::vector<Vec3> dirs;                  // unit direction per surface node
  std::vector<std::array<int, 3>> tris;    // local indices into node_ids
};

void append_prism_layer(SimplicialMesh& m, SurfaceLayer& layer,
                        const std::vector<Vec3>& new_positions) {
  int s = static_cast<int>(layer.node_ids.size());
  std::vector<int> next(s);
  for (int j = 0; j < s; ++j) {
    next[j] = m.vertex_count();
    m.vertices.push_back(new_positions[j]);
  }
  for (auto tri : layer.tris) {
    // Rotate so the smallest local index sits first.
    int k = 0;
    if (tri[1] < tri[k]) k = 1;
    if (tri[2] < tri[k]) k = 2;
    std::array<int, 3> t{tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]};
    int a0 = layer.node_ids[t[0]], b0 = layer.node_ids[t[1]], c0 = layer.node_ids[t[2]];
    int a1 = next[t[0]], b1 = next[t[1]], c1 = next[t[2]];
    if (t[1] < t[2]) {
      m.simplices.push_back({a0, b0, c0, c1});
      m.simplices.push_back({a0, b0, c1, b1});
      m.simplices.push_back({a0, b1, c1, a1});
    } else {
      m.simplices.push_back({a0, b0, c0, b1});
      m.simplices.push_back({a0, c0, b1, c1});
      m.simplices.push_back({a0, b1, c1, a1});
    }
  }
  layer.node_ids = next;
}

void append_radius_layer(SimplicialMesh& m, SurfaceLayer& layer, const Vec3& c,
                         double r) {
  std::vector<Vec3> pos(layer.dirs.size());
  for (size_t j = 0; j < layer.dirs.size(); ++j) pos[j] = c + layer.dirs[j] * r;
  append_prism_layer(m, layer, pos);
}

// Cubed-sphere surface grid with k cells per face edge: unique vertices on
// the cube surface, projected radially to the unit sphere.
SurfaceLayer cubed_sphere_surface(int k, std::vector<Vec3>* unit_points) {
  SurfaceLayer layer;
  std::map<std::array<int, 3>, int> index;  // integer grid coords -> local id
  std::vector<std::array<int, 3>> coords;
  auto intern = [&](std::array<int, 3> g) {
    auto it = index.find(g);
    if (it != index.end()) return it->second;
    int id = static_cast<int>(coords.size());
    index.emplace(g, id);
    coords.push_back(g);
    return id;
  };
  // Enumerate faces: axis a fixed at 0 or k, the other two axes range 0..k.
  for (int axis = 0; axis < 3; ++axis) {
    for (int side = 0; side <= 1; ++side) {
      int fixed = side * k;
      for (int u = 0; u < k; ++u) {
        for (int v = 0; v < k; ++v) {
          auto grid = [&](int uu, int vv) {
            std::array<int, 3> g{};
            g[axis] = fixed;
            g[(axis + 1) % 3] = uu;
            g[(axis + 2) % 3] = vv;
            return intern(g);
          };
          int q00 = grid(u, v), q10 = grid(u + 1, v);
          int q01 = grid(u, v + 1), q11 = grid(u + 1, v + 1);
          if (std::min(q00, q11) < std::min(q10, q01)) {
            layer.tris.push_back({q00, q10, q11});
            layer.tris.push_back({q00, q11, q01});
          } else {
            layer.tris.push_back({q00, q10, q01});
            layer.tris.push_back({q10, q11, q01});
          }
        }
      }
    }
  }
  layer.dirs.resize(coords.size());
  for (size_t i = 0; i < coords.size(); ++i) {
    Vec3 p{-1.0 + 2.0 * coords[i][0] / k, -1.0 + 2.0 * coords[i][1] / k,
           -1.0 + 2.0 * coords[i][2] / k};
    layer.dirs[i] = p / p.norm();
  }
  if (unit_points) *unit_points = layer.dirs;
  return layer;
}

// Extract the boundary surface of a 3D mesh as a SurfaceLayer whose node ids
// are the mesh's own; directions point radially away from `c`.
SurfaceLayer boundary_surface(const SimplicialMesh& m, const Vec3& c) {
  SurfaceLayer layer;
  std::vector<std::array<int, 3>> btris;
  for (const auto& [facet, count] : facet_counts(m)) {
    if (count == 1) btris.push_back(facet);
  }
  std::set<int> nodes;
  for (const auto& t : btris) nodes.insert(t.begin(), t.end());
  layer.node_ids.assign(nodes.begin(), nodes.end());
  std::unordered_map<int, int> local;
  for (size_t i = 0; i < layer.node_ids.size(); ++i) local[layer.node_ids[i]] = static_cast<int>(i);
  for (const auto& t : btris) {
    layer.tris.push_back({local[t[0]], local[t[1]], local[t[2]]});
  }
  layer.dirs.resize(layer.node_ids.size());
  for (size_t i = 0; i < layer.node_ids.size(); ++i) {
    Vec3 d = m.vertices[layer.node_ids[i]] - c;
    layer.dirs[i] = d / d.norm();
  }
  return layer;
}

int geometric_layer_count(double r_from, double r_to, double angular_step) {
  double span = std::log(r_to / r_from);
  return std::max(1, static_cast<int>(std::lround(span / angular_step)));
}

// ---------------------------------------------------------------------------
// Shared shell machinery (annuli in 2D, spherical shells in 3D, and the
// radial parts of ball exhaustions / box-minus-ball domains).

struct RadialBuilder {
  SimplicialMesh mesh;
  Vec3 center;
  // 2D state
  std::vector<int> ring;
  // 3D state
  SurfaceLayer layer;
  double current_radius = 0.0;
  double angular_step = 0.0;  // typical circumferential spacing / radius

  int front_size() const {
    return mesh.dim == 2 ? static_cast<int>(ring.size())
                         : static_cast<int>(layer.node_ids.size());
  }
  std::vector<int> front_ids() const {
    std::vector<int> ids = mesh.dim == 2 ? ring : layer.node_ids;
    std::sort(ids.begin(), ids.end());
    return ids;
  }
  void extrude_to(double r) {
    int count = geometric_layer_count(current_radius, r, angular_step);
    double rho = std::pow(r / current_radius, 1.0 / count);
    for (int t = 1; t <= count; ++t) {
      double rt = (t == count) ? r : current_radius * std::pow(rho, t);
      if (mesh.dim == 2) {
        append_ring_band_2d(mesh, ring, center, rt);
      } else {
        append_radius_layer(mesh, layer, center, rt);
      }
    }
    current_radius = r;
  }
};

// Start a radial builder from a hollow inner boundary at radius r.
RadialBuilder start_hollow(int dim, const Vec3& c, double r, double h) {
  RadialBuilder b;
  b.center = c;
  b.current_radius = r;
  if (dim == 2) {
    int n = std::max(16, static_cast<int>(std::lround(2.0 * kPi * r / h)));
    b.mesh = start_annulus_ring(c, r, n);
    b.ring.resize(n);
    for (int j = 0; j < n; ++j) b.ring[j] = j;
    b.angular_step = 2.0 * kPi / n;
  } else {
    int k = std::max(3, static_cast<int>(std::lround(0.5 * kPi * r / h)));
    b.mesh.dim = 3;
    b.layer = cubed_sphere_surface(k, nullptr);
    b.layer.node_ids.resize(b.layer.dirs.size());
    for (size_t j = 0; j < b.layer.dirs.size(); ++j) {
      b.layer.node_ids[j] = static_cast<int>(j);
      b.mesh.vertices.push_back(c + b.layer.dirs[j] * r);
    }
    b.angular_step = 2.0 / k;  // face edge fraction, a good radial pace
  }
  return b;
}

// Start a radial builder from a solid ball of radius r.
RadialBuilder start_solid(int dim, const Vec3& c, double r, double h) {
  RadialBuilder b;
  b.center = c;
  b.current_radius = r;
  if (dim == 2) {
    int rings = std::max(2, static_cast<int>(std::lround(r / h)));
    b.mesh = hex_disk(c, r, rings);
    int n = 6 * rings;
    b.ring.resize(n);
    int start = 1 + 3 * rings * (rings - 1);
    for (int j = 0; j < n; ++j) b.ring[j] = start + j;
    b.angular_step = 2.0 * kPi / n;
  } else {
    int cells = std::max(2, static_cast<int>(std::lround(2.0 * r / h)));
    if (cells % 2) ++cells;
    b.mesh = cube_ball(c, r, cells);
    b.layer = boundary_surface(b.mesh, c);
    b.angular_step = 2.0 / cells;
  }
  b.mesh.region_tags.clear();
  return b;
}

void finalize(SimplicialMesh& m, const std::optional<DomainSpec>& domain) {
  fix_orientation(m);
  compute_boundary(m);
  m.domain = domain;
}

std::vector<int> sorted_ids(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// DomainSpec

void DomainSpec::validate() const {
  if (dim != 2 && dim != 3) {
    throw std::invalid_argument("DomainSpec: dim must be 2 or 3, got " + std::to_string(dim));
  }
  if (!(target_edge_length > 0.0)) {
    throw std::invalid_argument("DomainSpec: target_edge_length must be positive");
  }
  if (const auto* b = std::get_if<BallSpec>(&shape)) {
    if (!(b->radius > 0.0)) throw std::invalid_argument("DomainSpec: ball radius must be positive");
  } else if (const auto* a = std::get_if<AnnulusSpec>(&shape)) {
    if (!(a->r_inner > 0.0) || !(a->r_outer > a->r_inner)) {
      throw std::invalid_argument("DomainSpec: annulus needs 0 < r_inner < r_outer");
    }
  } else if (const auto* bx = std::get_if<BoxSpec>(&shape)) {
    bool ok = bx->max_corner.x > bx->min_corner.x && bx->max_corner.y > bx->min_corner.y &&
              (dim == 2 || bx->max_corner.z > bx->min_corner.z);
    if (!ok) throw std::invalid_argument("DomainSpec: box corners must satisfy min < max per axis");
  } else if (const auto* bb = std::get_if<BoxMinusBallSpec>(&shape)) {
    const auto& lo = bb->box.min_corner;
    const auto& hi = bb->box.max_corner;
    bool box_ok = hi.x > lo.x && hi.y > lo.y && (dim == 2 || hi.z > lo.z);
    if (!box_ok) throw std::invalid_argument("DomainSpec: box corners must satisfy min < max per axis");
    if (!(bb->ball.radius > 0.0)) throw std::invalid_argument("DomainSpec: excised ball radius must be positive");
    const Vec3& c = bb->ball.center;
    double slack = bb->ball.radius * 1.5;
    bool inside = c.x - slack >= lo.x && c.x + slack <= hi.x && c.y - slack >= lo.y &&
                  c.y + slack <= hi.y && (dim == 2 || (c.z - slack >= lo.z && c.z + slack <= hi.z));
    if (!inside) {
      throw std::invalid_argument(
          "DomainSpec: excised ball must lie strictly inside the box (margin >= half a radius)");
    }
  }
}

// ---------------------------------------------------------------------------
// SimplicialMesh members

double SimplicialMesh::simplex_volume(int e) const {
  return std::fabs(signed_measure(*this, simplices[e]));
}

double SimplicialMesh::total_volume() const {
  double v = 0.0;
  for (int e = 0; e < simplex_count(); ++e) v += simplex_volume(e);
  return v;
}

Vec3 SimplicialMesh::simplex_centroid(int e) const {
  Vec3 c{};
  int k = dim + 1;
  for (int i = 0; i < k; ++i) c += vertices[simplices[e][i]];
  return c / static_cast<double>(k);
}

std::vector<std::array<int, 2>> SimplicialMesh::edges() const {
  std::set<std::array<int, 2>> set;
  int k = dim + 1;
  for (const auto& s : simplices) {
    for (int i = 0; i < k; ++i) {
      for (int j = i + 1; j < k; ++j) {
        int a = s[i], b = s[j];
        set.insert({std::min(a, b), std::max(a, b)});
      }
    }
  }
  return {set.begin(), set.end()};
}

std::vector<std::vector<int>> SimplicialMesh::vertex_adjacency() const {
  std::vector<std::vector<int>> adj(vertex_count());
  for (const auto& e : edges()) {
    adj[e[0]].push_back(e[1]);
    adj[e[1]].push_back(e[0]);
  }
  for (auto& lst : adj) std::sort(lst.begin(), lst.end());
  return adj;
}

const std::vector<int>& SimplicialMesh::region(const std::string& tag) const {
  auto it = region_tags.find(tag);
  if (it == region_tags.end()) {
    throw std::invalid_argument("mesh has no region tag '" + tag + "'");
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Audit

std::vector<std::string> mesh_audit(const SimplicialMesh& mesh) {
  std::vector<std::string> problems;
  int nv = mesh.vertex_count();
  if (mesh.dim != 2 && mesh.dim != 3) {
    problems.push_back("dim must be 2 or 3");
    return problems;
  }
  if (mesh.simplices.empty()) problems.push_back("mesh has no simplices");
  std::vector<char> used(nv, 0);
  for (int e = 0; e < mesh.simplex_count(); ++e) {
    const auto& s = mesh.simplices[e];
    int k = mesh.dim + 1;
    bool range_ok = true;
    for (int i = 0; i < k; ++i) {
      if (s[i] < 0 || s[i] >= nv) {
        problems.push_back("simplex " + std::to_string(e) + " has out-of-range vertex");
        range_ok = false;
      }
    }
    if (mesh.dim == 2 && s[3] != -1) {
      problems.push_back("simplex " + std::to_string(e) + " must have -1 in slot 3 for dim 2");
    }
    if (!range_ok) continue;
    for (int i = 0; i < k; ++i) used[s[i]] = 1;
    double vol = signed_measure(mesh, s);
    if (!(vol > 0.0)) {
      problems.push_back("simplex " + std::to_string(e) + " has non-positive volume " +
                         std::to_string(vol));
    }
  }
  for (int v = 0; v < nv; ++v) {
    if (!used[v]) problems.push_back("vertex " + std::to_string(v) + " belongs to no simplex");
  }
  if (!problems.empty()) return problems;

  std::set<int> expected_boundary;
  for (const auto& [facet, count] : facet_counts(mesh)) {
    if (count > 2) {
      problems.push_back("facet shared by " + std::to_string(count) + " simplices (non-conforming)");
    } else if (count == 1) {
      for (int v : facet) {
        if (v >= 0) expected_boundary.insert(v);
      }
    }
  }
  std::vector<int> eb(expected_boundary.begin(), expected_boundary.end());
  if (eb != mesh.boundary_nodes) {
    problems.push_back("boundary_nodes does not match facets belonging to exactly one simplex");
  }

  // Connectivity over the vertex graph.
  std::vector<int> all(nv);
  for (int v = 0; v < nv; ++v) all[v] = v;
  if (!vertex_set_connected(mesh, all)) problems.push_back("vertex graph is not connected");

  for (const auto& [tag, nodes] : mesh.region_tags) {
    if (!std::is_sorted(nodes.begin(), nodes.end())) {
      problems.push_back("region '" + tag + "' is not sorted");
    }
    for (size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i] < 0 || nodes[i] >= nv) {
        problems.push_back("region '" + tag + "' has out-of-range node");
        break;
      }
      if (i > 0 && nodes[i] == nodes[i - 1]) {
        problems.push_back("region '" + tag + "' has duplicate node");
        break;
      }
    }
  }
  return problems;
}

// ---------------------------------------------------------------------------
// build_mesh

SimplicialMesh build_mesh(const DomainSpec& spec) {
  spec.validate();
  double h = spec.target_edge_length;
  SimplicialMesh out;

  if (const auto* b = std::get_if<BallSpec>(&spec.shape)) {
    RadialBuilder rb = start_solid(spec.dim, b->center, b->radius, h);
    out = std::move(rb.mesh);
  } else if (const auto* a = std::get_if<AnnulusSpec>(&spec.shape)) {
    RadialBuilder rb = start_hollow(spec.dim, a->center, a->r_inner, h);
    rb.extrude_to(a->r_outer);
    out = std::move(rb.mesh);
  } else if (const auto* bx = std::get_if<BoxSpec>(&spec.shape)) {
    out = spec.dim == 2 ? box_grid_2d(bx->min_corner, bx->max_corner, h)
                        : box_grid_3d(bx->min_corner, bx->max_corner, h);
  } else {
    const auto& bb = std::get<BoxMinusBallSpec>(spec.shape);
    const Vec3& c = bb.ball.center;
    RadialBuilder rb = start_hollow(spec.dim, c, bb.ball.radius, h);
    // Wall distance along each surface ray.
    int s = rb.front_size();
    std::vector<Vec3> dirs(s);
    if (spec.dim == 2) {
      for (int j = 0; j < s; ++j) {
        double ang = 2.0 * kPi * j / s;
        dirs[j] = {std::cos(ang), std::sin(ang), 0.0};
      }
    } else {
      dirs = rb.layer.dirs;
    }
    double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
    std::vector<double> wall(s);
    for (int j = 0; j < s; ++j) {
      wall[j] = ray_to_box(c, dirs[j], bb.box.min_corner, bb.box.max_corner, spec.dim);
      dmin = std::min(dmin, wall[j]);
      dmax = std::max(dmax, wall[j]);
    }
    // Concentric geometric layers while comfortably inside, then blended
    // layers interpolating between the last circle/sphere and the wall.
    double r_free = 0.75 * dmin;
    if (r_free > bb.ball.radius * 1.05) rb.extrude_to(r_free);
    double r_last = rb.current_radius;
    int blend = std::max(1, static_cast<int>(std::lround((dmax / r_last - 1.0) / rb.angular_step)));
    for (int t = 1; t <= blend; ++t) {
      double f = static_cast<double>(t) / blend;
      std::vector<Vec3> pos(s);
      for (int j = 0; j < s; ++j) {
        pos[j] = c + dirs[j] * ((1.0 - f) * r_last + f * wall[j]);
      }
      if (spec.dim == 2) {
        append_positions_band_2d(rb.mesh, rb.ring, pos);
      } else {
        append_prism_layer(rb.mesh, rb.layer, pos);
      }
    }
    out = std::move(rb.mesh);
  }

  finalize(out, spec);
  auto problems = mesh_audit(out);
  if (!problems.empty()) {
    throw std::logic_error("build_mesh produced a defective mesh: " + problems.front());
  }
  return out;
}

// ---------------------------------------------------------------------------
// refine

namespace {

// Decide how to project a refined boundary midpoint back onto the true
// domain boundary.  `a` and `b` are the edge's endpoints (both boundary).
Vec3 project_boundary_midpoint(const DomainSpec& spec, const Vec3& a, const Vec3& b) {
  Vec3 mid = (a + b) * 0.5;
  auto to_sphere = [&](const Vec3& c, double r) {
    Vec3 d = mid - c;
    double n = d.norm();
    return n == 0.0 ? mid : c + d * (r / n);
  };
  auto near_radius = [&](const Vec3& c, double r, const Vec3& p) {
    return std::fabs((p - c).norm() - r) <= 1e-9 * std::max(1.0, r);
  };
  auto snap_to_box = [&](const Vec3& lo, const Vec3& hi) {
    // Snap the coordinate closest to a wall.
    double best = std::numeric_limits<double>::infinity();
    int axis = -1;
    double target = 0.0;
    auto consider = [&](double v, double wall, int ax) {
      double d = std::fabs(v - wall);
      if (d < best) {
        best = d;
        axis = ax;
        target = wall;
      }
    };
    consider(mid.x, lo.x, 0);
    consider(mid.x, hi.x, 0);
    consider(mid.y, lo.y, 1);
    consider(mid.y, hi.y, 1);
    if (spec.dim == 3) {
      consider(mid.z, lo.z, 2);
      consider(mid.z, hi.z, 2);
    }
    Vec3 p = mid;
    if (axis == 0) p.x = target;
    if (axis == 1) p.y = target;
    if (axis == 2) p.z = target;
    return p;
  };

  if (const auto* ball = std::get_if<BallSpec>(&spec.shape)) {
    return to_sphere(ball->center, ball->radius);
  }
  if (const auto* ann = std::get_if<AnnulusSpec>(&spec.shape)) {
    if (near_radius(ann->center, ann->r_inner, a) && near_radius(ann->center, ann->r_inner, b)) {
      return to_sphere(ann->center, ann->r_inner);
    }
    if (near_radius(ann->center, ann->r_outer, a) && near_radius(ann->center, ann->r_outer, b)) {
      return to_sphere(ann->center, ann->r_outer);
    }
    return mid;
  }
  if (std::get_if<BoxSpec>(&spec.shape)) {
    return mid;  // box facets are flat; midpoints already lie on them
  }
  const auto& bb = std::get<BoxMinusBallSpec>(spec.shape);
  if (near_radius(bb.ball.center, bb.ball.radius, a) &&
      near_radius(bb.ball.center, bb.ball.radius, b)) {
    return to_sphere(bb.ball.center, bb.ball.radius);
  }
  return snap_to_box(bb.box.min_corner, bb.box.max_corner);
}

}  // namespace

SimplicialMesh refine(const SimplicialMesh& mesh) {
  SimplicialMesh out;
  out.dim = mesh.dim;
  out.vertices = mesh.vertices;
  out.domain = mesh.domain;

  std::set<int> boundary(mesh.boundary_nodes.begin(), mesh.boundary_nodes.end());
  std::map<std::array<int, 2>, int> midpoint;
  auto mid_id = [&](int u, int v) {
    std::array<int, 2> key{std::min(u, v), std::max(u, v)};
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    Vec3 p = (mesh.vertices[u] + mesh.vertices[v]) * 0.5;
    if (mesh.domain && boundary.count(u) && boundary.count(v)) {
      p = project_boundary_midpoint(*mesh.domain, mesh.vertices[u], mesh.vertices[v]);
    }
    int id = out.vertex_count();
    out.vertices.push_back(p);
    midpoint.emplace(key, id);
    return id;
  };

  for (const auto& s : mesh.simplices) {
    if (mesh.dim == 2) {
      int v0 = s[0], v1 = s[1], v2 = s[2];
      int m01 = mid_id(v0, v1), m12 = mid_id(v1, v2), m02 = mid_id(v0, v2);
      out.simplices.push_back({v0, m01, m02, -1});
      out.simplices.push_back({v1, m12, m01, -1});
      out.simplices.push_back({v2, m02, m12, -1});
      out.simplices.push_back({m01, m12, m02, -1});
    } else {
      int v0 = s[0], v1 = s[1], v2 = s[2], v3 = s[3];
      int m01 = mid_id(v0, v1), m02 = mid_id(v0, v2), m03 = mid_id(v0, v3);
      int m12 = mid_id(v1, v2), m13 = mid_id(v1, v3), m23 = mid_id(v2, v3);
      out.simplices.push_back({v0, m01, m02, m03});
      out.simplices.push_back({v1, m01, m12, m13});
      out.simplices.push_back({v2, m02, m12, m23});
      out.simplices.push_back({v3, m03, m13, m23});
      // Interior octahedron, split along the m02-m13 diagonal.
      out.simplices.push_back({m01, m02, m03, m13});
      out.simplices.push_back({m01, m02, m12, m13});
      out.simplices.push_back({m02, m03, m13, m23});
      out.simplices.push_back({m02, m12, m13, m23});
    }
  }

  fix_orientation(out);
  compute_boundary(out);

  // A midpoint joins a region when both its parents belong to it.
  for (const auto& [tag, nodes] : mesh.region_tags) {
    std::set<int> members(nodes.begin(), nodes.end());
    std::vector<int> grown(nodes);
    for (const auto& [edge, id] : midpoint) {
      if (members.count(edge[0]) && members.count(edge[1])) grown.push_back(id);
    }
    out.region_tags[tag] = sorted_ids(std::move(grown));
  }
  return out;
}

// ---------------------------------------------------------------------------
// mark_region / submesh

SimplicialMesh mark_region(const SimplicialMesh& mesh, const std::string& tag,
                           const std::function<bool(const Vec3&)>& predicate) {
  if (mesh.has_region(tag)) {
    throw std::invalid_argument("region tag '" + tag + "' already exists");
  }
  SimplicialMesh out = mesh;
  std::vector<int> nodes;
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (predicate(mesh.vertices[v])) nodes.push_back(v);
  }
  if (nodes.empty()) {
    std::cerr << "warning: region '" << tag << "' matches no vertices\n";
  }
  out.region_tags[tag] = std::move(nodes);
  return out;
}

SimplicialMesh submesh(const SimplicialMesh& mesh,
                       const std::function<bool(const Vec3&)>& keep_vertex,
                       const std::optional<DomainSpec>& new_domain) {
  int nv = mesh.vertex_count();
  std::vector<char> keep(nv, 0);
  for (int v = 0; v < nv; ++v) keep[v] = keep_vertex(mesh.vertices[v]) ? 1 : 0;

  std::vector<int> remap(nv, -1);
  SimplicialMesh out;
  out.dim = mesh.dim;
  for (const auto& s : mesh.simplices) {
    int k = mesh.dim + 1;
    bool all = true;
    for (int i = 0; i < k; ++i) {
      if (!keep[s[i]]) {
        all = false;
        break;
      }
    }
    if (!all) continue;
    std::array<int, 4> ns{-1, -1, -1, -1};
    for (int i = 0; i < k; ++i) {
      int v = s[i];
      if (remap[v] < 0) {
        remap[v] = out.vertex_count();
        out.vertices.push_back(mesh.vertices[v]);
      }
      ns[i] = remap[v];
    }
    out.simplices.push_back(ns);
  }
  if (out.simplices.empty()) {
    throw std::invalid_argument("submesh: no simplex has all vertices selected");
  }
  // Remap preserves the original relative order of vertices only per first
  // touch; renumber into ascending original order for stability.
  {
    std::vector<int> order;
    for (int v = 0; v < nv; ++v) {
      if (remap[v] >= 0) order.push_back(v);
    }
    std::vector<int> remap2(nv, -1);
    SimplicialMesh out2;
    out2.dim = mesh.dim;
    for (size_t i = 0; i < order.size(); ++i) {
      remap2[order[i]] = static_cast<int>(i);
      out2.vertices.push_back(mesh.vertices[order[i]]);
    }
    for (const auto& s : mesh.simplices) {
      int k = mesh.dim + 1;
      bool all = true;
      for (int i = 0; i < k; ++i) {
        if (remap2[s[i]] < 0) {
          all = false;
          break;
        }
      }
      if (!all) continue;
      std::array<int, 4> ns{-1, -1, -1, -1};
      for (int i = 0; i < k; ++i) ns[i] = remap2[s[i]];
      out2.simplices.push_back(ns);
    }
    for (const auto& [tag, nodes] : mesh.region_tags) {
      std::vector<int> kept;
      for (int v : nodes) {
        if (remap2[v] >= 0) kept.push_back(remap2[v]);
      }
      if (!kept.empty()) out2.region_tags[tag] = sorted_ids(std::move(kept));
    }
    out = std::move(out2);
  }
  finalize(out, new_domain);
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustions

std::vector<SimplicialMesh> build_ball_exhaustion(int dim, const Vec3& center,
                                                  const std::vector<double>& radii,
                                                  double target_edge_length) {
  if (radii.empty()) throw std::invalid_argument("ball exhaustion needs at least one radius");
  for (size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0) || (i > 0 && !(radii[i] > radii[i - 1]))) {
      throw std::invalid_argument("ball exhaustion radii must be positive and strictly increasing");
    }
  }
  if (!(target_edge_length > 0.0)) {
    throw std::invalid_argument("target_edge_length must be positive");
  }

  RadialBuilder rb = start_solid(dim, center, radii[0], target_edge_length);
  std::vector<SimplicialMesh> stages;
  for (size_t i = 0; i < radii.size(); ++i) {
    if (i > 0) rb.extrude_to(radii[i]);
    SimplicialMesh stage = rb.mesh;  // prefix snapshot
    DomainSpec d;
    d.dim = dim;
    d.shape = BallSpec{center, radii[i]};
    d.target_edge_length = target_edge_length;
    finalize(stage, d);
    stage.region_tags["outer_boundary"] = rb.front_ids();
    stages.push_back(std::move(stage));
  }
  for (size_t i = 0; i + 1 < stages.size(); ++i) {
    if (!is_prefix_mesh(stages[i], stages[i + 1])) {
      throw std::logic_error("ball exhaustion stages lost the prefix property");
    }
  }
  return stages;
}

std::vector<SimplicialMesh> build_shell_exhaustion(int dim, const Vec3& center,
                                                   double r_inner,
                                                   const std::vector<double>& radii,
                                                   double target_edge_length) {
  if (!(r_inner > 0.0)) throw std::invalid_argument("shell exhaustion needs r_inner > 0");
  if (radii.empty()) throw std::invalid_argument("shell exhaustion needs at least one radius");
  for (size_t i = 0; i < radii.size(); ++i) {
    double prev = i == 0 ? r_inner : radii[i - 1];
    if (!(radii[i] > prev)) {
      throw std::invalid_argument("shell exhaustion radii must be strictly increasing beyond r_inner");
    }
  }
  if (!(target_edge_length > 0.0)) {
    throw std::invalid_argument("target_edge_length must be positive");
  }

  RadialBuilder rb = start_hollow(dim, center, r_inner, target_edge_length);
  std::vector<int> inner_ids = rb.front_ids();
  std::vector<SimplicialMesh> stages;
  for (double r : radii) {
    rb.extrude_to(r);
    SimplicialMesh stage = rb.mesh;
    DomainSpec d;
    d.dim = dim;
    d.shape = AnnulusSpec{center, r_inner, r};
    d.target_edge_length = target_edge_length;
    finalize(stage, d);
    stage.region_tags["inner_boundary"] = inner_ids;
    stage.region_tags["outer_boundary"] = rb.front_ids();
    stages.push_back(std::move(stage));
  }
  for (size_t i = 0; i + 1 < stages.size(); ++i) {
    if (!is_prefix_mesh(stages[i], stages[i + 1])) {
      throw std::logic_error("shell exhaustion stages lost the prefix property");
    }
  }
  return stages;
}

bool is_prefix_mesh(const SimplicialMesh& inner, const SimplicialMesh& outer) {
  if (inner.dim != outer.dim) return false;
  if (inner.vertex_count() > outer.vertex_count()) return false;
  if (inner.simplex_count() > outer.simplex_count()) return false;
  for (int v = 0; v < inner.vertex_count(); ++v) {
    if (!(inner.vertices[v] == outer.vertices[v])) return false;
  }
  for (int e = 0; e < inner.simplex_count(); ++e) {
    if (inner.simplices[e] != outer.simplices[e]) return false;
  }
  return true;
}

std::optional<std::vector<int>> nested_vertex_map(const SimplicialMesh& inner,
                                                  const SimplicialMesh& outer) {
  if (inner.dim != outer.dim) return std::nullopt;
  std::map<std::tuple<double, double, double>, int> where;
  for (int v = 0; v < outer.vertex_count(); ++v) {
    const Vec3& p = outer.vertices[v];
    where.emplace(std::make_tuple(p.x, p.y, p.z), v);
  }
  std::vector<int> map(inner.vertex_count());
  for (int v = 0; v < inner.vertex_count(); ++v) {
    const Vec3& p = inner.vertices[v];
    auto it = where.find(std::make_tuple(p.x, p.y, p.z));
    if (it == where.end()) return std::nullopt;
    map[v] = it->second;
  }
  std::set<std::array<int, 4>> outer_simplices;
  for (auto s : outer.simplices) {
    std::sort(s.begin(), s.end());
    outer_simplices.insert(s);
  }
  for (auto s : inner.simplices) {
    std::array<int, 4> t{-1, -1, -1, -1};
    for (int i = 0; i < inner.dim + 1; ++i) t[i] = map[s[i]];
    std::sort(t.begin(), t.end());
    if (!outer_simplices.count(t)) return std::nullopt;
  }
  return map;
}

// ---------------------------------------------------------------------------
// Graph utilities

bool vertex_set_connected(const SimplicialMesh& mesh, const std::vector<int>& nodes) {
  if (nodes.size() <= 1) return true;
  std::set<int> in_set(nodes.begin(), nodes.end());
  auto adj = mesh.vertex_adjacency();
  std::vector<int> stack{nodes.front()};
  std::set<int> seen{nodes.front()};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (in_set.count(w) && !seen.count(w)) {
        seen.insert(w);
        stack.push_back(w);
      }
    }
  }
  return seen.size() == in_set.size();
}

std::vector<int> shortest_edge_path(const SimplicialMesh& mesh, int a, int b) {
  int nv = mesh.vertex_count();
  if (a < 0 || a >= nv || b < 0 || b >= nv) {
    throw std::invalid_argument("shortest_edge_path: vertex index out of range");
  }
  if (a == b) return {a};
  auto adj = mesh.vertex_adjacency();
  std::vector<double> dist(nv, std::numeric_limits<double>::infinity());
  std::vector<int> parent(nv, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[a] = 0.0;
  heap.push({0.0, a});
  std::vector<char> done(nv, 0);
  while (!heap.empty()) {
    auto [d, v] = heap.top();
    heap.pop();
    if (done[v]) continue;
    done[v] = 1;
    if (v == b) break;
    for (int w : adj[v]) {
      double nd = d + distance(mesh.vertices[v], mesh.vertices[w]);
      if (nd < dist[w]) {
        dist[w] = nd;
        parent[w] = v;
        heap.push({nd, w});
      }
    }
  }
  if (!done[b]) throw std::invalid_argument("shortest_edge_path: vertices are not connected");
  std::vector<int> path;
  for (int v = b; v != -1; v = parent[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

int nearest_vertex(const SimplicialMesh& mesh, const Vec3& p) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    double d = (mesh.vertices[v] - p).norm2();
    if (d < bd) {
      bd = d;
      best = v;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {
std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

void write_mesh(std::ostream& out, const SimplicialMesh& mesh) {
  out << mesh.dim << ' ' << mesh.vertex_count() << ' ' << mesh.simplex_count() << '\n';
  for (const auto& v : mesh.vertices) {
    out << format_double(v.x) << ' ' << format_double(v.y);
    if (mesh.dim == 3) out << ' ' << format_double(v.z);
    out << '\n';
  }
  for (const auto& s : mesh.simplices) {
    out << s[0] << ' ' << s[1] << ' ' << s[2];
    if (mesh.dim == 3) out << ' ' << s[3];
    out << '\n';
  }
  for (const auto& [tag, nodes] : mesh.region_tags) {
    out << "region " << tag << ' ' << nodes.size() << '\n';
    for (size_t i = 0; i < nodes.size(); ++i) {
      out << nodes[i] << (i + 1 == nodes.size() ? '\n' : ' ');
    }
    if (nodes.empty()) out << '\n';
  }
}

void write_mesh_file(const std::string& path, const SimplicialMesh& mesh) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_mesh(f, mesh);
}

SimplicialMesh read_mesh(std::istream& in) {
  SimplicialMesh m;
  int nv = 0, ns = 0;
  if (!(in >> m.dim >> nv >> ns)) throw std::runtime_error("mesh header unreadable");
  if ((m.dim != 2 && m.dim != 3) || nv <= 0 || ns <= 0) {
    throw std::runtime_error("mesh header invalid (dim " + std::to_string(m.dim) + ", " +
                             std::to_string(nv) + " vertices, " + std::to_string(ns) +
                             " simplices)");
  }
  m.vertices.resize(nv);
  for (int v = 0; v < nv; ++v) {
    Vec3 p;
    if (!(in >> p.x >> p.y)) throw std::runtime_error("vertex " + std::to_string(v) + " unreadable");
    if (m.dim == 3 && !(in >> p.z)) {
      throw std::runtime_error("vertex " + std::to_string(v) + " unreadable");
    }
    m.vertices[v] = p;
  }
  m.simplices.resize(ns);
  for (int e = 0; e < ns; ++e) {
    std::array<int, 4> s{-1, -1, -1, -1};
    for (int i = 0; i < m.dim + 1; ++i) {
      if (!(in >> s[i])) throw std::runtime_error("simplex " + std::to_string(e) + " unreadable");
      if (s[i] < 0 || s[i] >= nv) {
        throw std::runtime_error("simplex " + std::to_string(e) + " has out-of-range vertex " +
                                 std::to_string(s[i]));
      }
    }
    m.simplices[e] = s;
  }
  std::string word;
  while (in >> word) {
    if (word != "region") throw std::runtime_error("expected 'region', got '" + word + "'");
    std::string tag;
    size_t count = 0;
    if (!(in >> tag >> count)) throw std::runtime_error("region header unreadable");
    std::vector<int> nodes(count);
    for (size_t i = 0; i < count; ++i) {
      if (!(in >> nodes[i])) throw std::runtime_error("region '" + tag + "' nodes unreadable");
      if (nodes[i] < 0 || nodes[i] >= nv) {
        throw std::runtime_error("region '" + tag + "' has out-of-range node");
      }
    }
    std::sort(nodes.begin(), nodes.end());
    m.region_tags[tag] = std::move(nodes);
  }
  compute_boundary(m);
  auto problems = mesh_audit(m);
  if (!problems.empty()) {
    throw std::runtime_error("mesh file fails audit: " + problems.front());
  }
  return m;
}

SimplicialMesh read_mesh_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for reading");
  return read_mesh(f);
}

}  // namespace capnum
