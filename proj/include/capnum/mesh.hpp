// Simplicial meshes of single-chart domains in R^2 / R^3.
//
// Meshes are value types and are treated as immutable after construction:
// every operation returns a new mesh.  Vertex coordinates on curved
// boundaries (circles, spheres) lie exactly on the boundary; refinement
// projects new boundary midpoints back onto it, so polygonal geometry error
// shrinks at second order while topology stays conforming.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "capnum/geometry.hpp"

namespace capnum {

// ---------------------------------------------------------------------------
// Domain descriptions

struct BallSpec {
  Vec3 center;
  double radius = 1.0;
};

struct AnnulusSpec {
  Vec3 center;
  double r_inner = 0.25;
  double r_outer = 1.0;
};

struct BoxSpec {
  Vec3 min_corner;
  Vec3 max_corner;
};

struct BoxMinusBallSpec {
  BoxSpec box;
  BallSpec ball;  // excised; must lie strictly inside the box
};

struct DomainSpec {
  int dim = 2;  // 2 or 3
  std::variant<BallSpec, AnnulusSpec, BoxSpec, BoxMinusBallSpec> shape = BallSpec{};
  // Requested edge length near the domain's characteristic scale.  The
  // builders honor it up to rounding to a conforming vertex count.
  double target_edge_length = 0.1;

  // Throws std::invalid_argument on non-positive radii/edge lengths,
  // inverted boxes, dim outside {2, 3}, or an excised ball that is not
  // strictly inside its box.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Mesh

struct SimplicialMesh {
  int dim = 2;
  std::vector<Vec3> vertices;
  // Each simplex stores dim+1 vertex indices; slot 3 is -1 for dim == 2.
  std::vector<std::array<int, 4>> simplices;
  // Vertices incident to a facet that belongs to exactly one simplex.
  // Sorted ascending.
  std::vector<int> boundary_nodes;
  // Named vertex subsets (plates, probes, ...).  Node lists sorted ascending.
  std::map<std::string, std::vector<int>> region_tags;
  // Geometry provenance, used to project refined boundary midpoints.
  std::optional<DomainSpec> domain;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int simplex_count() const { return static_cast<int>(simplices.size()); }

  // Unsigned area (dim 2) / volume (dim 3) of one simplex.
  double simplex_volume(int e) const;
  double total_volume() const;
  Vec3 simplex_centroid(int e) const;

  // Unique undirected edges as (min, max) pairs, sorted lexicographically.
  std::vector<std::array<int, 2>> edges() const;
  // Neighbor lists over the edge graph, each sorted ascending.
  std::vector<std::vector<int>> vertex_adjacency() const;

  bool has_region(const std::string& tag) const { return region_tags.count(tag) != 0; }
  const std::vector<int>& region(const std::string& tag) const;  // throws if absent
};

// Structural audit: positive volumes, conforming facets, boundary consistency,
// connected vertex graph, valid region tags.  Returns a list of human-readable
// problems; empty means the mesh is sound.  Builders call this on their output.
std::vector<std::string> mesh_audit(const SimplicialMesh& mesh);

// ---------------------------------------------------------------------------
// Construction

// Build a conforming mesh of the requested domain.  Throws
// std::invalid_argument if the spec fails validation.
SimplicialMesh build_mesh(const DomainSpec& spec);

// Uniform refinement: every triangle splits into 4, every tetrahedron into 8
// (corner cut plus interior octahedron).  New midpoints of boundary edges are
// projected onto the true domain boundary when the mesh carries a DomainSpec.
// Region tags carry over (a refined vertex inherits membership only if it was
// tagged before; tags stay meaningful for vertex-set plates).
SimplicialMesh refine(const SimplicialMesh& mesh);

// Tag all vertices satisfying `predicate`.  Returns the tagged mesh.  Throws
// std::invalid_argument if the tag already exists; warns on stderr if the
// predicate selects no vertices (the tag is still created, empty).
SimplicialMesh mark_region(const SimplicialMesh& mesh, const std::string& tag,
                           const std::function<bool(const Vec3&)>& predicate);

// Restriction to the sub-mesh induced by the selected vertices: keeps every
// simplex all of whose vertices satisfy `keep_vertex`, renumbering vertices
// in their original order.  Region tags are restricted; boundary nodes are
// recomputed.  Throws std::invalid_argument if no simplex survives.
SimplicialMesh submesh(const SimplicialMesh& mesh,
                       const std::function<bool(const Vec3&)>& keep_vertex,
                       const std::optional<DomainSpec>& new_domain = std::nullopt);

// ---------------------------------------------------------------------------
// Exhaustions
//
// A growing family of concentric domains sharing their inner structure: the
// stage-i mesh's vertices (and simplices) are literally a prefix of the
// stage-(i+1) mesh's arrays, so node indices of the common part agree across
// all stages.  This makes zero-extension of a discrete field from a smaller
// stage to a larger one an exact operation, and lets inner plates be named
// by index once.  Radial layers are geometrically graded so that element
// aspect stays bounded; vertices land exactly on each requested radius.
// Each stage is tagged "outer_boundary"; shell stages also "inner_boundary".

// Stages are balls B(center, radii[i]).  `radii` strictly increasing.
std::vector<SimplicialMesh> build_ball_exhaustion(int dim, const Vec3& center,
                                                  const std::vector<double>& radii,
                                                  double target_edge_length);

// Stages are shells { r_inner <= |x - center| <= radii[i] } (a disk/ball of
// radius r_inner is excised).  `radii` strictly increasing, radii[0] > r_inner.
std::vector<SimplicialMesh> build_shell_exhaustion(int dim, const Vec3& center,
                                                   double r_inner,
                                                   const std::vector<double>& radii,
                                                   double target_edge_length);

// True when `inner`'s vertices and simplices are an exact prefix of `outer`'s
// (coordinates compared bitwise), i.e. the pair usable for zero-extension.
bool is_prefix_mesh(const SimplicialMesh& inner, const SimplicialMesh& outer);

// Verify that every vertex and simplex of `inner` appears in `outer`
// (coordinates matched exactly, arbitrary numbering).  Returns the vertex map
// inner->outer, or std::nullopt if `inner` is not contained in `outer`.
std::optional<std::vector<int>> nested_vertex_map(const SimplicialMesh& inner,
                                                  const SimplicialMesh& outer);

// ---------------------------------------------------------------------------
// Graph utilities

// True when the given vertex set is connected in the mesh's edge graph.
// An empty set counts as connected; a singleton does too.
bool vertex_set_connected(const SimplicialMesh& mesh, const std::vector<int>& nodes);

// Shortest path between two vertices over mesh edges weighted by Euclidean
// length (Dijkstra; ties broken by smaller vertex index so the result is
// deterministic).  Returns the vertex sequence from `a` to `b` inclusive.
// Throws std::invalid_argument on out-of-range vertices or if unreachable.
std::vector<int> shortest_edge_path(const SimplicialMesh& mesh, int a, int b);

// Index of the vertex nearest to `p` (smallest index wins ties).
int nearest_vertex(const SimplicialMesh& mesh, const Vec3& p);

// ---------------------------------------------------------------------------
// Serialization
//
// Plain text, line oriented:
//   line 1:  dim n_vertices n_simplices
//   then one vertex per line ("x y" / "x y z", 17 significant digits),
//   then one simplex per line (dim+1 zero-based indices),
//   then per region tag: "region <tag> <count>" followed by <count> indices
//   (whitespace separated, one line).
// The DomainSpec is not serialized; a read-back mesh refines without
// boundary projection.

void write_mesh(std::ostream& out, const SimplicialMesh& mesh);
void write_mesh_file(const std::string& path, const SimplicialMesh& mesh);
SimplicialMesh read_mesh(std::istream& in);  // throws std::runtime_error on malformed input
SimplicialMesh read_mesh_file(const std::string& path);

}  // namespace capnum
