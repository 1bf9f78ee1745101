#ifndef CPAGAIN_MESH_HPP
#define CPAGAIN_MESH_HPP

#include <Eigen/Dense>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cpagain {

struct Vertex {
  int id = -1;
  Eigen::VectorXd coords;
};

/// n-simplex by vertex ids; vertex_ids[0] is the origin whenever the
/// origin is a vertex of this simplex. X has row j-1 = x_j - x_0 for
/// j = 1..n (so gradients of CPA interpolants are Xinv * Vbar).
struct Simplex {
  int id = -1;
  std::vector<int> vertex_ids;  // n+1 entries
  Eigen::MatrixXd X, Xinv;
  double volume = 0.0;
};

struct Region {
  std::vector<int> simplex_ids;  // sorted, unique
  bool contains(int id) const;
};

struct Triangulation {
  int n = 0;
  std::vector<Vertex> vertices;
  std::vector<Simplex> simplexes;
  Eigen::VectorXd box_lo, box_hi;          // extents (empty if not box-shaped)
  std::vector<int> grid;                   // cells per axis (empty if unstructured)
  std::vector<std::vector<double>> axis_coords;  // grid lines per axis
  // Half-width (sup norm) of the excluded equilibrium neighborhood around
  // the origin; fixed at construction and preserved by refinement so the
  // certified region does not change when the mesh does.
  double exclusion_radius = 0;
  // facet (sorted vertex ids) -> incident simplex ids
  std::map<std::vector<int>, std::vector<int>> facet_map;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_simplexes() const { return static_cast<int>(simplexes.size()); }
  const Eigen::VectorXd& coords(int vid) const { return vertices[vid].coords; }
  int origin_vertex() const;               // -1 if absent
  /// Vertex ids lying on boundary facets (facets with one incident simplex).
  std::vector<int> boundary_vertices() const;
  std::vector<int> neighbors(int simplex_id) const;  // face-adjacent, sorted
  void rebuild_caches();                   // X, Xinv, volume, facet_map
};

struct MeshDiagnostics {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
};

inline constexpr double kGeomTol = 1e-10;

/// Kuhn/Freudenthal triangulation of the box [lo, hi] with grid[k] cells
/// per axis: n! simplexes per cell. Grid lines must pass through 0.
Triangulation kuhn_triangulate(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                               const std::vector<int>& grid);

/// Barycentric coordinates of x in s; throws if x lies outside (tol kGeomTol).
Eigen::VectorXd barycentric(const Triangulation& T, const Simplex& s,
                            const Eigen::VectorXd& x);

/// Lowest-id simplex containing x; throws std::out_of_range outside the domain.
int locate(const Triangulation& T, const Eigen::VectorXd& x);
/// All simplexes containing x (face points belong to several).
std::vector<int> locate_all(const Triangulation& T, const Eigen::VectorXd& x);

/// Uniform refinement ("all"): every simplex split, conforming, parent
/// vertices preserved with their ids.
Triangulation refine_all(const Triangulation& T);
/// Selective red-green refinement (n = 2); other dimensions expand the
/// closure to the whole mesh. Empty selection returns T unchanged.
Triangulation refine(const Triangulation& T, const std::set<int>& which);

/// Simplexes of T not contained in A1 (the index set for the barrier
/// decrease condition).
std::vector<int> shell_indices(const Triangulation& T, const Region& A1);

/// Simplexes of T fully inside the box [lo, hi]; throws if some simplex
/// straddles the box boundary.
Region region_from_box(const Triangulation& T, const Eigen::VectorXd& lo,
                       const Eigen::VectorXd& hi);

MeshDiagnostics validate(const Triangulation& T);

/// Submesh of the given simplexes, vertices renumbered densely.
/// vertex_map[old_id] = new id or -1.
Triangulation extract_submesh(const Triangulation& T, const std::vector<int>& ids,
                              std::vector<int>& vertex_map);

std::string mesh_to_json(const Triangulation& T);
Triangulation mesh_from_json(const std::string& text);

}  // namespace cpagain

#endif
