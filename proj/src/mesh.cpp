#include "cpagain/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace cpagain {

namespace {

double factorial(int n) {
  double r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

bool is_origin(const Eigen::VectorXd& x) {
  return x.cwiseAbs().maxCoeff() == 0.0;
}

// Rotate the origin vertex (if any) to position 0.
void apply_origin_convention(std::vector<int>& ids,
                             const std::vector<Vertex>& vertices) {
  for (size_t k = 0; k < ids.size(); ++k) {
    if (is_origin(vertices[ids[k]].coords)) {
      std::rotate(ids.begin(), ids.begin() + k, ids.begin() + k + 1);
      return;
    }
  }
}

}  // namespace

bool Region::contains(int id) const {
  return std::binary_search(simplex_ids.begin(), simplex_ids.end(), id);
}

int Triangulation::origin_vertex() const {
  for (const auto& v : vertices)
    if (is_origin(v.coords)) return v.id;
  return -1;
}

std::vector<int> Triangulation::boundary_vertices() const {
  std::set<int> out;
  for (const auto& [facet, incident] : facet_map)
    if (incident.size() == 1)
      for (int v : facet) out.insert(v);
  return {out.begin(), out.end()};
}

std::vector<int> Triangulation::neighbors(int simplex_id) const {
  std::set<int> out;
  const Simplex& s = simplexes[simplex_id];
  for (size_t skip = 0; skip < s.vertex_ids.size(); ++skip) {
    std::vector<int> facet;
    for (size_t k = 0; k < s.vertex_ids.size(); ++k)
      if (k != skip) facet.push_back(s.vertex_ids[k]);
    std::sort(facet.begin(), facet.end());
    auto it = facet_map.find(facet);
    if (it != facet_map.end())
      for (int id : it->second)
        if (id != simplex_id) out.insert(id);
  }
  return {out.begin(), out.end()};
}

void Triangulation::rebuild_caches() {
  facet_map.clear();
  for (auto& s : simplexes) {
    apply_origin_convention(s.vertex_ids, vertices);
    s.X.resize(n, n);
    const Eigen::VectorXd& x0 = vertices[s.vertex_ids[0]].coords;
    for (int j = 1; j <= n; ++j)
      s.X.row(j - 1) = (vertices[s.vertex_ids[j]].coords - x0).transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(s.X);
    if (!lu.isInvertible())
      throw std::runtime_error("simplex " + std::to_string(s.id) +
                               ": vertices are affinely dependent");
    s.Xinv = lu.inverse();
    s.volume = std::abs(s.X.determinant()) / factorial(n);
    for (size_t skip = 0; skip < s.vertex_ids.size(); ++skip) {
      std::vector<int> facet;
      for (size_t k = 0; k < s.vertex_ids.size(); ++k)
        if (k != skip) facet.push_back(s.vertex_ids[k]);
      std::sort(facet.begin(), facet.end());
      facet_map[facet].push_back(s.id);
    }
  }
}

Triangulation kuhn_triangulate(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                               const std::vector<int>& grid) {
  const int n = static_cast<int>(lo.size());
  if (hi.size() != n || static_cast<int>(grid.size()) != n)
    throw std::invalid_argument("kuhn_triangulate: dimension mismatch");
  Triangulation T;
  T.n = n;
  T.box_lo = lo;
  T.box_hi = hi;
  T.grid = grid;
  T.axis_coords.resize(n);
  for (int a = 0; a < n; ++a) {
    if (!(hi[a] > lo[a])) throw std::invalid_argument("degenerate box");
    if (grid[a] < 1) throw std::invalid_argument("grid must be >= 1 per axis");
    double h = (hi[a] - lo[a]) / grid[a];
    bool has_zero = false;
    for (int i = 0; i <= grid[a]; ++i) {
      double c = (i == grid[a]) ? hi[a] : lo[a] + i * h;
      if (std::abs(c) <= 1e-12) {
        c = 0.0;  // snap so the origin is an exact vertex
        has_zero = true;
      }
      T.axis_coords[a].push_back(c);
    }
    if (!has_zero)
      throw std::invalid_argument(
          "kuhn_triangulate: grid lines must pass through 0 on every axis");
  }

  // Excluded equilibrium neighborhood: the smallest grid spacing adjacent
  // to the zero line over all axes.
  T.exclusion_radius = std::numeric_limits<double>::infinity();
  for (int a = 0; a < n; ++a) {
    const auto& c = T.axis_coords[a];
    for (size_t i = 0; i < c.size(); ++i) {
      if (c[i] != 0.0) continue;
      if (i > 0) T.exclusion_radius = std::min(T.exclusion_radius, -c[i - 1]);
      if (i + 1 < c.size())
        T.exclusion_radius = std::min(T.exclusion_radius, c[i + 1]);
    }
  }
  if (!std::isfinite(T.exclusion_radius)) T.exclusion_radius = 0.0;

  // Lattice vertices, last axis fastest.
  std::vector<int> strides(n);
  {
    int s = 1;
    for (int a = n - 1; a >= 0; --a) {
      strides[a] = s;
      s *= static_cast<int>(T.axis_coords[a].size());
    }
  }
  std::vector<int> idx(n, 0);
  int total = 1;
  for (int a = 0; a < n; ++a) total *= static_cast<int>(T.axis_coords[a].size());
  T.vertices.resize(total);
  for (int flat = 0; flat < total; ++flat) {
    int rem = flat;
    Eigen::VectorXd c(n);
    for (int a = 0; a < n; ++a) {
      int i = rem / strides[a];
      rem %= strides[a];
      c[a] = T.axis_coords[a][i];
    }
    T.vertices[flat] = Vertex{flat, c};
  }

  // Kuhn split of every cell: one simplex per axis permutation.
  std::vector<int> perm(n);
  std::vector<int> cell(n, 0);
  int sid = 0;
  while (true) {
    std::iota(perm.begin(), perm.end(), 0);
    do {
      Simplex s;
      s.id = sid++;
      std::vector<int> corner = cell;
      int flat = 0;
      for (int a = 0; a < n; ++a) flat += corner[a] * strides[a];
      s.vertex_ids.push_back(flat);
      std::vector<int> cur = corner;
      for (int k = 0; k < n; ++k) {
        cur[perm[k]] += 1;
        int f = 0;
        for (int a = 0; a < n; ++a) f += cur[a] * strides[a];
        s.vertex_ids.push_back(f);
      }
      T.simplexes.push_back(std::move(s));
    } while (std::next_permutation(perm.begin(), perm.end()));
    // advance cell index
    int a = n - 1;
    while (a >= 0 && ++cell[a] == grid[a]) cell[a--] = 0;
    if (a < 0) break;
  }
  T.rebuild_caches();
  return T;
}

Eigen::VectorXd barycentric(const Triangulation& T, const Simplex& s,
                            const Eigen::VectorXd& x) {
  const int n = T.n;
  const Eigen::VectorXd& x0 = T.coords(s.vertex_ids[0]);
  Eigen::VectorXd lam_rest = s.Xinv.transpose() * (x - x0);
  Eigen::VectorXd lam(n + 1);
  lam[0] = 1.0 - lam_rest.sum();
  lam.tail(n) = lam_rest;
  for (int j = 0; j <= n; ++j)
    if (lam[j] < -kGeomTol || lam[j] > 1.0 + kGeomTol)
      throw std::out_of_range("barycentric: point outside simplex");
  return lam;
}

namespace {
bool simplex_contains(const Triangulation& T, const Simplex& s,
                      const Eigen::VectorXd& x, double tol) {
  const Eigen::VectorXd& x0 = T.coords(s.vertex_ids[0]);
  Eigen::VectorXd lam_rest = s.Xinv.transpose() * (x - x0);
  double sum = lam_rest.sum();
  if (1.0 - sum < -tol) return false;
  for (int j = 0; j < T.n; ++j)
    if (lam_rest[j] < -tol) return false;
  return true;
}
}  // namespace

int locate(const Triangulation& T, const Eigen::VectorXd& x) {
  for (const auto& s : T.simplexes)
    if (simplex_contains(T, s, x, kGeomTol)) return s.id;
  throw std::out_of_range("locate: point outside the triangulated domain");
}

std::vector<int> locate_all(const Triangulation& T, const Eigen::VectorXd& x) {
  std::vector<int> out;
  for (const auto& s : T.simplexes)
    if (simplex_contains(T, s, x, kGeomTol)) out.push_back(s.id);
  return out;
}

namespace {

// Exact-byte coordinate key; midpoints computed from identical endpoint
// doubles collide exactly, which is what deduplication needs.
struct CoordKey {
  std::vector<double> c;
  bool operator<(const CoordKey& o) const {
    return std::lexicographical_compare(c.begin(), c.end(), o.c.begin(), o.c.end());
  }
};

CoordKey key_of(const Eigen::VectorXd& x) {
  CoordKey k;
  k.c.assign(x.data(), x.data() + x.size());
  return k;
}

// Renumber refined so that every vertex of parent keeps its parent id;
// new vertices follow in refined order.
void preserve_parent_ids(const Triangulation& parent, Triangulation& refined) {
  std::map<CoordKey, int> parent_ids;
  for (const auto& v : parent.vertices) parent_ids[key_of(v.coords)] = v.id;
  std::vector<int> remap(refined.vertices.size(), -1);
  int next_id = parent.num_vertices();
  for (const auto& v : refined.vertices) {
    auto it = parent_ids.find(key_of(v.coords));
    remap[v.id] = (it != parent_ids.end()) ? it->second : next_id++;
  }
  if (next_id - parent.num_vertices() + static_cast<int>(parent_ids.size()) !=
      static_cast<int>(refined.vertices.size()))
    throw std::runtime_error("refinement lost parent vertices");
  std::vector<Vertex> verts(refined.vertices.size());
  for (const auto& v : refined.vertices)
    verts[remap[v.id]] = Vertex{remap[v.id], v.coords};
  refined.vertices = std::move(verts);
  for (auto& s : refined.simplexes)
    for (int& vid : s.vertex_ids) vid = remap[vid];
  refined.rebuild_caches();
}

Triangulation red_green_2d(const Triangulation& T, std::set<int> red);

}  // namespace

Triangulation refine_all(const Triangulation& T) {
  if (!T.axis_coords.empty()) {
    // Structured mesh: insert the midpoint of every consecutive pair of
    // grid lines and re-triangulate; parent lattice points are kept
    // bit-identical.
    Eigen::VectorXd lo = T.box_lo, hi = T.box_hi;
    std::vector<std::vector<double>> coords(T.n);
    for (int a = 0; a < T.n; ++a) {
      const auto& c = T.axis_coords[a];
      for (size_t i = 0; i + 1 < c.size(); ++i) {
        coords[a].push_back(c[i]);
        coords[a].push_back(0.5 * (c[i] + c[i + 1]));
      }
      coords[a].push_back(c.back());
    }
    // kuhn_triangulate only accepts uniform grids via counts; construct
    // directly here instead.
    Triangulation R;
    R.n = T.n;
    R.box_lo = lo;
    R.box_hi = hi;
    R.axis_coords = coords;
    R.exclusion_radius = T.exclusion_radius;
    for (int a = 0; a < T.n; ++a)
      R.grid.push_back(static_cast<int>(coords[a].size()) - 1);
    std::vector<int> strides(T.n);
    {
      int s = 1;
      for (int a = T.n - 1; a >= 0; --a) {
        strides[a] = s;
        s *= static_cast<int>(coords[a].size());
      }
    }
    int total = 1;
    for (int a = 0; a < T.n; ++a) total *= static_cast<int>(coords[a].size());
    R.vertices.resize(total);
    for (int flat = 0; flat < total; ++flat) {
      int rem = flat;
      Eigen::VectorXd c(T.n);
      for (int a = 0; a < T.n; ++a) {
        int i = rem / strides[a];
        rem %= strides[a];
        c[a] = coords[a][i];
      }
      R.vertices[flat] = Vertex{flat, c};
    }
    std::vector<int> perm(T.n);
    std::vector<int> cell(T.n, 0);
    int sid = 0;
    while (true) {
      std::iota(perm.begin(), perm.end(), 0);
      do {
        Simplex s;
        s.id = sid++;
        int flat = 0;
        for (int a = 0; a < T.n; ++a) flat += cell[a] * strides[a];
        s.vertex_ids.push_back(flat);
        std::vector<int> cur = cell;
        for (int k = 0; k < T.n; ++k) {
          cur[perm[k]] += 1;
          int f = 0;
          for (int a = 0; a < T.n; ++a) f += cur[a] * strides[a];
          s.vertex_ids.push_back(f);
        }
        R.simplexes.push_back(std::move(s));
      } while (std::next_permutation(perm.begin(), perm.end()));
      int a = T.n - 1;
      while (a >= 0 && ++cell[a] == R.grid[a]) cell[a--] = 0;
      if (a < 0) break;
    }
    R.rebuild_caches();
    preserve_parent_ids(T, R);
    return R;
  }
  if (T.n == 2) {
    std::set<int> all;
    for (const auto& s : T.simplexes) all.insert(s.id);
    return red_green_2d(T, all);
  }
  throw std::runtime_error("refine_all: unstructured meshes supported for n=2 only");
}

namespace {

Triangulation red_green_2d(const Triangulation& T, std::set<int> red) {
  using Edge = std::pair<int, int>;
  auto edge = [](int a, int b) { return Edge(std::min(a, b), std::max(a, b)); };
  auto tri_edges = [&](const Simplex& s) {
    return std::array<Edge, 3>{edge(s.vertex_ids[0], s.vertex_ids[1]),
                               edge(s.vertex_ids[1], s.vertex_ids[2]),
                               edge(s.vertex_ids[0], s.vertex_ids[2])};
  };

  // An edge splits iff some red triangle owns it; a triangle with 2+
  // split edges is promoted to red; iterate to the conforming closure.
  std::set<Edge> split;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int id : red)
      for (const Edge& e : tri_edges(T.simplexes[id]))
        if (split.insert(e).second) changed = true;
    for (const auto& s : T.simplexes) {
      if (red.count(s.id)) continue;
      int k = 0;
      for (const Edge& e : tri_edges(s)) k += split.count(e);
      if (k >= 2) {
        red.insert(s.id);
        changed = true;
      }
    }
  }

  Triangulation R;
  R.n = 2;
  R.box_lo = T.box_lo;
  R.box_hi = T.box_hi;
  R.exclusion_radius = T.exclusion_radius;
  R.vertices = T.vertices;
  std::map<Edge, int> midpoint;
  for (const Edge& e : split) {
    Eigen::VectorXd mid = 0.5 * (T.coords(e.first) + T.coords(e.second));
    int id = R.num_vertices();
    R.vertices.push_back(Vertex{id, mid});
    midpoint[e] = id;
  }

  int sid = 0;
  auto add_tri = [&](int a, int b, int c) {
    Simplex s;
    s.id = sid++;
    s.vertex_ids = {a, b, c};
    R.simplexes.push_back(std::move(s));
  };
  for (const auto& s : T.simplexes) {
    int v0 = s.vertex_ids[0], v1 = s.vertex_ids[1], v2 = s.vertex_ids[2];
    if (red.count(s.id)) {
      int m01 = midpoint.at(edge(v0, v1));
      int m12 = midpoint.at(edge(v1, v2));
      int m02 = midpoint.at(edge(v0, v2));
      add_tri(v0, m01, m02);
      add_tri(v1, m01, m12);
      add_tri(v2, m02, m12);
      add_tri(m01, m12, m02);
    } else {
      // At most one split edge: green bisection to the opposite vertex.
      int verts[3] = {v0, v1, v2};
      int found = -1, opp = -1;
      for (int k = 0; k < 3; ++k) {
        Edge e = edge(verts[k], verts[(k + 1) % 3]);
        if (split.count(e)) {
          found = midpoint.at(e);
          opp = verts[(k + 2) % 3];
          add_tri(verts[k], found, opp);
          add_tri(verts[(k + 1) % 3], found, opp);
          break;
        }
      }
      if (found < 0) add_tri(v0, v1, v2);
    }
  }
  R.rebuild_caches();
  return R;
}

}  // namespace

Triangulation refine(const Triangulation& T, const std::set<int>& which) {
  if (which.empty()) return T;
  if (T.n == 2) return red_green_2d(T, which);
  return refine_all(T);
}

std::vector<int> shell_indices(const Triangulation& T, const Region& A1) {
  for (int id : A1.simplex_ids)
    if (id < 0 || id >= T.num_simplexes())
      throw std::out_of_range("shell_indices: invalid simplex id in region");
  std::vector<int> out;
  for (const auto& s : T.simplexes)
    if (!A1.contains(s.id)) out.push_back(s.id);
  return out;
}

Region region_from_box(const Triangulation& T, const Eigen::VectorXd& lo,
                       const Eigen::VectorXd& hi) {
  Region r;
  const double tol = kGeomTol;
  for (const auto& s : T.simplexes) {
    int within = 0;
    bool any_strict_interior = false;
    for (int vid : s.vertex_ids) {
      const Eigen::VectorXd& x = T.coords(vid);
      bool in = true, strict = true;
      for (int a = 0; a < T.n; ++a) {
        if (x[a] < lo[a] - tol || x[a] > hi[a] + tol) in = false;
        if (!(x[a] > lo[a] + tol && x[a] < hi[a] - tol)) strict = false;
      }
      if (in) ++within;
      if (strict) any_strict_interior = true;
    }
    if (within == T.n + 1)
      r.simplex_ids.push_back(s.id);
    else if (any_strict_interior)
      // a vertex strictly inside while others are outside: the box
      // boundary cuts through this simplex
      throw std::runtime_error(
          "region_from_box: box boundary does not lie on simplex faces");
  }
  return r;
}

MeshDiagnostics validate(const Triangulation& T) {
  MeshDiagnostics d;
  // dense ids, finite coords, duplicates
  for (int i = 0; i < T.num_vertices(); ++i) {
    if (T.vertices[i].id != i)
      d.issues.push_back("vertex ids not dense at index " + std::to_string(i));
    if (!T.vertices[i].coords.allFinite())
      d.issues.push_back("vertex " + std::to_string(i) + " has non-finite coords");
  }
  {
    std::map<CoordKey, int> seen;
    for (const auto& v : T.vertices) {
      auto [it, fresh] = seen.emplace(key_of(v.coords), v.id);
      if (!fresh)
        d.issues.push_back("duplicate vertex coordinates: ids " +
                           std::to_string(it->second) + " and " +
                           std::to_string(v.id));
    }
  }
  for (const auto& s : T.simplexes) {
    double scale = 0;
    for (int j = 1; j <= T.n; ++j) scale = std::max(scale, s.X.row(j - 1).norm());
    if (std::abs(s.X.determinant()) <= 1e-12 * std::pow(std::max(scale, 1e-30), T.n))
      d.issues.push_back("simplex " + std::to_string(s.id) +
                         ": affine independence failure");
    for (size_t k = 0; k < s.vertex_ids.size(); ++k)
      if (is_origin(T.coords(s.vertex_ids[k])) && k != 0)
        d.issues.push_back("simplex " + std::to_string(s.id) +
                           ": origin vertex not listed first");
  }
  for (const auto& [facet, incident] : T.facet_map)
    if (incident.size() > 2)
      d.issues.push_back("facet shared by more than two simplexes");
  // pairwise overlap probe: centroid of one strictly inside another
  for (const auto& s : T.simplexes) {
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(T.n);
    for (int vid : s.vertex_ids) centroid += T.coords(vid);
    centroid /= (T.n + 1);
    for (const auto& t : T.simplexes) {
      if (t.id == s.id) continue;
      if (simplex_contains(T, t, centroid, -1e-9))
        d.issues.push_back("simplexes " + std::to_string(s.id) + " and " +
                           std::to_string(t.id) +
                           " overlap (non-face intersection)");
    }
  }
  if (T.box_lo.size() == T.n) {
    double vol = 0;
    for (const auto& s : T.simplexes) vol += s.volume;
    double box_vol = (T.box_hi - T.box_lo).prod();
    if (std::abs(vol - box_vol) > 1e-9 * std::max(1.0, box_vol))
      d.issues.push_back("simplex volumes do not sum to the box volume");
  }
  return d;
}

Triangulation extract_submesh(const Triangulation& T, const std::vector<int>& ids,
                              std::vector<int>& vertex_map) {
  Triangulation S;
  S.n = T.n;
  S.exclusion_radius = T.exclusion_radius;
  vertex_map.assign(T.num_vertices(), -1);
  for (int id : ids)
    for (int vid : T.simplexes[id].vertex_ids)
      if (vertex_map[vid] < 0) {
        vertex_map[vid] = S.num_vertices();
        S.vertices.push_back(Vertex{vertex_map[vid], T.coords(vid)});
      }
  int sid = 0;
  for (int id : ids) {
    Simplex s;
    s.id = sid++;
    for (int vid : T.simplexes[id].vertex_ids) s.vertex_ids.push_back(vertex_map[vid]);
    S.simplexes.push_back(std::move(s));
  }
  S.rebuild_caches();
  return S;
}

std::string mesh_to_json(const Triangulation& T) {
  nlohmann::ordered_json j;
  j["n"] = T.n;
  auto& verts = j["vertices"] = nlohmann::ordered_json::array();
  for (const auto& v : T.vertices) {
    std::vector<double> c(v.coords.data(), v.coords.data() + v.coords.size());
    verts.push_back(c);
  }
  auto& simp = j["simplexes"] = nlohmann::ordered_json::array();
  for (const auto& s : T.simplexes) simp.push_back(s.vertex_ids);
  j["tags"] = nlohmann::ordered_json::object();
  if (T.box_lo.size() == T.n) {
    j["box_lo"] = std::vector<double>(T.box_lo.data(), T.box_lo.data() + T.n);
    j["box_hi"] = std::vector<double>(T.box_hi.data(), T.box_hi.data() + T.n);
  }
  if (!T.grid.empty()) j["grid"] = T.grid;
  if (!T.axis_coords.empty()) j["axis_coords"] = T.axis_coords;
  if (T.exclusion_radius > 0) j["exclusion_radius"] = T.exclusion_radius;
  return j.dump();
}

Triangulation mesh_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Triangulation T;
  T.n = j.at("n").get<int>();
  int vid = 0;
  for (const auto& vc : j.at("vertices")) {
    Eigen::VectorXd c(T.n);
    for (int a = 0; a < T.n; ++a) c[a] = vc.at(a).get<double>();
    T.vertices.push_back(Vertex{vid++, c});
  }
  int sid = 0;
  for (const auto& sv : j.at("simplexes")) {
    Simplex s;
    s.id = sid++;
    for (const auto& v : sv) s.vertex_ids.push_back(v.get<int>());
    T.simplexes.push_back(std::move(s));
  }
  if (j.contains("box_lo")) {
    T.box_lo.resize(T.n);
    T.box_hi.resize(T.n);
    for (int a = 0; a < T.n; ++a) {
      T.box_lo[a] = j["box_lo"].at(a).get<double>();
      T.box_hi[a] = j["box_hi"].at(a).get<double>();
    }
  }
  if (j.contains("grid")) T.grid = j["grid"].get<std::vector<int>>();
  if (j.contains("axis_coords"))
    T.axis_coords = j["axis_coords"].get<std::vector<std::vector<double>>>();
  T.exclusion_radius = j.value("exclusion_radius", 0.0);
  T.rebuild_caches();
  return T;
}

}  // namespace cpagain
