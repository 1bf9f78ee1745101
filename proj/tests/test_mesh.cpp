#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "cpagain/mesh.hpp"

using namespace cpagain;
using Eigen::VectorXd;

namespace {
VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

Triangulation unit_triangle() {
  Triangulation T;
  T.n = 2;
  T.vertices = {{0, vec2(0, 0)}, {1, vec2(1, 0)}, {2, vec2(0, 1)}};
  Simplex s;
  s.id = 0;
  s.vertex_ids = {0, 1, 2};
  T.simplexes = {s};
  T.rebuild_caches();
  return T;
}

double total_volume(const Triangulation& T) {
  double v = 0;
  for (const auto& s : T.simplexes) v += s.volume;
  return v;
}
}  // namespace

TEST_CASE("Kuhn triangulation counts") {
  Triangulation T1 = kuhn_triangulate(vec2(0, 0), vec2(1, 1), {1, 1});
  CHECK(T1.num_simplexes() == 2);
  CHECK(T1.num_vertices() == 4);
  CHECK(validate(T1).ok());

  Triangulation T2 = kuhn_triangulate(vec2(-1, -1), vec2(1, 1), {2, 2});
  CHECK(T2.num_simplexes() == 8);
  CHECK(T2.num_vertices() == 9);
  CHECK(validate(T2).ok());
  CHECK(T2.origin_vertex() >= 0);

  VectorXd lo1(1), hi1(1);
  lo1 << -1;
  hi1 << 1;
  Triangulation Tl = kuhn_triangulate(lo1, hi1, {2});
  CHECK(Tl.num_simplexes() == 2);
  CHECK(Tl.num_vertices() == 3);

  VectorXd lo3 = VectorXd::Constant(3, -1), hi3 = VectorXd::Constant(3, 1);
  Triangulation T3 = kuhn_triangulate(lo3, hi3, {2, 2, 2});
  CHECK(T3.num_simplexes() == 8 * 6);  // n! per cell
  CHECK(T3.num_vertices() == 27);
  CHECK(validate(T3).ok());
}

TEST_CASE("grid lines must pass through zero") {
  CHECK_THROWS(kuhn_triangulate(vec2(-1, -1), vec2(1, 1), {3, 3}));
}

TEST_CASE("origin-first vertex ordering in incident simplexes") {
  Triangulation T = kuhn_triangulate(vec2(-1, -1), vec2(1, 1), {2, 2});
  int o = T.origin_vertex();
  REQUIRE(o >= 0);
  for (const auto& s : T.simplexes) {
    bool has = std::find(s.vertex_ids.begin(), s.vertex_ids.end(), o) !=
               s.vertex_ids.end();
    if (has) CHECK(s.vertex_ids[0] == o);
  }
}

TEST_CASE("barycentric coordinate reference values") {
  Triangulation T = unit_triangle();
  VectorXd lam = barycentric(T, T.simplexes[0], vec2(0.25, 0.25));
  REQUIRE(lam.size() == 3);
  CHECK(lam[0] == doctest::Approx(0.5));
  CHECK(lam[1] == doctest::Approx(0.25));
  CHECK(lam[2] == doctest::Approx(0.25));

  VectorXd at_vertex = barycentric(T, T.simplexes[0], vec2(1, 0));
  CHECK(at_vertex[1] == doctest::Approx(1.0));
  CHECK(at_vertex[0] == doctest::Approx(0.0).epsilon(1e-12));

  VectorXd centroid = barycentric(T, T.simplexes[0], vec2(1.0 / 3, 1.0 / 3));
  for (int j = 0; j < 3; ++j) CHECK(centroid[j] == doctest::Approx(1.0 / 3));

  CHECK_THROWS(barycentric(T, T.simplexes[0], vec2(0.7, 0.7)));
}

TEST_CASE("X Xinv = I on every simplex") {
  Triangulation T = kuhn_triangulate(vec2(-1.5, -1.5), vec2(1.5, 1.5), {4, 4});
  for (const auto& s : T.simplexes) {
    Eigen::MatrixXd I = s.X * s.Xinv;
    CHECK((I - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("locate and barycentric reconstruct random points") {
  Triangulation T = kuhn_triangulate(vec2(-1.5, -1.5), vec2(1.5, 1.5), {4, 4});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 10000; ++i) {
    VectorXd x = vec2(u(rng), u(rng));
    int sid = locate(T, x);
    const Simplex& s = T.simplexes[sid];
    VectorXd lam = barycentric(T, s, x);
    CHECK(lam.minCoeff() >= -kGeomTol);
    CHECK(lam.sum() == doctest::Approx(1.0).epsilon(1e-9));
    VectorXd rec = VectorXd::Zero(2);
    for (int j = 0; j < 3; ++j) rec += lam[j] * T.coords(s.vertex_ids[j]);
    CHECK((rec - x).cwiseAbs().maxCoeff() <= 1e-9);
    // locate returns the lowest id among all containing simplexes
    std::vector<int> all = locate_all(T, x);
    REQUIRE(!all.empty());
    CHECK(sid == *std::min_element(all.begin(), all.end()));
  }
  CHECK_THROWS_AS(locate(T, vec2(2.0, 0.0)), std::out_of_range);
}

TEST_CASE("uniform refinement splits every simplex conformly") {
  Triangulation T = kuhn_triangulate(vec2(0, 0), vec2(1, 1), {1, 1});
  Triangulation R = refine_all(T);
  CHECK(R.num_simplexes() == 8);
  CHECK(validate(R).ok());
  // parent vertex ids keep their coordinates
  for (const auto& v : T.vertices) {
    REQUIRE(v.id < R.num_vertices());
    CHECK((R.coords(v.id) - v.coords).norm() == doctest::Approx(0.0));
  }
  CHECK(total_volume(R) == doctest::Approx(total_volume(T)).epsilon(1e-9));

  Triangulation T2 = kuhn_triangulate(vec2(-1.5, -1.5), vec2(1.5, 1.5), {4, 4});
  Triangulation R2 = refine_all(T2);
  CHECK(R2.num_simplexes() == 4 * T2.num_simplexes());
  CHECK(validate(R2).ok());
  CHECK(total_volume(R2) == doctest::Approx(total_volume(T2)).epsilon(1e-9));
}

TEST_CASE("selective refinement stays conforming") {
  Triangulation T = kuhn_triangulate(vec2(-1, -1), vec2(1, 1), {2, 2});
  Triangulation same = refine(T, {});
  CHECK(same.num_simplexes() == T.num_simplexes());
  CHECK(same.num_vertices() == T.num_vertices());

  Triangulation R = refine(T, {0});
  CHECK(validate(R).ok());
  CHECK(R.num_simplexes() > T.num_simplexes());
  CHECK(total_volume(R) == doctest::Approx(total_volume(T)).epsilon(1e-9));
}

TEST_CASE("shell indices complement the target region") {
  Triangulation T = kuhn_triangulate(vec2(-1, -1), vec2(1, 1), {2, 2});
  Region A1 = region_from_box(T, vec2(0, 0), vec2(1, 1));
  CHECK(A1.simplex_ids.size() == 2);
  std::vector<int> shell = shell_indices(T, A1);
  CHECK(shell.size() == 6);
  for (int id : shell) CHECK(!A1.contains(id));

  Region empty;
  CHECK(shell_indices(T, empty).size() == 8);
  Region all;
  for (int i = 0; i < 8; ++i) all.simplex_ids.push_back(i);
  CHECK(shell_indices(T, all).empty());
}

TEST_CASE("region_from_box rejects straddling boxes") {
  Triangulation T = kuhn_triangulate(vec2(-1, -1), vec2(1, 1), {2, 2});
  CHECK_THROWS(region_from_box(T, vec2(-0.5, -0.5), vec2(0.5, 0.5)));
}

TEST_CASE("validate flags degenerate and overlapping meshes") {
  Triangulation T = unit_triangle();
  CHECK(validate(T).ok());

  Triangulation bad = T;
  bad.vertices[1].coords = bad.vertices[0].coords;  // collapse an edge
  CHECK(!validate(bad).ok());

  Triangulation dup = T;
  Simplex s2 = dup.simplexes[0];
  s2.id = 1;
  dup.simplexes.push_back(s2);
  dup.rebuild_caches();
  CHECK(!validate(dup).ok());
}

TEST_CASE("extract_submesh renumbers densely in id order") {
  Triangulation T = kuhn_triangulate(vec2(-1, -1), vec2(1, 1), {2, 2});
  Region A1 = region_from_box(T, vec2(0, 0), vec2(1, 1));
  std::vector<int> vmap;
  Triangulation S = extract_submesh(T, A1.simplex_ids, vmap);
  CHECK(S.num_simplexes() == 2);
  CHECK(S.num_vertices() == 4);
  CHECK(validate(S).ok());
  CHECK((int)vmap.size() == T.num_vertices());
  for (size_t k = 0; k < A1.simplex_ids.size(); ++k) {
    const Simplex& old_s = T.simplexes[A1.simplex_ids[k]];
    const Simplex& new_s = S.simplexes[k];
    CHECK(new_s.id == (int)k);
    for (int j = 0; j < 3; ++j) {
      int nv = vmap[old_s.vertex_ids[j]];
      REQUIRE(nv >= 0);
      CHECK((S.coords(new_s.vertex_ids[j]) - T.coords(old_s.vertex_ids[j])).norm() ==
            doctest::Approx(0.0));
      CHECK(new_s.vertex_ids[j] == nv);
    }
  }
}

TEST_CASE("mesh JSON round trip") {
  Triangulation T = kuhn_triangulate(vec2(-1.5, -1.5), vec2(1.5, 1.5), {2, 2});
  Triangulation U = mesh_from_json(mesh_to_json(T));
  CHECK(U.n == T.n);
  REQUIRE(U.num_vertices() == T.num_vertices());
  REQUIRE(U.num_simplexes() == T.num_simplexes());
  for (int i = 0; i < T.num_vertices(); ++i)
    CHECK((U.coords(i) - T.coords(i)).norm() == 0.0);
  for (int i = 0; i < T.num_simplexes(); ++i)
    CHECK(U.simplexes[i].vertex_ids == T.simplexes[i].vertex_ids);
  CHECK(validate(U).ok());
}

TEST_CASE("boundary vertices of a box mesh") {
  Triangulation T = kuhn_triangulate(vec2(-1, -1), vec2(1, 1), {2, 2});
  std::vector<int> bd = T.boundary_vertices();
  CHECK(bd.size() == 8);  // all but the center
  int o = T.origin_vertex();
  CHECK(std::find(bd.begin(), bd.end(), o) == bd.end());
}
