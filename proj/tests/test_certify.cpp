#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cpagain/certify.hpp"

using namespace cpagain;
using Eigen::VectorXd;

namespace {
VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

Triangulation triangle(const VectorXd& a, const VectorXd& b, const VectorXd& c) {
  Triangulation T;
  T.n = 2;
  T.vertices = {{0, a}, {1, b}, {2, c}};
  Simplex s;
  s.id = 0;
  s.vertex_ids = {0, 1, 2};
  T.simplexes = {s};
  T.rebuild_caches();
  return T;
}

StorageCertificate trivial_storage() {
  SystemSpec sys = zero_system();
  StorageCertificate cert;
  cert.mesh = kuhn_triangulate(vec2(-1, -1), vec2(1, 1), {2, 2});
  cert.V = VectorXd::Zero(cert.mesh.num_vertices());
  cert.L.assign(cert.mesh.num_simplexes(), VectorXd::Zero(2));
  cert.gamma = 1.0;
  cert.b1 = 0.0;
  cert.bounds = compute_bounds(sys, cert.mesh);
  return cert;
}

BarrierCertificate trivial_barrier() {
  SystemSpec sys = zero_system();
  BarrierCertificate cert;
  cert.mesh = kuhn_triangulate(vec2(-1, -1), vec2(1, 1), {4, 4});
  cert.A1 = region_from_box(cert.mesh, vec2(-0.5, -0.5), vec2(0.5, 0.5));
  cert.W.resize(cert.mesh.num_vertices());
  for (int i = 0; i < cert.mesh.num_vertices(); ++i)
    cert.W[i] = 0.01 + cert.mesh.coords(i).squaredNorm();
  CpaFunction W(cert.mesh, cert.W);
  cert.Lhat.resize(cert.mesh.num_simplexes());
  for (int i = 0; i < cert.mesh.num_simplexes(); ++i)
    cert.Lhat[i] = W.gradient(i).cwiseAbs();
  cert.uhat = 1e-3;
  cert.b2 = 0.0;
  cert.level_c = 0.9;
  cert.bounds = compute_bounds(sys, cert.mesh);
  return cert;
}
}  // namespace

TEST_CASE("storage inequality hand-computed reference") {
  SystemSpec sys = pendulum_system();
  Triangulation T = triangle(vec2(0, 0), vec2(1, 0), vec2(0, 1));
  VectorXd vals(3);
  vals << 0, 1, 2;  // gradient (1, 2)
  CpaFunction V(T, vals);
  std::vector<VectorXd> L = {vec2(1, 1)};  // sum 2
  std::vector<SimplexBounds> bounds(1);
  bounds[0].c = Eigen::Vector3d(0, 2, 2);
  bounds[0].beta_f = 1;
  bounds[0].beta_hh = 2;
  bounds[0].beta_gbar = 2;
  bounds[0].ghat = 1;

  PairValues H = assemble_H(sys, T, bounds, V, L, 1.0);
  REQUIRE(H.values[0].size() == 3);
  // origin pair carries no constraint
  CHECK(H.exempt[0][0]);
  CHECK(H.values[0][0] == 0.0);
  // at (1, 0): f.grad + curvature + gain terms = -1.68294 + 6 + 8
  CHECK(H.values[0][1] ==
        doctest::Approx(-std::sin(1.0) * 2 + 6.0 + 8.0).epsilon(1e-12));
  CHECK(H.values[0][1] == doctest::Approx(12.31706).epsilon(1e-5));
  // at (0, 1): (1 - 2) + 0.5 + 6 + (1 + 4) * 4 / 2
  CHECK(H.values[0][2] == doctest::Approx(15.5).epsilon(1e-12));

  // doubling gamma halves only the gain term
  PairValues H2 = assemble_H(sys, T, bounds, V, L, 2.0);
  CHECK(H2.values[0][1] ==
        doctest::Approx(-std::sin(1.0) * 2 + 6.0 + 4.0).epsilon(1e-12));
}

TEST_CASE("barrier decrease hand-computed reference") {
  SystemSpec sys = pendulum_system();
  Triangulation T = triangle(vec2(0, 0), vec2(0.5, 0), vec2(0, 0.5));
  VectorXd vals(3);
  vals << 0, 0.5, 0.5;  // gradient (1, 1)
  CpaFunction W(T, vals);
  std::vector<VectorXd> Lhat = {vec2(1, 1)};  // sum 2
  std::vector<SimplexBounds> bounds(1);
  bounds[0].c = Eigen::Vector3d(0, 2, 2);
  bounds[0].beta_f = 1;
  bounds[0].ghat = 0.5;

  PairValues D = assemble_Dplus(sys, T, bounds, W, Lhat, 0.1, {0});
  REQUIRE(D.values[0].size() == 3);
  // at (0.5, 0): f.grad + sum(lhat) * (beta c + ghat uhat)
  CHECK(D.values[0][1] ==
        doctest::Approx(-std::sin(0.5) + 2.0 * (2.0 + 0.05)).epsilon(1e-12));
  CHECK(D.values[0][1] == doctest::Approx(3.62057).epsilon(1e-5));
  // no origin exemption on the barrier side
  CHECK(!D.exempt[0][0]);

  // the value is affine in uhat with slope sum(lhat) * ghat
  PairValues D2 = assemble_Dplus(sys, T, bounds, W, Lhat, 0.2, {0});
  CHECK(D2.values[0][1] - D.values[0][1] == doctest::Approx(2.0 * 0.5 * 0.1));

  // simplexes outside the shell carry no values
  PairValues none = assemble_Dplus(sys, T, bounds, W, Lhat, 0.1, {});
  CHECK(none.values[0].size() == 0);
}

TEST_CASE("check_storage accepts an exactly feasible certificate") {
  SystemSpec sys = zero_system();
  StorageCertificate cert = trivial_storage();
  CheckReport rep = check_storage(sys, cert);
  CHECK(rep.passed);
  CHECK(!rep.margin_positive);  // b1 = 0 is feasible but not a margin
  CHECK(rep.worst_slack <= kCheckTol);
}

TEST_CASE("check_storage flags tampered certificates") {
  SystemSpec sys = zero_system();

  StorageCertificate bad = trivial_storage();
  int vid = 0;
  while (bad.mesh.coords(vid).norm() == 0.0) ++vid;
  bad.V[vid] += 10.0;  // gradient now exceeds l = 0
  CheckReport rep = check_storage(sys, bad);
  CHECK(!rep.passed);
  CHECK(!rep.violations.empty());

  StorageCertificate neg = trivial_storage();
  neg.V[vid] = -1.0;
  CHECK(!check_storage(sys, neg).passed);

  // raising V at the origin without updating l breaks the gradient bound
  StorageCertificate stale = trivial_storage();
  stale.V[stale.mesh.origin_vertex()] = 0.5;
  CHECK(!check_storage(sys, stale).passed);

  // ... but a positive origin value is admissible when l tracks the gradient
  StorageCertificate lifted = trivial_storage();
  for (int i = 0; i < lifted.mesh.num_vertices(); ++i)
    lifted.V[i] = 0.5 + lifted.mesh.coords(i).squaredNorm();
  CpaFunction lv(lifted.mesh, lifted.V);
  for (int i = 0; i < lifted.mesh.num_simplexes(); ++i)
    lifted.L[i] = lv.gradient(i).cwiseAbs();
  CHECK(check_storage(sys, lifted).passed);

  StorageCertificate badg = trivial_storage();
  badg.gamma = 0.0;
  CHECK(!check_storage(sys, badg).passed);

  StorageCertificate badb = trivial_storage();
  badb.b1 = 1.0;  // claims a margin the inequalities do not have
  CHECK(!check_storage(sys, badb).passed);
}

TEST_CASE("check_barrier accepts a feasible certificate and flags tampering") {
  SystemSpec sys = zero_system();
  BarrierCertificate cert = trivial_barrier();
  CheckReport rep = check_barrier(sys, cert);
  CHECK(rep.passed);

  BarrierCertificate zero_at_origin = trivial_barrier();
  zero_at_origin.W[zero_at_origin.mesh.origin_vertex()] = 0.0;
  CHECK(!check_barrier(sys, zero_at_origin).passed);

  BarrierCertificate nouhat = trivial_barrier();
  nouhat.uhat = 0.0;
  CHECK(!check_barrier(sys, nouhat).passed);

  BarrierCertificate highlevel = trivial_barrier();
  highlevel.level_c = 100.0;  // exceeds the interior level
  CHECK(!check_barrier(sys, highlevel).passed);

  BarrierCertificate badl = trivial_barrier();
  for (auto& l : badl.Lhat) l.setZero();
  CHECK(!check_barrier(sys, badl).passed);
}

TEST_CASE("maximal feasible subtriangulation flood fill") {
  Triangulation T = kuhn_triangulate(vec2(-1, -1), vec2(1, 1), {2, 2});
  PairValues pv;
  pv.values.assign(T.num_simplexes(), Eigen::Vector3d(-1, -1, -1));
  pv.exempt.resize(T.num_simplexes());

  std::vector<int> all = max_feasible_subtriangulation(pv, T, {0});
  CHECK((int)all.size() == T.num_simplexes());

  pv.values[5][0] = 1.0;  // one infeasible simplex
  std::vector<int> sub = max_feasible_subtriangulation(pv, T, {0});
  CHECK(std::find(sub.begin(), sub.end(), 5) == sub.end());
  // reference answer: reachable set from 0 avoiding simplex 5 (plain BFS)
  std::vector<int> expected;
  {
    std::vector<bool> seen(T.num_simplexes(), false);
    std::vector<int> stack = {0};
    seen[0] = true;
    while (!stack.empty()) {
      int sid = stack.back();
      stack.pop_back();
      expected.push_back(sid);
      for (int nb : T.neighbors(sid))
        if (!seen[nb] && nb != 5) {
          seen[nb] = true;
          stack.push_back(nb);
        }
    }
    std::sort(expected.begin(), expected.end());
  }
  CHECK(sub == expected);
  CHECK(sub.size() < (size_t)T.num_simplexes());

  std::string why;
  std::vector<int> none = max_feasible_subtriangulation(pv, T, {5}, &why);
  CHECK(none.empty());
  CHECK(!why.empty());

  // exempt entries do not constrain
  pv.exempt[5] = {true, false, false};
  std::vector<int> again = max_feasible_subtriangulation(pv, T, {0});
  CHECK((int)again.size() == T.num_simplexes());
}

TEST_CASE("system hash is deterministic and content-sensitive") {
  std::string h1 = system_hash(pendulum_system());
  std::string h2 = system_hash(pendulum_system());
  std::string h3 = system_hash(zero_system());
  CHECK(h1 == h2);
  CHECK(h1 != h3);
  CHECK(!h1.empty());
}

TEST_CASE("certificate JSON round trip is lossless and deterministic") {
  CombinedCertificate cert;
  cert.storage = trivial_storage();
  cert.barrier = trivial_barrier();
  cert.system_hash = system_hash(zero_system());
  cert.tool_version = "cpagain 1.0";
  IterationRecord r;
  r.phase = "storage_b1";
  r.iter = 3;
  r.objective_tag = "-b1";
  r.J = -0.125;
  r.b = 0.125;
  r.scalar = 1.0;
  r.solver_status = "optimal";
  r.wall_ms = 12.5;
  cert.history.push_back(r);

  std::string text = certificate_to_json(cert);
  CHECK(text == certificate_to_json(cert));  // deterministic

  CombinedCertificate back = certificate_from_json(text);
  CHECK(back.system_hash == cert.system_hash);
  CHECK(back.storage.gamma == cert.storage.gamma);
  CHECK(back.storage.b1 == cert.storage.b1);
  CHECK((back.storage.V - cert.storage.V).norm() == 0.0);
  CHECK(back.barrier.uhat == cert.barrier.uhat);
  CHECK(back.barrier.level_c == cert.barrier.level_c);
  CHECK(back.barrier.A1.simplex_ids == cert.barrier.A1.simplex_ids);
  REQUIRE(back.history.size() == 1);
  CHECK(back.history[0].phase == "storage_b1");
  CHECK(back.history[0].J == r.J);
  // serialization of the parsed certificate reproduces the bytes
  CHECK(certificate_to_json(back) == text);

  // the round-tripped certificate still verifies
  CHECK(check_storage(zero_system(), back.storage).passed);
  CHECK(check_barrier(zero_system(), back.barrier).passed);
}
