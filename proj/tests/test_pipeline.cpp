#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>

#include "cpagain/pipeline.hpp"
#include "cpagain/verify.hpp"

using namespace cpagain;
using Eigen::VectorXd;

namespace {
VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

const char* kLinearSystem =
    "n = 2\nm = 1\nq = 1\nf1 = -x1\nf2 = -x2\nG = [0, x2]\nh1 = x2\n";

const char* kLinearConfig =
    "omega_lo = -1, -1\n"
    "omega_hi = 1, 1\n"
    "omega_grid = 8, 8\n"
    "a1_lo = -0.25, -0.25\n"
    "a1_hi = 0.25, 0.25\n"
    "refinement_rounds = 0\n";

AnalysisResult analyze_linear() {
  SystemSpec sys = load_system(kLinearSystem);
  AnalysisConfig cfg = parse_config(kLinearConfig);
  return analyze(sys, cfg);
}
}  // namespace

TEST_CASE("config parsing: defaults, sections, comments") {
  AnalysisConfig cfg = parse_config(
      "# comment\n"
      "[domain]\n"
      "omega_lo = -1.5, -1.5\n"
      "omega_hi = 1.5, 1.5\n"
      "omega_grid = 20, 20\n"
      "a1_lo = -0.3, -0.3\n"
      "a1_hi = 0.3, 0.3\n"
      "max_iters = 12\n"
      "norm = l2\n");
  CHECK(cfg.omega_lo[0] == doctest::Approx(-1.5));
  CHECK(cfg.omega_grid == std::vector<int>{20, 20});
  // barrier domain defaults to the storage domain
  CHECK((cfg.omega_hat_lo - cfg.omega_lo).norm() == 0.0);
  CHECK((cfg.omega_hat_hi - cfg.omega_hi).norm() == 0.0);
  CHECK(cfg.omega_hat_grid == cfg.omega_grid);
  CHECK(cfg.storage_init == "kyp");
  CHECK(cfg.barrier_init == "lqr");
  CHECK(cfg.solve.max_iters == 12);
  CHECK(cfg.norm == NormKind::Two);
  CHECK(cfg.refinement_rounds == 2);
}

TEST_CASE("config parsing rejects malformed input") {
  const char* base =
      "omega_lo = -1, -1\nomega_hi = 1, 1\nomega_grid = 2, 2\n"
      "a1_lo = -0.5, -0.5\na1_hi = 0.5, 0.5\n";
  CHECK_NOTHROW(parse_config(base));
  CHECK_THROWS_AS(parse_config(std::string(base) + "bogus = 1\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config(std::string(base) + "omega_lo = -1, -1\n"),
                  std::invalid_argument);  // duplicate key
  CHECK_THROWS_AS(parse_config("omega_lo = -1, -1\n"), std::invalid_argument);
  // a1 not strictly inside the barrier domain
  CHECK_THROWS_AS(parse_config(
                      "omega_lo = -1, -1\nomega_hi = 1, 1\nomega_grid = 2, 2\n"
                      "a1_lo = -1, -1\na1_hi = 1, 1\n"),
                  std::invalid_argument);
  // domain must contain the origin
  CHECK_THROWS_AS(parse_config(
                      "omega_lo = 1, 1\nomega_hi = 2, 2\nomega_grid = 2, 2\n"
                      "a1_lo = 1.2, 1.2\na1_hi = 1.5, 1.5\n"),
                  std::invalid_argument);
  // bad number
  CHECK_THROWS_AS(parse_config(std::string(base) + "gamma0 = fast\n"),
                  std::exception);
}

TEST_CASE("full analysis of a stable linear plant") {
  AnalysisResult res = analyze_linear();
  const CombinedCertificate& cert = res.cert;
  SystemSpec sys = load_system(kLinearSystem);

  CHECK(cert.storage.b1 > 0.0);
  CHECK(cert.barrier.b2 > 0.0);
  CHECK(cert.barrier.uhat > 0.0);
  CHECK(cert.barrier.level_c > 0.0);
  CHECK(res.sqrt_gamma == doctest::Approx(std::sqrt(cert.storage.gamma)));
  CHECK(cert.system_hash == system_hash(sys));

  CheckReport st = check_storage(sys, cert.storage);
  CHECK(st.passed);
  CHECK(st.margin_positive);
  CheckReport ba = check_barrier(sys, cert.barrier);
  CHECK(ba.passed);
  CHECK(ba.margin_positive);

  // the invariant set strictly contains the target neighborhood
  CpaFunction W(cert.barrier.mesh, cert.barrier.W);
  int inside = 0;
  for (const auto& s : cert.barrier.mesh.simplexes) {
    double wmin = std::numeric_limits<double>::infinity();
    for (int vid : s.vertex_ids) wmin = std::min(wmin, cert.barrier.W[vid]);
    if (wmin <= cert.barrier.level_c) ++inside;
  }
  CHECK(inside > (int)cert.barrier.A1.simplex_ids.size());

  // history is monotone within each phase
  std::map<std::string, double> last;
  for (const auto& rec : cert.history) {
    auto it = last.find(rec.phase);
    if (it != last.end()) CHECK(rec.J <= it->second + 1e-9);
    last[rec.phase] = rec.J;
  }
  CHECK(last.count("storage_b1") == 1);
  CHECK(last.count("storage_gamma") == 1);
  CHECK(last.count("barrier_b2") == 1);
  CHECK(last.count("barrier_uhat") == 1);
}

TEST_CASE("analysis results are reproducible") {
  AnalysisResult a = analyze_linear();
  AnalysisResult b = analyze_linear();
  CHECK(a.cert.storage.gamma == b.cert.storage.gamma);
  CHECK(a.cert.storage.b1 == b.cert.storage.b1);
  CHECK((a.cert.storage.V - b.cert.storage.V).norm() == 0.0);
  CHECK(a.cert.barrier.uhat == b.cert.barrier.uhat);
  CHECK(a.cert.barrier.level_c == b.cert.barrier.level_c);
}

TEST_CASE("simulation agrees with the analyzed certificate") {
  AnalysisResult res = analyze_linear();
  SystemSpec sys = load_system(kLinearSystem);

  HjSample hj = sample_hj(sys, res.cert.storage, 20000, 3);
  CHECK(hj.max_value <= 1e-9);

  VerifyReport inv = check_invariance(sys, res.cert, 10, 5.0, 17);
  CHECK(inv.violations == 0);
  CHECK(inv.trials >= 10);

  VerifyReport gain = check_gain_inequality(sys, res.cert, 10, 5.0, 17);
  CHECK(gain.violations == 0);
  CHECK(gain.empirical_ratio <= std::sqrt(res.cert.storage.gamma) + 1e-9);
}

TEST_CASE("warm start onto a refinement keeps the certificate valid") {
  AnalysisResult res = analyze_linear();
  SystemSpec sys = load_system(kLinearSystem);
  const StorageCertificate& coarse = res.cert.storage;

  Triangulation fine = refine_all(coarse.mesh);
  auto fine_bounds = compute_bounds(sys, fine, coarse.norm);
  StorageState y;
  y.V = coarse.V;
  y.L = coarse.L;
  y.gamma = coarse.gamma;
  y.b1 = coarse.b1;
  StorageState fy = refine_and_warmstart(coarse.mesh, fine, sys, fine_bounds, y);

  // parent vertices keep their interpolated values
  for (int vid = 0; vid < coarse.mesh.num_vertices(); ++vid)
    CHECK(fy.V[vid] == doctest::Approx(coarse.V[vid]).epsilon(1e-12));
  CHECK(fy.gamma == coarse.gamma);

  StorageCertificate fc;
  fc.mesh = fine;
  fc.V = fy.V;
  fc.L = fy.L;
  fc.gamma = fy.gamma;
  fc.b1 = fy.b1;
  fc.bounds = fine_bounds;
  fc.norm = coarse.norm;
  CheckReport rep = check_storage(sys, fc, 1e-7);
  CHECK(rep.passed);
  CHECK(fy.b1 > 0.0);  // refinement tightens the error weights
}

TEST_CASE("combine enforces containment in the storage domain") {
  SystemSpec sys = zero_system();

  StorageCertificate st;
  st.mesh = kuhn_triangulate(vec2(-1, -1), vec2(1, 1), {2, 2});
  st.V = VectorXd::Zero(st.mesh.num_vertices());
  st.L.assign(st.mesh.num_simplexes(), VectorXd::Zero(2));
  st.gamma = 1.0;
  st.b1 = 0.0;
  st.bounds = compute_bounds(sys, st.mesh);

  BarrierCertificate ba;
  ba.mesh = kuhn_triangulate(vec2(-1, -1), vec2(1, 1), {4, 4});
  ba.A1 = region_from_box(ba.mesh, vec2(-0.5, -0.5), vec2(0.5, 0.5));
  ba.W.resize(ba.mesh.num_vertices());
  for (int i = 0; i < ba.mesh.num_vertices(); ++i)
    ba.W[i] = 0.01 + ba.mesh.coords(i).squaredNorm();
  CpaFunction W(ba.mesh, ba.W);
  ba.Lhat.resize(ba.mesh.num_simplexes());
  for (int i = 0; i < ba.mesh.num_simplexes(); ++i)
    ba.Lhat[i] = W.gradient(i).cwiseAbs();
  ba.uhat = 1e-3;
  ba.b2 = 0.0;
  ba.level_c = 0.9;
  ba.bounds = compute_bounds(sys, ba.mesh);

  CombinedCertificate ok =
      combine(sys, st, ba, vec2(-1, -1), vec2(1, 1), {});
  CHECK(ok.system_hash == system_hash(sys));
  CHECK(!ok.tool_version.empty());

  // shrinking the storage domain leaves invariant-set simplexes outside
  CHECK_THROWS(combine(sys, st, ba, vec2(-0.5, -0.5), vec2(0.5, 0.5), {}));
}

TEST_CASE("gain bias term") {
  SystemSpec sys = zero_system();
  StorageCertificate st;
  st.mesh = kuhn_triangulate(vec2(-1, -1), vec2(1, 1), {2, 2});
  st.V.resize(st.mesh.num_vertices());
  for (int i = 0; i < st.mesh.num_vertices(); ++i)
    st.V[i] = st.mesh.coords(i).squaredNorm();
  st.L.assign(st.mesh.num_simplexes(), VectorXd::Zero(2));
  st.gamma = 1.0;
  st.bounds = compute_bounds(sys, st.mesh);
  CHECK(gain_bias(st, vec2(0, 0)) == doctest::Approx(0.0));
  CHECK(gain_bias(st, vec2(1, 0)) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("analysis of an unstabilizable plant fails with a diagnostic") {
  SystemSpec sys = load_system(
      "n = 1\nm = 1\nq = 1\nf1 = x1\nG = [x1]\nh1 = x1\n");
  AnalysisConfig cfg = parse_config(
      "omega_lo = -1\nomega_hi = 1\nomega_grid = 8\n"
      "a1_lo = -0.25\na1_hi = 0.25\n"
      "storage_init = direct\nrefinement_rounds = 0\nmax_iters = 8\n");
  CHECK_THROWS(analyze(sys, cfg));
}
