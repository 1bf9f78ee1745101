#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "cpagain/conic.hpp"

#include <json.hpp>

using namespace cpagain;

TEST_CASE("linear program: minimize x subject to x >= 1") {
  ConicProgram p;
  int x = p.new_var(1.0);
  AffineExpr ge;  // 1 - x <= 0
  ge.constant = 1.0;
  ge.add(x, -1.0);
  p.add_le(ge);
  ConicSolution sol = solve_conic(p);
  REQUIRE(sol.status == ConicSolution::Status::Optimal);
  CHECK(sol.x[x] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("equality constraint with variable boxes") {
  ConicProgram p;
  int x = p.new_var(1.0);
  int y = p.new_var(1.0);
  AffineExpr eq;  // x + y - 2 == 0
  eq.constant = -2.0;
  eq.add(x, 1.0).add(y, 1.0);
  p.add_eq(eq);
  p.add_box(x, 0.0, 5.0);
  p.add_box(y, 0.0, 5.0);
  ConicSolution sol = solve_conic(p);
  REQUIRE(sol.status == ConicSolution::Status::Optimal);
  CHECK(sol.objective == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(sol.x[x] + sol.x[y] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("semidefinite block: minimize t with [[t,1],[1,t]] >= 0") {
  // Blocks are M(x) <= 0, so encode the negated matrix.
  ConicProgram p;
  int t = p.new_var(1.0);
  PsdBlock blk(2);
  blk.at(0, 0).add(t, -1.0);
  blk.at(1, 0).constant = -1.0;
  blk.at(1, 1).add(t, -1.0);
  p.psd.push_back(blk);
  ConicSolution sol = solve_conic(p);
  REQUIRE(sol.status == ConicSolution::Status::Optimal);
  CHECK(sol.x[t] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("3x3 semidefinite block") {
  // minimize t with [[t,1,0],[1,t,0],[0,0,t]] >= 0: optimum t = 1
  ConicProgram p;
  int t = p.new_var(1.0);
  PsdBlock blk(3);
  blk.at(0, 0).add(t, -1.0);
  blk.at(1, 0).constant = -1.0;
  blk.at(1, 1).add(t, -1.0);
  blk.at(2, 2).add(t, -1.0);
  p.psd.push_back(blk);
  ConicSolution sol = solve_conic(p);
  REQUIRE(sol.status == ConicSolution::Status::Optimal);
  CHECK(sol.x[t] == doctest::Approx(1.0).epsilon(1e-5));
  // verify the returned point is feasible
  Eigen::MatrixXd M = p.psd[0].value(sol.x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  CHECK(es.eigenvalues().maxCoeff() <= 1e-6);
}

TEST_CASE("infeasible constraints are reported as such") {
  ConicProgram p;
  int x = p.new_var(1.0);
  AffineExpr ge;  // 1 - x <= 0
  ge.constant = 1.0;
  ge.add(x, -1.0);
  p.add_le(ge);
  AffineExpr le;  // x <= 0
  le.add(x, 1.0);
  p.add_le(le);
  ConicSolution sol = solve_conic(p);
  CHECK(sol.status == ConicSolution::Status::Infeasible);
}

TEST_CASE("oversized blocks are rejected") {
  ConicProgram p;
  p.new_var(1.0);
  p.psd.push_back(PsdBlock(4));
  CHECK_THROWS(solve_conic(p));
}

TEST_CASE("program serialization carries all pieces") {
  ConicProgram p;
  int x = p.new_var(2.0);
  AffineExpr le;
  le.constant = -1.0;
  le.add(x, 1.0);
  p.add_le(le);
  PsdBlock blk(2);
  blk.at(0, 0).add(x, -1.0);
  blk.at(1, 1).constant = -3.0;
  p.psd.push_back(blk);
  auto j = nlohmann::json::parse(conic_to_json(p));
  CHECK(j["num_vars"] == 1);
  CHECK(j["objective"][0] == 2.0);
  CHECK(j["psd"].size() == 1);
  CHECK(j["psd"][0]["size"] == 2);
}

TEST_CASE("a failing external adapter surfaces as a numerical failure") {
  ConicProgram p;
  int x = p.new_var(1.0);
  AffineExpr ge;
  ge.constant = 1.0;
  ge.add(x, -1.0);
  p.add_le(ge);
  setenv("CPAGAIN_SOLVER", "false", 1);
  ConicSolution sol = solve_conic(p);
  unsetenv("CPAGAIN_SOLVER");
  CHECK(sol.status == ConicSolution::Status::NumericalFailure);
}

TEST_CASE("affine expression evaluation") {
  AffineExpr e;
  e.constant = 1.5;
  e.add(0, 2.0).add(2, -1.0).add(1, 0.0);
  CHECK(e.terms.size() == 2);  // zero coefficients are dropped
  Eigen::VectorXd x(3);
  x << 1, 10, 4;
  CHECK(e.value(x) == doctest::Approx(1.5 + 2.0 - 4.0));
}
