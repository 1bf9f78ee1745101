#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cpagain/expr.hpp"

using namespace cpagain;
using Eigen::VectorXd;

namespace {
VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}
}  // namespace

TEST_CASE("parse builds the expected tree") {
  ExprPtr p = parse("-sin(x1) - x2");
  ExprPtr want = binary(BinaryOp::Sub, unary(UnaryOp::Neg, unary(UnaryOp::Sin, variable(0))),
                        variable(1));
  CHECK(structurally_equal(*p, *want));

  CHECK(parse("0")->kind == Expr::Kind::Constant);
  CHECK(parse("0")->value == 0.0);

  ExprPtr sq = parse("x2^2");
  CHECK(sq->kind == Expr::Kind::Power);
  CHECK(sq->exponent == 2);
  CHECK(sq->a->var == 1);
}

TEST_CASE("parse rejects malformed input") {
  CHECK_THROWS_AS(parse("x1 +"), ParseError);
  CHECK_THROWS_AS(parse("foo(x1)"), ParseError);
  CHECK_THROWS_AS(parse("x1^x2"), ParseError);
  CHECK_THROWS_AS(parse("(x1"), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("x0"), ParseError);  // variables are 1-based
}

TEST_CASE("eval reference values") {
  ExprPtr p = parse("-sin(x1) - x2");
  CHECK(eval(p, vec2(0.5, 0.2)) == doctest::Approx(-0.679425538604203).epsilon(1e-12));
  CHECK(eval(p, vec2(0.0, 0.0)) == 0.0);
  CHECK(eval(parse("x2^2"), vec2(0.0, -1.5)) == doctest::Approx(2.25));
  CHECK(eval(parse("exp(x1)*tanh(x2)"), vec2(0.0, 0.0)) == 0.0);
}

TEST_CASE("print/parse round trip") {
  const char* cases[] = {"-sin(x1) - x2", "x2^2",         "exp(x1)*tanh(x2)",
                         "x1*x2 - cos(x1)^2", "sqrt(x1^2 + 1)", "abs(x2) + x1/2",
                         "3.5",           "x1 - (x2 - x1)"};
  for (const char* s : cases) {
    ExprPtr p = parse(s);
    ExprPtr q = parse(print(p));
    CHECK_MESSAGE(structurally_equal(*p, *q), s);
  }
}

TEST_CASE("symbolic derivative reference values") {
  ExprPtr p = parse("-sin(x1) - x2");
  ExprPtr d1 = differentiate(p, 0);
  ExprPtr d2 = differentiate(d1, 0);
  // d/dx1 = -cos(x1), d^2/dx1^2 = sin(x1): compare pointwise.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    VectorXd x = vec2(u(rng), u(rng));
    CHECK(eval(d1, x) == doctest::Approx(-std::cos(x[0])).epsilon(1e-12));
    CHECK(eval(d2, x) == doctest::Approx(std::sin(x[0])).epsilon(1e-12));
  }
  ExprPtr dsq = differentiate(parse("x2^2"), 1);
  for (int i = 0; i < 20; ++i) {
    VectorXd x = vec2(u(rng), u(rng));
    CHECK(eval(dsq, x) == doctest::Approx(2 * x[1]).epsilon(1e-12));
  }
  // Derivative w.r.t. an absent variable is identically zero.
  CHECK(differentiate(parse("x2^2"), 0)->kind == Expr::Kind::Constant);
  CHECK(differentiate(parse("x2^2"), 0)->value == 0.0);
}

TEST_CASE("derivatives agree with central differences") {
  const char* cases[] = {"-sin(x1) - x2", "x2^2", "exp(x1)*tanh(x2)",
                         "x1*x2 - cos(x1)^2", "sqrt(x1^2 + 1)", "x1/(x2^2 + 1)"};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (const char* s : cases) {
    ExprPtr p = parse(s);
    ExprPtr dx[2] = {differentiate(p, 0), differentiate(p, 1)};
    for (int i = 0; i < 1000; ++i) {
      VectorXd x = vec2(u(rng), u(rng));
      for (int k = 0; k < 2; ++k) {
        const double h = 1e-5;
        VectorXd xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        double fd = (eval(p, xp) - eval(p, xm)) / (2 * h);
        double ex = eval(dx[k], x);
        CHECK_MESSAGE(std::abs(fd - ex) <= 1e-6 * (1 + std::abs(ex)), s);
      }
    }
  }
}

TEST_CASE("interval evaluation reference values") {
  Interval box1[2] = {{0.0, 0.5}, {0.0, 0.0}};
  Interval s = interval_eval(parse("sin(x1)"), box1);
  CHECK(s.lo <= 0.0);
  CHECK(s.lo >= -1e-12);
  CHECK(s.hi >= 0.479425538604203);
  CHECK(s.hi <= 0.4795);

  Interval box2[2] = {{-1.5, 1.5}, {-1.5, 1.5}};
  Interval q = interval_eval(parse("x2^2"), box2);
  CHECK(q.lo <= 0.0);
  CHECK(q.lo >= -1e-12);
  CHECK(q.hi >= 2.25);
  CHECK(q.hi <= 2.2501);

  Interval c = interval_eval(parse("3"), box2);
  CHECK(c.lo == doctest::Approx(3.0));
  CHECK(c.hi == doctest::Approx(3.0));

  // sin over a full period covers [-1, 1] exactly.
  Interval wide[1] = {{0.0, 7.0}};
  Interval sw = interval_eval(parse("sin(x1)"), std::span<const Interval>(wide, 1));
  CHECK(sw.lo == doctest::Approx(-1.0));
  CHECK(sw.hi == doctest::Approx(1.0));
}

TEST_CASE("interval evaluation contains all point evaluations") {
  const char* cases[] = {"-sin(x1) - x2", "x2^2", "exp(x1)*tanh(x2)",
                         "x1*x2 - cos(x1)^2", "sqrt(x1^2 + 1)", "abs(x2) + x1/2",
                         "x1/(x2^2 + 1)"};
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (const char* s : cases) {
    ExprPtr p = parse(s);
    for (int rep = 0; rep < 50; ++rep) {
      Interval box[2];
      for (int k = 0; k < 2; ++k) {
        double a = u(rng), b = u(rng);
        box[k] = {std::min(a, b), std::max(a, b)};
      }
      Interval iv = interval_eval(p, box);
      std::uniform_real_distribution<double> ux(box[0].lo, box[0].hi);
      std::uniform_real_distribution<double> uy(box[1].lo, box[1].hi);
      for (int i = 0; i < 200; ++i) {
        VectorXd x = vec2(ux(rng), uy(rng));
        double v = eval(p, x);
        CHECK_MESSAGE(iv.contains(v), s << " value " << v << " not in [" << iv.lo
                                        << ", " << iv.hi << "]");
      }
    }
  }
}

TEST_CASE("system loader accepts the pendulum and rejects bad equilibria") {
  SystemSpec sys = load_system(
      "n = 2\nm = 1\nq = 1\nf1 = x2\nf2 = -sin(x1) - x2\nG = [0, x2]\nh1 = x2\n");
  CHECK(sys.n == 2);
  CHECK(sys.m == 1);
  CHECK(sys.q == 1);
  VectorXd x = vec2(0.5, 0.2);
  VectorXd fx = sys.eval_f(x);
  CHECK(fx[0] == doctest::Approx(0.2));
  CHECK(fx[1] == doctest::Approx(-std::sin(0.5) - 0.2));
  CHECK(sys.eval_G(x)(1, 0) == doctest::Approx(0.2));
  CHECK(sys.eval_h(x)[0] == doctest::Approx(0.2));
  CHECK(sys.gbar(x) == doctest::Approx(0.04));

  // f(0) != 0
  CHECK_THROWS(load_system("n = 1\nm = 1\nq = 1\nf1 = x1 + 1\nG = [x1]\nh1 = x1\n"));
  // h(0) != 0
  CHECK_THROWS(load_system("n = 1\nm = 1\nq = 1\nf1 = -x1\nG = [x1]\nh1 = x1 + 2\n"));
  // G(0) G(0)^T != 0
  CHECK_THROWS(load_system("n = 1\nm = 1\nq = 1\nf1 = -x1\nG = [1]\nh1 = x1\n"));
  // variable out of range
  CHECK_THROWS(load_system("n = 1\nm = 1\nq = 1\nf1 = -x2\nG = [x1]\nh1 = x1\n"));
}

TEST_CASE("pendulum linearization at the origin") {
  SystemSpec sys = pendulum_system();
  Eigen::MatrixXd A, B, C;
  sys.linearization(A, B, C);
  CHECK(A(0, 0) == doctest::Approx(0.0));
  CHECK(A(0, 1) == doctest::Approx(1.0));
  CHECK(A(1, 0) == doctest::Approx(-1.0));
  CHECK(A(1, 1) == doctest::Approx(-1.0));
  CHECK(B.norm() == doctest::Approx(0.0));
  CHECK(C(0, 0) == doctest::Approx(0.0));
  CHECK(C(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("closed-form linearization overrides the symbolic one") {
  SystemSpec sys = load_system(
      "n = 1\nm = 1\nq = 1\nf1 = -x1\nG = [x1]\nh1 = x1\n"
      "A = [-1]\nB = [1]\nC = [1]\n");
  Eigen::MatrixXd A, B, C;
  sys.linearization(A, B, C);
  CHECK(A(0, 0) == doctest::Approx(-1.0));
  CHECK(B(0, 0) == doctest::Approx(1.0));
  CHECK(C(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("zero system is a valid degenerate input") {
  SystemSpec sys = zero_system();
  CHECK_NOTHROW(check_system(sys));
  VectorXd x = vec2(1.0, -2.0);
  CHECK(sys.eval_f(x).norm() == 0.0);
  CHECK(sys.gbar(x) == 0.0);
}
