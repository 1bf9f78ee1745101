#ifndef CPAGAIN_EXPR_HPP
#define CPAGAIN_EXPR_HPP

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpagain/interval.hpp"

namespace cpagain {

enum class UnaryOp { Neg, Sin, Cos, Exp, Tanh, Sqrt, Abs };
enum class BinaryOp { Add, Sub, Mul, Div };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable expression tree over variables x1..xn (stored 0-based).
struct Expr {
  enum class Kind { Constant, Variable, Unary, Binary, Power };
  Kind kind;
  double value = 0.0;          // Constant
  int var = -1;                // Variable, 0-based
  UnaryOp uop = UnaryOp::Neg;  // Unary
  BinaryOp bop = BinaryOp::Add;  // Binary
  ExprPtr a, b;
  int exponent = 0;            // Power (nonnegative integer)
};

struct ParseError : std::runtime_error {
  size_t offset;
  ParseError(const std::string& msg, size_t off)
      : std::runtime_error(msg + " (at byte " + std::to_string(off) + ")"),
        offset(off) {}
};

// Node constructors with constant folding.
ExprPtr constant(double v);
ExprPtr variable(int index);
ExprPtr unary(UnaryOp op, ExprPtr a);
ExprPtr binary(BinaryOp op, ExprPtr a, ExprPtr b);
ExprPtr power(ExprPtr a, int k);

ExprPtr parse(const std::string& text);
std::string print(const Expr& e);
inline std::string print(const ExprPtr& e) { return print(*e); }

double eval(const Expr& e, const Eigen::VectorXd& x);
inline double eval(const ExprPtr& e, const Eigen::VectorXd& x) { return eval(*e, x); }

ExprPtr differentiate(const Expr& e, int var_index);
inline ExprPtr differentiate(const ExprPtr& e, int i) { return differentiate(*e, i); }

Interval interval_eval(const Expr& e, std::span<const Interval> box);
inline Interval interval_eval(const ExprPtr& e, std::span<const Interval> box) {
  return interval_eval(*e, box);
}

bool structurally_equal(const Expr& a, const Expr& b);
int max_variable_index(const Expr& e);  // -1 if none

/// Control-affine system  xdot = f(x) + G(x) u,  y = h(x).
struct SystemSpec {
  int n = 0, m = 0, q = 0;
  std::vector<ExprPtr> f;  // n entries
  std::vector<ExprPtr> G;  // row-major n*m entries
  std::vector<ExprPtr> h;  // q entries
  std::optional<Eigen::MatrixXd> A, B, C;  // closed-form linearization

  Eigen::VectorXd eval_f(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd eval_G(const Eigen::VectorXd& x) const;
  Eigen::VectorXd eval_h(const Eigen::VectorXd& x) const;
  /// gbar(x) = ||G(x)G^T(x)||_inf
  double gbar(const Eigen::VectorXd& x) const;

  /// Linearization at the origin: closed-form if provided, otherwise
  /// symbolic Jacobians of f and h plus G(0).
  void linearization(Eigen::MatrixXd& A_out, Eigen::MatrixXd& B_out,
                     Eigen::MatrixXd& C_out) const;
};

/// Parses the key/value system format and runs the load-time checks
/// (f(0)=0, h(0)=0, gbar(0)=0, variable indices in range).
SystemSpec load_system(const std::string& text);
SystemSpec load_system_file(const std::string& path);
void check_system(const SystemSpec& sys);  // throws std::runtime_error on violation

// Built-in catalog.
SystemSpec pendulum_system();
SystemSpec zero_system();

}  // namespace cpagain

#endif
