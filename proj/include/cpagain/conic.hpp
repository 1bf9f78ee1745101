#ifndef CPAGAIN_CONIC_HPP
#define CPAGAIN_CONIC_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace cpagain {

/// Affine expression  constant + sum coef * x[var].
struct AffineExpr {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;

  AffineExpr& add(int var, double coef) {
    if (coef != 0.0) terms.emplace_back(var, coef);
    return *this;
  }
  double value(const Eigen::VectorXd& x) const {
    double v = constant;
    for (auto& [i, c] : terms) v += c * x[i];
    return v;
  }
};

/// Linear scalar constraint: expr <= 0 or expr == 0.
struct LinearConstraint {
  AffineExpr expr;
  bool equality = false;
};

/// Symmetric block M(x) <= 0 (negative semidefinite); entries affine in x.
/// Only the lower triangle entry[r][c], r >= c, is stored.
struct PsdBlock {
  int size = 0;
  std::vector<std::vector<AffineExpr>> entry;

  explicit PsdBlock(int k) : size(k), entry(k) {
    for (int r = 0; r < k; ++r) entry[r].resize(r + 1);
  }
  AffineExpr& at(int r, int c) { return entry[r][c]; }
  Eigen::MatrixXd value(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd M(size, size);
    for (int r = 0; r < size; ++r)
      for (int c = 0; c <= r; ++c) M(r, c) = M(c, r) = entry[r][c].value(x);
    return M;
  }
};

/// Linear objective, linear constraints, small PSD blocks (size <= 3).
struct ConicProgram {
  int num_vars = 0;
  std::vector<double> objective;  // minimize objective . x

  std::vector<LinearConstraint> linear;
  std::vector<PsdBlock> psd;

  int new_var(double obj_coef = 0.0) {
    objective.push_back(obj_coef);
    return num_vars++;
  }
  void add_le(AffineExpr e) { linear.push_back({std::move(e), false}); }
  void add_eq(AffineExpr e) { linear.push_back({std::move(e), true}); }
  /// lo <= x[var] <= hi
  void add_box(int var, double lo, double hi);
};

struct ConicSolution {
  enum class Status { Optimal, Infeasible, NumericalFailure };
  Status status = Status::NumericalFailure;
  Eigen::VectorXd x;
  double objective = 0.0;
  std::string message;
};

const char* status_name(ConicSolution::Status s);

/// Solves via the external adapter selected by CPAGAIN_SOLVER (a command
/// receiving input and output JSON paths); defaults to the bundled
/// Clarabel-backed Python adapter.
ConicSolution solve_conic(const ConicProgram& p);

std::string conic_to_json(const ConicProgram& p);

}  // namespace cpagain

#endif
