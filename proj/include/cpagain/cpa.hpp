#ifndef CPAGAIN_CPA_HPP
#define CPAGAIN_CPA_HPP

#include <Eigen/Dense>

#include "cpagain/mesh.hpp"

namespace cpagain {

/// Continuous piecewise-affine interpolant of vertex values on a
/// triangulation: affine on each simplex, V(x) = grad_i . x + offset_i.
class CpaFunction {
 public:
  CpaFunction(const Triangulation& T, Eigen::VectorXd vertex_values);

  const Triangulation& mesh() const { return *T_; }
  const Eigen::VectorXd& values() const { return values_; }
  double value_at_vertex(int vid) const { return values_[vid]; }

  /// Per-simplex gradient Xinv * Vbar.
  const Eigen::VectorXd& gradient(int simplex_id) const {
    return gradients_[simplex_id];
  }
  double offset(int simplex_id) const { return offsets_[simplex_id]; }

  double evaluate(const Eigen::VectorXd& x) const;
  /// Upper Dini derivative along v: max of grad_i . v over simplexes
  /// containing x.
  double dini(const Eigen::VectorXd& x, const Eigen::VectorXd& v) const;
  bool sublevel_membership(double level, const Eigen::VectorXd& x) const {
    return evaluate(x) <= level;
  }

 private:
  const Triangulation* T_;
  Eigen::VectorXd values_;
  std::vector<Eigen::VectorXd> gradients_;
  std::vector<double> offsets_;
};

/// Level c* = (1 - eta) * min of W over the boundary vertices of W's mesh,
/// so that {W <= c*} avoids the boundary. Throws std::runtime_error if some
/// vertex of A1 has W >= c* (then A1 is not contained in the sublevel set).
double largest_interior_sublevel(const CpaFunction& w, const Region& A1,
                                 double eta = 1e-6);

}  // namespace cpagain

#endif
