#include "cpagain/cpa.hpp"

#include <stdexcept>

namespace cpagain {

CpaFunction::CpaFunction(const Triangulation& T, Eigen::VectorXd vertex_values)
    : T_(&T), values_(std::move(vertex_values)) {
  if (values_.size() != T.num_vertices())
    throw std::invalid_argument("CpaFunction: one value per vertex required");
  gradients_.reserve(T.num_simplexes());
  offsets_.reserve(T.num_simplexes());
  Eigen::VectorXd vbar(T.n);
  for (const auto& s : T.simplexes) {
    double v0 = values_[s.vertex_ids[0]];
    for (int j = 1; j <= T.n; ++j) vbar[j - 1] = values_[s.vertex_ids[j]] - v0;
    Eigen::VectorXd grad = s.Xinv * vbar;
    offsets_.push_back(v0 - T.coords(s.vertex_ids[0]).dot(grad));
    gradients_.push_back(std::move(grad));
  }
}

double CpaFunction::evaluate(const Eigen::VectorXd& x) const {
  int sid = locate(*T_, x);
  const Simplex& s = T_->simplexes[sid];
  Eigen::VectorXd lam = barycentric(*T_, s, x);
  double v = 0;
  for (int j = 0; j <= T_->n; ++j) v += lam[j] * values_[s.vertex_ids[j]];
  return v;
}

double CpaFunction::dini(const Eigen::VectorXd& x, const Eigen::VectorXd& v) const {
  std::vector<int> ids = locate_all(*T_, x);
  if (ids.empty())
    throw std::out_of_range("dini: point outside the triangulated domain");
  double best = -std::numeric_limits<double>::infinity();
  for (int id : ids) best = std::max(best, gradients_[id].dot(v));
  return best;
}

double largest_interior_sublevel(const CpaFunction& w, const Region& A1,
                                 double eta) {
  const Triangulation& T = w.mesh();
  std::vector<int> boundary = T.boundary_vertices();
  if (boundary.empty())
    throw std::runtime_error("largest_interior_sublevel: mesh has no boundary");
  double boundary_min = std::numeric_limits<double>::infinity();
  for (int vid : boundary) boundary_min = std::min(boundary_min, w.value_at_vertex(vid));
  double level = (1.0 - eta) * boundary_min;

  for (int sid : A1.simplex_ids)
    for (int vid : T.simplexes[sid].vertex_ids)
      if (w.value_at_vertex(vid) >= level)
        throw std::runtime_error(
            "largest_interior_sublevel: A1 is not contained in the sublevel "
            "set (vertex " + std::to_string(vid) + " has W = " +
            std::to_string(w.value_at_vertex(vid)) + " >= c* = " +
            std::to_string(level) + ")");
  return level;
}

}  // namespace cpagain
