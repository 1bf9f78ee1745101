#ifndef CPAGAIN_BOUNDS_HPP
#define CPAGAIN_BOUNDS_HPP

#include <Eigen/Dense>
#include <vector>

#include "cpagain/expr.hpp"
#include "cpagain/mesh.hpp"

namespace cpagain {

enum class NormKind { One, Two, Inf };
const char* norm_name(NormKind k);
NormKind norm_from_name(const std::string& s);
double vector_norm(const Eigen::VectorXd& v, NormKind k);

/// Per-simplex constants feeding the vertex-wise inequalities:
///   c[j]     geometric interpolation-error weights (units of length^2)
///   beta_f   bound on second partials of the components of f
///   beta_hh  bound on second partials of h^T h
///   beta_gbar bound on second partials of ||G G^T||_inf (piecewise)
///   ghat     bound on ||G(x)||_inf over the simplex
struct SimplexBounds {
  Eigen::VectorXd c;
  double beta_f = 0;
  double beta_hh = 0;
  double beta_gbar = 0;
  double ghat = 0;
};

/// Second-derivative expressions of a system, built once and interval
/// evaluated per simplex.
struct SystemDerivatives {
  // f_hess[p][q][r] = d^2 f_p / dx_q dx_r
  std::vector<std::vector<std::vector<ExprPtr>>> f_hess;
  // hh_hess[q][r] = d^2 (h^T h) / dx_q dx_r
  std::vector<std::vector<ExprPtr>> hh_hess;
  // gg_hess[p][pp][q][r] = d^2 (G G^T)_{p,pp} / dx_q dx_r
  std::vector<std::vector<std::vector<std::vector<ExprPtr>>>> gg_hess;

  explicit SystemDerivatives(const SystemSpec& sys);
};

Eigen::VectorXd cij(const Triangulation& T, const Simplex& s,
                    NormKind norm = NormKind::Two);

/// Axis-aligned bounding box of a simplex as an interval vector.
std::vector<Interval> simplex_box(const Triangulation& T, const Simplex& s);

double hessian_bound_f(const SystemSpec& sys, const SystemDerivatives& d,
                       const Triangulation& T, const Simplex& s);
double hessian_bound_hh(const SystemSpec& sys, const SystemDerivatives& d,
                        const Triangulation& T, const Simplex& s);
double hessian_bound_gbar(const SystemSpec& sys, const SystemDerivatives& d,
                          const Triangulation& T, const Simplex& s);
double g_norm_bound(const SystemSpec& sys, const Triangulation& T, const Simplex& s);

// Convenience overloads building the derivative tables on the fly.
double hessian_bound_f(const SystemSpec& sys, const Triangulation& T, const Simplex& s);
double hessian_bound_hh(const SystemSpec& sys, const Triangulation& T, const Simplex& s);
double hessian_bound_gbar(const SystemSpec& sys, const Triangulation& T,
                          const Simplex& s);

std::vector<SimplexBounds> compute_bounds(const SystemSpec& sys,
                                          const Triangulation& T,
                                          NormKind norm = NormKind::Two);

}  // namespace cpagain

#endif
