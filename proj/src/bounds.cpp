#include "cpagain/bounds.hpp"

#include <stdexcept>

namespace cpagain {

const char* norm_name(NormKind k) {
  switch (k) {
    case NormKind::One: return "l1";
    case NormKind::Two: return "l2";
    case NormKind::Inf: return "linf";
  }
  return "?";
}

NormKind norm_from_name(const std::string& s) {
  if (s == "l1") return NormKind::One;
  if (s == "l2") return NormKind::Two;
  if (s == "linf") return NormKind::Inf;
  throw std::invalid_argument("unknown norm kind: " + s);
}

double vector_norm(const Eigen::VectorXd& v, NormKind k) {
  switch (k) {
    case NormKind::One: return v.lpNorm<1>();
    case NormKind::Two: return v.norm();
    case NormKind::Inf: return v.lpNorm<Eigen::Infinity>();
  }
  return 0;
}

SystemDerivatives::SystemDerivatives(const SystemSpec& sys) {
  const int n = sys.n;
  f_hess.resize(sys.n);
  for (int p = 0; p < sys.n; ++p) {
    f_hess[p].resize(n);
    for (int q = 0; q < n; ++q) {
      ExprPtr dq = differentiate(sys.f[p], q);
      f_hess[p][q].resize(n);
      for (int r = 0; r < n; ++r) f_hess[p][q][r] = differentiate(dq, r);
    }
  }
  // h^T h as a single expression
  ExprPtr hh = constant(0);
  for (int k = 0; k < sys.q; ++k)
    hh = binary(BinaryOp::Add, hh, binary(BinaryOp::Mul, sys.h[k], sys.h[k]));
  hh_hess.resize(n);
  for (int q = 0; q < n; ++q) {
    ExprPtr dq = differentiate(hh, q);
    hh_hess[q].resize(n);
    for (int r = 0; r < n; ++r) hh_hess[q][r] = differentiate(dq, r);
  }
  // entries of G G^T
  gg_hess.resize(sys.n);
  for (int p = 0; p < sys.n; ++p) {
    gg_hess[p].resize(sys.n);
    for (int pp = 0; pp < sys.n; ++pp) {
      ExprPtr entry = constant(0);
      for (int k = 0; k < sys.m; ++k)
        entry = binary(BinaryOp::Add, entry,
                       binary(BinaryOp::Mul, sys.G[p * sys.m + k],
                              sys.G[pp * sys.m + k]));
      gg_hess[p][pp].resize(n);
      for (int q = 0; q < n; ++q) {
        ExprPtr dq = differentiate(entry, q);
        gg_hess[p][pp][q].resize(n);
        for (int r = 0; r < n; ++r) gg_hess[p][pp][q][r] = differentiate(dq, r);
      }
    }
  }
}

Eigen::VectorXd cij(const Triangulation& T, const Simplex& s, NormKind norm) {
  const int n = T.n;
  const Eigen::VectorXd& x0 = T.coords(s.vertex_ids[0]);
  Eigen::VectorXd d(n + 1);
  d[0] = 0;
  double dmax = 0;
  for (int j = 1; j <= n; ++j) {
    d[j] = vector_norm(T.coords(s.vertex_ids[j]) - x0, norm);
    dmax = std::max(dmax, d[j]);
  }
  Eigen::VectorXd c(n + 1);
  for (int j = 0; j <= n; ++j) c[j] = 0.5 * n * d[j] * (dmax + d[j]);
  return c;
}

std::vector<Interval> simplex_box(const Triangulation& T, const Simplex& s) {
  std::vector<Interval> box(T.n);
  for (int a = 0; a < T.n; ++a) {
    double lo = T.coords(s.vertex_ids[0])[a], hi = lo;
    for (int j = 1; j <= T.n; ++j) {
      double v = T.coords(s.vertex_ids[j])[a];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    box[a] = Interval(lo, hi);
  }
  return box;
}

namespace {
double interval_mag(const ExprPtr& e, std::span<const Interval> box) {
  Interval r = interval_eval(e, box);
  if (!r.finite())
    throw std::runtime_error("hessian bound: interval evaluation is unbounded");
  return r.mag();
}
}  // namespace

double hessian_bound_f(const SystemSpec& sys, const SystemDerivatives& d,
                       const Triangulation& T, const Simplex& s) {
  auto box = simplex_box(T, s);
  double beta = 0;
  for (int p = 0; p < sys.n; ++p)
    for (int q = 0; q < sys.n; ++q)
      for (int r = q; r < sys.n; ++r)
        beta = std::max(beta, interval_mag(d.f_hess[p][q][r], box));
  return beta;
}

double hessian_bound_hh(const SystemSpec& sys, const SystemDerivatives& d,
                        const Triangulation& T, const Simplex& s) {
  auto box = simplex_box(T, s);
  double beta = 0;
  for (int q = 0; q < sys.n; ++q)
    for (int r = q; r < sys.n; ++r)
      beta = std::max(beta, interval_mag(d.hh_hess[q][r], box));
  return beta;
}

// gbar(x) = max over rows p of sum_{pp} |(G G^T)_{p,pp}|. On each smooth
// piece a second partial of the row sum is bounded by the sum of the
// entries' second-partial magnitudes; the max over rows bounds every piece.
double hessian_bound_gbar(const SystemSpec& sys, const SystemDerivatives& d,
                          const Triangulation& T, const Simplex& s) {
  auto box = simplex_box(T, s);
  double beta = 0;
  for (int q = 0; q < sys.n; ++q)
    for (int r = q; r < sys.n; ++r) {
      double row_max = 0;
      for (int p = 0; p < sys.n; ++p) {
        double row_sum = 0;
        for (int pp = 0; pp < sys.n; ++pp)
          row_sum += interval_mag(d.gg_hess[p][pp][q][r], box);
        row_max = std::max(row_max, row_sum);
      }
      beta = std::max(beta, row_max);
    }
  return beta;
}

double g_norm_bound(const SystemSpec& sys, const Triangulation& T, const Simplex& s) {
  auto box = simplex_box(T, s);
  double ghat = 0;
  for (int p = 0; p < sys.n; ++p) {
    double row_sum = 0;
    for (int k = 0; k < sys.m; ++k)
      row_sum += interval_mag(sys.G[p * sys.m + k], box);
    ghat = std::max(ghat, row_sum);
  }
  return ghat;
}

double hessian_bound_f(const SystemSpec& sys, const Triangulation& T, const Simplex& s) {
  return hessian_bound_f(sys, SystemDerivatives(sys), T, s);
}
double hessian_bound_hh(const SystemSpec& sys, const Triangulation& T, const Simplex& s) {
  return hessian_bound_hh(sys, SystemDerivatives(sys), T, s);
}
double hessian_bound_gbar(const SystemSpec& sys, const Triangulation& T,
                          const Simplex& s) {
  return hessian_bound_gbar(sys, SystemDerivatives(sys), T, s);
}

std::vector<SimplexBounds> compute_bounds(const SystemSpec& sys,
                                          const Triangulation& T, NormKind norm) {
  SystemDerivatives d(sys);
  std::vector<SimplexBounds> out;
  out.reserve(T.num_simplexes());
  for (const auto& s : T.simplexes) {
    SimplexBounds b;
    b.c = cij(T, s, norm);
    b.beta_f = hessian_bound_f(sys, d, T, s);
    b.beta_hh = hessian_bound_hh(sys, d, T, s);
    b.beta_gbar = hessian_bound_gbar(sys, d, T, s);
    b.ghat = g_norm_bound(sys, T, s);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace cpagain
