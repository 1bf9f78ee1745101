#include "cpagain/solve.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cpagain/cpa.hpp"

namespace cpagain {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Affine expression of the updated gradient component a of simplex s:
/// (grad0 + Xinv * dVbar)_a, with dV variables starting at dv_base.
AffineExpr grad_affine(const Simplex& s, const Eigen::VectorXd& grad0, int axis,
                       int dv_base) {
  AffineExpr e;
  e.constant = grad0[axis];
  const int n = static_cast<int>(s.vertex_ids.size()) - 1;
  double sum0 = 0;
  for (int j = 1; j <= n; ++j) {
    double coef = s.Xinv(axis, j - 1);
    if (coef != 0.0) e.add(dv_base + s.vertex_ids[j], coef);
    sum0 += coef;
  }
  e.add(dv_base + s.vertex_ids[0], -sum0);
  return e;
}

bool is_origin(const Eigen::VectorXd& x) {
  return x.lpNorm<Eigen::Infinity>() == 0.0;
}

}  // namespace

void repair_storage(const SystemSpec& sys, const Triangulation& T,
                    const std::vector<SimplexBounds>& bounds, StorageState& y) {
  y.V = y.V.cwiseMax(0.0);
  CpaFunction Vf(T, y.V);
  y.L.resize(T.num_simplexes());
  for (const auto& s : T.simplexes) y.L[s.id] = Vf.gradient(s.id).cwiseAbs();
  PairValues H = assemble_H(sys, T, bounds, Vf, y.L, y.gamma);
  double worst = -kInf;
  for (const auto& s : T.simplexes)
    for (int j = 0; j <= T.n; ++j)
      if (!H.exempt[s.id][j]) worst = std::max(worst, H.values[s.id][j]);
  y.b1 = (worst == -kInf) ? 0.0 : -worst;
}

void repair_barrier(const SystemSpec& sys, const Triangulation& T,
                    const std::vector<SimplexBounds>& bounds,
                    const std::vector<int>& shell, BarrierState& y) {
  y.W = y.W.cwiseMax(1e-12);
  y.uhat = std::max(y.uhat, 0.0);
  CpaFunction Wf(T, y.W);
  y.Lhat.resize(T.num_simplexes());
  for (const auto& s : T.simplexes) y.Lhat[s.id] = Wf.gradient(s.id).cwiseAbs();
  PairValues D = assemble_Dplus(sys, T, bounds, Wf, y.Lhat, y.uhat, shell);
  double worst = -kInf;
  for (int sid : shell)
    for (int j = 0; j <= T.n; ++j) worst = std::max(worst, D.values[sid][j]);
  y.b2 = (worst == -kInf) ? 0.0 : -worst;
}

StorageState init_storage_direct(const SystemSpec& sys, const Triangulation& T,
                                 const std::vector<SimplexBounds>& bounds,
                                 double gamma0, const Profile& profile) {
  if (!(gamma0 > 0)) throw std::invalid_argument("gamma0 must be positive");
  StorageState y;
  y.gamma = gamma0;
  y.V.resize(T.num_vertices());
  for (const auto& v : T.vertices)
    y.V[v.id] = profile ? profile(v.coords) : v.coords.squaredNorm();
  repair_storage(sys, T, bounds, y);
  return y;
}

Eigen::MatrixXd lyapunov_solve(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
  const int n = static_cast<int>(A.rows());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n * n, n * n);
  // vec(A^T P + P A) with column-major vec index i + n*j for P(i, j)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        M(i + n * j, k + n * j) += A(k, i);  // (A^T P)(i,j)
        M(i + n * j, i + n * k) += A(k, j);  // (P A)(i,j)
      }
  Eigen::VectorXd rhs(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) rhs[i + n * j] = -Q(i, j);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible())
    throw std::runtime_error("lyapunov_solve: singular Sylvester operator");
  Eigen::VectorXd p = lu.solve(rhs);
  Eigen::MatrixXd P(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) P(i, j) = p[i + n * j];
  P = 0.5 * (P + P.transpose()).eval();
  if ((A.transpose() * P + P * A + Q).cwiseAbs().maxCoeff() > 1e-6)
    throw std::runtime_error("lyapunov_solve: residual too large");
  return P;
}

namespace {

/// Variable index of the symmetric entry P(r, c) when the lower triangle
/// is laid out row-major starting at base.
int sym_index(int base, int r, int c) {
  if (r < c) std::swap(r, c);
  return base + r * (r + 1) / 2 + c;
}

}  // namespace

StorageState init_storage_kyp(const SystemSpec& sys, const Triangulation& T,
                              const std::vector<SimplexBounds>& bounds,
                              std::string* diagnostic) {
  Eigen::MatrixXd A, B, C;
  Eigen::MatrixXd P;
  double gamma = 1.0;
  std::string why;
  bool ok = false;
  try {
    sys.linearization(A, B, C);
    const int n = sys.n, m = sys.m;
    bool b_zero = B.size() == 0 || B.cwiseAbs().maxCoeff() < 1e-12;
    if (b_zero) {
      P = lyapunov_solve(A, Eigen::MatrixXd::Identity(n, n));
      Eigen::LLT<Eigen::MatrixXd> llt(P);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("linearization is not Hurwitz");
      gamma = 1.0;
      ok = true;
    } else if (n + m <= 3) {
      // bounded-real LMI: [A^T P + P A + C^T C, P B; B^T P, -g I] <= 0
      ConicProgram prog;
      const int pbase = 0;
      for (int i = 0; i < n * (n + 1) / 2; ++i) prog.new_var();
      int gv = prog.new_var(1.0);
      prog.add_box(gv, 0.0, 1e6);
      Eigen::MatrixXd CtC = C.transpose() * C;
      PsdBlock big(n + m);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c <= r; ++c) {
          AffineExpr& e = big.at(r, c);
          e.constant = CtC(r, c);
          std::map<int, double> coef;
          for (int k = 0; k < n; ++k) {
            coef[sym_index(pbase, k, c)] += A(k, r);  // (A^T P)(r,c)
            coef[sym_index(pbase, r, k)] += A(k, c);  // (P A)(r,c)
          }
          for (auto& [v, co] : coef) e.add(v, co);
        }
      for (int k = 0; k < m; ++k) {
        for (int c = 0; c < n; ++c) {  // (B^T P)(k,c)
          AffineExpr& e = big.at(n + k, c);
          std::map<int, double> coef;
          for (int j = 0; j < n; ++j) coef[sym_index(pbase, j, c)] += B(j, k);
          for (auto& [v, co] : coef) e.add(v, co);
        }
        for (int k2 = 0; k2 <= k; ++k2) {
          if (k2 == k) big.at(n + k, n + k2).add(gv, -1.0);
        }
      }
      prog.psd.push_back(std::move(big));
      // eps I - P <= 0, i.e. P >= eps I
      const double eps = 1e-6;
      PsdBlock pd(n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c <= r; ++c) {
          pd.at(r, c).constant = (r == c) ? eps : 0.0;
          pd.at(r, c).add(sym_index(pbase, r, c), -1.0);
        }
      prog.psd.push_back(std::move(pd));
      ConicSolution sol = solve_conic(prog);
      if (sol.status != ConicSolution::Status::Optimal)
        throw std::runtime_error("bounded-real LMI: " +
                                 std::string(status_name(sol.status)));
      P.resize(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) P(r, c) = sol.x[sym_index(pbase, r, c)];
      gamma = std::max(sol.x[gv], 1e-6);
      ok = true;
    } else {
      throw std::runtime_error("linearized LMI block exceeds backend size cap");
    }
  } catch (const std::exception& e) {
    why = e.what();
  }
  if (!ok) {
    if (diagnostic)
      *diagnostic = "quadratic seed unavailable (" + why +
                    "); falling back to the direct profile";
    return init_storage_direct(sys, T, bounds);
  }
  if (diagnostic) diagnostic->clear();
  StorageState y;
  y.gamma = gamma;
  y.V.resize(T.num_vertices());
  for (const auto& v : T.vertices) y.V[v.id] = 0.5 * v.coords.dot(P * v.coords);
  repair_storage(sys, T, bounds, y);
  return y;
}

BarrierState init_barrier_direct(const SystemSpec& sys, const Triangulation& T,
                                 const std::vector<SimplexBounds>& bounds,
                                 const std::vector<int>& shell, double uhat0,
                                 const Profile& profile) {
  if (!(uhat0 > 0)) throw std::invalid_argument("uhat0 must be positive");
  BarrierState y;
  y.uhat = uhat0;
  y.W.resize(T.num_vertices());
  for (const auto& v : T.vertices)
    y.W[v.id] = profile ? profile(v.coords) : 0.01 + v.coords.squaredNorm();
  repair_barrier(sys, T, bounds, shell, y);
  return y;
}

BarrierState init_barrier_lqr(const SystemSpec& sys, const Triangulation& T,
                              const std::vector<SimplexBounds>& bounds,
                              const std::vector<int>& shell,
                              std::string* diagnostic) {
  try {
    Eigen::MatrixXd A, B, C;
    sys.linearization(A, B, C);
    Eigen::MatrixXd P =
        lyapunov_solve(A, Eigen::MatrixXd::Identity(sys.n, sys.n));
    Eigen::LLT<Eigen::MatrixXd> llt(P);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("linearization is not Hurwitz");
    if (diagnostic) diagnostic->clear();
    // small offset keeps W strictly positive at the origin vertex
    return init_barrier_direct(sys, T, bounds, shell, 1e-5,
                               [&P](const Eigen::VectorXd& x) {
                                 return 1e-6 + x.dot(P * x);
                               });
  } catch (const std::exception& e) {
    if (diagnostic)
      *diagnostic = std::string("quadratic seed unavailable (") + e.what() +
                    "); falling back to the direct profile";
    return init_barrier_direct(sys, T, bounds, shell, 1e-5);
  }
}

StepResult step_hj(const SystemSpec& sys, const Triangulation& T,
                   const std::vector<SimplexBounds>& bounds, StorageState& y,
                   StorageObjective obj, double trust, const SolveOptions& opt) {
  const int n = T.n, NV = T.num_vertices(), NS = T.num_simplexes();
  CpaFunction Vf(T, y.V);

  ConicProgram p;
  for (int i = 0; i < NV; ++i) p.new_var();            // dV
  const int dl_base = NV;
  for (int i = 0; i < NS * n; ++i) p.new_var();        // dl
  const int db1 = p.new_var(obj == StorageObjective::MaximizeB1 ? -1.0 : 0.0);
  const int dg = p.new_var(obj == StorageObjective::MinimizeGamma ? 1.0 : 0.0);
  auto dl = [&](int sid, int a) { return dl_base + sid * n + a; };
  for (int v = 0; v < p.num_vars; ++v) p.add_box(v, -trust, trust);

  for (const auto& v : T.vertices) {  // V + dV >= 0
    AffineExpr e;
    e.constant = -y.V[v.id];
    e.add(v.id, -1.0);
    p.add_le(std::move(e));
  }
  {  // b1 cap (unbounded direction for trivial systems)
    AffineExpr e;
    e.constant = y.b1 - opt.b_cap;
    e.add(db1, 1.0);
    p.add_le(std::move(e));
  }
  {  // gamma floor
    AffineExpr e;
    e.constant = opt.gamma_min - y.gamma;
    e.add(dg, -1.0);
    p.add_le(std::move(e));
  }
  if (obj == StorageObjective::MinimizeGamma) {  // pin b1 positive
    AffineExpr e;
    e.constant = opt.pin_margin - y.b1;
    e.add(db1, -1.0);
    p.add_le(std::move(e));
  }

  for (const auto& s : T.simplexes) {
    const Eigen::VectorXd& grad0 = Vf.gradient(s.id);
    const SimplexBounds& sb = bounds[s.id];
    for (int a = 0; a < n; ++a) {
      {  // l + dl >= 0
        AffineExpr e;
        e.constant = -y.L[s.id][a];
        e.add(dl(s.id, a), -1.0);
        p.add_le(std::move(e));
      }
      AffineExpr g = grad_affine(s, grad0, a, 0);
      {  // +grad - l <= 0
        AffineExpr e = g;
        e.constant -= y.L[s.id][a];
        e.add(dl(s.id, a), -1.0);
        p.add_le(std::move(e));
      }
      {  // -grad - l <= 0
        AffineExpr e;
        e.constant = -g.constant - y.L[s.id][a];
        for (auto& [var, co] : g.terms) e.add(var, -co);
        e.add(dl(s.id, a), -1.0);
        p.add_le(std::move(e));
      }
    }
    const double l1 = y.L[s.id].sum();
    // Simplexes in the excluded equilibrium neighborhood carry no vertex
    // inequalities (see equilibrium_exempt).
    if (equilibrium_exempt(T, s)) continue;
    for (int j = 0; j <= n; ++j) {
      const Eigen::VectorXd& x = T.coords(s.vertex_ids[j]);
      if (is_origin(x)) continue;
      const double cj = sb.c[j];
      const double e_ij =
          0.5 * (sys.gbar(x) + (opt.literal_e ? 0.0 : sb.beta_gbar * cj));
      const Eigen::VectorXd fx = sys.eval_f(x);

      PsdBlock blk(2);
      AffineExpr& top = blk.at(0, 0);
      top.constant = fx.dot(grad0) + 0.5 * sys.eval_h(x).squaredNorm() +
                     (sb.beta_f * l1 + 0.5 * sb.beta_hh) * cj + y.b1;
      for (int a = 0; a < n; ++a) {
        AffineExpr g = grad_affine(s, grad0, a, 0);
        for (auto& [var, co] : g.terms) top.add(var, fx[a] * co);
        top.add(dl(s.id, a), sb.beta_f * cj);
      }
      top.add(db1, 1.0);

      AffineExpr& off = blk.at(1, 0);
      const double se = std::sqrt(e_ij);
      off.constant = se * l1;
      for (int a = 0; a < n; ++a) off.add(dl(s.id, a), se);

      blk.at(1, 1).constant = -y.gamma;
      blk.at(1, 1).add(dg, -1.0);
      p.psd.push_back(std::move(blk));
    }
  }

  ConicSolution sol = solve_conic(p);
  StepResult r;
  r.status = sol.status;
  r.message = sol.message;
  if (sol.status != ConicSolution::Status::Optimal) return r;

  y.V += sol.x.head(NV);
  y.gamma = std::max(y.gamma + sol.x[dg], opt.gamma_min);
  repair_storage(sys, T, bounds, y);
  r.accepted = true;
  return r;
}

StepResult step_barrier(const SystemSpec& sys, const Triangulation& T,
                        const std::vector<SimplexBounds>& bounds,
                        const std::vector<int>& shell, BarrierState& y,
                        BarrierObjective obj, double trust,
                        const SolveOptions& opt) {
  const int n = T.n, NV = T.num_vertices(), NS = T.num_simplexes();
  CpaFunction Wf(T, y.W);

  ConicProgram p;
  for (int i = 0; i < NV; ++i) p.new_var();            // dW
  const int dl_base = NV;
  for (int i = 0; i < NS * n; ++i) p.new_var();        // dlhat
  const int db2 = p.new_var(obj == BarrierObjective::MaximizeB2 ? -1.0 : 0.0);
  const int du = p.new_var(obj == BarrierObjective::MaximizeUhat ? -1.0 : 0.0);
  auto dl = [&](int sid, int a) { return dl_base + sid * n + a; };
  for (int v = 0; v < p.num_vars; ++v) p.add_box(v, -trust, trust);

  for (const auto& v : T.vertices) {  // W + dW >= w_floor
    AffineExpr e;
    e.constant = opt.w_floor - y.W[v.id];
    e.add(v.id, -1.0);
    p.add_le(std::move(e));
  }
  {  // uhat + du in [0, cap]
    AffineExpr lo;
    lo.constant = -y.uhat;
    lo.add(du, -1.0);
    p.add_le(std::move(lo));
    AffineExpr hi;
    hi.constant = y.uhat - opt.uhat_cap;
    hi.add(du, 1.0);
    p.add_le(std::move(hi));
  }
  {  // b2 cap
    AffineExpr e;
    e.constant = y.b2 - opt.b_cap;
    e.add(db2, 1.0);
    p.add_le(std::move(e));
  }
  if (obj == BarrierObjective::MaximizeUhat) {  // pin b2 positive
    AffineExpr e;
    e.constant = opt.pin_margin - y.b2;
    e.add(db2, -1.0);
    p.add_le(std::move(e));
  }

  for (const auto& s : T.simplexes) {
    const Eigen::VectorXd& grad0 = Wf.gradient(s.id);
    for (int a = 0; a < n; ++a) {
      {  // lhat + dlhat >= 0
        AffineExpr e;
        e.constant = -y.Lhat[s.id][a];
        e.add(dl(s.id, a), -1.0);
        p.add_le(std::move(e));
      }
      AffineExpr g = grad_affine(s, grad0, a, 0);
      {
        AffineExpr e = g;
        e.constant -= y.Lhat[s.id][a];
        e.add(dl(s.id, a), -1.0);
        p.add_le(std::move(e));
      }
      {
        AffineExpr e;
        e.constant = -g.constant - y.Lhat[s.id][a];
        for (auto& [var, co] : g.terms) e.add(var, -co);
        e.add(dl(s.id, a), -1.0);
        p.add_le(std::move(e));
      }
    }
  }

  for (int sid : shell) {
    const Simplex& s = T.simplexes[sid];
    const Eigen::VectorXd& grad0 = Wf.gradient(sid);
    const SimplexBounds& sb = bounds[sid];
    const double l1 = y.Lhat[sid].sum();
    for (int j = 0; j <= n; ++j) {
      const Eigen::VectorXd& x = T.coords(s.vertex_ids[j]);
      const double cj = sb.c[j];
      const Eigen::VectorXd fx = sys.eval_f(x);

      // cross term ghat * (1'dlhat) * du is overbounded by the -2 diagonal
      PsdBlock blk(3);
      AffineExpr& top = blk.at(0, 0);
      top.constant = fx.dot(grad0) + l1 * (sb.beta_f * cj + sb.ghat * y.uhat) +
                     y.b2;
      for (int a = 0; a < n; ++a) {
        AffineExpr g = grad_affine(s, grad0, a, 0);
        for (auto& [var, co] : g.terms) top.add(var, fx[a] * co);
        top.add(dl(sid, a), sb.beta_f * cj + sb.ghat * y.uhat);
      }
      top.add(du, sb.ghat * l1);
      top.add(db2, 1.0);

      for (int a = 0; a < n; ++a) blk.at(1, 0).add(dl(sid, a), 1.0);
      blk.at(2, 0).add(du, sb.ghat);
      blk.at(1, 1).constant = -2.0;
      blk.at(2, 2).constant = -2.0;
      p.psd.push_back(std::move(blk));
    }
  }

  ConicSolution sol = solve_conic(p);
  StepResult r;
  r.status = sol.status;
  r.message = sol.message;
  if (sol.status != ConicSolution::Status::Optimal) return r;

  y.W += sol.x.head(NV);
  y.uhat = std::max(y.uhat + sol.x[du], 0.0);
  repair_barrier(sys, T, bounds, shell, y);
  r.accepted = true;
  return r;
}

double storage_objective(const StorageState& y, StorageObjective obj) {
  return obj == StorageObjective::MaximizeB1 ? -y.b1 : y.gamma;
}

double barrier_objective(const BarrierState& y, BarrierObjective obj) {
  return obj == BarrierObjective::MaximizeB2 ? -y.b2 : -y.uhat;
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

void run_storage_phase(const SystemSpec& sys, const Triangulation& T,
                       const std::vector<SimplexBounds>& bounds, StorageState& y,
                       StorageObjective obj, const SolveOptions& opt,
                       std::vector<IterationRecord>& history) {
  const bool margin_phase = obj == StorageObjective::MaximizeB1;
  const char* phase = margin_phase ? "storage_b1" : "storage_gamma";
  const char* tag = margin_phase ? "-b1" : "gamma";
  double trust = opt.trust_init;
  double J_prev = storage_objective(y, obj);
  int stagnant = 0;
  for (int iter = 1; iter <= opt.max_iters; ++iter) {
    auto t0 = std::chrono::steady_clock::now();
    StorageState snapshot = y;
    StepResult r = step_hj(sys, T, bounds, y, obj, trust, opt);
    double J = storage_objective(y, obj);
    if (r.accepted && J > J_prev) {
      // Solver-noise wobble at the optimum: keep the previous iterate and
      // let the zero relative improvement feed the stagnation counter.
      y = std::move(snapshot);
      J = J_prev;
    }
    history.push_back({phase, iter, tag, J, y.b1, y.gamma,
                       status_name(r.status), elapsed_ms(t0)});
    if (!r.accepted) {
      trust *= 0.5;
      if (trust < opt.trust_min) break;
      continue;
    }
    double rel = (J_prev - J) / std::max(1.0, std::abs(J_prev));
    stagnant = (rel < opt.stagnation_rel) ? stagnant + 1 : 0;
    J_prev = J;
    trust = std::min(trust * 2.0, opt.trust_max);
    if (margin_phase && y.b1 > 0) break;
    if (stagnant >= opt.stagnation_steps) break;
  }
}

void run_barrier_phase(const SystemSpec& sys, const Triangulation& T,
                       const std::vector<SimplexBounds>& bounds,
                       const std::vector<int>& shell, BarrierState& y,
                       BarrierObjective obj, const SolveOptions& opt,
                       std::vector<IterationRecord>& history) {
  const bool margin_phase = obj == BarrierObjective::MaximizeB2;
  const char* phase = margin_phase ? "barrier_b2" : "barrier_uhat";
  const char* tag = margin_phase ? "-b2" : "-uhat";
  double trust = opt.trust_init;
  double J_prev = barrier_objective(y, obj);
  int stagnant = 0;
  for (int iter = 1; iter <= opt.max_iters; ++iter) {
    auto t0 = std::chrono::steady_clock::now();
    BarrierState snapshot = y;
    StepResult r = step_barrier(sys, T, bounds, shell, y, obj, trust, opt);
    double J = barrier_objective(y, obj);
    if (r.accepted && J > J_prev) {
      // Solver-noise wobble at the optimum: keep the previous iterate and
      // let the zero relative improvement feed the stagnation counter.
      y = std::move(snapshot);
      J = J_prev;
    }
    history.push_back({phase, iter, tag, J, y.b2, y.uhat,
                       status_name(r.status), elapsed_ms(t0)});
    if (!r.accepted) {
      trust *= 0.5;
      if (trust < opt.trust_min) break;
      continue;
    }
    double rel = (J_prev - J) / std::max(1.0, std::abs(J_prev));
    stagnant = (rel < opt.stagnation_rel) ? stagnant + 1 : 0;
    J_prev = J;
    trust = std::min(trust * 2.0, opt.trust_max);
    if (margin_phase && y.b2 > 0) break;
    if (stagnant >= opt.stagnation_steps) break;
  }
}

std::string history_to_csv(const std::vector<IterationRecord>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "phase,iter,objective_tag,J,b1_or_b2,gamma_or_uhat,solver_status,wall_ms\n";
  for (const auto& r : history)
    os << r.phase << "," << r.iter << "," << r.objective_tag << "," << r.J
       << "," << r.b << "," << r.scalar << "," << r.solver_status << ","
       << r.wall_ms << "\n";
  return os.str();
}

}  // namespace cpagain
