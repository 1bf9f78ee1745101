#include "cpagain/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cpagain/cpa.hpp"

namespace cpagain {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool contains_point(const Triangulation& T, const Simplex& s,
                    const Eigen::VectorXd& x, double tol) {
  const Eigen::VectorXd& x0 = T.coords(s.vertex_ids[0]);
  Eigen::VectorXd lam_rest = s.Xinv.transpose() * (x - x0);
  if (1.0 - lam_rest.sum() < -tol) return false;
  for (int j = 0; j < T.n; ++j)
    if (lam_rest[j] < -tol) return false;
  return true;
}

/// Constant-time point location on structured meshes: simplexes are
/// bucketed by the grid cell of their centroid.
class FastEval {
 public:
  explicit FastEval(const CpaFunction& f) : f_(&f), T_(&f.mesh()) {
    const auto& ax = T_->axis_coords;
    if (ax.empty()) return;
    int total = 1;
    for (const auto& a : ax) {
      cells_.push_back(static_cast<int>(a.size()) - 1);
      total *= cells_.back();
    }
    cell2simp_.resize(total);
    for (const auto& s : T_->simplexes) {
      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(T_->n);
      for (int vid : s.vertex_ids) centroid += T_->coords(vid);
      centroid /= s.vertex_ids.size();
      int flat = flat_cell(centroid);
      if (flat >= 0) cell2simp_[flat].push_back(s.id);
    }
  }

  int locate(const Eigen::VectorXd& x) const {
    if (!cell2simp_.empty()) {
      int flat = flat_cell(x);
      if (flat >= 0)
        for (int sid : cell2simp_[flat])
          if (contains_point(*T_, T_->simplexes[sid], x, kGeomTol)) return sid;
    }
    for (const auto& s : T_->simplexes)  // boundary-of-cell edge cases
      if (contains_point(*T_, s, x, kGeomTol)) return s.id;
    return -1;
  }

  /// NaN outside the triangulated domain.
  double value(const Eigen::VectorXd& x) const {
    int sid = locate(x);
    if (sid < 0) return kNaN;
    return f_->gradient(sid).dot(x) + f_->offset(sid);
  }

 private:
  int flat_cell(const Eigen::VectorXd& x) const {
    int flat = 0;
    for (int a = 0; a < T_->n; ++a) {
      const auto& coords = T_->axis_coords[a];
      if (x[a] < coords.front() - kGeomTol || x[a] > coords.back() + kGeomTol)
        return -1;
      auto it = std::upper_bound(coords.begin(), coords.end(), x[a]);
      int idx = std::clamp(static_cast<int>(it - coords.begin()) - 1, 0,
                           cells_[a] - 1);
      flat = flat * cells_[a] + idx;
    }
    return flat;
  }

  const CpaFunction* f_;
  const Triangulation* T_;
  std::vector<int> cells_;
  std::vector<std::vector<int>> cell2simp_;
};

}  // namespace

Eigen::VectorXd InputSignal::at(double t) const {
  if (values.empty()) return Eigen::VectorXd();
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
  int k = std::clamp(static_cast<int>(it - breakpoints.begin()) - 1, 0,
                     static_cast<int>(values.size()) - 1);
  return values[k];
}

InputSignal random_signal(int m, double horizon, double dwell, double cap,
                          std::mt19937_64& rng) {
  InputSignal u;
  u.cap = cap;
  std::uniform_real_distribution<double> dist(-cap, cap);
  for (double t = 0; t < horizon; t += dwell) {
    u.breakpoints.push_back(t);
    Eigen::VectorXd v(m);
    for (int k = 0; k < m; ++k) v[k] = dist(rng);
    u.values.push_back(std::move(v));
  }
  return u;
}

InputSignal sinusoid_signal(int m, double horizon, double freq, double cap) {
  InputSignal u;
  u.cap = cap;
  const double dwell = 0.05;
  for (double t = 0; t < horizon; t += dwell) {
    u.breakpoints.push_back(t);
    u.values.push_back(Eigen::VectorXd::Constant(m, cap * std::sin(freq * t)));
  }
  return u;
}

TrajectoryResult simulate(const SystemSpec& sys, const Eigen::VectorXd& x0,
                          const InputSignal& u, double horizon, double dt,
                          const Eigen::VectorXd& box_lo,
                          const Eigen::VectorXd& box_hi) {
  if (!(dt > 0) || !(horizon > 0))
    throw std::invalid_argument("simulate: dt and horizon must be positive");
  const int steps = static_cast<int>(std::ceil(horizon / dt));
  const bool boxed = box_lo.size() == sys.n && box_hi.size() == sys.n;

  auto rhs = [&](const Eigen::VectorXd& x, double t) -> Eigen::VectorXd {
    Eigen::VectorXd v = sys.eval_f(x);
    if (sys.m > 0) {
      Eigen::VectorXd uv = u.at(t);
      if (uv.size() == sys.m) v += sys.eval_G(x) * uv;
    }
    return v;
  };

  TrajectoryResult r;
  r.t.reserve(steps + 1);
  r.x.reserve(steps + 1);
  Eigen::VectorXd x = x0;
  double usq = 0, ysq = 0;  // running trapezoid integrals of ||.||^2
  double prev_un = 0, prev_yn = 0;
  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    Eigen::VectorXd uv =
        sys.m > 0 ? u.at(t) : Eigen::VectorXd::Zero(0);
    if (uv.size() != sys.m) uv = Eigen::VectorXd::Zero(sys.m);
    Eigen::VectorXd y = sys.eval_h(x);
    double un = uv.squaredNorm(), yn = y.squaredNorm();
    if (k > 0) {
      usq += 0.5 * dt * (prev_un + un);
      ysq += 0.5 * dt * (prev_yn + yn);
    }
    prev_un = un;
    prev_yn = yn;
    r.t.push_back(t);
    r.x.push_back(x);
    r.y.push_back(std::move(y));
    r.u_l2.push_back(std::sqrt(usq));
    r.y_l2.push_back(std::sqrt(ysq));
    if (boxed && !r.exited_box) {
      for (int a = 0; a < sys.n; ++a)
        if (x[a] < box_lo[a] - kGeomTol || x[a] > box_hi[a] + kGeomTol) {
          r.exited_box = true;
          r.exit_time = t;
          break;
        }
    }
    if (k == steps) break;
    Eigen::VectorXd k1 = rhs(x, t);
    Eigen::VectorXd k2 = rhs(x + 0.5 * dt * k1, t + 0.5 * dt);
    Eigen::VectorXd k3 = rhs(x + 0.5 * dt * k2, t + 0.5 * dt);
    Eigen::VectorXd k4 = rhs(x + dt * k3, t + dt);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return r;
}

HjSample sample_hj(const SystemSpec& sys, const StorageCertificate& cert, int N,
                   std::uint64_t seed) {
  const Triangulation& T = cert.mesh;
  CpaFunction V(T, cert.V);
  std::mt19937_64 rng(seed);
  // Sample the certified region: simplexes in the excluded equilibrium
  // neighborhood carry no vertex inequalities and are skipped unless they
  // make up the whole mesh.
  std::vector<double> weights;
  weights.reserve(T.num_simplexes());
  double total = 0;
  for (const auto& s : T.simplexes) {
    weights.push_back(equilibrium_exempt(T, s) ? 0.0 : s.volume);
    total += weights.back();
  }
  if (total == 0.0)
    for (int i = 0; i < T.num_simplexes(); ++i)
      weights[i] = T.simplexes[i].volume;
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  std::exponential_distribution<double> expd(1.0);

  HjSample out;
  out.max_value = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < N; ++k) {
    const Simplex& s = T.simplexes[pick(rng)];
    Eigen::VectorXd lam(T.n + 1);
    for (int j = 0; j <= T.n; ++j) lam[j] = expd(rng);
    lam /= lam.sum();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(T.n);
    for (int j = 0; j <= T.n; ++j) x += lam[j] * T.coords(s.vertex_ids[j]);
    const Eigen::VectorXd& g = V.gradient(s.id);
    double hj = sys.eval_f(x).dot(g) +
                (sys.eval_G(x).transpose() * g).squaredNorm() /
                    (2.0 * cert.gamma) +
                0.5 * sys.eval_h(x).squaredNorm();
    if (hj > out.max_value) {
      out.max_value = hj;
      out.argmax = x;
    }
  }
  return out;
}

namespace {

double resonant_frequency(const SystemSpec& sys) {
  try {
    Eigen::MatrixXd A, B, C;
    sys.linearization(A, B, C);
    Eigen::EigenSolver<Eigen::MatrixXd> es(A);
    double w = es.eigenvalues().imag().cwiseAbs().maxCoeff();
    return w > 1e-6 ? w : 1.0;
  } catch (const std::exception&) {
    return 1.0;
  }
}

/// Rejection sampling of a start state strictly inside {W < c*}; empty
/// vector when the budget runs out.
Eigen::VectorXd sample_start(const Triangulation& T, const FastEval& W,
                             double level, std::mt19937_64& rng) {
  Eigen::VectorXd lo(T.n), hi(T.n);
  for (int a = 0; a < T.n; ++a) {
    lo[a] = std::numeric_limits<double>::infinity();
    hi[a] = -lo[a];
  }
  for (const auto& v : T.vertices)
    for (int a = 0; a < T.n; ++a) {
      lo[a] = std::min(lo[a], v.coords[a]);
      hi[a] = std::max(hi[a], v.coords[a]);
    }
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    Eigen::VectorXd x(T.n);
    for (int a = 0; a < T.n; ++a) x[a] = lo[a] + (hi[a] - lo[a]) * dist(rng);
    double w = W.value(x);
    if (std::isfinite(w) && w < level) return x;
  }
  return Eigen::VectorXd();
}

}  // namespace

VerifyReport check_invariance(const SystemSpec& sys,
                              const CombinedCertificate& cert, int trials,
                              double horizon, std::uint64_t seed, double dt) {
  const BarrierCertificate& ba = cert.barrier;
  CpaFunction Wc(ba.mesh, ba.W);
  FastEval W(Wc);
  const double allowance = 1e-6 + 1e-5;  // check tol + integrator allowance

  VerifyReport rep;
  rep.name = "invariance";
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  const double wres = resonant_frequency(sys);
  for (int trial = 0; trial <= trials; ++trial) {
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ull * (trial + 1));
    Eigen::VectorXd x0 = sample_start(ba.mesh, W, ba.level_c, rng);
    if (x0.size() == 0) {
      rep.details.push_back("trial " + std::to_string(trial) +
                            ": no start state found inside the invariant set");
      ++rep.violations;
      ++rep.trials;
      continue;
    }
    InputSignal u = trial == 0
                        ? sinusoid_signal(sys.m, horizon, wres, ba.uhat)
                        : random_signal(sys.m, horizon, 0.5, ba.uhat, rng);
    TrajectoryResult tr = simulate(sys, x0, u, horizon, dt);
    bool violated = false;
    for (size_t k = 0; k < tr.t.size(); ++k) {
      double w = W.value(tr.x[k]);
      double margin =
          std::isfinite(w) ? w - ba.level_c
                           : std::numeric_limits<double>::infinity();
      rep.worst_margin = std::max(rep.worst_margin, margin);
      if (margin > allowance && !violated) {
        violated = true;
        std::ostringstream os;
        os << "trial " << trial << ": W exceeded the level by " << margin
           << " at t=" << tr.t[k];
        rep.details.push_back(os.str());
      }
    }
    if (violated) ++rep.violations;
    ++rep.trials;
  }
  return rep;
}

VerifyReport check_gain_inequality(const SystemSpec& sys,
                                   const CombinedCertificate& cert, int trials,
                                   double horizon, std::uint64_t seed,
                                   double dt) {
  const StorageCertificate& st = cert.storage;
  const BarrierCertificate& ba = cert.barrier;
  CpaFunction Vc(st.mesh, st.V);
  FastEval V(Vc);
  CpaFunction Wc(ba.mesh, ba.W);
  FastEval W(Wc);
  const double sqrt_gamma = std::sqrt(st.gamma);

  VerifyReport rep;
  rep.name = "gain";
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  rep.empirical_ratio = 0;
  const double wres = resonant_frequency(sys);
  for (int trial = 0; trial <= trials; ++trial) {
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ull * (trial + 1));
    Eigen::VectorXd x0 = sample_start(ba.mesh, W, ba.level_c, rng);
    if (x0.size() == 0) {
      rep.details.push_back("trial " + std::to_string(trial) +
                            ": no start state found inside the invariant set");
      ++rep.violations;
      ++rep.trials;
      continue;
    }
    double v0 = V.value(x0);
    if (!std::isfinite(v0)) {
      rep.details.push_back("trial " + std::to_string(trial) +
                            ": start state outside the storage domain");
      ++rep.violations;
      ++rep.trials;
      continue;
    }
    const double bias = std::sqrt(2.0 * std::max(v0, 0.0));
    InputSignal u = trial == 0
                        ? sinusoid_signal(sys.m, horizon, wres, ba.uhat)
                        : random_signal(sys.m, horizon, 0.5, ba.uhat, rng);
    TrajectoryResult tr = simulate(sys, x0, u, horizon, dt);
    bool violated = false;
    for (size_t k = 0; k < tr.t.size(); ++k) {
      double margin = tr.y_l2[k] - (sqrt_gamma * tr.u_l2[k] + bias + 1e-6);
      rep.worst_margin = std::max(rep.worst_margin, margin);
      if (margin > 0 && !violated) {
        violated = true;
        std::ostringstream os;
        os << "trial " << trial << ": gain inequality violated by " << margin
           << " at t=" << tr.t[k];
        rep.details.push_back(os.str());
      }
      if (tr.u_l2[k] > 1e-9)
        rep.empirical_ratio = std::max(
            rep.empirical_ratio, (tr.y_l2[k] - bias) / tr.u_l2[k]);
    }
    if (violated) ++rep.violations;
    ++rep.trials;
  }
  return rep;
}

std::string verify_reports_json(const std::vector<VerifyReport>& reports,
                                double hj_max, bool checks_passed) {
  nlohmann::ordered_json j;
  j["certificate_checks_passed"] = checks_passed;
  j["hj_sample_max"] = hj_max;
  bool all = checks_passed && hj_max <= 1e-9;
  auto& arr = j["reports"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json rec;
    rec["name"] = r.name;
    rec["trials"] = r.trials;
    rec["violations"] = r.violations;
    rec["worst_margin"] = r.worst_margin;
    if (r.name == "gain") rec["empirical_ratio"] = r.empirical_ratio;
    rec["details"] = r.details;
    arr.push_back(std::move(rec));
    all = all && r.passed();
  }
  j["passed"] = all;
  return j.dump(2);
}

}  // namespace cpagain
