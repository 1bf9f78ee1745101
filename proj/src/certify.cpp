#include "cpagain/certify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cpagain {

namespace {

bool is_origin(const Eigen::VectorXd& x) {
  return x.lpNorm<Eigen::Infinity>() == 0.0;
}

}  // namespace

bool equilibrium_exempt(const Triangulation& T, const Simplex& s) {
  for (int vid : s.vertex_ids) {
    const Eigen::VectorXd& x = T.coords(vid);
    if (is_origin(x)) return true;
    if (x.lpNorm<Eigen::Infinity>() < T.exclusion_radius - kGeomTol)
      return true;
  }
  return false;
}

PairValues assemble_H(const SystemSpec& sys, const Triangulation& T,
                      const std::vector<SimplexBounds>& bounds,
                      const CpaFunction& V, const std::vector<Eigen::VectorXd>& L,
                      double gamma) {
  const int n = T.n;
  PairValues out;
  out.values.resize(T.num_simplexes());
  out.exempt.resize(T.num_simplexes());
  for (const auto& s : T.simplexes) {
    const Eigen::VectorXd& grad = V.gradient(s.id);
    const Eigen::VectorXd& l = L[s.id];
    const SimplexBounds& sb = bounds[s.id];
    const double l1 = l.sum();
    // The "x != 0" proviso removes the equilibrium neighborhood from the
    // constraint set: every pair of a simplex inside the exclusion box is
    // exempt (the output and interpolation-error terms have a positive
    // floor there that no storage function can pay, while the origin pair
    // itself contributes H = 0 by f(0) = h(0) = gbar(0) = 0).
    const bool excluded = equilibrium_exempt(T, s);
    Eigen::VectorXd vals(n + 1);
    std::vector<bool> ex(n + 1, excluded);
    for (int j = 0; j <= n; ++j) {
      const Eigen::VectorXd& x = T.coords(s.vertex_ids[j]);
      if (is_origin(x)) {
        ex[j] = true;
        vals[j] = 0;
        continue;
      }
      double H = sys.eval_f(x).dot(grad);
      H += 0.5 * sys.eval_h(x).squaredNorm();
      H += (sb.beta_f * l1 + 0.5 * sb.beta_hh) * sb.c[j];
      H += (sys.gbar(x) + sb.beta_gbar * sb.c[j]) * l1 * l1 / (2.0 * gamma);
      vals[j] = H;
    }
    out.values[s.id] = std::move(vals);
    out.exempt[s.id] = std::move(ex);
  }
  return out;
}

PairValues assemble_Dplus(const SystemSpec& sys, const Triangulation& T,
                          const std::vector<SimplexBounds>& bounds,
                          const CpaFunction& W,
                          const std::vector<Eigen::VectorXd>& Lhat, double uhat,
                          const std::vector<int>& shell) {
  const int n = T.n;
  PairValues out;
  out.values.resize(T.num_simplexes());
  out.exempt.resize(T.num_simplexes());
  for (int sid : shell) {
    const Simplex& s = T.simplexes[sid];
    const Eigen::VectorXd& grad = W.gradient(sid);
    const SimplexBounds& sb = bounds[sid];
    const double l1 = Lhat[sid].sum();
    Eigen::VectorXd vals(n + 1);
    for (int j = 0; j <= n; ++j) {
      const Eigen::VectorXd& x = T.coords(s.vertex_ids[j]);
      double D = sys.eval_f(x).dot(grad);
      D += l1 * (sb.beta_f * sb.c[j] + sb.ghat * uhat);
      vals[j] = D;
    }
    out.values[sid] = std::move(vals);
    out.exempt[sid].assign(n + 1, false);
  }
  return out;
}

namespace {

void pair_violations(const PairValues& pv, double b, double tol,
                     const char* what, CheckReport& rep) {
  for (size_t i = 0; i < pv.values.size(); ++i) {
    if (pv.values[i].size() == 0) continue;
    for (int j = 0; j < pv.values[i].size(); ++j) {
      if (!pv.exempt[i].empty() && pv.exempt[i][j]) continue;
      double slack = pv.values[i][j] + b;
      rep.worst_slack = std::max(rep.worst_slack, slack);
      if (slack > tol) {
        std::ostringstream os;
        os << what << " violated at simplex " << i << " vertex " << j << ": "
           << pv.values[i][j] << " > " << -b;
        rep.violations.push_back(os.str());
      }
    }
  }
}

}  // namespace

CheckReport check_storage(const SystemSpec& sys, const StorageCertificate& cert,
                          double tol) {
  CheckReport rep;
  rep.worst_slack = -std::numeric_limits<double>::infinity();
  rep.margin_positive = cert.b1 > 0;
  if (!(cert.gamma > 0))
    rep.violations.push_back("gamma must be positive");
  // V >= 0 at every vertex (CPA, so vertex check suffices).
  for (const auto& v : cert.mesh.vertices) {
    if (cert.V[v.id] < -tol)
      rep.violations.push_back("V negative at vertex " + std::to_string(v.id));
  }
  CpaFunction V(cert.mesh, cert.V);
  // l_i must dominate |grad V_i| componentwise.
  for (const auto& s : cert.mesh.simplexes) {
    const Eigen::VectorXd& g = V.gradient(s.id);
    for (int a = 0; a < cert.mesh.n; ++a)
      if (std::abs(g[a]) > cert.L[s.id][a] + tol) {
        rep.violations.push_back("gradient bound l too small on simplex " +
                                 std::to_string(s.id));
        break;
      }
  }
  PairValues H = assemble_H(sys, cert.mesh, cert.bounds, V, cert.L, cert.gamma);
  pair_violations(H, cert.b1, tol, "storage inequality", rep);
  rep.passed = rep.violations.empty();
  return rep;
}

CheckReport check_barrier(const SystemSpec& sys, const BarrierCertificate& cert,
                          double tol) {
  CheckReport rep;
  rep.worst_slack = -std::numeric_limits<double>::infinity();
  rep.margin_positive = cert.b2 > 0;
  if (!(cert.uhat > 0))
    rep.violations.push_back("uhat must be positive");
  // W must be strictly positive at every vertex.
  for (const auto& v : cert.mesh.vertices)
    if (!(cert.W[v.id] > 0))
      rep.violations.push_back("W not positive at vertex " + std::to_string(v.id));
  CpaFunction W(cert.mesh, cert.W);
  for (const auto& s : cert.mesh.simplexes) {
    const Eigen::VectorXd& g = W.gradient(s.id);
    for (int a = 0; a < cert.mesh.n; ++a)
      if (std::abs(g[a]) > cert.Lhat[s.id][a] + tol) {
        rep.violations.push_back("gradient bound lhat too small on simplex " +
                                 std::to_string(s.id));
        break;
      }
  }
  std::vector<int> shell = shell_indices(cert.mesh, cert.A1);
  PairValues D = assemble_Dplus(sys, cert.mesh, cert.bounds, W, cert.Lhat,
                                cert.uhat, shell);
  pair_violations(D, cert.b2, tol, "barrier decrease", rep);
  // The stored level must keep {W <= c} inside the domain and contain A1.
  try {
    double c = largest_interior_sublevel(W, cert.A1);
    if (cert.level_c > c + tol)
      rep.violations.push_back("stored sublevel exceeds the interior level");
  } catch (const std::exception& e) {
    rep.violations.push_back(std::string("sublevel containment failed: ") +
                             e.what());
  }
  rep.passed = rep.violations.empty();
  return rep;
}

std::vector<int> max_feasible_subtriangulation(const PairValues& values,
                                               const Triangulation& T,
                                               const std::vector<int>& seed,
                                               std::string* why) {
  auto feasible = [&](int sid) {
    const Eigen::VectorXd& v = values.values[sid];
    if (v.size() == 0) return true;  // unconstrained simplex
    for (int j = 0; j < v.size(); ++j) {
      if (!values.exempt[sid].empty() && values.exempt[sid][j]) continue;
      if (!(v[j] < 0)) return false;
    }
    return true;
  };
  for (int sid : seed)
    if (!feasible(sid)) {
      if (why)
        *why = "seed simplex " + std::to_string(sid) +
               " violates the vertex inequalities";
      return {};
    }
  std::vector<bool> in(T.num_simplexes(), false);
  std::priority_queue<int, std::vector<int>, std::greater<>> frontier;
  for (int sid : seed) {
    in[sid] = true;
    frontier.push(sid);
  }
  std::vector<int> out(seed);
  while (!frontier.empty()) {
    int sid = frontier.top();
    frontier.pop();
    for (int nb : T.neighbors(sid)) {
      if (in[nb] || !feasible(nb)) continue;
      in[nb] = true;
      out.push_back(nb);
      frontier.push(nb);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string system_hash(const SystemSpec& sys) {
  std::ostringstream os;
  os << sys.n << ";" << sys.m << ";" << sys.q;
  for (const auto& e : sys.f) os << ";" << print(e);
  for (const auto& e : sys.G) os << ";" << print(e);
  for (const auto& e : sys.h) os << ";" << print(e);
  const std::string s = os.str();
  std::uint64_t h = 14695981039346656037ull;  // FNV-1a
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream hex;
  hex << std::hex << h;
  return hex.str();
}

namespace {

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const nlohmann::json& a) {
  Eigen::VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  return v;
}

nlohmann::json vecs_to_json(const std::vector<Eigen::VectorXd>& vs) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& v : vs) a.push_back(vec_to_json(v));
  return a;
}

std::vector<Eigen::VectorXd> vecs_from_json(const nlohmann::json& a) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(a.size());
  for (const auto& v : a) out.push_back(vec_from_json(v));
  return out;
}

nlohmann::json bounds_to_json(const std::vector<SimplexBounds>& bs) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& b : bs) {
    nlohmann::json j;
    j["c"] = vec_to_json(b.c);
    j["beta_f"] = b.beta_f;
    j["beta_hh"] = b.beta_hh;
    j["beta_gbar"] = b.beta_gbar;
    j["ghat"] = b.ghat;
    a.push_back(std::move(j));
  }
  return a;
}

std::vector<SimplexBounds> bounds_from_json(const nlohmann::json& a) {
  std::vector<SimplexBounds> out;
  out.reserve(a.size());
  for (const auto& j : a) {
    SimplexBounds b;
    b.c = vec_from_json(j.at("c"));
    b.beta_f = j.at("beta_f").get<double>();
    b.beta_hh = j.at("beta_hh").get<double>();
    b.beta_gbar = j.at("beta_gbar").get<double>();
    b.ghat = j.at("ghat").get<double>();
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

std::string certificate_to_json(const CombinedCertificate& cert) {
  nlohmann::ordered_json j;
  j["system_hash"] = cert.system_hash;
  j["norm_kind"] = norm_name(cert.storage.norm);
  j["mesh"] = nlohmann::ordered_json::parse(mesh_to_json(cert.storage.mesh));
  j["V"] = vec_to_json(cert.storage.V);
  j["L"] = vecs_to_json(cert.storage.L);
  j["gamma"] = cert.storage.gamma;
  j["b1"] = cert.storage.b1;
  j["barrier_mesh"] =
      nlohmann::ordered_json::parse(mesh_to_json(cert.barrier.mesh));
  j["W"] = vec_to_json(cert.barrier.W);
  j["Lhat"] = vecs_to_json(cert.barrier.Lhat);
  j["uhat"] = cert.barrier.uhat;
  j["b2"] = cert.barrier.b2;
  j["level_c"] = cert.barrier.level_c;
  j["A1_simplexes"] = cert.barrier.A1.simplex_ids;
  j["bounds"] = bounds_to_json(cert.storage.bounds);
  j["barrier_bounds"] = bounds_to_json(cert.barrier.bounds);
  j["tool_version"] = cert.tool_version;
  auto& hist = j["history"] = nlohmann::ordered_json::array();
  for (const auto& r : cert.history) {
    nlohmann::ordered_json rec;
    rec["phase"] = r.phase;
    rec["iter"] = r.iter;
    rec["objective_tag"] = r.objective_tag;
    rec["J"] = r.J;
    rec["b"] = r.b;
    rec["scalar"] = r.scalar;
    rec["solver_status"] = r.solver_status;
    rec["wall_ms"] = r.wall_ms;
    hist.push_back(std::move(rec));
  }
  return j.dump(2);
}

CombinedCertificate certificate_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  CombinedCertificate cert;
  cert.system_hash = j.at("system_hash").get<std::string>();
  NormKind norm = norm_from_name(j.at("norm_kind").get<std::string>());
  cert.storage.norm = cert.barrier.norm = norm;
  cert.storage.mesh = mesh_from_json(j.at("mesh").dump());
  cert.storage.V = vec_from_json(j.at("V"));
  cert.storage.L = vecs_from_json(j.at("L"));
  cert.storage.gamma = j.at("gamma").get<double>();
  cert.storage.b1 = j.at("b1").get<double>();
  cert.barrier.mesh = mesh_from_json(j.at("barrier_mesh").dump());
  cert.barrier.W = vec_from_json(j.at("W"));
  cert.barrier.Lhat = vecs_from_json(j.at("Lhat"));
  cert.barrier.uhat = j.at("uhat").get<double>();
  cert.barrier.b2 = j.at("b2").get<double>();
  cert.barrier.level_c = j.at("level_c").get<double>();
  cert.barrier.A1.simplex_ids = j.at("A1_simplexes").get<std::vector<int>>();
  cert.storage.bounds = bounds_from_json(j.at("bounds"));
  cert.barrier.bounds = bounds_from_json(j.at("barrier_bounds"));
  cert.tool_version = j.value("tool_version", "");
  for (const auto& rec : j.value("history", nlohmann::json::array())) {
    IterationRecord r;
    r.phase = rec.at("phase").get<std::string>();
    r.iter = rec.at("iter").get<int>();
    r.objective_tag = rec.value("objective_tag", "");
    r.J = rec.at("J").get<double>();
    r.b = rec.at("b").get<double>();
    r.scalar = rec.at("scalar").get<double>();
    r.solver_status = rec.value("solver_status", "");
    r.wall_ms = rec.value("wall_ms", 0.0);
    cert.history.push_back(std::move(r));
  }
  return cert;
}

}  // namespace cpagain
