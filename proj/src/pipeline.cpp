#include "cpagain/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cpagain/cpa.hpp"

namespace cpagain {

namespace {

std::vector<double> parse_doubles(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t pos = 0;
      double v = std::stod(item, &pos);
      while (pos < item.size() && std::isspace(static_cast<unsigned char>(item[pos])))
        ++pos;
      if (pos != item.size()) throw std::invalid_argument("trailing junk");
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument("config: bad number in '" + key + "': " + item);
    }
  }
  if (out.empty()) throw std::invalid_argument("config: empty value for " + key);
  return out;
}

Eigen::VectorXd parse_vec(const std::string& s, const std::string& key) {
  auto v = parse_doubles(s, key);
  return Eigen::Map<Eigen::VectorXd>(v.data(), v.size());
}

std::vector<int> parse_ints(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (double v : parse_doubles(s, key)) {
    if (v != std::floor(v))
      throw std::invalid_argument("config: expected integers in " + key);
    out.push_back(static_cast<int>(v));
  }
  return out;
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("config: expected a boolean for " + key);
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void AnalysisConfig::validate() const {
  const auto n = omega_lo.size();
  if (n == 0) throw std::invalid_argument("config: omega_lo missing");
  auto box = [n](const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                 const char* what) {
    if (lo.size() != n || hi.size() != n)
      throw std::invalid_argument(std::string("config: dimension mismatch in ") +
                                  what);
    for (int a = 0; a < n; ++a)
      if (!(lo[a] < hi[a]))
        throw std::invalid_argument(std::string("config: empty box ") + what);
  };
  box(omega_lo, omega_hi, "omega");
  box(omega_hat_lo, omega_hat_hi, "omega_hat");
  box(a1_lo, a1_hi, "a1");
  for (int a = 0; a < n; ++a) {
    if (!(omega_lo[a] <= 0 && 0 <= omega_hi[a]))
      throw std::invalid_argument("config: omega must contain the origin");
    if (!(a1_lo[a] > omega_hat_lo[a] && a1_hi[a] < omega_hat_hi[a]))
      throw std::invalid_argument(
          "config: a1 must lie strictly inside omega_hat");
    if (!(a1_lo[a] <= 0 && 0 <= a1_hi[a]))
      throw std::invalid_argument("config: a1 must contain the origin");
  }
  auto grid_ok = [n](const std::vector<int>& g, const char* what) {
    if (static_cast<Eigen::Index>(g.size()) != n)
      throw std::invalid_argument(std::string("config: grid size mismatch in ") +
                                  what);
    for (int k : g)
      if (k < 1)
        throw std::invalid_argument(std::string("config: grid cells < 1 in ") +
                                    what);
  };
  grid_ok(omega_grid, "omega_grid");
  grid_ok(omega_hat_grid, "omega_hat_grid");
  if (storage_init != "kyp" && storage_init != "direct")
    throw std::invalid_argument("config: storage_init must be kyp or direct");
  if (barrier_init != "lqr" && barrier_init != "direct")
    throw std::invalid_argument("config: barrier_init must be lqr or direct");
  if (!(gamma0 > 0) || !(uhat0 > 0))
    throw std::invalid_argument("config: gamma0 and uhat0 must be positive");
  if (refinement_rounds < 0)
    throw std::invalid_argument("config: refinement_rounds must be >= 0");
}

AnalysisConfig parse_config(const std::string& text) {
  AnalysisConfig cfg;
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') continue;  // section header
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (!kv.emplace(key, val).second)
      throw std::invalid_argument("config: duplicate key " + key);
  }
  auto take = [&kv](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::pair<bool, std::string>{false, ""};
    std::string v = it->second;
    kv.erase(it);
    return std::pair<bool, std::string>{true, v};
  };
  auto require = [&take](const std::string& key) {
    auto [ok, v] = take(key);
    if (!ok) throw std::invalid_argument("config: missing key " + key);
    return v;
  };

  cfg.omega_lo = parse_vec(require("omega_lo"), "omega_lo");
  cfg.omega_hi = parse_vec(require("omega_hi"), "omega_hi");
  cfg.omega_grid = parse_ints(require("omega_grid"), "omega_grid");
  if (auto [ok, v] = take("omega_hat_lo"); ok)
    cfg.omega_hat_lo = parse_vec(v, "omega_hat_lo");
  else
    cfg.omega_hat_lo = cfg.omega_lo;
  if (auto [ok, v] = take("omega_hat_hi"); ok)
    cfg.omega_hat_hi = parse_vec(v, "omega_hat_hi");
  else
    cfg.omega_hat_hi = cfg.omega_hi;
  if (auto [ok, v] = take("omega_hat_grid"); ok)
    cfg.omega_hat_grid = parse_ints(v, "omega_hat_grid");
  else
    cfg.omega_hat_grid = cfg.omega_grid;
  cfg.a1_lo = parse_vec(require("a1_lo"), "a1_lo");
  cfg.a1_hi = parse_vec(require("a1_hi"), "a1_hi");

  if (auto [ok, v] = take("storage_init"); ok) cfg.storage_init = v;
  if (auto [ok, v] = take("barrier_init"); ok) cfg.barrier_init = v;
  if (auto [ok, v] = take("gamma0"); ok) cfg.gamma0 = std::stod(v);
  if (auto [ok, v] = take("uhat0"); ok) cfg.uhat0 = std::stod(v);
  if (auto [ok, v] = take("norm"); ok) cfg.norm = norm_from_name(v);
  if (auto [ok, v] = take("refinement_rounds"); ok)
    cfg.refinement_rounds = std::stoi(v);
  if (auto [ok, v] = take("check_tol"); ok) cfg.check_tol = std::stod(v);
  if (auto [ok, v] = take("max_iters"); ok) cfg.solve.max_iters = std::stoi(v);
  if (auto [ok, v] = take("trust_init"); ok) cfg.solve.trust_init = std::stod(v);
  if (auto [ok, v] = take("trust_max"); ok) cfg.solve.trust_max = std::stod(v);
  if (auto [ok, v] = take("gamma_min"); ok) cfg.solve.gamma_min = std::stod(v);
  if (auto [ok, v] = take("pin_margin"); ok) cfg.solve.pin_margin = std::stod(v);
  if (auto [ok, v] = take("stagnation_rel"); ok)
    cfg.solve.stagnation_rel = std::stod(v);
  if (auto [ok, v] = take("stagnation_steps"); ok)
    cfg.solve.stagnation_steps = std::stoi(v);
  if (auto [ok, v] = take("literal_e"); ok)
    cfg.solve.literal_e = parse_bool(v, "literal_e");

  if (!kv.empty())
    throw std::invalid_argument("config: unknown key " + kv.begin()->first);
  cfg.validate();
  return cfg;
}

AnalysisConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

StorageState refine_and_warmstart(const Triangulation& coarse,
                                  const Triangulation& fine,
                                  const SystemSpec& sys,
                                  const std::vector<SimplexBounds>& fine_bounds,
                                  const StorageState& y) {
  CpaFunction Vc(coarse, y.V);
  StorageState z;
  z.gamma = y.gamma;
  z.V.resize(fine.num_vertices());
  for (const auto& v : fine.vertices)
    z.V[v.id] = v.id < coarse.num_vertices() ? y.V[v.id] : Vc.evaluate(v.coords);
  repair_storage(sys, fine, fine_bounds, z);
  return z;
}

BarrierState refine_and_warmstart(const Triangulation& coarse,
                                  const Triangulation& fine,
                                  const SystemSpec& sys,
                                  const std::vector<SimplexBounds>& fine_bounds,
                                  const std::vector<int>& fine_shell,
                                  const BarrierState& y) {
  CpaFunction Wc(coarse, y.W);
  BarrierState z;
  z.uhat = y.uhat;
  z.W.resize(fine.num_vertices());
  for (const auto& v : fine.vertices)
    z.W[v.id] = v.id < coarse.num_vertices() ? y.W[v.id] : Wc.evaluate(v.coords);
  repair_barrier(sys, fine, fine_bounds, fine_shell, z);
  return z;
}

namespace {

std::string worst_pair_diagnostic(const PairValues& pv, const char* what) {
  double worst = -1;
  int ws = -1, wj = -1;
  for (size_t i = 0; i < pv.values.size(); ++i) {
    for (int j = 0; j < pv.values[i].size(); ++j) {
      if (!pv.exempt[i].empty() && pv.exempt[i][j]) continue;
      if (pv.values[i][j] > worst) {
        worst = pv.values[i][j];
        ws = static_cast<int>(i);
        wj = j;
      }
    }
  }
  std::ostringstream os;
  os << what << "; worst violation " << worst << " at simplex " << ws
     << " vertex " << wj;
  return os.str();
}

}  // namespace

double gain_bias(const StorageCertificate& st, const Eigen::VectorXd& x0) {
  CpaFunction V(st.mesh, st.V);
  return std::sqrt(2.0 * V.evaluate(x0));
}

CombinedCertificate combine(const SystemSpec& sys, const StorageCertificate& st,
                            const BarrierCertificate& ba,
                            const Eigen::VectorXd& omega_lo,
                            const Eigen::VectorXd& omega_hi,
                            std::vector<IterationRecord> history) {
  // A simplex meets the invariant set {W <= c} iff its smallest vertex
  // value does; convexity of the box then reduces containment in Omega to
  // a vertex scan.
  for (const auto& s : ba.mesh.simplexes) {
    double wmin = ba.W[s.vertex_ids[0]];
    for (int vid : s.vertex_ids) wmin = std::min(wmin, ba.W[vid]);
    if (wmin > ba.level_c) continue;
    for (int vid : s.vertex_ids) {
      const Eigen::VectorXd& x = ba.mesh.coords(vid);
      for (int a = 0; a < ba.mesh.n; ++a)
        if (x[a] < omega_lo[a] - kGeomTol || x[a] > omega_hi[a] + kGeomTol) {
          std::ostringstream os;
          os << "invariant set leaves the storage domain at vertex " << vid
             << " (" << x.transpose() << ")";
          throw std::runtime_error(os.str());
        }
    }
  }
  CombinedCertificate cert;
  cert.storage = st;
  cert.barrier = ba;
  cert.system_hash = system_hash(sys);
  cert.tool_version = "cpagain 1.0";
  cert.history = std::move(history);
  return cert;
}

AnalysisResult analyze(const SystemSpec& sys, const AnalysisConfig& cfg) {
  cfg.validate();
  check_system(sys);
  AnalysisResult res;
  std::vector<IterationRecord> history;

  // ---- storage side -----------------------------------------------------
  Triangulation T = kuhn_triangulate(cfg.omega_lo, cfg.omega_hi, cfg.omega_grid);
  std::vector<SimplexBounds> bounds = compute_bounds(sys, T, cfg.norm);
  StorageState y;
  {
    std::string diag;
    if (cfg.storage_init == "kyp") {
      y = init_storage_kyp(sys, T, bounds, &diag);
      if (!diag.empty()) res.notes.push_back("storage init: " + diag);
    } else {
      y = init_storage_direct(sys, T, bounds, cfg.gamma0);
    }
  }

  int rounds_used = 0;
  for (int round = 0;; ++round, ++rounds_used) {
    run_storage_phase(sys, T, bounds, y, StorageObjective::MaximizeB1,
                      cfg.solve, history);
    if (y.b1 > 0) break;
    // try the feasible sub-triangulation around the origin
    CpaFunction Vf(T, y.V);
    PairValues H = assemble_H(sys, T, bounds, Vf, y.L, y.gamma);
    std::vector<int> seed;
    int ov = T.origin_vertex();
    for (const auto& s : T.simplexes)
      if (std::find(s.vertex_ids.begin(), s.vertex_ids.end(), ov) !=
          s.vertex_ids.end())
        seed.push_back(s.id);
    std::string why;
    std::vector<int> sub = max_feasible_subtriangulation(H, T, seed, &why);
    if (!sub.empty() && static_cast<int>(sub.size()) < T.num_simplexes()) {
      std::vector<int> vmap;
      Triangulation S = extract_submesh(T, sub, vmap);
      Eigen::VectorXd V2(S.num_vertices());
      for (int old = 0; old < T.num_vertices(); ++old)
        if (vmap[old] >= 0) V2[vmap[old]] = y.V[old];
      T = std::move(S);
      bounds = compute_bounds(sys, T, cfg.norm);
      y.V = std::move(V2);
      repair_storage(sys, T, bounds, y);
      res.notes.push_back(
          "storage: restricted to a feasible sub-triangulation of " +
          std::to_string(T.num_simplexes()) + " simplexes");
      if (y.b1 > 0) break;
    }
    if (round >= cfg.refinement_rounds)
      throw std::runtime_error(
          "storage margin never turned positive: " +
          worst_pair_diagnostic(H, why.empty() ? "budget exhausted" : why.c_str()));
    Triangulation F = refine_all(T);
    std::vector<SimplexBounds> fb = compute_bounds(sys, F, cfg.norm);
    y = refine_and_warmstart(T, F, sys, fb, y);
    T = std::move(F);
    bounds = std::move(fb);
    res.notes.push_back("storage: refined mesh to " +
                        std::to_string(T.num_simplexes()) + " simplexes");
  }
  run_storage_phase(sys, T, bounds, y, StorageObjective::MinimizeGamma,
                    cfg.solve, history);
  // The interpolation-error weights put a mesh-dependent floor under the
  // achievable gain, so any refinement budget left over from the margin
  // search is spent driving gamma down further.
  for (; rounds_used < cfg.refinement_rounds; ++rounds_used) {
    Triangulation F = refine_all(T);
    std::vector<SimplexBounds> fb = compute_bounds(sys, F, cfg.norm);
    y = refine_and_warmstart(T, F, sys, fb, y);
    T = std::move(F);
    bounds = std::move(fb);
    res.notes.push_back("storage: refined mesh to " +
                        std::to_string(T.num_simplexes()) +
                        " simplexes to tighten gamma");
    run_storage_phase(sys, T, bounds, y, StorageObjective::MinimizeGamma,
                      cfg.solve, history);
  }

  StorageCertificate st;
  st.mesh = T;
  st.V = y.V;
  st.L = y.L;
  st.gamma = y.gamma;
  st.b1 = y.b1;
  st.bounds = bounds;
  st.norm = cfg.norm;

  // ---- barrier side -----------------------------------------------------
  Triangulation Th =
      kuhn_triangulate(cfg.omega_hat_lo, cfg.omega_hat_hi, cfg.omega_hat_grid);
  std::vector<SimplexBounds> bh = compute_bounds(sys, Th, cfg.norm);
  Region A1 = region_from_box(Th, cfg.a1_lo, cfg.a1_hi);
  if (A1.simplex_ids.empty())
    throw std::runtime_error("a1 box contains no simplex of the barrier mesh");
  std::vector<int> shell = shell_indices(Th, A1);
  BarrierState z;
  {
    std::string diag;
    if (cfg.barrier_init == "lqr") {
      z = init_barrier_lqr(sys, Th, bh, shell, &diag);
      if (!diag.empty()) res.notes.push_back("barrier init: " + diag);
    } else {
      z = init_barrier_direct(sys, Th, bh, shell, cfg.uhat0);
    }
  }

  for (int round = 0;; ++round) {
    run_barrier_phase(sys, Th, bh, shell, z, BarrierObjective::MaximizeB2,
                      cfg.solve, history);
    if (z.b2 > 0) break;
    CpaFunction Wf(Th, z.W);
    PairValues D = assemble_Dplus(sys, Th, bh, Wf, z.Lhat, z.uhat, shell);
    std::string why;
    std::vector<int> sub =
        max_feasible_subtriangulation(D, Th, A1.simplex_ids, &why);
    if (static_cast<int>(sub.size()) > static_cast<int>(A1.simplex_ids.size()) &&
        static_cast<int>(sub.size()) < Th.num_simplexes()) {
      std::vector<int> vmap;
      Triangulation S = extract_submesh(Th, sub, vmap);
      Eigen::VectorXd W2(S.num_vertices());
      for (int old = 0; old < Th.num_vertices(); ++old)
        if (vmap[old] >= 0) W2[vmap[old]] = z.W[old];
      // sub is sorted, so a member's new id is its position in sub
      Region A1new;
      for (size_t k = 0; k < sub.size(); ++k)
        if (A1.contains(sub[k])) A1new.simplex_ids.push_back(static_cast<int>(k));
      Th = std::move(S);
      bh = compute_bounds(sys, Th, cfg.norm);
      A1 = std::move(A1new);
      shell = shell_indices(Th, A1);
      z.W = std::move(W2);
      repair_barrier(sys, Th, bh, shell, z);
      res.notes.push_back(
          "barrier: restricted to a feasible sub-triangulation of " +
          std::to_string(Th.num_simplexes()) + " simplexes");
      if (z.b2 > 0) break;
    }
    if (round >= cfg.refinement_rounds)
      throw std::runtime_error(
          "barrier margin never turned positive: " +
          worst_pair_diagnostic(D, why.empty() ? "budget exhausted" : why.c_str()));
    Triangulation F = refine_all(Th);
    std::vector<SimplexBounds> fb = compute_bounds(sys, F, cfg.norm);
    Region A1f = region_from_box(F, cfg.a1_lo, cfg.a1_hi);
    std::vector<int> shf = shell_indices(F, A1f);
    z = refine_and_warmstart(Th, F, sys, fb, shf, z);
    Th = std::move(F);
    bh = std::move(fb);
    A1 = std::move(A1f);
    shell = std::move(shf);
    res.notes.push_back("barrier: refined mesh to " +
                        std::to_string(Th.num_simplexes()) + " simplexes");
  }
  run_barrier_phase(sys, Th, bh, shell, z, BarrierObjective::MaximizeUhat,
                    cfg.solve, history);

  BarrierCertificate ba;
  ba.mesh = Th;
  ba.W = z.W;
  ba.Lhat = z.Lhat;
  ba.uhat = z.uhat;
  ba.b2 = z.b2;
  ba.A1 = A1;
  ba.bounds = bh;
  ba.norm = cfg.norm;
  {
    CpaFunction Wf(ba.mesh, ba.W);
    ba.level_c = largest_interior_sublevel(Wf, ba.A1);
  }

  res.cert = combine(sys, st, ba, cfg.omega_lo, cfg.omega_hi, std::move(history));
  res.sqrt_gamma = std::sqrt(st.gamma);

  CheckReport rs = check_storage(sys, res.cert.storage, cfg.check_tol);
  CheckReport rb = check_barrier(sys, res.cert.barrier, cfg.check_tol);
  if (!rs.passed || !rs.margin_positive)
    throw std::runtime_error("internal error: emitted storage certificate "
                             "fails its own check: " +
                             (rs.violations.empty() ? "margin not positive"
                                                   : rs.violations.front()));
  if (!rb.passed || !rb.margin_positive)
    throw std::runtime_error("internal error: emitted barrier certificate "
                             "fails its own check: " +
                             (rb.violations.empty() ? "margin not positive"
                                                   : rb.violations.front()));
  return res;
}

}  // namespace cpagain
