// Command-line front end: analyze / verify / export / mesh.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpagain/cpa.hpp"
#include "cpagain/pipeline.hpp"
#include "cpagain/verify.hpp"

namespace {

constexpr const char* kVersion = "cpagain 1.0";

// exit codes: 0 ok, 1 I/O or usage, 2 infeasible, 3 verification failure
constexpr int kExitIo = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitVerify = 3;

cpagain::SystemSpec resolve_system(const std::string& name) {
  if (name == "pendulum") return cpagain::pendulum_system();
  if (name == "zero") return cpagain::zero_system();
  return cpagain::load_system_file(name);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string manifest_json(const std::string& system, const std::string& config,
                          const std::string& out_dir, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["tool_version"] = kVersion;
  j["system"] = system;
  j["config"] = config;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  j["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  return j.dump(2);
}

int invariant_set_size(const cpagain::BarrierCertificate& ba) {
  int count = 0;
  for (const auto& s : ba.mesh.simplexes) {
    double wmin = ba.W[s.vertex_ids[0]];
    for (int vid : s.vertex_ids) wmin = std::min(wmin, ba.W[vid]);
    if (wmin <= ba.level_c) ++count;
  }
  return count;
}

int cmd_analyze(const std::string& system, const std::string& config,
                const std::string& out_dir, std::uint64_t seed) {
  cpagain::SystemSpec sys;
  cpagain::AnalysisConfig cfg;
  try {
    sys = resolve_system(system);
    cfg = cpagain::load_config_file(config);
    std::filesystem::create_directories(out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  cpagain::AnalysisResult res;
  try {
    res = cpagain::analyze(sys, cfg);
  } catch (const std::exception& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  }
  try {
    std::filesystem::path out(out_dir);
    write_file(out / "cert.json", cpagain::certificate_to_json(res.cert));
    write_file(out / "history.csv", cpagain::history_to_csv(res.cert.history));
    write_file(out / "manifest.json",
               manifest_json(system, config, out_dir, seed));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  for (const auto& note : res.notes) std::cout << "note: " << note << "\n";
  std::cout << "gamma = " << res.cert.storage.gamma << "\n"
            << "sqrt_gamma = " << res.sqrt_gamma << "\n"
            << "uhat = " << res.cert.barrier.uhat << "\n"
            << "b1 = " << res.cert.storage.b1 << "\n"
            << "b2 = " << res.cert.barrier.b2 << "\n"
            << "invariant_set_simplexes = "
            << invariant_set_size(res.cert.barrier) << "\n";
  return 0;
}

int cmd_verify(const std::string& cert_path, const std::string& system,
               int samples, int trials, double horizon, std::uint64_t seed,
               const std::string& report_path) {
  cpagain::CombinedCertificate cert;
  cpagain::SystemSpec sys;
  try {
    cert = cpagain::certificate_from_json(read_file(cert_path));
    sys = resolve_system(system);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }

  bool checks_passed = true;
  std::vector<std::string> problems;
  if (cpagain::system_hash(sys) != cert.system_hash) {
    checks_passed = false;
    problems.push_back("system hash mismatch");
  }
  const double tol = 1e-7;
  cpagain::CheckReport rs = cpagain::check_storage(sys, cert.storage, tol);
  cpagain::CheckReport rb = cpagain::check_barrier(sys, cert.barrier, tol);
  if (!rs.passed || !rs.margin_positive) {
    checks_passed = false;
    problems.push_back(rs.violations.empty() ? "b1 not positive"
                                             : rs.violations.front());
  }
  if (!rb.passed || !rb.margin_positive) {
    checks_passed = false;
    problems.push_back(rb.violations.empty() ? "b2 not positive"
                                             : rb.violations.front());
  }

  double hj_max = 0;
  std::vector<cpagain::VerifyReport> reports;
  if (checks_passed) {
    cpagain::HjSample hj = cpagain::sample_hj(sys, cert.storage, samples, seed);
    hj_max = hj.max_value;
    if (hj_max > 1e-9) problems.push_back("sampled dissipation is positive");
    reports.push_back(
        cpagain::check_invariance(sys, cert, trials, horizon, seed));
    reports.push_back(
        cpagain::check_gain_inequality(sys, cert, trials, horizon, seed));
  }

  bool all = checks_passed && hj_max <= 1e-9;
  for (const auto& r : reports) all = all && r.passed();
  try {
    write_file(report_path,
               cpagain::verify_reports_json(reports, hj_max, checks_passed));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  for (const auto& p : problems) std::cerr << "violation: " << p << "\n";
  for (const auto& r : reports)
    std::cout << r.name << ": " << r.violations << " violation(s) in "
              << r.trials << " trials\n";
  std::cout << (all ? "PASS" : "FAIL") << "\n";
  return all ? 0 : kExitVerify;
}

void export_mesh_edges(const cpagain::Triangulation& T,
                       const std::filesystem::path& path) {
  std::set<std::pair<int, int>> edges;
  for (const auto& s : T.simplexes)
    for (size_t a = 0; a < s.vertex_ids.size(); ++a)
      for (size_t b = a + 1; b < s.vertex_ids.size(); ++b)
        edges.insert({std::min(s.vertex_ids[a], s.vertex_ids[b]),
                      std::max(s.vertex_ids[a], s.vertex_ids[b])});
  std::ostringstream os;
  os.precision(17);
  for (int a = 0; a < T.n; ++a) os << (a ? "," : "") << "ax" << a + 1;
  for (int a = 0; a < T.n; ++a) os << ",bx" << a + 1;
  os << "\n";
  for (auto& [va, vb] : edges) {
    for (int a = 0; a < T.n; ++a) os << (a ? "," : "") << T.coords(va)[a];
    for (int a = 0; a < T.n; ++a) os << "," << T.coords(vb)[a];
    os << "\n";
  }
  write_file(path, os.str());
}

void export_levelset(const cpagain::BarrierCertificate& ba,
                     const std::filesystem::path& path) {
  if (ba.mesh.n != 2)
    throw std::runtime_error("levelset export is only supported for n = 2");
  std::ostringstream os;
  os.precision(17);
  os << "x1a,x2a,x1b,x2b\n";
  const double c = ba.level_c;
  for (const auto& s : ba.mesh.simplexes) {
    // crossing points of {W = c} on the three edges, by linear interpolation
    std::vector<Eigen::Vector2d> pts;
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b) {
        double wa = ba.W[s.vertex_ids[a]], wb = ba.W[s.vertex_ids[b]];
        if ((wa - c) * (wb - c) > 0 || wa == wb) continue;
        double t = (c - wa) / (wb - wa);
        pts.push_back(ba.mesh.coords(s.vertex_ids[a]) +
                      t * (ba.mesh.coords(s.vertex_ids[b]) -
                           ba.mesh.coords(s.vertex_ids[a])));
      }
    if (pts.size() >= 2)
      os << pts[0][0] << "," << pts[0][1] << "," << pts[1][0] << ","
         << pts[1][1] << "\n";
  }
  write_file(path, os.str());
}

void export_fields(const cpagain::CombinedCertificate& cert,
                   const std::filesystem::path& path, int grid) {
  const auto& st = cert.storage;
  const auto& ba = cert.barrier;
  if (st.mesh.n != 2)
    throw std::runtime_error("fields export is only supported for n = 2");
  cpagain::CpaFunction V(st.mesh, st.V), W(ba.mesh, ba.W);
  Eigen::Vector2d lo(std::min(st.mesh.box_lo[0], ba.mesh.box_lo[0]),
                     std::min(st.mesh.box_lo[1], ba.mesh.box_lo[1]));
  Eigen::Vector2d hi(std::max(st.mesh.box_hi[0], ba.mesh.box_hi[0]),
                     std::max(st.mesh.box_hi[1], ba.mesh.box_hi[1]));
  std::ostringstream os;
  os.precision(17);
  os << "x1,x2,V,W\n";
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      Eigen::Vector2d x(lo[0] + (hi[0] - lo[0]) * i / (grid - 1.0),
                        lo[1] + (hi[1] - lo[1]) * j / (grid - 1.0));
      os << x[0] << "," << x[1] << ",";
      try {
        os << V.evaluate(x);
      } catch (const std::exception&) {
        os << "nan";
      }
      os << ",";
      try {
        os << W.evaluate(x);
      } catch (const std::exception&) {
        os << "nan";
      }
      os << "\n";
    }
  write_file(path, os.str());
}

void export_history(const cpagain::CombinedCertificate& cert,
                    const std::filesystem::path& path) {
  std::ostringstream os;
  os.precision(17);
  os << "iter,J,b1,sqrt_gamma\n";
  int row = 0;
  for (const auto& r : cert.history) {
    if (r.phase != "storage_b1" && r.phase != "storage_gamma") continue;
    os << ++row << "," << r.J << "," << r.b << "," << std::sqrt(r.scalar)
       << "\n";
  }
  write_file(path, os.str());
}

int cmd_export(const std::string& cert_path, const std::string& what,
               const std::string& out_dir) {
  cpagain::CombinedCertificate cert;
  try {
    cert = cpagain::certificate_from_json(read_file(cert_path));
    std::filesystem::create_directories(out_dir);
    std::filesystem::path out(out_dir);
    if (what == "mesh") {
      export_mesh_edges(cert.storage.mesh, out / "mesh_storage.csv");
      export_mesh_edges(cert.barrier.mesh, out / "mesh_barrier.csv");
    } else if (what == "levelset") {
      export_levelset(cert.barrier, out / "levelset.csv");
    } else if (what == "history") {
      export_history(cert, out / "history_export.csv");
    } else if (what == "fields") {
      export_fields(cert, out / "fields.csv", 100);
    } else {
      std::cerr << "error: unknown export kind '" << what << "'\n";
      return kExitIo;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}

bool parse_box(const std::string& spec, Eigen::VectorXd& lo, Eigen::VectorXd& hi) {
  std::vector<double> los, his;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    if (colon == std::string::npos) return false;
    try {
      los.push_back(std::stod(item.substr(0, colon)));
      his.push_back(std::stod(item.substr(colon + 1)));
    } catch (const std::exception&) {
      return false;
    }
  }
  if (los.empty()) return false;
  lo = Eigen::Map<Eigen::VectorXd>(los.data(), los.size());
  hi = Eigen::Map<Eigen::VectorXd>(his.data(), his.size());
  return true;
}

int cmd_mesh(const std::string& box_spec, const std::string& grid_spec,
             int refine_rounds, const std::string& out_path) {
  Eigen::VectorXd lo, hi;
  if (!parse_box(box_spec, lo, hi)) {
    std::cerr << "error: --box expects \"a:b,a:b,...\"\n";
    return kExitIo;
  }
  std::vector<int> grid;
  {
    std::stringstream ss(grid_spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        grid.push_back(std::stoi(item));
      } catch (const std::exception&) {
        std::cerr << "error: --grid expects \"k,k,...\"\n";
        return kExitIo;
      }
    }
  }
  try {
    cpagain::Triangulation T = cpagain::kuhn_triangulate(lo, hi, grid);
    for (int r = 0; r < refine_rounds; ++r) T = cpagain::refine_all(T);
    cpagain::MeshDiagnostics diag = cpagain::validate(T);
    for (const auto& issue : diag.issues)
      std::cerr << "mesh issue: " << issue << "\n";
    write_file(out_path, cpagain::mesh_to_json(T));
    std::cout << "vertices = " << T.num_vertices() << "\n"
              << "simplexes = " << T.num_simplexes() << "\n";
    return diag.ok() ? 0 : kExitVerify;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CPA storage/barrier certificates for small-signal L2 gain"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // analyze
  std::string a_system, a_config, a_out = ".";
  std::uint64_t a_seed = 0;
  int a_threads = 1;
  auto* an = app.add_subcommand("analyze", "run the full certification");
  an->add_option("--system", a_system, "system file or builtin (pendulum, zero)")
      ->required();
  an->add_option("--config", a_config, "analysis config file")->required();
  an->add_option("--out", a_out, "output directory");
  an->add_option("--seed", a_seed, "seed recorded in the manifest");
  an->add_option("--threads", a_threads, "worker threads (assembly)");

  // verify
  std::string v_cert, v_system, v_report = "verify_report.json";
  int v_samples = 100000, v_trials = 100;
  double v_horizon = 50.0;
  std::uint64_t v_seed = 0;
  auto* ve = app.add_subcommand("verify", "re-check a certificate");
  ve->add_option("cert", v_cert, "certificate JSON path")->required();
  ve->add_option("--system", v_system, "system file or builtin")->required();
  ve->add_option("--samples", v_samples, "dissipation sample count");
  ve->add_option("--trials", v_trials, "simulation trials");
  ve->add_option("--horizon", v_horizon, "simulation horizon (s)");
  ve->add_option("--seed", v_seed, "master RNG seed");
  ve->add_option("--report", v_report, "report JSON path");

  // export
  std::string e_cert, e_what, e_out = ".";
  auto* ex = app.add_subcommand("export", "write plot data CSVs");
  ex->add_option("cert", e_cert, "certificate JSON path")->required();
  ex->add_option("--what", e_what, "mesh | levelset | history | fields")
      ->required();
  ex->add_option("--out", e_out, "output directory");

  // mesh
  std::string m_box, m_grid, m_out = "mesh.json";
  int m_refine = 0;
  auto* me = app.add_subcommand("mesh", "generate and validate a mesh");
  me->add_option("--box", m_box, "extents \"a:b,a:b\"")->required();
  me->add_option("--grid", m_grid, "cells per axis \"k,k\"")->required();
  me->add_option("--refine", m_refine, "uniform refinement rounds");
  me->add_option("--out", m_out, "mesh JSON path");

  CLI11_PARSE(app, argc, argv);

  if (an->parsed()) return cmd_analyze(a_system, a_config, a_out, a_seed);
  if (ve->parsed())
    return cmd_verify(v_cert, v_system, v_samples, v_trials, v_horizon, v_seed,
                      v_report);
  if (ex->parsed()) return cmd_export(e_cert, e_what, e_out);
  if (me->parsed()) return cmd_mesh(m_box, m_grid, m_refine, m_out);
  return kExitIo;
}
