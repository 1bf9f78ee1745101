#include "cpagain/conic.hpp"

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cpagain {

void ConicProgram::add_box(int var, double lo, double hi) {
  AffineExpr upper;  // x - hi <= 0
  upper.constant = -hi;
  upper.add(var, 1.0);
  add_le(std::move(upper));
  AffineExpr lower;  // lo - x <= 0
  lower.constant = lo;
  lower.add(var, -1.0);
  add_le(std::move(lower));
}

const char* status_name(ConicSolution::Status s) {
  switch (s) {
    case ConicSolution::Status::Optimal: return "optimal";
    case ConicSolution::Status::Infeasible: return "infeasible";
    case ConicSolution::Status::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

namespace {

nlohmann::json affine_to_json(const AffineExpr& e) {
  nlohmann::json j;
  j["const"] = e.constant;
  auto& terms = j["terms"] = nlohmann::json::array();
  for (auto& [var, coef] : e.terms) terms.push_back({var, coef});
  return j;
}

}  // namespace

std::string conic_to_json(const ConicProgram& p) {
  nlohmann::json j;
  j["num_vars"] = p.num_vars;
  j["objective"] = p.objective;
  auto& lin = j["linear"] = nlohmann::json::array();
  for (const auto& c : p.linear) {
    nlohmann::json row = affine_to_json(c.expr);
    row["eq"] = c.equality;
    lin.push_back(std::move(row));
  }
  auto& psd = j["psd"] = nlohmann::json::array();
  for (const auto& b : p.psd) {
    nlohmann::json blk;
    blk["size"] = b.size;
    auto& entries = blk["entries"] = nlohmann::json::array();
    for (int r = 0; r < b.size; ++r)
      for (int c = 0; c <= r; ++c) {
        nlohmann::json e = affine_to_json(b.entry[r][c]);
        e["row"] = r;
        e["col"] = c;
        entries.push_back(std::move(e));
      }
    psd.push_back(std::move(blk));
  }
  return j.dump();
}

ConicSolution solve_conic(const ConicProgram& p) {
  if (p.num_vars == 0) throw std::invalid_argument("solve_conic: empty program");
  for (const auto& b : p.psd)
    if (b.size < 1 || b.size > 3)
      throw std::invalid_argument("solve_conic: PSD block sizes must be in {1,2,3}");

  namespace fs = std::filesystem;
  static std::atomic<unsigned> counter{0};
  auto tag = std::to_string(static_cast<unsigned>(::getpid())) + "_" +
             std::to_string(counter++);
  fs::path in = fs::temp_directory_path() / ("cpagain_conic_in_" + tag + ".json");
  fs::path out = fs::temp_directory_path() / ("cpagain_conic_out_" + tag + ".json");

  {
    std::ofstream f(in);
    f << conic_to_json(p);
  }

  std::string cmd;
  if (const char* env = std::getenv("CPAGAIN_SOLVER"); env && *env) {
    cmd = env;
  } else {
    cmd = std::string("python3 ") + CPAGAIN_DEFAULT_ADAPTER;
  }
  cmd += " \"" + in.string() + "\" \"" + out.string() + "\"";

  int rc = std::system(cmd.c_str());
  ConicSolution sol;
  if (rc != 0 || !fs::exists(out)) {
    sol.status = ConicSolution::Status::NumericalFailure;
    sol.message = "adapter invocation failed (exit " + std::to_string(rc) + ")";
    fs::remove(in);
    return sol;
  }

  nlohmann::json j;
  {
    std::ifstream f(out);
    try {
      f >> j;
    } catch (const std::exception& e) {
      sol.status = ConicSolution::Status::NumericalFailure;
      sol.message = std::string("adapter output unreadable: ") + e.what();
      fs::remove(in);
      fs::remove(out);
      return sol;
    }
  }
  fs::remove(in);
  fs::remove(out);

  std::string status = j.value("status", "numerical-failure");
  if (status == "optimal")
    sol.status = ConicSolution::Status::Optimal;
  else if (status == "infeasible")
    sol.status = ConicSolution::Status::Infeasible;
  else
    sol.status = ConicSolution::Status::NumericalFailure;
  sol.message = j.value("message", "");
  if (sol.status == ConicSolution::Status::Optimal) {
    auto xs = j.at("x").get<std::vector<double>>();
    if (static_cast<int>(xs.size()) != p.num_vars)
      throw std::runtime_error("adapter returned wrong variable count");
    sol.x = Eigen::Map<Eigen::VectorXd>(xs.data(), xs.size());
    sol.objective = j.value("objective", 0.0);
  }
  return sol;
}

}  // namespace cpagain
