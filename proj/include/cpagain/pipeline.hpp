#ifndef CPAGAIN_PIPELINE_HPP
#define CPAGAIN_PIPELINE_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cpagain/certify.hpp"
#include "cpagain/solve.hpp"

namespace cpagain {

struct AnalysisConfig {
  Eigen::VectorXd omega_lo, omega_hi;          // storage domain
  std::vector<int> omega_grid;
  Eigen::VectorXd omega_hat_lo, omega_hat_hi;  // barrier domain (default: omega)
  std::vector<int> omega_hat_grid;
  Eigen::VectorXd a1_lo, a1_hi;                // target neighborhood, grid-aligned
  std::string storage_init = "kyp";            // kyp | direct
  std::string barrier_init = "lqr";            // lqr | direct
  double gamma0 = 1.0;
  double uhat0 = 1e-5;
  NormKind norm = NormKind::Two;
  SolveOptions solve;
  int refinement_rounds = 2;
  double check_tol = kCheckTol;

  void validate() const;  // throws std::invalid_argument
};

/// Key = value config text; '#' comments and [section] headers allowed,
/// vectors comma-separated.
AnalysisConfig parse_config(const std::string& text);
AnalysisConfig load_config_file(const std::string& path);

struct AnalysisResult {
  CombinedCertificate cert;
  double sqrt_gamma = 0;               // gain factor on the input norm
  std::vector<std::string> notes;      // fallbacks and diagnostics taken
};

/// Full run: storage phases on the Omega mesh (with sub-triangulation and
/// refinement fallbacks), barrier phases on the Omega-hat mesh, sublevel
/// extraction, and the containment check of combine().
AnalysisResult analyze(const SystemSpec& sys, const AnalysisConfig& cfg);

/// Carry a state from a coarse mesh to a refinement: new vertex values by
/// CPA interpolation, margins re-established by repair.
StorageState refine_and_warmstart(const Triangulation& coarse,
                                  const Triangulation& fine,
                                  const SystemSpec& sys,
                                  const std::vector<SimplexBounds>& fine_bounds,
                                  const StorageState& y);
BarrierState refine_and_warmstart(const Triangulation& coarse,
                                  const Triangulation& fine,
                                  const SystemSpec& sys,
                                  const std::vector<SimplexBounds>& fine_bounds,
                                  const std::vector<int>& fine_shell,
                                  const BarrierState& y);

/// Checks the invariant-set simplexes of the barrier mesh against the box
/// [omega_lo, omega_hi]; throws with a witness vertex on failure.
CombinedCertificate combine(const SystemSpec& sys, const StorageCertificate& st,
                            const BarrierCertificate& ba,
                            const Eigen::VectorXd& omega_lo,
                            const Eigen::VectorXd& omega_hi,
                            std::vector<IterationRecord> history);

/// Bias term of the gain inequality for a start state: sqrt(2 V(x0)).
double gain_bias(const StorageCertificate& st, const Eigen::VectorXd& x0);

}  // namespace cpagain

#endif
