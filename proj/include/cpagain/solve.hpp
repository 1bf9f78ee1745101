#ifndef CPAGAIN_SOLVE_HPP
#define CPAGAIN_SOLVE_HPP

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "cpagain/bounds.hpp"
#include "cpagain/certify.hpp"
#include "cpagain/conic.hpp"
#include "cpagain/expr.hpp"
#include "cpagain/mesh.hpp"

namespace cpagain {

struct SolveOptions {
  double trust_init = 10.0;   // |delta| box; halved on failure, doubled on success
  double trust_max = 100.0;
  double trust_min = 1e-6;
  double gamma_min = 1e-6;
  double pin_margin = 1e-6;   // lower bound pinned on b1/b2 in the second phase
  double b_cap = 1e3;         // upper box on b1/b2 (unbounded for trivial systems)
  double uhat_cap = 1e3;
  double w_floor = 1e-8;      // keeps W strictly positive
  double stagnation_rel = 1e-3;
  int stagnation_steps = 3;
  int max_iters = 50;
  bool literal_e = false;     // drop the curvature remainder from e_{i,j}
};

enum class StorageObjective { MaximizeB1, MinimizeGamma };
enum class BarrierObjective { MaximizeB2, MaximizeUhat };

struct StorageState {
  Eigen::VectorXd V;
  std::vector<Eigen::VectorXd> L;
  double b1 = 0;
  double gamma = 1;
};

struct BarrierState {
  Eigen::VectorXd W;
  std::vector<Eigen::VectorXd> Lhat;
  double b2 = 0;
  double uhat = 0;
};

/// Restore exact feasibility at the recorded margin: l from the actual
/// gradients, b as the worst-case margin of the vertex inequalities.
void repair_storage(const SystemSpec& sys, const Triangulation& T,
                    const std::vector<SimplexBounds>& bounds, StorageState& y);
void repair_barrier(const SystemSpec& sys, const Triangulation& T,
                    const std::vector<SimplexBounds>& bounds,
                    const std::vector<int>& shell, BarrierState& y);

using Profile = std::function<double(const Eigen::VectorXd&)>;

StorageState init_storage_direct(const SystemSpec& sys, const Triangulation& T,
                                 const std::vector<SimplexBounds>& bounds,
                                 double gamma0 = 1.0, const Profile& profile = {});
/// Quadratic seed from the linearization: bounded-real LMI when the
/// linearized input matrix is nonzero, otherwise a Lyapunov certificate.
/// Falls back to init_storage_direct with a diagnostic on failure.
StorageState init_storage_kyp(const SystemSpec& sys, const Triangulation& T,
                              const std::vector<SimplexBounds>& bounds,
                              std::string* diagnostic = nullptr);
BarrierState init_barrier_direct(const SystemSpec& sys, const Triangulation& T,
                                 const std::vector<SimplexBounds>& bounds,
                                 const std::vector<int>& shell, double uhat0,
                                 const Profile& profile = {});
/// Quadratic seed from the linearization's Lyapunov certificate (offset
/// to stay strictly positive at the origin); uhat starts at 1e-5.
BarrierState init_barrier_lqr(const SystemSpec& sys, const Triangulation& T,
                              const std::vector<SimplexBounds>& bounds,
                              const std::vector<int>& shell,
                              std::string* diagnostic = nullptr);

struct StepResult {
  ConicSolution::Status status = ConicSolution::Status::NumericalFailure;
  bool accepted = false;
  std::string message;
};

/// One trust-region SDP step on the storage state (2x2 blocks per
/// non-origin pair); on success the state is updated and repaired.
StepResult step_hj(const SystemSpec& sys, const Triangulation& T,
                   const std::vector<SimplexBounds>& bounds, StorageState& y,
                   StorageObjective obj, double trust, const SolveOptions& opt);

/// One trust-region SDP step on the barrier state (3x3 blocks over the
/// shell simplexes).
StepResult step_barrier(const SystemSpec& sys, const Triangulation& T,
                        const std::vector<SimplexBounds>& bounds,
                        const std::vector<int>& shell, BarrierState& y,
                        BarrierObjective obj, double trust,
                        const SolveOptions& opt);

double storage_objective(const StorageState& y, StorageObjective obj);
double barrier_objective(const BarrierState& y, BarrierObjective obj);

/// Runs steps with trust-region adaptation until stagnation, the
/// iteration budget, or (for the margin phases) the margin turns positive.
void run_storage_phase(const SystemSpec& sys, const Triangulation& T,
                       const std::vector<SimplexBounds>& bounds, StorageState& y,
                       StorageObjective obj, const SolveOptions& opt,
                       std::vector<IterationRecord>& history);
void run_barrier_phase(const SystemSpec& sys, const Triangulation& T,
                       const std::vector<SimplexBounds>& bounds,
                       const std::vector<int>& shell, BarrierState& y,
                       BarrierObjective obj, const SolveOptions& opt,
                       std::vector<IterationRecord>& history);

std::string history_to_csv(const std::vector<IterationRecord>& history);

/// Continuous Lyapunov equation A^T P + P A = -Q (dense Kronecker solve).
Eigen::MatrixXd lyapunov_solve(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q);

}  // namespace cpagain

#endif
