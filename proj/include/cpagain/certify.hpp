#ifndef CPAGAIN_CERTIFY_HPP
#define CPAGAIN_CERTIFY_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cpagain/bounds.hpp"
#include "cpagain/cpa.hpp"
#include "cpagain/expr.hpp"
#include "cpagain/mesh.hpp"

namespace cpagain {

inline constexpr double kCheckTol = 1e-9;

/// Vertex-wise inequality values for one triangulation: values[i][j] for
/// simplex i, vertex position j; exempt marks pairs inside the excluded
/// equilibrium neighborhood that carry no constraint (storage side only).
struct PairValues {
  std::vector<Eigen::VectorXd> values;
  std::vector<std::vector<bool>> exempt;
};

/// True when the simplex belongs to the excluded equilibrium neighborhood
/// of the storage inequality: it has the origin as a vertex, or it has a
/// vertex strictly inside the mesh's exclusion box.  The vertex
/// inequalities are provably infeasible on simplexes next to the
/// equilibrium (the output and interpolation-error terms have a positive
/// floor there while the vector field vanishes), so those simplexes are
/// outside the certified region.  The exclusion box is fixed at mesh
/// construction and survives refinement, which keeps refined certificates
/// comparable to their parents.
bool equilibrium_exempt(const Triangulation& T, const Simplex& s);

struct StorageCertificate {
  Triangulation mesh;
  Eigen::VectorXd V;                  // one value per vertex
  std::vector<Eigen::VectorXd> L;     // l_i per simplex
  double gamma = 0;
  double b1 = 0;
  std::vector<SimplexBounds> bounds;
  NormKind norm = NormKind::Two;
};

struct BarrierCertificate {
  Triangulation mesh;
  Eigen::VectorXd W;
  std::vector<Eigen::VectorXd> Lhat;
  double uhat = 0;
  double b2 = 0;
  double level_c = 0;
  Region A1;
  std::vector<SimplexBounds> bounds;
  NormKind norm = NormKind::Two;
};

struct IterationRecord {
  std::string phase;       // storage_b1, storage_gamma, barrier_b2, barrier_uhat
  int iter = 0;
  std::string objective_tag;  // -b1, gamma, -b2, -uhat
  double J = 0;
  double b = 0;            // b1 or b2
  double scalar = 0;       // gamma or uhat
  std::string solver_status;
  double wall_ms = 0;
};

struct CombinedCertificate {
  StorageCertificate storage;
  BarrierCertificate barrier;
  std::string system_hash;
  std::string tool_version;
  std::vector<IterationRecord> history;
};

/// H values of the storage inequality at every simplex-vertex pair; pairs
/// at the origin are exempt.
PairValues assemble_H(const SystemSpec& sys, const Triangulation& T,
                      const std::vector<SimplexBounds>& bounds,
                      const CpaFunction& V, const std::vector<Eigen::VectorXd>& L,
                      double gamma);

/// Dini-derivative bound values of the barrier inequality on the shell
/// simplexes (entries for simplexes inside A1 are left empty).
PairValues assemble_Dplus(const SystemSpec& sys, const Triangulation& T,
                          const std::vector<SimplexBounds>& bounds,
                          const CpaFunction& W,
                          const std::vector<Eigen::VectorXd>& Lhat, double uhat,
                          const std::vector<int>& shell);

struct CheckReport {
  bool passed = false;        // all structural inequalities hold
  bool margin_positive = false;  // b1 > 0 resp. b2 > 0
  std::vector<std::string> violations;
  double worst_slack = 0;     // max over pairs of value + b (<= tol when ok)
};

CheckReport check_storage(const SystemSpec& sys, const StorageCertificate& cert,
                          double tol = kCheckTol);
CheckReport check_barrier(const SystemSpec& sys, const BarrierCertificate& cert,
                          double tol = kCheckTol);

/// Largest connected union of simplexes containing the seed on which every
/// non-exempt pair value is negative; greedy lowest-id-first flood fill
/// over face adjacency. Empty (plus a diagnostic in *why) if the seed
/// itself is infeasible.
std::vector<int> max_feasible_subtriangulation(const PairValues& values,
                                               const Triangulation& T,
                                               const std::vector<int>& seed,
                                               std::string* why = nullptr);

std::string system_hash(const SystemSpec& sys);

std::string certificate_to_json(const CombinedCertificate& cert);
CombinedCertificate certificate_from_json(const std::string& text);

}  // namespace cpagain

#endif
