#ifndef CPAGAIN_VERIFY_HPP
#define CPAGAIN_VERIFY_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cpagain/certify.hpp"
#include "cpagain/expr.hpp"

namespace cpagain {

/// Piecewise-constant input schedule; value of segment k applies on
/// [breakpoints[k], breakpoints[k+1]).
struct InputSignal {
  std::vector<double> breakpoints;       // sorted, starts at 0
  std::vector<Eigen::VectorXd> values;   // one per segment
  double cap = 0;                        // sup-norm bound

  Eigen::VectorXd at(double t) const;
};

/// Uniform values in [-cap, cap]^m held for `dwell` seconds.
InputSignal random_signal(int m, double horizon, double dwell, double cap,
                          std::mt19937_64& rng);
/// Sampled sinusoid at the given frequency (rad/s), amplitude = cap.
InputSignal sinusoid_signal(int m, double horizon, double freq, double cap);

struct TrajectoryResult {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x, y;
  std::vector<double> u_l2, y_l2;  // running trapezoid L2 norms
  bool exited_box = false;         // left [box_lo, box_hi] if one was given
  double exit_time = 0;
};

/// Classical fixed-step 4th-order integration of xdot = f + G u.
TrajectoryResult simulate(const SystemSpec& sys, const Eigen::VectorXd& x0,
                          const InputSignal& u, double horizon, double dt,
                          const Eigen::VectorXd& box_lo = {},
                          const Eigen::VectorXd& box_hi = {});

struct HjSample {
  double max_value = 0;
  Eigen::VectorXd argmax;
};

/// Max of the true dissipation expression grad V . f + ||G' grad V||^2/(2 gamma)
/// + ||h||^2/2 over N volume-weighted uniform samples of the certified region.
HjSample sample_hj(const SystemSpec& sys, const StorageCertificate& cert, int N,
                   std::uint64_t seed);

struct VerifyReport {
  std::string name;
  int trials = 0;
  int violations = 0;
  double worst_margin = 0;     // max of (checked quantity - its bound)
  double empirical_ratio = 0;  // gain check: observed lower bound on the gain
  std::vector<std::string> details;
  bool passed() const { return violations == 0; }
};

/// Random starts in the invariant set, random capped inputs; flags any
/// excursion of W above the certified level.
VerifyReport check_invariance(const SystemSpec& sys,
                              const CombinedCertificate& cert, int trials,
                              double horizon, std::uint64_t seed,
                              double dt = 0.005);
/// Same sampling; checks the truncated gain inequality at every time-grid
/// point.
VerifyReport check_gain_inequality(const SystemSpec& sys,
                                   const CombinedCertificate& cert, int trials,
                                   double horizon, std::uint64_t seed,
                                   double dt = 0.005);

std::string verify_reports_json(const std::vector<VerifyReport>& reports,
                                double hj_max, bool checks_passed);

}  // namespace cpagain

#endif
