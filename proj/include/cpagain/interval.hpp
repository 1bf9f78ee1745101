#ifndef CPAGAIN_INTERVAL_HPP
#define CPAGAIN_INTERVAL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cpagain {

/// Closed interval [lo, hi] with outward-conservative arithmetic.
/// Results are widened by a few ulps so that the true range of the
/// corresponding real operation is always contained in the result.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  Interval() = default;
  Interval(double a, double b) : lo(a), hi(b) {
    if (!(lo <= hi)) throw std::invalid_argument("Interval: lo > hi");
  }
  static Interval point(double v) { return Interval(v, v); }
  static Interval whole() {
    const double inf = std::numeric_limits<double>::infinity();
    return Interval(-inf, inf);
  }

  bool finite() const { return std::isfinite(lo) && std::isfinite(hi); }
  bool contains(double v) const { return lo <= v && v <= hi; }
  double width() const { return hi - lo; }
  // Largest absolute value attained on the interval.
  double mag() const { return std::max(std::abs(lo), std::abs(hi)); }
};

namespace detail {
inline double next_up(double v) {
  if (std::isinf(v)) return v;
  return std::nextafter(std::nextafter(v, std::numeric_limits<double>::infinity()),
                        std::numeric_limits<double>::infinity());
}
inline double next_down(double v) {
  if (std::isinf(v)) return v;
  return std::nextafter(std::nextafter(v, -std::numeric_limits<double>::infinity()),
                        -std::numeric_limits<double>::infinity());
}
inline Interval widen(double lo, double hi) {
  return Interval(next_down(lo), next_up(hi));
}
}  // namespace detail

inline Interval operator-(const Interval& a) { return Interval(-a.hi, -a.lo); }

inline Interval operator+(const Interval& a, const Interval& b) {
  return detail::widen(a.lo + b.lo, a.hi + b.hi);
}

inline Interval operator-(const Interval& a, const Interval& b) {
  return detail::widen(a.lo - b.hi, a.hi - b.lo);
}

inline Interval operator*(const Interval& a, const Interval& b) {
  const double p[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  double lo = p[0], hi = p[0];
  for (int i = 1; i < 4; ++i) {
    // 0*inf shows up for degenerate operands; treat as 0.
    double v = std::isnan(p[i]) ? 0.0 : p[i];
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (std::isnan(lo)) lo = 0.0;
  if (std::isnan(hi)) hi = 0.0;
  return detail::widen(lo, hi);
}

inline Interval operator/(const Interval& a, const Interval& b) {
  if (b.lo <= 0.0 && b.hi >= 0.0) return Interval::whole();
  return a * Interval(1.0 / b.hi, 1.0 / b.lo);
}

inline Interval abs(const Interval& a) {
  if (a.lo >= 0.0) return a;
  if (a.hi <= 0.0) return Interval(-a.hi, -a.lo);
  return Interval(0.0, std::max(-a.lo, a.hi));
}

inline Interval exp(const Interval& a) {
  return detail::widen(std::exp(a.lo), std::exp(a.hi));
}

inline Interval tanh(const Interval& a) {
  return detail::widen(std::tanh(a.lo), std::tanh(a.hi));
}

inline Interval sqrt(const Interval& a) {
  if (a.lo < 0.0) return Interval::whole();
  return detail::widen(std::sqrt(a.lo), std::sqrt(a.hi));
}

inline Interval pow_int(const Interval& a, int k) {
  if (k == 0) return Interval::point(1.0);
  if (k == 1) return a;
  if (k % 2 == 0) {
    Interval m = abs(a);
    return detail::widen(std::pow(m.lo, k), std::pow(m.hi, k));
  }
  return detail::widen(std::pow(a.lo, k), std::pow(a.hi, k));
}

// Exact piecewise-monotonic range for sin: endpoints plus any critical
// points pi/2 + 2k*pi (max) and -pi/2 + 2k*pi (min) inside the interval.
inline Interval sin(const Interval& a) {
  if (!a.finite() || a.width() >= 2.0 * M_PI) return Interval(-1.0, 1.0);
  double lo = std::min(std::sin(a.lo), std::sin(a.hi));
  double hi = std::max(std::sin(a.lo), std::sin(a.hi));
  const double half_pi = M_PI / 2.0;
  double k_hi = std::ceil((a.lo - half_pi) / (2.0 * M_PI));
  if (half_pi + 2.0 * M_PI * k_hi <= a.hi) hi = 1.0;
  double k_lo = std::ceil((a.lo + half_pi) / (2.0 * M_PI));
  if (-half_pi + 2.0 * M_PI * k_lo <= a.hi) lo = -1.0;
  Interval r = detail::widen(lo, hi);
  return Interval(std::max(r.lo, -1.0), std::min(r.hi, 1.0));
}

inline Interval cos(const Interval& a) {
  if (!a.finite()) return Interval(-1.0, 1.0);
  return sin(a + Interval::point(M_PI / 2.0));
}

}  // namespace cpagain

#endif
