#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mwclust {

// Error hierarchy. Everything thrown by the library derives from Error so
// callers can catch one type at the process boundary.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ArgumentError : Error {
  using Error::Error;
};
// Requested population does not fit the supported unit-count range.
struct SizeError : Error {
  using Error::Error;
};
// Invalid cluster layout (e.g. odd staircase arm count).
struct GeometryError : Error {
  using Error::Error;
};
// A population ended up with no units.
struct DegeneratePopulationError : Error {
  using Error::Error;
};
// A realized draw has an empty treated or control arm; the estimator is
// undefined and the caller decides the policy.
struct DegenerateDrawError : Error {
  using Error::Error;
};
// Mechanism parameters outside [0,1] or yielding zero arm probability.
struct InvalidMechanismError : Error {
  using Error::Error;
};
// More than half of the replications were degenerate.
struct DesignFailureError : Error {
  using Error::Error;
};
struct UnknownDesignError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

// Compensated (Kahan) accumulator; used wherever a sum feeds a reported
// statistic so results do not depend on summation order tricks.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

inline double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

// Inverse standard normal CDF: rational initial guess refined by two Newton
// steps against erfc, accurate to ~1e-15 over (0,1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("normal_quantile: p must lie in (0,1)");

  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};

  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int i = 0; i < 2; ++i) {
    double e = normal_cdf(x) - p;
    x -= e / normal_pdf(x);
  }
  return x;
}

// Mean / variance / skewness / excess kurtosis of a sample.
struct SampleMoments {
  std::int64_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // with 1/(count-1)
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

inline SampleMoments sample_moments(const std::vector<double>& xs) {
  SampleMoments m;
  m.count = static_cast<std::int64_t>(xs.size());
  if (m.count == 0) return m;
  KahanSum s;
  for (double x : xs) s.add(x);
  m.mean = s.value() / static_cast<double>(m.count);
  if (m.count < 2) return m;
  KahanSum s2, s3, s4;
  for (double x : xs) {
    double d = x - m.mean;
    double d2 = d * d;
    s2.add(d2);
    s3.add(d2 * d);
    s4.add(d2 * d2);
  }
  double n = static_cast<double>(m.count);
  m.variance = s2.value() / (n - 1.0);
  double m2 = s2.value() / n;
  if (m2 > 0.0) {
    m.skewness = (s3.value() / n) / std::pow(m2, 1.5);
    m.excess_kurtosis = (s4.value() / n) / (m2 * m2) - 3.0;
  }
  return m;
}

}  // namespace mwclust
