#pragma once

#include <cmath>
#include <limits>

#include "gml/error.hpp"

namespace gml::special {

namespace detail {

/// Continued fraction for I_x(a, b), modified Lentz; converges for x < (a+1)/(a+b+2).
inline double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 100000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  return h;
}

inline double stirling_correction(double z) {
  const double z2 = z * z;
  return 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z * z2 * z2);
}

/// log Gamma(a + b) - log Gamma(a) - log Gamma(b). For large a the ratio
/// Gamma(a+b)/Gamma(a) is taken from Stirling's series directly, since the
/// lgamma difference would cancel catastrophically.
inline double log_beta_inv(double a, double b) {
  if (a < 100.0 || b > a) return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  const double ratio = (a - 0.5) * std::log1p(b / a) + b * std::log(a + b) - b +
                       (stirling_correction(a + b) - stirling_correction(a));
  return ratio - std::lgamma(b);
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b) given both x and 1-x (so callers can
/// pass an accurately computed complement).
inline double incomplete_beta(double a, double b, double x, double one_minus_x) {
  if (x <= 0.0) return 0.0;
  if (one_minus_x <= 0.0) return 1.0;
  const double log_front = detail::log_beta_inv(a, b) + a * std::log(x) + b * std::log(one_minus_x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, one_minus_x) / b;
}

inline double incomplete_beta(double a, double b, double x) { return incomplete_beta(a, b, x, 1.0 - x); }

/// Upper tail P(T > t) of Student's t with `dof` degrees of freedom, t >= 0.
inline double student_t_upper_tail(double t, double dof) {
  const double t2 = t * t;
  const double x = dof / (dof + t2);
  const double one_minus_x = t2 / (dof + t2);
  return 0.5 * incomplete_beta(0.5 * dof, 0.5, x, one_minus_x);
}

inline double student_t_cdf(double t, double dof) {
  const double tail = student_t_upper_tail(std::fabs(t), dof);
  return t >= 0 ? 1.0 - tail : tail;
}

}  // namespace gml::special
