#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gml/error.hpp"
#include "gml/random.hpp"
#include "gml/special.hpp"

namespace gml {

enum class Family { gaussian, logistic };

inline std::string_view family_name(Family f) { return f == Family::gaussian ? "gaussian" : "logistic"; }

inline Family parse_family(std::string_view s) {
  if (s == "gaussian") return Family::gaussian;
  if (s == "logistic") return Family::logistic;
  throw Error(Errc::invalid_argument, "unknown distribution family '" + std::string(s) + "'");
}

/// Bounds on the log of sigma (gaussian) or a (logistic), in MUSHRA points.
inline constexpr double kLogScaleMin = -4.0;
inline constexpr double kLogScaleMax = 4.7;

inline double clamp_log_scale(double log_scale) { return std::clamp(log_scale, kLogScaleMin, kLogScaleMax); }

/// Logistic standard deviation pi * a / sqrt(3).
inline double logistic_std(double a) {
  require(a > 0, Errc::nonpositive_scale, "logistic scale must be positive");
  return std::numbers::pi * a / std::numbers::sqrt3;
}

/// Predicted score density: location mu and log of the family's scale parameter.
struct ScoreDistribution {
  Family family = Family::logistic;
  double mu = 0.0;
  double log_scale = 0.0;

  double scale() const { return std::exp(clamp_log_scale(log_scale)); }
  double stddev() const { return family == Family::gaussian ? scale() : logistic_std(scale()); }

  bool operator==(const ScoreDistribution&) const = default;
};

// Losses. All clamp the log-scale argument into [kLogScaleMin, kLogScaleMax].

inline double nll_gaussian(double s, double mu, double log_sigma) {
  const double ls = clamp_log_scale(log_sigma);
  const double z = (s - mu) * std::exp(-ls);
  return 0.5 * std::log(2.0 * std::numbers::pi) + ls + 0.5 * z * z;
}

/// Negative log of the logistic density (1/(4a)) sech^2((s-mu)/(2a)), in the
/// overflow-free form log a + |z| + 2 log1p(exp(-|z|)), z = (s-mu)/a.
inline double nll_logistic(double s, double mu, double log_a) {
  const double la = clamp_log_scale(log_a);
  const double z = std::fabs((s - mu) * std::exp(-la));
  return la + z + 2.0 * std::log1p(std::exp(-z));
}

inline double nll(Family f, double s, double mu, double log_scale) {
  return f == Family::gaussian ? nll_gaussian(s, mu, log_scale) : nll_logistic(s, mu, log_scale);
}

/// Gradient of nll with respect to (mu, log_scale). Zero in log_scale outside the clamp range.
struct NllGrad {
  double d_mu = 0.0;
  double d_log_scale = 0.0;
};

inline NllGrad nll_grad(Family f, double s, double mu, double log_scale) {
  const bool clamped = log_scale < kLogScaleMin || log_scale > kLogScaleMax;
  const double ls = clamp_log_scale(log_scale);
  const double inv = std::exp(-ls);
  const double z = (s - mu) * inv;
  NllGrad g;
  if (f == Family::gaussian) {
    g.d_mu = -z * inv;
    g.d_log_scale = 1.0 - z * z;
  } else {
    const double th = std::tanh(0.5 * z);
    g.d_mu = -th * inv;
    g.d_log_scale = 1.0 - z * th;
  }
  if (clamped) g.d_log_scale = 0.0;
  return g;
}

inline double smooth_l1(double s, double mu) {
  const double d = std::fabs(s - mu);
  return d < 1.0 ? 0.5 * d * d : d - 0.5;
}

/// Draws n i.i.d. scores. Not clipped to the MUSHRA range.
inline std::vector<double> sample_scores(const ScoreDistribution& d, std::size_t n, Rng& rng) {
  require(n >= 1, Errc::invalid_argument, "need at least one sample");
  std::vector<double> out(n);
  const double scale = d.scale();
  for (auto& s : out) {
    if (d.family == Family::logistic) {
      const double u = rng.uniform_open();
      s = d.mu + scale * std::log(u / (1.0 - u));
    } else {
      s = d.mu + scale * rng.normal();
    }
  }
  return out;
}

/// Inverse CDF of Student's t. Bisection on the incomplete-beta tail to full
/// double resolution.
inline double t_quantile(double p, int dof) {
  require(dof >= 1, Errc::invalid_dof, "degrees of freedom must be >= 1, got " + std::to_string(dof));
  require(p > 0.0 && p < 1.0, Errc::invalid_argument, "probability must be in (0, 1)");
  if (p == 0.5) return 0.0;
  const double tail = p > 0.5 ? 1.0 - p : p;
  const double nu = dof;
  double lo = 0.0, hi = 1.0;
  while (special::student_t_upper_tail(hi, nu) > tail) {
    lo = hi;
    hi *= 2.0;
    require(std::isfinite(hi), Errc::invalid_argument, "quantile out of range");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (special::student_t_upper_tail(mid, nu) > tail ? lo : hi) = mid;
  }
  const double t = 0.5 * (lo + hi);
  return p > 0.5 ? t : -t;
}

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
  int dof = 1;

  double half_width() const { return 0.5 * (hi - lo); }
  double center() const { return 0.5 * (lo + hi); }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// t-based interval on a mean of n_listeners scores with standard deviation `std`.
inline ConfidenceInterval confidence_interval(double std, int n_listeners, double mu, double level = 0.95) {
  require(n_listeners >= 2, Errc::insufficient_listeners,
          "need at least 2 listeners, got " + std::to_string(n_listeners));
  require(std >= 0 && std::isfinite(std), Errc::invalid_argument, "standard deviation must be finite and >= 0");
  require(level > 0 && level < 1, Errc::invalid_argument, "level must be in (0, 1)");
  const int dof = n_listeners - 1;
  const double half = t_quantile(0.5 * (1.0 + level), dof) * std / std::sqrt(static_cast<double>(n_listeners));
  return {mu - half, mu + half, level, dof};
}

struct MushraStats {
  double mean = 0.0;
  double stddev = 0.0;
  ConfidenceInterval ci;
};

/// Sample mean and t-based 95% interval (n-1 denominator) of one panel.
inline MushraStats mushra_stats(std::span<const double> scores, double level = 0.95) {
  require(scores.size() >= 2, Errc::too_few_scores, "need at least 2 scores, got " + std::to_string(scores.size()));
  for (double s : scores)
    require(s >= 0.0 && s <= 100.0, Errc::out_of_range_score, "score " + std::to_string(s) + " outside [0, 100]");
  // Sorted summation makes the result independent of listener order.
  std::vector<double> v(scores.begin(), scores.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
  std::sort(sq.begin(), sq.end());
  const double sd = std::sqrt(std::accumulate(sq.begin(), sq.end(), 0.0) / (n - 1.0));
  return {mean, sd, confidence_interval(sd, static_cast<int>(v.size()), mean, level)};
}

}  // namespace gml
