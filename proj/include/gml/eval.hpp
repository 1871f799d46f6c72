#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <tuple>
#include <string>
#include <vector>

#include "gml/error.hpp"
#include "gml/prob.hpp"

namespace gml {

/// Product-moment correlation. Throws degenerate_input when either side is
/// constant: the coefficient is undefined there, not zero.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), Errc::length_mismatch,
          "pearson: lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  require(x.size() >= 2, Errc::invalid_argument, "pearson: need at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  require(sxx > 0 && syy > 0, Errc::degenerate_input, "correlation undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// 1-based ranks; tied values share the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i + 1;
    while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of positions i+1 .. j
    for (std::size_t k = i; k < j; ++k) r[idx[k]] = avg;
    i = j;
  }
  return r;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), Errc::length_mismatch,
          "spearman: lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  const auto rx = average_ranks(x), ry = average_ranks(y);
  return pearson(rx, ry);
}

struct ConditionResult {
  std::string excerpt_id;
  std::string condition_id;
  double subjective_mean = 0.0;
  std::optional<ConfidenceInterval> subjective_ci;
  double predicted_mean = 0.0;
  std::optional<ConfidenceInterval> predicted_ci;
  int n_listeners = 0;
};

/// Fraction of conditions whose predicted mean falls outside the subjective
/// interval (two-sided; the endpoints count as inside).
inline double outlier_ratio(std::span<const ConditionResult> results) {
  require(!results.empty(), Errc::empty_dataset, "outlier_ratio: no conditions");
  std::size_t outliers = 0;
  for (const auto& r : results) {
    require(r.subjective_ci.has_value(), Errc::missing_ci, "no subjective CI for " + r.condition_id);
    if (!r.subjective_ci->contains(r.predicted_mean)) ++outliers;
  }
  return static_cast<double>(outliers) / static_cast<double>(results.size());
}

/// RMSE between predicted and subjective CI half-widths.
inline double ci_rmse(std::span<const ConditionResult> results) {
  require(!results.empty(), Errc::empty_dataset, "ci_rmse: no conditions");
  double ss = 0.0;
  for (const auto& r : results) {
    require(r.subjective_ci && r.predicted_ci, Errc::missing_ci, "missing CI for " + r.condition_id);
    const double d = r.predicted_ci->half_width() - r.subjective_ci->half_width();
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(results.size()));
}

struct MetricRow {
  std::string metric;
  std::optional<double> value;  // empty when undefined
};

struct TestSetReport {
  std::string name;
  std::vector<ConditionResult> conditions;
  std::optional<double> mean_pearson, mean_spearman;
  double outlier_ratio = 0.0;
  std::optional<double> ci_pearson, ci_spearman;
  double ci_rmse = 0.0;
  std::vector<std::string> diagnostics;

  std::vector<MetricRow> rows() const {
    return {{"mean.R_p", mean_pearson}, {"mean.R_s", mean_spearman}, {"mean.OR", outlier_ratio},
            {"ci.R_p", ci_pearson},     {"ci.R_s", ci_spearman},     {"ci.RMSE", ci_rmse}};
  }
};

struct EvalReport {
  std::vector<TestSetReport> test_sets;
};

/// Both metric blocks over already-assembled condition results. Conditions are
/// processed in condition-id order so the report does not depend on input order.
inline TestSetReport summarize(std::string name, std::vector<ConditionResult> results) {
  require(!results.empty(), Errc::empty_dataset, "no conditions to evaluate");
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
    return std::tie(a.condition_id, a.excerpt_id) < std::tie(b.condition_id, b.excerpt_id);
  });
  TestSetReport rep;
  rep.name = std::move(name);
  std::vector<double> sm, pm, sw, pw;
  for (const auto& r : results) {
    require(r.subjective_ci && r.predicted_ci, Errc::missing_ci, "missing CI for " + r.condition_id);
    sm.push_back(r.subjective_mean);
    pm.push_back(r.predicted_mean);
    sw.push_back(r.subjective_ci->half_width());
    pw.push_back(r.predicted_ci->half_width());
  }
  auto guarded = [&](const char* label, auto fn, std::span<const double> a, std::span<const double> b) {
    std::optional<double> v;
    try {
      v = fn(a, b);
    } catch (const Error& e) {
      if (e.code() != Errc::degenerate_input && e.code() != Errc::invalid_argument) throw;
      rep.diagnostics.push_back(std::string(label) + " undefined: " + e.what());
    }
    return v;
  };
  rep.mean_pearson = guarded("mean R_p", pearson, sm, pm);
  rep.mean_spearman = guarded("mean R_s", spearman, sm, pm);
  rep.ci_pearson = guarded("CI R_p", pearson, sw, pw);
  rep.ci_spearman = guarded("CI R_s", spearman, sw, pw);
  rep.outlier_ratio = gml::outlier_ratio(results);
  rep.ci_rmse = gml::ci_rmse(results);
  rep.conditions = std::move(results);
  return rep;
}

struct ConditionPrediction {
  std::string condition_id;
  ScoreDistribution distribution;
};

struct SubjectivePanel {
  std::string condition_id;
  std::vector<double> scores;
};

/// Subjective statistics from each panel; predicted interval from the model's
/// standard deviation with that panel's listener count.
inline TestSetReport evaluate(std::string name, std::span<const ConditionPrediction> predictions,
                              std::span<const SubjectivePanel> subjective, double level = 0.95) {
  std::map<std::string, const ConditionPrediction*> pred;
  for (const auto& p : predictions) {
    require(pred.emplace(p.condition_id, &p).second, Errc::duplicate_record,
            "duplicate prediction for condition " + p.condition_id);
  }
  std::map<std::string, const SubjectivePanel*> subj;
  for (const auto& s : subjective)
    require(subj.emplace(s.condition_id, &s).second, Errc::duplicate_record,
            "duplicate panel for condition " + s.condition_id);
  for (const auto& [id, _] : subj)
    require(pred.count(id) > 0, Errc::id_mismatch, "no prediction for condition " + id);
  for (const auto& [id, _] : pred)
    require(subj.count(id) > 0, Errc::id_mismatch, "no subjective scores for condition " + id);

  std::vector<ConditionResult> results;
  for (const auto& [id, panel] : subj) {
    const auto stats = mushra_stats(panel->scores, level);
    const ScoreDistribution& d = pred.at(id)->distribution;
    const int n = static_cast<int>(panel->scores.size());
    ConditionResult r;
    r.condition_id = id;
    r.excerpt_id = id.substr(0, id.find('/'));
    r.subjective_mean = stats.mean;
    r.subjective_ci = stats.ci;
    r.predicted_mean = d.mu;
    r.predicted_ci = confidence_interval(d.stddev(), n, d.mu, level);
    r.n_listeners = n;
    results.push_back(std::move(r));
  }
  return summarize(std::move(name), std::move(results));
}

}  // namespace gml
