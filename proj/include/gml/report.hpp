#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>

#include <json.hpp>

#include "gml/eval.hpp"

namespace gml {

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::optional<double> json_opt(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline nlohmann::json ci_json(const std::optional<ConfidenceInterval>& ci) {
  if (!ci) return nullptr;
  return {{"lo", ci->lo}, {"hi", ci->hi}, {"level", ci->level}, {"dof", ci->dof}};
}

inline std::optional<ConfidenceInterval> json_ci(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return ConfidenceInterval{j.at("lo").get<double>(), j.at("hi").get<double>(), j.at("level").get<double>(),
                            j.at("dof").get<int>()};
}

inline std::string fmt_metric(const std::optional<double>& v, int prec = 3) {
  if (!v) return "undef";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", prec, *v);
  return buf;
}

}  // namespace detail

inline nlohmann::json report_to_json(const EvalReport& rep) {
  nlohmann::json sets = nlohmann::json::array();
  for (const auto& t : rep.test_sets) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows()) rows.push_back({{"metric", r.metric}, {"value", detail::opt_json(r.value)}});
    nlohmann::json conds = nlohmann::json::array();
    for (const auto& c : t.conditions)
      conds.push_back({{"excerpt_id", c.excerpt_id},
                       {"condition_id", c.condition_id},
                       {"n_listeners", c.n_listeners},
                       {"subjective_mean", c.subjective_mean},
                       {"subjective_ci", detail::ci_json(c.subjective_ci)},
                       {"predicted_mean", c.predicted_mean},
                       {"predicted_ci", detail::ci_json(c.predicted_ci)}});
    sets.push_back({{"name", t.name},
                    {"n_conditions", t.conditions.size()},
                    {"mean",
                     {{"R_p", detail::opt_json(t.mean_pearson)},
                      {"R_s", detail::opt_json(t.mean_spearman)},
                      {"OR", t.outlier_ratio}}},
                    {"ci",
                     {{"R_p", detail::opt_json(t.ci_pearson)},
                      {"R_s", detail::opt_json(t.ci_spearman)},
                      {"RMSE", t.ci_rmse}}},
                    {"rows", rows},
                    {"diagnostics", t.diagnostics},
                    {"conditions", conds}});
  }
  return {{"schema", "gml.eval_report.v1"}, {"test_sets", sets}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  try {
    require(j.at("schema").get<std::string>() == "gml.eval_report.v1", Errc::unsupported_format,
            "unknown report schema");
    EvalReport rep;
    for (const auto& s : j.at("test_sets")) {
      TestSetReport t;
      t.name = s.at("name").get<std::string>();
      t.mean_pearson = detail::json_opt(s.at("mean").at("R_p"));
      t.mean_spearman = detail::json_opt(s.at("mean").at("R_s"));
      t.outlier_ratio = s.at("mean").at("OR").get<double>();
      t.ci_pearson = detail::json_opt(s.at("ci").at("R_p"));
      t.ci_spearman = detail::json_opt(s.at("ci").at("R_s"));
      t.ci_rmse = s.at("ci").at("RMSE").get<double>();
      t.diagnostics = s.at("diagnostics").get<std::vector<std::string>>();
      for (const auto& c : s.at("conditions")) {
        ConditionResult r;
        r.excerpt_id = c.at("excerpt_id").get<std::string>();
        r.condition_id = c.at("condition_id").get<std::string>();
        r.n_listeners = c.at("n_listeners").get<int>();
        r.subjective_mean = c.at("subjective_mean").get<double>();
        r.subjective_ci = detail::json_ci(c.at("subjective_ci"));
        r.predicted_mean = c.at("predicted_mean").get<double>();
        r.predicted_ci = detail::json_ci(c.at("predicted_ci"));
        t.conditions.push_back(std::move(r));
      }
      rep.test_sets.push_back(std::move(t));
    }
    return rep;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("evaluation report: ") + e.what());
  }
}

/// Aligned plaintext summary, one line per test set.
inline std::string format_report_table(const EvalReport& rep) {
  std::size_t w = 8;
  for (const auto& t : rep.test_sets) w = std::max(w, t.name.size());
  std::string out;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s %6s | %7s %7s %7s | %7s %7s %7s\n", static_cast<int>(w), "test set", "n",
                "R_p", "R_s", "OR", "CI R_p", "CI R_s", "CI RMSE");
  out += line;
  out += std::string(w + 56, '-') + "\n";
  for (const auto& t : rep.test_sets) {
    std::snprintf(line, sizeof line, "%-*s %6zu | %7s %7s %7s | %7s %7s %7s\n", static_cast<int>(w), t.name.c_str(),
                  t.conditions.size(), detail::fmt_metric(t.mean_pearson).c_str(),
                  detail::fmt_metric(t.mean_spearman).c_str(), detail::fmt_metric(t.outlier_ratio).c_str(),
                  detail::fmt_metric(t.ci_pearson).c_str(), detail::fmt_metric(t.ci_spearman).c_str(),
                  detail::fmt_metric(t.ci_rmse).c_str());
    out += line;
    for (const auto& d : t.diagnostics) out += "  note: " + d + "\n";
  }
  return out;
}

/// Scatter of predicted against subjective means on 0-100 axes, with the
/// subjective 95% CI as horizontal bars and the predicted one as vertical bars.
/// Values are clipped to the MUSHRA range for display only.
inline std::string render_scatter_svg(const TestSetReport& t) {
  constexpr double size = 480, margin = 48, plot = size - 2 * margin;
  auto px = [&](double v) { return margin + plot * std::clamp(v, 0.0, 100.0) / 100.0; };
  auto py = [&](double v) { return size - margin - plot * std::clamp(v, 0.0, 100.0) / 100.0; };
  std::string s;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                size, size, size, size);
  s += buf;
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"black\"/>\n", margin,
                margin, plot, plot);
  s += buf;
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 4\"/>\n",
                px(0), py(0), px(100), py(100));
  s += buf;
  for (int tick = 0; tick <= 100; tick += 20) {
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\">%d</text>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">%d</text>\n",
                  px(tick), size - margin + 16, tick, margin - 6, py(tick) + 4, tick);
    s += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"13\" text-anchor=\"middle\">subjective mean</text>\n"
                "<text x=\"14\" y=\"%.1f\" font-size=\"13\" text-anchor=\"middle\" "
                "transform=\"rotate(-90 14 %.1f)\">predicted mean</text>\n",
                size / 2, size - 10, size / 2, size / 2);
  s += buf;
  for (const auto& c : t.conditions) {
    const double x = px(c.subjective_mean), y = py(c.predicted_mean);
    if (c.subjective_ci) {
      std::snprintf(buf, sizeof buf,
                    "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#1f77b4\" stroke-width=\"1\"/>\n",
                    px(c.subjective_ci->lo), y, px(c.subjective_ci->hi), y);
      s += buf;
    }
    if (c.predicted_ci) {
      std::snprintf(buf, sizeof buf,
                    "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#d62728\" stroke-width=\"1\"/>\n",
                    x, py(c.predicted_ci->lo), x, py(c.predicted_ci->hi));
      s += buf;
    }
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"black\"/>\n", x, y);
    s += buf;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace gml
