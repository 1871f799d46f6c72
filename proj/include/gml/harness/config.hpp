#pragma once

#include <filesystem>
#include <limits>
#include <string>

#include "gml/harness/synthetic.hpp"
#include "gml/io.hpp"
#include "gml/json_config.hpp"

namespace gml::harness {

inline json to_json(const SyntheticSpec& s) {
  json grid = json::array();
  for (const auto& d : s.grid) {
    json g = {{"name", d.name}, {"severity", d.severity}, {"mu_star", d.mu_star}};
    g["lowpass_hz"] = d.lowpass_hz > 0.0 ? json(d.lowpass_hz) : json(nullptr);
    g["noise_db"] = std::isinf(d.noise_db) ? json(nullptr) : json(d.noise_db);
    grid.push_back(g);
  }
  return {{"n_excerpts", s.n_excerpts}, {"a_star", s.a_star}, {"listeners", s.listeners},
          {"duration_s", s.duration_s}, {"seed", s.seed},     {"grid", grid}};
}

inline void from_json(const json& j, SyntheticSpec& s) {
  const std::string w = "synthetic";
  gml::detail::check_keys(j, {"n_excerpts", "a_star", "listeners", "duration_s", "seed", "grid"}, w);
  gml::detail::read_opt(j, "n_excerpts", s.n_excerpts, w);
  gml::detail::read_opt(j, "a_star", s.a_star, w);
  gml::detail::read_opt(j, "listeners", s.listeners, w);
  gml::detail::read_opt(j, "duration_s", s.duration_s, w);
  gml::detail::read_opt(j, "seed", s.seed, w);
  if (!j.contains("grid")) return;
  require(j["grid"].is_array(), Errc::invalid_config, "synthetic.grid must be an array");
  s.grid.clear();
  for (const auto& g : j["grid"]) {
    gml::detail::check_keys(g, {"name", "severity", "mu_star", "lowpass_hz", "noise_db"}, "synthetic.grid[]");
    Degradation d;
    gml::detail::read_opt(g, "name", d.name, "synthetic.grid[]");
    gml::detail::read_opt(g, "severity", d.severity, "synthetic.grid[]");
    gml::detail::read_opt(g, "mu_star", d.mu_star, "synthetic.grid[]");
    if (g.contains("lowpass_hz") && !g["lowpass_hz"].is_null())
      gml::detail::read_opt(g, "lowpass_hz", d.lowpass_hz, "synthetic.grid[]");
    if (g.contains("noise_db") && !g["noise_db"].is_null())
      gml::detail::read_opt(g, "noise_db", d.noise_db, "synthetic.grid[]");
    s.grid.push_back(d);
  }
}

/// Everything a --config file may set. Absent sections keep their defaults.
struct RunConfig {
  GammatoneConfig gammatone;
  net::BackboneConfig backbone = net::BackboneConfig::desk_default();
  net::TrainConfig train;
  SyntheticSpec synthetic = SyntheticSpec::desk_default();
};

inline json to_json(const RunConfig& c) {
  return {{"gammatone", gml::to_json(c.gammatone)},
          {"backbone", gml::to_json(c.backbone)},
          {"train", gml::to_json(c.train)},
          {"synthetic", to_json(c.synthetic)}};
}

inline RunConfig parse_run_config(std::string_view text, const std::string& name = "config") {
  RunConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, name + ": " + e.what());
  }
  try {
    gml::detail::check_keys(j, {"gammatone", "backbone", "train", "synthetic"}, name);
    if (j.contains("gammatone")) gml::from_json(j["gammatone"], c.gammatone);
    if (j.contains("backbone")) gml::from_json(j["backbone"], c.backbone);
    if (j.contains("train")) gml::from_json(j["train"], c.train);
    if (j.contains("synthetic")) from_json(j["synthetic"], c.synthetic);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, name + ": " + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  require(std::filesystem::exists(path), Errc::missing_file, "no such config " + path.string());
  return parse_run_config(read_file(path), path.string());
}

}  // namespace gml::harness
