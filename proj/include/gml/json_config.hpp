#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "gml/error.hpp"
#include "gml/gammatone.hpp"
#include "gml/net/config.hpp"
#include "gml/net/train_config.hpp"

namespace gml {

using json = nlohmann::json;

namespace detail {

/// Rejects keys outside `allowed` so that typos in config files surface.
inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  require(j.is_object(), Errc::invalid_config, where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    require(allowed.count(k) > 0, Errc::invalid_config, "unknown key '" + k + "' in " + where);
}

template <class T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline json to_json(const GammatoneConfig& c) {
  return {{"n_bands", c.n_bands},       {"f_min", c.f_min},         {"f_max", c.f_max},
          {"filter_order", c.filter_order}, {"frame_hop", c.frame_hop}, {"frame_len", c.frame_len},
          {"compression_exponent", c.compression_exponent}};
}

/// Overlays the keys present in `j` onto `c`.
inline void from_json(const json& j, GammatoneConfig& c) {
  const std::string w = "gammatone";
  detail::check_keys(j, {"n_bands", "f_min", "f_max", "filter_order", "frame_hop", "frame_len", "compression_exponent"},
                     w);
  detail::read_opt(j, "n_bands", c.n_bands, w);
  detail::read_opt(j, "f_min", c.f_min, w);
  detail::read_opt(j, "f_max", c.f_max, w);
  detail::read_opt(j, "filter_order", c.filter_order, w);
  detail::read_opt(j, "frame_hop", c.frame_hop, w);
  detail::read_opt(j, "frame_len", c.frame_len, w);
  detail::read_opt(j, "compression_exponent", c.compression_exponent, w);
}

inline json to_json(const net::BackboneConfig& c) {
  json blocks = json::array();
  for (const auto& b : c.conv_blocks)
    blocks.push_back({{"out_planes", b.out_planes},
                      {"kernel", {b.kernel_h, b.kernel_w}},
                      {"stride", b.stride},
                      {"pool", {b.pool_h, b.pool_w}}});
  return {{"conv_blocks", blocks},         {"head_hidden", c.head_hidden},   {"activation", c.activation},
          {"seed", c.seed},                {"input_bands", c.input_bands}, {"input_frames", c.input_frames}};
}

inline void from_json(const json& j, net::BackboneConfig& c) {
  const std::string w = "backbone";
  detail::check_keys(j, {"conv_blocks", "head_hidden", "activation", "seed", "input_bands", "input_frames"}, w);
  if (j.contains("conv_blocks")) {
    require(j["conv_blocks"].is_array(), Errc::invalid_config, "backbone.conv_blocks must be an array");
    c.conv_blocks.clear();
    for (const auto& b : j["conv_blocks"]) {
      detail::check_keys(b, {"out_planes", "kernel", "stride", "pool"}, "conv block");
      net::ConvBlock blk;
      detail::read_opt(b, "out_planes", blk.out_planes, w);
      detail::read_opt(b, "stride", blk.stride, w);
      std::array<int, 2> k{blk.kernel_h, blk.kernel_w}, p{blk.pool_h, blk.pool_w};
      detail::read_opt(b, "kernel", k, w);
      detail::read_opt(b, "pool", p, w);
      blk.kernel_h = k[0];
      blk.kernel_w = k[1];
      blk.pool_h = p[0];
      blk.pool_w = p[1];
      c.conv_blocks.push_back(blk);
    }
  }
  detail::read_opt(j, "head_hidden", c.head_hidden, w);
  detail::read_opt(j, "activation", c.activation, w);
  detail::read_opt(j, "seed", c.seed, w);
  detail::read_opt(j, "input_bands", c.input_bands, w);
  detail::read_opt(j, "input_frames", c.input_frames, w);
}

inline json to_json(const net::TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs_per_fold", c.epochs_per_fold},
          {"folds", c.folds},
          {"loss_family", std::string(family_name(c.loss_family))},
          {"augmentation", std::string(augmentation_name(c.augmentation))},
          {"alpha", c.alpha},
          {"mix_mean_scores", c.mix_mean_scores},
          {"channel_swap", c.channel_swap},
          {"seed", c.seed},
          {"shuffle_seed", c.shuffle_seed}};
}

inline void from_json(const json& j, net::TrainConfig& c) {
  const std::string w = "train";
  detail::check_keys(j,
                     {"learning_rate", "batch_size", "epochs_per_fold", "folds", "loss_family", "augmentation", "alpha",
                      "mix_mean_scores", "channel_swap", "seed", "shuffle_seed"},
                     w);
  detail::read_opt(j, "learning_rate", c.learning_rate, w);
  detail::read_opt(j, "batch_size", c.batch_size, w);
  detail::read_opt(j, "epochs_per_fold", c.epochs_per_fold, w);
  detail::read_opt(j, "folds", c.folds, w);
  if (j.contains("loss_family")) c.loss_family = parse_family(j["loss_family"].get<std::string>());
  if (j.contains("augmentation")) c.augmentation = parse_augmentation(j["augmentation"].get<std::string>());
  detail::read_opt(j, "alpha", c.alpha, w);
  detail::read_opt(j, "mix_mean_scores", c.mix_mean_scores, w);
  detail::read_opt(j, "channel_swap", c.channel_swap, w);
  detail::read_opt(j, "seed", c.seed, w);
  detail::read_opt(j, "shuffle_seed", c.shuffle_seed, w);
}

}  // namespace gml
