#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gml/error.hpp"
#include "gml/frontend.hpp"

namespace gml::net {

struct ConvBlock {
  int out_planes = 16;
  int kernel_h = 3;
  int kernel_w = 3;
  int stride = 1;
  int pool_h = 2;
  int pool_w = 2;

  bool operator==(const ConvBlock&) const = default;
};

struct FeatureShape {
  int planes = 0;
  int height = 0;  // bands
  int width = 0;   // frames
  std::size_t size() const { return static_cast<std::size_t>(planes) * height * width; }
  bool operator==(const FeatureShape&) const = default;
};

/// Convolutional backbone: each block is a same-padded conv, ReLU and max-pool;
/// then global average pooling, a ReLU hidden layer and a 2-unit output.
struct BackboneConfig {
  std::vector<ConvBlock> conv_blocks;
  int head_hidden = 64;
  std::string activation = "relu";
  std::uint64_t seed = 0;
  int input_bands = 32;
  int input_frames = 22;

  static BackboneConfig desk_default() {
    BackboneConfig c;
    c.conv_blocks = {{16, 3, 3, 1, 2, 2}, {32, 3, 3, 1, 2, 2}, {64, 3, 3, 1, 2, 2}, {64, 3, 3, 1, 2, 2}};
    return c;
  }

  FeatureShape input_shape() const { return {static_cast<int>(kPlanes), input_bands, input_frames}; }

  /// Shapes after each conv block (post-pool).
  std::vector<FeatureShape> block_shapes() const {
    std::vector<FeatureShape> out;
    FeatureShape s = input_shape();
    for (const auto& b : conv_blocks) {
      const int h = (s.height + b.stride - 1) / b.stride;
      const int w = (s.width + b.stride - 1) / b.stride;
      s = {b.out_planes, h / b.pool_h, w / b.pool_w};
      out.push_back(s);
    }
    return out;
  }

  void validate() const {
    require(!conv_blocks.empty(), Errc::invalid_config, "need at least one conv block");
    require(activation == "relu", Errc::invalid_config, "only relu activation is supported");
    require(head_hidden >= 1, Errc::invalid_config, "head_hidden must be >= 1");
    require(input_bands >= 1 && input_frames >= 1, Errc::invalid_config, "input shape must be positive");
    for (const auto& b : conv_blocks) {
      require(b.out_planes >= 1, Errc::invalid_config, "out_planes must be >= 1");
      require(b.kernel_h >= 1 && b.kernel_w >= 1 && b.kernel_h % 2 == 1 && b.kernel_w % 2 == 1, Errc::invalid_config,
              "kernel dimensions must be odd");
      require(b.stride >= 1 && b.pool_h >= 1 && b.pool_w >= 1, Errc::invalid_config, "stride and pool must be >= 1");
    }
    for (const auto& s : block_shapes())
      require(s.height >= 1 && s.width >= 1, Errc::invalid_config,
              "input " + std::to_string(input_bands) + "x" + std::to_string(input_frames) +
                  " is too small for the conv/pool stack");
  }

  bool operator==(const BackboneConfig&) const = default;
};

/// Location of one layer's weights and biases in the flat parameter vector.
struct LayerSlice {
  std::string name;
  std::size_t weight_offset = 0;
  std::size_t weight_size = 0;
  std::size_t bias_offset = 0;
  std::size_t bias_size = 0;
  std::size_t fan_in = 0;
};

inline std::vector<LayerSlice> param_layout(const BackboneConfig& cfg) {
  std::vector<LayerSlice> layers;
  std::size_t off = 0;
  auto add = [&](std::string name, std::size_t fan_in, std::size_t outs) {
    LayerSlice s{std::move(name), off, fan_in * outs, off + fan_in * outs, outs, fan_in};
    off += fan_in * outs + outs;
    layers.push_back(std::move(s));
  };
  int planes = static_cast<int>(kPlanes);
  for (std::size_t i = 0; i < cfg.conv_blocks.size(); ++i) {
    const auto& b = cfg.conv_blocks[i];
    add("conv" + std::to_string(i), static_cast<std::size_t>(planes) * b.kernel_h * b.kernel_w, b.out_planes);
    planes = b.out_planes;
  }
  add("hidden", static_cast<std::size_t>(planes), static_cast<std::size_t>(cfg.head_hidden));
  add("output", static_cast<std::size_t>(cfg.head_hidden), 2);
  return layers;
}

inline std::size_t parameter_count(const BackboneConfig& cfg) {
  const auto layers = param_layout(cfg);
  return layers.back().bias_offset + layers.back().bias_size;
}

}  // namespace gml::net
