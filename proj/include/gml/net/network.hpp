#pragma once

#include <array>
#include <span>
#include <vector>

#include "gml/net/config.hpp"
#include "gml/net/tape.hpp"

namespace gml::net {

/// The backbone as a function of a flat parameter vector. Produces the two raw
/// head outputs (location, log-scale) before output scaling.
template <class T>
class Network {
 public:
  explicit Network(BackboneConfig cfg) : cfg_(std::move(cfg)), layout_(param_layout(cfg_)) {
    cfg_.validate();
    n_params_ = layout_.back().bias_offset + layout_.back().bias_size;
  }

  const BackboneConfig& config() const { return cfg_; }
  const std::vector<LayerSlice>& layout() const { return layout_; }
  std::size_t parameter_count() const { return n_params_; }
  std::size_t input_size() const { return cfg_.input_shape().size(); }

  std::array<T, 2> forward(std::span<const T> params, std::span<const T> input) const {
    check(params, input);
    Tape<T> tape(params, {});
    const auto out = build(tape, input);
    return {tape.value(out)[0], tape.value(out)[1]};
  }

  /// Forward pass, then backpropagates seed(raw outputs) into param_grad (accumulating).
  template <class SeedFn>
  std::array<T, 2> forward_backward(std::span<const T> params, std::span<const T> input, std::span<T> param_grad,
                                    SeedFn&& seed) const {
    check(params, input);
    require(param_grad.size() == n_params_, Errc::dimension_mismatch, "gradient buffer size mismatch");
    Tape<T> tape(params, param_grad);
    const auto out = build(tape, input);
    const std::array<T, 2> raw{tape.value(out)[0], tape.value(out)[1]};
    const std::array<T, 2> d = seed(raw);
    tape.backward(out, d);
    return raw;
  }

 private:
  void check(std::span<const T> params, std::span<const T> input) const {
    require(params.size() == n_params_, Errc::shape_mismatch,
            "expected " + std::to_string(n_params_) + " parameters, got " + std::to_string(params.size()));
    require(input.size() == input_size(), Errc::shape_mismatch,
            "expected input of " + std::to_string(input_size()) + " values, got " + std::to_string(input.size()));
  }

  typename Tape<T>::Id build(Tape<T>& tape, std::span<const T> input) const {
    auto x = tape.input(input, cfg_.input_shape());
    for (std::size_t i = 0; i < cfg_.conv_blocks.size(); ++i) {
      const auto& blk = cfg_.conv_blocks[i];
      x = tape.conv2d(x, layout_[i], blk);
      x = tape.relu(x);
      x = tape.maxpool(x, blk.pool_h, blk.pool_w);
    }
    x = tape.global_avg_pool(x);
    x = tape.dense(x, layout_[cfg_.conv_blocks.size()]);
    x = tape.relu(x);
    return tape.dense(x, layout_[cfg_.conv_blocks.size() + 1]);
  }

  BackboneConfig cfg_;
  std::vector<LayerSlice> layout_;
  std::size_t n_params_ = 0;
};

}  // namespace gml::net
