#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "gml/error.hpp"
#include "gml/frontend.hpp"
#include "gml/net/config.hpp"
#include "gml/net/network.hpp"
#include "gml/prob.hpp"
#include "gml/random.hpp"

namespace gml::net {

struct ModelParams {
  std::vector<double> values;
  std::uint64_t init_seed = 0;

  std::size_t count() const { return values.size(); }
  std::span<double> weights(const LayerSlice& l) { return {values.data() + l.weight_offset, l.weight_size}; }
  std::span<const double> weights(const LayerSlice& l) const { return {values.data() + l.weight_offset, l.weight_size}; }
  std::span<double> biases(const LayerSlice& l) { return {values.data() + l.bias_offset, l.bias_size}; }
  std::span<const double> biases(const LayerSlice& l) const { return {values.data() + l.bias_offset, l.bias_size}; }

  bool operator==(const ModelParams&) const = default;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases of every layer.
inline ModelParams init_params(const BackboneConfig& cfg) {
  cfg.validate();
  const auto layout = param_layout(cfg);
  ModelParams p;
  p.init_seed = cfg.seed;
  p.values.resize(parameter_count(cfg));
  Rng root(cfg.seed, 0x1417);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    Rng rng = root.split(i);
    const double bound = 1.0 / std::sqrt(static_cast<double>(layout[i].fan_in));
    for (double& w : p.weights(layout[i])) w = bound * (2.0 * rng.uniform_open() - 1.0);
    for (double& b : p.biases(layout[i])) b = bound * (2.0 * rng.uniform_open() - 1.0);
  }
  return p;
}

inline constexpr double kStdFloor = 1e-6;

/// Per-plane input z-scoring plus the affine map from raw head outputs to
/// score units (mu = score_mean + score_std * r0, log_scale = base_log_scale + r1).
struct NormalizationStats {
  std::array<double, kPlanes> mean{};
  std::array<double, kPlanes> std{1, 1, 1, 1, 1, 1, 1, 1};
  double score_mean = 0.0;
  double score_std = 1.0;

  template <class T>
  void apply(const ModelInput& in, std::span<T> out) const {
    require(out.size() == in.data.size(), Errc::shape_mismatch, "normalization buffer size mismatch");
    const std::size_t ps = in.plane_size();
    for (std::size_t k = 0; k < kPlanes; ++k) {
      const double m = mean[k], inv = 1.0 / std[k];
      for (std::size_t i = 0; i < ps; ++i)
        out[k * ps + i] = static_cast<T>((static_cast<double>(in.data[k * ps + i]) - m) * inv);
    }
  }

  template <class T = double>
  std::vector<T> apply(const ModelInput& in) const {
    std::vector<T> out(in.data.size());
    apply<T>(in, std::span<T>(out));
    return out;
  }

  bool operator==(const NormalizationStats&) const = default;
};

/// Per-plane mean and population standard deviation over every cell of every
/// input, accumulated in the given order. Leaves the score mapping untouched.
inline NormalizationStats normalize_fit(std::span<const ModelInput* const> inputs) {
  require(!inputs.empty(), Errc::empty_dataset, "cannot fit normalization on an empty dataset");
  NormalizationStats st;
  for (std::size_t k = 0; k < kPlanes; ++k) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const ModelInput* in : inputs) {
      require(in->same_shape(*inputs[0]), Errc::shape_mismatch, "inputs have different shapes");
      for (float v : in->plane(k)) sum += v;
      n += in->plane_size();
    }
    const double m = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const ModelInput* in : inputs)
      for (float v : in->plane(k)) ss += (v - m) * (v - m);
    st.mean[k] = m;
    st.std[k] = std::max(std::sqrt(ss / static_cast<double>(n)), kStdFloor);
  }
  return st;
}

/// Mean and standard deviation of individual training scores, for the output map.
inline void fit_score_scaling(NormalizationStats& st, std::span<const double> scores) {
  require(!scores.empty(), Errc::empty_dataset, "no training scores");
  double sum = 0.0;
  for (double s : scores) sum += s;
  const double m = sum / static_cast<double>(scores.size());
  double ss = 0.0;
  for (double s : scores) ss += (s - m) * (s - m);
  st.score_mean = m;
  st.score_std = std::max(std::sqrt(ss / static_cast<double>(scores.size())), 1.0);
}

/// Log-scale at r1 = 0: the family's scale whose standard deviation is score_std.
inline double base_log_scale(Family f, const NormalizationStats& st) {
  const double s = std::log(st.score_std);
  return f == Family::logistic ? s + 0.5 * std::log(3.0) - std::log(std::numbers::pi) : s;
}

/// Raw head outputs to a score distribution (log-scale clamped).
inline ScoreDistribution to_distribution(Family f, const NormalizationStats& st, double r0, double r1) {
  return {f, st.score_mean + st.score_std * r0, clamp_log_scale(base_log_scale(f, st) + r1)};
}

struct Model {
  BackboneConfig config;
  ModelParams params;
  NormalizationStats norm;
  Family family = Family::logistic;
};

/// Forward pass on an already-normalized input.
inline ScoreDistribution forward(const Model& m, std::span<const double> normalized_input) {
  Network<double> net(m.config);
  const auto raw = net.forward(m.params.values, normalized_input);
  return to_distribution(m.family, m.norm, raw[0], raw[1]);
}

inline std::vector<ScoreDistribution> forward_batch(const Model& m, std::span<const std::vector<double>> inputs) {
  std::vector<ScoreDistribution> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back(forward(m, in));
  return out;
}

/// Summed NLL of `scores` under the model's prediction for one normalized input,
/// with its gradient (scaled by `weight`) accumulated into param_grad.
template <class T>
double loss_and_gradient(const Network<T>& net, std::span<const T> params, std::span<const T> normalized_input,
                         Family family, const NormalizationStats& st, std::span<const double> scores, double weight,
                         std::span<T> param_grad) {
  double loss = 0.0;
  net.forward_backward(params, normalized_input, param_grad, [&](const std::array<T, 2>& raw) {
    const double mu = st.score_mean + st.score_std * static_cast<double>(raw[0]);
    const double ls = base_log_scale(family, st) + static_cast<double>(raw[1]);
    double d_mu = 0.0, d_ls = 0.0;
    for (double s : scores) {
      loss += nll(family, s, mu, ls);
      const NllGrad g = nll_grad(family, s, mu, ls);
      d_mu += g.d_mu;
      d_ls += g.d_log_scale;
    }
    return std::array<T, 2>{static_cast<T>(weight * st.score_std * d_mu), static_cast<T>(weight * d_ls)};
  });
  return loss;
}

/// Summed NLL without gradients.
template <class T>
double loss_only(const Network<T>& net, std::span<const T> params, std::span<const T> normalized_input, Family family,
                 const NormalizationStats& st, std::span<const double> scores) {
  const auto raw = net.forward(params, normalized_input);
  const ScoreDistribution d = to_distribution(family, st, static_cast<double>(raw[0]), static_cast<double>(raw[1]));
  const double ls = base_log_scale(family, st) + static_cast<double>(raw[1]);
  double loss = 0.0;
  for (double s : scores) loss += nll(family, s, d.mu, ls);
  return loss;
}

/// Gradient of the summed NLL with respect to every parameter (double precision).
inline std::vector<double> backward(const Model& m, std::span<const double> normalized_input,
                                    std::span<const double> scores) {
  Network<double> net(m.config);
  std::vector<double> grad(net.parameter_count(), 0.0);
  loss_and_gradient<double>(net, m.params.values, normalized_input, m.family, m.norm, scores, 1.0, grad);
  return grad;
}

}  // namespace gml::net
