#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "gml/error.hpp"

namespace gml::net {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update, no weight decay.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
                      const AdamConfig& cfg = {}) {
  require(grads.size() == params.size() && state.m.size() == params.size() && state.v.size() == params.size(),
          Errc::dimension_mismatch, "adam: parameter, gradient and state sizes differ");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

}  // namespace gml::net
