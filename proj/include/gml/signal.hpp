#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gml/error.hpp"

namespace gml {

inline constexpr std::uint32_t kSampleRate = 48000;

/// Two-channel 48 kHz excerpt, samples nominally in [-1, 1].
struct StereoSignal {
  std::vector<float> left;
  std::vector<float> right;
  std::uint32_t sample_rate = kSampleRate;

  std::size_t n_samples() const { return left.size(); }

  float peak() const {
    float p = 0.0f;
    for (float v : left) p = std::max(p, std::fabs(v));
    for (float v : right) p = std::max(p, std::fabs(v));
    return p;
  }

  void validate() const {
    require(left.size() == right.size(), Errc::length_mismatch, "left/right lengths differ");
    require(sample_rate == kSampleRate, Errc::unsupported_format, "sample rate must be 48000");
    for (float v : left) require(std::isfinite(v), Errc::invalid_argument, "non-finite sample");
    for (float v : right) require(std::isfinite(v), Errc::invalid_argument, "non-finite sample");
  }

  bool operator==(const StereoSignal&) const = default;
};

struct FourChannels {
  std::vector<float> L, R, M, S;
};

/// L and R pass through; M = (L+R)/2 and S = (L-R)/2 are formed in double and
/// rounded once, so each is within half an ulp of the exact value.
inline FourChannels derive_channels(const StereoSignal& s) {
  s.validate();
  FourChannels c{s.left, s.right, {}, {}};
  const std::size_t n = s.n_samples();
  c.M.resize(n);
  c.S.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double l = s.left[i], r = s.right[i];
    c.M[i] = static_cast<float>((l + r) * 0.5);
    c.S[i] = static_cast<float>((l - r) * 0.5);
  }
  return c;
}

/// Centers the excerpt in `target` samples of zeros; an odd remainder goes to the end.
inline StereoSignal pad_to_length(const StereoSignal& s, std::size_t target) {
  const std::size_t n = s.n_samples();
  require(target >= n, Errc::target_too_small,
          "target " + std::to_string(target) + " < length " + std::to_string(n));
  const std::size_t lead = (target - n) / 2;
  StereoSignal out;
  out.sample_rate = s.sample_rate;
  out.left.assign(target, 0.0f);
  out.right.assign(target, 0.0f);
  std::copy(s.left.begin(), s.left.end(), out.left.begin() + static_cast<std::ptrdiff_t>(lead));
  std::copy(s.right.begin(), s.right.end(), out.right.begin() + static_cast<std::ptrdiff_t>(lead));
  return out;
}

inline StereoSignal swap_channels(const StereoSignal& s) {
  StereoSignal out = s;
  std::swap(out.left, out.right);
  return out;
}

}  // namespace gml
