#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gml/error.hpp"
#include "gml/matrix.hpp"
#include "gml/signal.hpp"

namespace gml {

struct GammatoneConfig {
  int n_bands = 32;
  double f_min = 50.0;
  double f_max = 20000.0;
  int filter_order = 4;
  int frame_hop = 512;
  int frame_len = 1024;
  double compression_exponent = 0.3;

  void validate(double sample_rate = kSampleRate) const {
    require(n_bands >= 4, Errc::invalid_config, "n_bands must be >= 4");
    require(f_min > 0 && f_min < f_max && f_max <= sample_rate / 2, Errc::invalid_config,
            "need 0 < f_min < f_max <= sample_rate/2");
    require(filter_order >= 1 && filter_order <= 16, Errc::invalid_config, "filter_order out of range");
    require(frame_len >= 1 && frame_hop >= 1 && frame_hop <= frame_len, Errc::invalid_config,
            "need 1 <= frame_hop <= frame_len");
    require(compression_exponent > 0 && compression_exponent <= 1, Errc::invalid_config,
            "compression_exponent must be in (0, 1]");
  }

  std::size_t n_frames(std::size_t n_samples) const {
    if (n_samples < static_cast<std::size_t>(frame_len)) return 0;
    return 1 + (n_samples - frame_len) / frame_hop;
  }

  bool operator==(const GammatoneConfig&) const = default;
};

/// Glasberg & Moore equivalent rectangular bandwidth in Hz.
inline double erb_hz(double f) { return 24.7 * (4.37e-3 * f + 1.0); }
inline double erb_rate(double f) { return 21.4 * std::log10(4.37e-3 * f + 1.0); }
inline double erb_rate_inverse(double e) { return (std::pow(10.0, e / 21.4) - 1.0) / 4.37e-3; }

/// Band centers equally spaced on the ERB-rate scale, ascending, endpoints included.
inline std::vector<double> erb_center_frequencies(const GammatoneConfig& cfg) {
  const double lo = erb_rate(cfg.f_min), hi = erb_rate(cfg.f_max);
  std::vector<double> fc(cfg.n_bands);
  for (int b = 0; b < cfg.n_bands; ++b)
    fc[b] = erb_rate_inverse(lo + (hi - lo) * b / (cfg.n_bands - 1));
  return fc;
}

/// Bandwidth parameter b of an order-n gammatone whose ERB equals erb_hz(fc):
/// ERB = b * pi * (2n-2)! * 2^-(2n-2) / ((n-1)!)^2.
inline double gammatone_bandwidth(double fc, int order) {
  double ratio = std::numbers::pi;
  // (2n-2)! / ((n-1)!)^2 / 2^(2n-2), built incrementally to stay in range.
  for (int k = 1; k <= order - 1; ++k) ratio *= (2.0 * k - 1.0) * (2.0 * k) / (4.0 * k * k);
  return erb_hz(fc) / ratio;
}

/// Complex-baseband gammatone filterbank: each band shifts its center frequency
/// to DC and runs `filter_order` identical one-pole lowpass stages with unit DC
/// gain, so the response peaks at exactly 1 at the center frequency. The band
/// envelope is the magnitude of the complex output.
class GammatoneFilterbank {
 public:
  explicit GammatoneFilterbank(GammatoneConfig cfg, double sample_rate = kSampleRate)
      : cfg_(cfg), fs_(sample_rate) {
    cfg_.validate(sample_rate);
    centers_ = erb_center_frequencies(cfg_);
    for (double fc : centers_) {
      Band b;
      b.pole = std::exp(-2.0 * std::numbers::pi * gammatone_bandwidth(fc, cfg_.filter_order) / fs_);
      b.step = std::polar(1.0, -2.0 * std::numbers::pi * fc / fs_);
      bands_.push_back(b);
    }
  }

  const GammatoneConfig& config() const { return cfg_; }
  const std::vector<double>& center_frequencies() const { return centers_; }

  /// Frame-averaged band envelopes before compression, n_bands x n_frames.
  Matrix<double> envelope(std::span<const float> x) const {
    const std::size_t n = x.size();
    require(n >= static_cast<std::size_t>(cfg_.frame_len), Errc::input_too_short,
            "need at least " + std::to_string(cfg_.frame_len) + " samples, got " + std::to_string(n));
    for (float v : x) require(std::isfinite(v), Errc::invalid_argument, "non-finite sample");
    const std::size_t frames = cfg_.n_frames(n);
    const std::size_t hop = cfg_.frame_hop, len = cfg_.frame_len;
    Matrix<double> out(bands_.size(), frames, 0.0);
    std::vector<double> mag(n);
    std::vector<std::complex<double>> state(cfg_.filter_order);

    for (std::size_t b = 0; b < bands_.size(); ++b) {
      const double p = bands_[b].pole, g = 1.0 - p;
      std::fill(state.begin(), state.end(), std::complex<double>{});
      std::complex<double> rot{1.0, 0.0};
      const std::complex<double> step = bands_[b].step;
      for (std::size_t i = 0; i < n; ++i) {
        std::complex<double> z = static_cast<double>(x[i]) * rot;
        for (auto& s : state) {
          s = g * z + p * s;
          z = s;
        }
        mag[i] = std::sqrt(z.real() * z.real() + z.imag() * z.imag());
        const double re = rot.real() * step.real() - rot.imag() * step.imag();
        const double im = rot.real() * step.imag() + rot.imag() * step.real();
        rot = {re, im};
      }
      for (std::size_t t = 0; t < frames; ++t) {
        double acc = 0.0;
        for (std::size_t i = t * hop; i < t * hop + len; ++i) acc += mag[i];
        out(b, t) = acc / static_cast<double>(len);
      }
    }
    return out;
  }

  /// Compressed spectrogram: envelope()^compression_exponent.
  Matrix<float> spectrogram(std::span<const float> x) const {
    Matrix<double> env = envelope(x);
    Matrix<float> out(env.rows, env.cols);
    for (std::size_t i = 0; i < env.data.size(); ++i)
      out.data[i] = static_cast<float>(std::pow(env.data[i], cfg_.compression_exponent));
    return out;
  }

 private:
  struct Band {
    double pole = 0.0;
    std::complex<double> step;
  };
  GammatoneConfig cfg_;
  double fs_;
  std::vector<double> centers_;
  std::vector<Band> bands_;
};

inline Matrix<float> gammatone_spectrogram(std::span<const float> x, const GammatoneConfig& cfg) {
  return GammatoneFilterbank(cfg).spectrogram(x);
}

}  // namespace gml
