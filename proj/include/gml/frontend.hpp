#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gml/error.hpp"
#include "gml/gammatone.hpp"
#include "gml/signal.hpp"
#include "gml/wav.hpp"

namespace gml {

inline constexpr std::size_t kPlanes = 8;

/// Plane indices of the model input stack.
enum Plane : std::size_t { kRefL = 0, kRefR, kRefM, kRefS, kCodL, kCodR, kCodM, kCodS };

/// Eight stacked spectrogram planes [ref L,R,M,S, coded L,R,M,S], each
/// n_bands x n_frames row-major, stored contiguously.
struct ModelInput {
  std::size_t n_bands = 0;
  std::size_t n_frames = 0;
  std::vector<float> data;
  std::string excerpt_id;

  ModelInput() = default;
  ModelInput(std::size_t bands, std::size_t frames, std::string id = {})
      : n_bands(bands), n_frames(frames), data(kPlanes * bands * frames, 0.0f), excerpt_id(std::move(id)) {}

  std::size_t plane_size() const { return n_bands * n_frames; }

  std::span<float> plane(std::size_t k) { return {data.data() + k * plane_size(), plane_size()}; }
  std::span<const float> plane(std::size_t k) const { return {data.data() + k * plane_size(), plane_size()}; }

  float& at(std::size_t k, std::size_t band, std::size_t frame) {
    return data[k * plane_size() + band * n_frames + frame];
  }
  float at(std::size_t k, std::size_t band, std::size_t frame) const {
    return data[k * plane_size() + band * n_frames + frame];
  }

  bool same_shape(const ModelInput& o) const { return n_bands == o.n_bands && n_frames == o.n_frames; }

  bool operator==(const ModelInput&) const = default;
};

/// Spectrograms of one signal's L, R, M, S channels.
inline std::array<Matrix<float>, 4> channel_spectrograms(const StereoSignal& s, const GammatoneFilterbank& fb) {
  FourChannels c = derive_channels(s);
  return {fb.spectrogram(c.L), fb.spectrogram(c.R), fb.spectrogram(c.M), fb.spectrogram(c.S)};
}

/// Assembles a model input from per-channel spectrograms of the reference and
/// the coded signal (each ordered L, R, M, S).
inline ModelInput assemble_input(const std::array<Matrix<float>, 4>& ref, const std::array<Matrix<float>, 4>& cod,
                                 std::string excerpt_id = {}) {
  const std::size_t bands = ref[0].rows, frames = ref[0].cols;
  ModelInput in(bands, frames, std::move(excerpt_id));
  for (std::size_t k = 0; k < 4; ++k) {
    for (const auto* m : {&ref[k], &cod[k]})
      require(m->rows == bands && m->cols == frames, Errc::shape_mismatch, "plane shapes differ");
    std::copy(ref[k].data.begin(), ref[k].data.end(), in.plane(k).begin());
    std::copy(cod[k].data.begin(), cod[k].data.end(), in.plane(k + 4).begin());
  }
  return in;
}

inline ModelInput build_input(const StereoSignal& ref, const StereoSignal& cod, const GammatoneConfig& cfg,
                              std::string excerpt_id = {}) {
  require(ref.n_samples() == cod.n_samples(), Errc::length_mismatch,
          "reference has " + std::to_string(ref.n_samples()) + " samples, coded has " +
              std::to_string(cod.n_samples()));
  GammatoneFilterbank fb(cfg);
  return assemble_input(channel_spectrograms(ref, fb), channel_spectrograms(cod, fb), std::move(excerpt_id));
}

/// The input that build_input would produce for the channel-swapped pair:
/// L and R planes exchange, M and S planes are unchanged (|spec(-S)| == |spec(S)|).
inline ModelInput swap_input_channels(const ModelInput& in) {
  ModelInput out = in;
  for (std::size_t base : {std::size_t{0}, std::size_t{4}}) {
    auto l = out.plane(base + 0), r = out.plane(base + 1);
    std::swap_ranges(l.begin(), l.end(), r.begin());
  }
  return out;
}

}  // namespace gml
