#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gml/error.hpp"
#include "gml/frontend.hpp"
#include "gml/random.hpp"

namespace gml {

/// Half-open rectangle of (band, frame) cells.
struct MaskRect {
  std::size_t band_lo = 0, band_hi = 0;
  std::size_t frame_lo = 0, frame_hi = 0;

  std::size_t area() const { return (band_hi - band_lo) * (frame_hi - frame_lo); }
  bool contains(std::size_t band, std::size_t frame) const {
    return band >= band_lo && band < band_hi && frame >= frame_lo && frame < frame_hi;
  }
  bool operator==(const MaskRect&) const = default;
};

struct MixSpec {
  double lambda_raw = 1.0;
  MaskRect mask;
  double lambda_eff = 1.0;  // weight of sample A
  std::size_t partner_index = 0;
};

/// One labelled training input: a spectrogram stack and one listener score.
struct LabeledInput {
  const ModelInput* input = nullptr;
  double score = 0.0;
};

struct MixedSample {
  ModelInput input;
  double label = 0.0;
  std::string id_a, id_b;
  MixSpec spec;
};

/// Draw from the symmetric Beta(alpha, alpha) via two gamma variates.
inline double sample_beta(double alpha, Rng& rng) {
  require(alpha > 0 && std::isfinite(alpha), Errc::nonpositive_alpha, "alpha must be positive");
  for (;;) {
    const double x = rng.gamma(alpha), y = rng.gamma(alpha);
    const double s = x + y;
    if (s > 0 && x > 0 && y > 0) return x / s;
  }
}

/// Rectangle covering about (1 - lambda_raw) of an n_bands x n_frames plane.
/// Side fractions are both sqrt(1 - lambda_raw), rounded to whole cells; the
/// rectangle is placed uniformly among positions where it fits entirely, so
/// the realized area differs from the target only by rounding.
inline MaskRect cutmix_mask(std::size_t n_bands, std::size_t n_frames, double lambda_raw, Rng& rng) {
  require(lambda_raw >= 0 && lambda_raw <= 1, Errc::invalid_argument, "lambda must be in [0, 1]");
  const double r = std::sqrt(1.0 - lambda_raw);
  const auto h = static_cast<std::size_t>(std::llround(r * static_cast<double>(n_bands)));
  const auto w = static_cast<std::size_t>(std::llround(r * static_cast<double>(n_frames)));
  MaskRect m;
  m.band_lo = h == 0 ? 0 : rng.below(n_bands - h + 1);
  m.frame_lo = w == 0 ? 0 : rng.below(n_frames - w + 1);
  m.band_hi = m.band_lo + h;
  m.frame_hi = m.frame_lo + w;
  if (h == 0 || w == 0) m = {};
  return m;
}

inline double mask_lambda_eff(const MaskRect& m, std::size_t n_bands, std::size_t n_frames) {
  return 1.0 - static_cast<double>(m.area()) / static_cast<double>(n_bands * n_frames);
}

/// Cells inside the mask from b, outside from a; the same mask on all planes.
inline ModelInput splice(const ModelInput& a, const ModelInput& b, const MaskRect& m) {
  require(a.same_shape(b), Errc::shape_mismatch, "cannot splice inputs of different shapes");
  require(m.band_hi <= a.n_bands && m.frame_hi <= a.n_frames, Errc::invalid_argument, "mask exceeds plane bounds");
  ModelInput out = a;
  for (std::size_t k = 0; k < kPlanes; ++k)
    for (std::size_t band = m.band_lo; band < m.band_hi; ++band)
      for (std::size_t f = m.frame_lo; f < m.frame_hi; ++f) out.at(k, band, f) = b.at(k, band, f);
  return out;
}

/// Cellwise lambda * a + (1 - lambda) * b.
inline ModelInput blend(const ModelInput& a, const ModelInput& b, double lambda) {
  require(a.same_shape(b), Errc::shape_mismatch, "cannot blend inputs of different shapes");
  ModelInput out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double v = lambda * a.data[i] + (1.0 - lambda) * b.data[i];
    // Keep the result inside [min, max] of the two cells after rounding to float.
    const float lo = std::min(a.data[i], b.data[i]), hi = std::max(a.data[i], b.data[i]);
    out.data[i] = std::clamp(static_cast<float>(v), lo, hi);
  }
  return out;
}

/// lambda * y_a + (1 - lambda) * y_b, exact at the endpoints and when y_a == y_b.
inline double mix_label(double lambda, double y_a, double y_b) {
  if (lambda >= 1.0) return y_a;
  if (lambda <= 0.0) return y_b;
  const double y = lambda * y_a + (1.0 - lambda) * y_b;
  return std::clamp(y, std::min(y_a, y_b), std::max(y_a, y_b));
}

namespace detail {
inline void check_batch(std::span<const LabeledInput> batch) {
  require(batch.size() >= 2, Errc::batch_too_small, "mixing needs a batch of at least 2");
  for (const auto& s : batch)
    require(s.input && s.input->same_shape(*batch[0].input), Errc::shape_mismatch, "batch inputs differ in shape");
}
}  // namespace detail

/// CutMix over a batch. Partners come from a uniform random permutation of the
/// batch (self-pairing allowed); labels mix with the realized area fraction.
inline std::vector<MixedSample> cutmix(std::span<const LabeledInput> batch, double alpha, Rng& rng) {
  detail::check_batch(batch);
  const auto partner = rng.permutation(batch.size());
  std::vector<MixedSample> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const LabeledInput& a = batch[i];
    const LabeledInput& b = batch[partner[i]];
    MixSpec spec;
    spec.lambda_raw = sample_beta(alpha, rng);
    spec.mask = cutmix_mask(a.input->n_bands, a.input->n_frames, spec.lambda_raw, rng);
    spec.lambda_eff = mask_lambda_eff(spec.mask, a.input->n_bands, a.input->n_frames);
    spec.partner_index = partner[i];
    out.push_back({splice(*a.input, *b.input, spec.mask), mix_label(spec.lambda_eff, a.score, b.score),
                   a.input->excerpt_id, b.input->excerpt_id, spec});
  }
  return out;
}

/// MixUp over a batch: same pairing rule as cutmix, inputs blended with lambda.
inline std::vector<MixedSample> mixup(std::span<const LabeledInput> batch, double alpha, Rng& rng) {
  detail::check_batch(batch);
  const auto partner = rng.permutation(batch.size());
  std::vector<MixedSample> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const LabeledInput& a = batch[i];
    const LabeledInput& b = batch[partner[i]];
    MixSpec spec;
    spec.lambda_raw = sample_beta(alpha, rng);
    spec.lambda_eff = spec.lambda_raw;
    spec.partner_index = partner[i];
    out.push_back({blend(*a.input, *b.input, spec.lambda_raw), mix_label(spec.lambda_raw, a.score, b.score),
                   a.input->excerpt_id, b.input->excerpt_id, spec});
  }
  return out;
}

enum class Augmentation { none, cutmix, mixup };

inline std::string_view augmentation_name(Augmentation a) {
  switch (a) {
    case Augmentation::none: return "none";
    case Augmentation::cutmix: return "cutmix";
    case Augmentation::mixup: return "mixup";
  }
  return "none";
}

inline Augmentation parse_augmentation(std::string_view s) {
  if (s == "none") return Augmentation::none;
  if (s == "cutmix") return Augmentation::cutmix;
  if (s == "mixup") return Augmentation::mixup;
  throw Error(Errc::invalid_argument, "unknown augmentation '" + std::string(s) + "'");
}

/// A training input with its whole listener panel.
struct RatedInput {
  const ModelInput* input = nullptr;
  std::span<const double> scores;
};

struct RatedMix {
  ModelInput input;
  std::vector<double> labels;
  std::string id_a, id_b;
  MixSpec spec;
};

/// Panel-level mixing used by training. Pairing, lambda and mask follow cutmix()
/// / mixup(); each of A's listener scores is mixed with a uniformly drawn score
/// from B's panel, so one mixed input carries as many labels as A has listeners.
/// With mean_labels, both panels are first reduced to their means.
inline std::vector<RatedMix> mix_rated(std::span<const RatedInput> batch, Augmentation kind, double alpha,
                                       bool mean_labels, Rng& rng) {
  require(kind != Augmentation::none, Errc::invalid_argument, "mix_rated needs an augmentation");
  require(batch.size() >= 2, Errc::batch_too_small, "mixing needs a batch of at least 2");
  for (const auto& s : batch) {
    require(s.input && s.input->same_shape(*batch[0].input), Errc::shape_mismatch, "batch inputs differ in shape");
    require(!s.scores.empty(), Errc::too_few_scores, "input without scores in batch");
  }
  auto mean_of = [](std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
  };
  const auto partner = rng.permutation(batch.size());
  std::vector<RatedMix> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const RatedInput& a = batch[i];
    const RatedInput& b = batch[partner[i]];
    MixSpec spec;
    spec.partner_index = partner[i];
    spec.lambda_raw = sample_beta(alpha, rng);
    RatedMix m;
    if (kind == Augmentation::cutmix) {
      spec.mask = cutmix_mask(a.input->n_bands, a.input->n_frames, spec.lambda_raw, rng);
      spec.lambda_eff = mask_lambda_eff(spec.mask, a.input->n_bands, a.input->n_frames);
      m.input = splice(*a.input, *b.input, spec.mask);
    } else {
      spec.lambda_eff = spec.lambda_raw;
      m.input = blend(*a.input, *b.input, spec.lambda_raw);
    }
    m.labels.resize(a.scores.size());
    if (mean_labels) {
      const double y = mix_label(spec.lambda_eff, mean_of(a.scores), mean_of(b.scores));
      std::fill(m.labels.begin(), m.labels.end(), y);
    } else {
      for (std::size_t j = 0; j < a.scores.size(); ++j)
        m.labels[j] = mix_label(spec.lambda_eff, a.scores[j], b.scores[rng.below(b.scores.size())]);
    }
    m.id_a = a.input->excerpt_id;
    m.id_b = b.input->excerpt_id;
    m.spec = spec;
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace gml
