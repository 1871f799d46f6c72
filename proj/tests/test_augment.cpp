#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "common.hpp"

namespace gml {
namespace {

using test::expect_errc;
using test::random_input;

TEST(Beta, UniformAtAlphaOne) {
  Rng rng(17);
  std::vector<double> v(100000);
  for (auto& x : v) x = sample_beta(1.0, rng);
  std::sort(v.begin(), v.end());
  double ks = 0;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    ks = std::max({ks, std::fabs((i + 1) / n - v[i]), std::fabs(v[i] - i / n)});
  EXPECT_LT(ks, 0.01);
  EXPECT_GT(v.front(), 0.0);
  EXPECT_LT(v.back(), 1.0);
}

TEST(Beta, MomentsAtDefaultAlpha) {
  const double alpha = 0.7;
  Rng rng(4);
  double s = 0, ss = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = sample_beta(alpha, rng);
    s += x;
    ss += x * x;
  }
  const double mean = s / n, var = ss / n - mean * mean;
  EXPECT_NEAR(mean, 0.5, 0.005);
  const double want = 1.0 / (4 * (2 * alpha + 1));
  EXPECT_NEAR(var / want, 1.0, 0.05);
}

TEST(Beta, DeterministicAndValidated) {
  Rng a(99), b(99);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sample_beta(0.7, a), sample_beta(0.7, b));
  Rng r(1);
  expect_errc([&] { sample_beta(0.0, r); }, Errc::nonpositive_alpha);
  expect_errc([&] { sample_beta(-1.0, r); }, Errc::nonpositive_alpha);
  expect_errc([&] { sample_beta(std::nan(""), r); }, Errc::nonpositive_alpha);
}

// Per-cell oracle written independently of splice().
ModelInput select_oracle(const ModelInput& a, const ModelInput& b, const MaskRect& m) {
  ModelInput out(a.n_bands, a.n_frames, a.excerpt_id);
  for (std::size_t k = 0; k < kPlanes; ++k)
    for (std::size_t i = 0; i < a.n_bands; ++i)
      for (std::size_t j = 0; j < a.n_frames; ++j) {
        const bool in = i >= m.band_lo && i < m.band_hi && j >= m.frame_lo && j < m.frame_hi;
        out.data[(k * a.n_bands + i) * a.n_frames + j] = (in ? b : a).data[(k * a.n_bands + i) * a.n_frames + j];
      }
  return out;
}

TEST(Splice, QuarterMaskExample) {
  const auto a = random_input(8, 6, 1, "A"), b = random_input(8, 6, 2, "B");
  const MaskRect m{2, 6, 1, 4};  // 4 x 3 = 12 of 48 cells
  const double lam = mask_lambda_eff(m, 8, 6);
  EXPECT_EQ(lam, 0.75);
  EXPECT_EQ(mix_label(lam, 80.0, 40.0), 70.0);
  const auto out = splice(a, b, m);
  EXPECT_EQ(out.data, select_oracle(a, b, m).data);
}

TEST(Splice, EmptyAndFullMasks) {
  const auto a = random_input(5, 7, 3), b = random_input(5, 7, 4);
  EXPECT_EQ(splice(a, b, MaskRect{}).data, a.data);
  EXPECT_EQ(mask_lambda_eff(MaskRect{}, 5, 7), 1.0);
  const MaskRect full{0, 5, 0, 7};
  EXPECT_EQ(splice(a, b, full).data, b.data);
  EXPECT_EQ(mask_lambda_eff(full, 5, 7), 0.0);
  EXPECT_EQ(mix_label(1.0, 80, 40), 80.0);
  EXPECT_EQ(mix_label(0.0, 80, 40), 40.0);
}

TEST(Splice, RejectsBadArguments) {
  const auto a = random_input(5, 7, 3), b = random_input(5, 8, 4);
  expect_errc([&] { splice(a, b, MaskRect{}); }, Errc::shape_mismatch);
  expect_errc([&] { splice(a, a, MaskRect{0, 6, 0, 1}); }, Errc::invalid_argument);
}

TEST(CutMix, RandomMasksMatchOracleAndQuantizationBound) {
  const std::size_t nb = 32, nf = 22;
  const double bound = static_cast<double>(nb + nf) / static_cast<double>(nb * nf);
  const auto a = random_input(nb, nf, 5, "A"), b = random_input(nb, nf, 6, "B");
  Rng rng(2024);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const double lam = sample_beta(0.7, rng);
    const MaskRect m = cutmix_mask(nb, nf, lam, rng);
    ASSERT_LE(m.band_lo, m.band_hi);
    ASSERT_LE(m.frame_lo, m.frame_hi);
    ASSERT_LE(m.band_hi, nb);
    ASSERT_LE(m.frame_hi, nf);
    const double eff = mask_lambda_eff(m, nb, nf);
    ASSERT_GE(eff, 0.0);
    ASSERT_LE(eff, 1.0);
    worst = std::max(worst, std::fabs(eff - lam));
    if (t % 50 == 0) {
      const auto out = splice(a, b, m);
      EXPECT_EQ(out.data, select_oracle(a, b, m).data);
      // no cell invented or lost
      std::multiset<float> got(out.data.begin(), out.data.end()), want;
      for (std::size_t k = 0; k < kPlanes; ++k)
        for (std::size_t i = 0; i < nb; ++i)
          for (std::size_t j = 0; j < nf; ++j) want.insert(m.contains(i, j) ? b.at(k, i, j) : a.at(k, i, j));
      EXPECT_EQ(got, want);
    }
  }
  EXPECT_LE(worst, bound);
}

std::vector<LabeledInput> labeled(const std::vector<ModelInput>& xs, const std::vector<double>& ys) {
  std::vector<LabeledInput> out;
  for (std::size_t i = 0; i < xs.size(); ++i) out.push_back({&xs[i], ys[i]});
  return out;
}

TEST(CutMix, BatchLabelsFollowRealizedArea) {
  std::vector<ModelInput> xs;
  for (int i = 0; i < 6; ++i) xs.push_back(random_input(12, 10, 10 + i, "ex" + std::to_string(i)));
  const std::vector<double> ys = {10, 25.5, 40, 55, 80, 99};
  const auto batch = labeled(xs, ys);
  Rng rng(8);
  const auto out = cutmix(batch, 0.7, rng);
  ASSERT_EQ(out.size(), batch.size());
  std::vector<std::size_t> partners;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& s = out[i];
    const std::size_t p = s.spec.partner_index;
    partners.push_back(p);
    EXPECT_EQ(s.id_a, xs[i].excerpt_id);
    EXPECT_EQ(s.id_b, xs[p].excerpt_id);
    EXPECT_EQ(s.spec.lambda_eff, mask_lambda_eff(s.spec.mask, 12, 10));
    const double want = s.spec.lambda_eff * ys[i] + (1 - s.spec.lambda_eff) * ys[p];
    EXPECT_NEAR(s.label, want, 1e-12);
    EXPECT_GE(s.label, std::min(ys[i], ys[p]));
    EXPECT_LE(s.label, std::max(ys[i], ys[p]));
    EXPECT_EQ(s.input.data, select_oracle(xs[i], xs[p], s.spec.mask).data);
  }
  std::sort(partners.begin(), partners.end());
  for (std::size_t i = 0; i < partners.size(); ++i) EXPECT_EQ(partners[i], i);
}

TEST(CutMix, RejectsSmallOrRaggedBatches) {
  std::vector<ModelInput> xs = {random_input(4, 4, 1)};
  Rng rng(1);
  expect_errc([&] { cutmix(labeled(xs, {50}), 0.7, rng); }, Errc::batch_too_small);
  xs.push_back(random_input(4, 5, 2));
  expect_errc([&] { cutmix(labeled(xs, {50, 60}), 0.7, rng); }, Errc::shape_mismatch);
  expect_errc([&] { mixup(labeled(xs, {50, 60}), 0.7, rng); }, Errc::shape_mismatch);
}

TEST(MixLabel, SelfMixUnchanged) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double y = 100 * rng.uniform_open(), lam = rng.uniform_open();
    EXPECT_EQ(mix_label(lam, y, y), y);
  }
}

TEST(MixUp, ConvexBoundAndIdentities) {
  const auto a = random_input(9, 7, 21), b = random_input(9, 7, 22);
  EXPECT_EQ(blend(a, b, 1.0).data, a.data);
  EXPECT_EQ(blend(a, a, 0.5).data, a.data);
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const double lam = sample_beta(0.7, rng);
    const auto out = blend(a, b, lam);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      ASSERT_GE(out.data[i], std::min(a.data[i], b.data[i]));
      ASSERT_LE(out.data[i], std::max(a.data[i], b.data[i]));
    }
  }
  std::vector<ModelInput> xs = {a, b, random_input(9, 7, 23)};
  const auto mixed = mixup(labeled(xs, {20, 50, 90}), 0.7, rng);
  const std::vector<double> ys = {20, 50, 90};
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    const auto& s = mixed[i];
    EXPECT_EQ(s.spec.lambda_eff, s.spec.lambda_raw);
    EXPECT_NEAR(s.label, s.spec.lambda_raw * ys[i] + (1 - s.spec.lambda_raw) * ys[s.spec.partner_index], 1e-12);
    EXPECT_EQ(s.input.data, blend(xs[i], xs[s.spec.partner_index], s.spec.lambda_raw).data);
  }
}

TEST(MixRated, PanelLabelsComeFromBothPanels) {
  std::vector<ModelInput> xs = {random_input(6, 6, 1, "a"), random_input(6, 6, 2, "b"), random_input(6, 6, 3, "c")};
  const std::vector<std::vector<double>> panels = {{10, 12, 14, 16}, {60, 61}, {90, 95, 99}};
  std::vector<RatedInput> batch;
  for (std::size_t i = 0; i < xs.size(); ++i) batch.push_back({&xs[i], panels[i]});
  Rng rng(77);
  const auto out = mix_rated(batch, Augmentation::cutmix, 0.7, false, rng);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& m = out[i];
    const auto& pa = panels[i];
    const auto& pb = panels[m.spec.partner_index];
    ASSERT_EQ(m.labels.size(), pa.size());
    for (std::size_t j = 0; j < pa.size(); ++j) {
      // some score of B must reproduce the label with A's j-th score
      bool found = false;
      for (double yb : pb) found = found || std::fabs(mix_label(m.spec.lambda_eff, pa[j], yb) - m.labels[j]) <= 1e-12;
      EXPECT_TRUE(found) << "item " << i << " listener " << j;
    }
  }
  Rng r2(77);
  const auto means = mix_rated(batch, Augmentation::mixup, 0.7, true, r2);
  for (std::size_t i = 0; i < means.size(); ++i) {
    auto mean = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    const double want = mix_label(means[i].spec.lambda_eff, mean(panels[i]), mean(panels[means[i].spec.partner_index]));
    for (double y : means[i].labels) EXPECT_EQ(y, want);
  }
}

TEST(Augmentation, Names) {
  for (auto a : {Augmentation::none, Augmentation::cutmix, Augmentation::mixup})
    EXPECT_EQ(parse_augmentation(augmentation_name(a)), a);
  expect_errc([] { parse_augmentation("specaugment"); }, Errc::invalid_argument);
}

TEST(Augmentation, MasksDifferAcrossEpochs) {
  std::vector<net::RatedItem> items;
  Rng rng(5);
  for (int i = 0; i < 12; ++i) {
    net::RatedItem it;
    it.excerpt_id = "ex" + std::to_string(i);
    it.condition_id = "c";
    it.input = random_input(8, 6, 100 + i, it.excerpt_id);
    it.scores = {30.0 + i, 40.0 + i};
    items.push_back(it);
  }
  net::TrainConfig cfg;
  cfg.folds = 2;
  cfg.epochs_per_fold = 2;
  cfg.batch_size = 4;
  cfg.augmentation = Augmentation::cutmix;
  net::BackboneConfig bb;
  bb.conv_blocks = {{4, 3, 3, 1, 2, 2}};
  bb.head_hidden = 8;
  net::TrainHooks hooks;
  hooks.record_provenance = true;
  const auto before = items[0].input;
  const auto r = net::train(items, cfg, bb, GammatoneConfig{}, hooks);
  EXPECT_EQ(items[0].input, before);  // on the fly: stored inputs untouched
  std::vector<MaskRect> e1, e2;
  for (const auto& p : r.provenance) {
    if (p.fold != 0) continue;
    (p.epoch == 1 ? e1 : e2).push_back(p.spec.mask);
  }
  ASSERT_FALSE(e1.empty());
  ASSERT_EQ(e1.size(), e2.size());
  EXPECT_NE(e1, e2);
}

}  // namespace
}  // namespace gml
