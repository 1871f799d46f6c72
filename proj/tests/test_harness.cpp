#include <cmath>
#include <string>
#include <vector>

#include "common.hpp"

namespace gml::harness {
namespace {

using test::expect_errc;
using test::TempDir;

constexpr const char* kTwoRatings =
    "excerpt_id,condition_id,ref_path,cod_path,listener_id,score\n"
    "e1,c1,r.wav,c.wav,L1,80\n"
    "e1,c1,r.wav,c.wav,L2,72.5\n";

TEST(Manifest, MinimalExample) {
  const auto m = parse_manifest(kTwoRatings, "/data", false);
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.rating_count(), 2u);
  EXPECT_EQ(m.entries[0].key(), "e1/c1");
  EXPECT_EQ(m.entries[0].ratings[1].score, 72.5);
  EXPECT_EQ(m.resolve("r.wav"), std::filesystem::path("/data/r.wav"));
}

TEST(Manifest, ScoreOutOfRangeNamesTheRow) {
  const std::string text = std::string(kTwoRatings) + "e1,c1,r.wav,c.wav,L3,101\n";
  try {
    parse_manifest(text, ".", false, "m.csv");
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::out_of_range_score);
    EXPECT_NE(std::string(e.what()).find("m.csv:4"), std::string::npos) << e.what();
  }
}

TEST(Manifest, ValidationErrors) {
  expect_errc([] { parse_manifest(std::string(kTwoRatings) + "e1,c1,r.wav,c.wav,L1,50\n", ".", false); },
              Errc::duplicate_record);
  expect_errc([] { parse_manifest(std::string(kTwoRatings) + "e1,c1,r.wav,x.wav,L3,50\n", ".", false); },
              Errc::parse_error);
  expect_errc([] { parse_manifest(std::string(kTwoRatings) + "e1,c1,r.wav,c.wav,L3,abc\n", ".", false); },
              Errc::parse_error);
  expect_errc([] { parse_manifest(std::string(kTwoRatings) + "e1,c1,r.wav,c.wav,L3\n", ".", false); },
              Errc::parse_error);
  expect_errc([] { parse_manifest("a,b\n1,2\n", ".", false); }, Errc::parse_error);
  expect_errc([] { parse_manifest("", ".", false); }, Errc::parse_error);
  expect_errc([] { parse_manifest(kTwoRatings, "/nonexistent_dir_for_gml", true); }, Errc::missing_file);
}

TEST(Manifest, RoundTrip) {
  Manifest m;
  m.base_dir = "/x";
  m.entries.push_back({"ex, 1", "lp\"q\"", "a b.wav", "c.wav", {}});
  m.entries[0].ratings = {{"ex, 1", "lp\"q\"", "L1", 0.1}, {"ex, 1", "lp\"q\"", "L2", 100}};
  m.entries.push_back({"e2", "ref", "r2.wav", "r2.wav", {{"e2", "ref", "L1", 33.333333333333336}}});
  TempDir dir("manifest");
  write_manifest(dir / "m.csv", m);
  const auto back = load_manifest(dir / "m.csv", false);
  EXPECT_EQ(back.entries, m.entries);
  EXPECT_EQ(back.base_dir, dir.path());
}

TEST(Csv, QuotingBomAndLineEndings) {
  const auto rows = parse_csv("\xEF\xBB\xBF" "a,b\r\n\"x,\"\"y\"\"\",2\r\n\r\n3,4");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].fields, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(rows[1].fields, (std::vector<std::string>{"x,\"y\"", "2"}));
  EXPECT_EQ(rows[2].line, 4u);
  expect_errc([] { parse_csv("a,\"b\n"); }, Errc::parse_error);
  for (double v : {0.1, 1.0 / 3.0, 98.0, 1e-300, -2.5})
    EXPECT_EQ(parse_double(format_double(v), "t"), v);
}

// Midpoint-rule oracle with the tail masses from the closed-form CDF.
ClippedMoments clipped_oracle(double mu, double a) {
  auto cdf = [&](double x) { return 1.0 / (1.0 + std::exp(-(x - mu) / a)); };
  auto pdf = [&](double x) {
    const double e = std::exp(-std::fabs(x - mu) / a);
    return e / (a * (1 + e) * (1 + e));
  };
  const int n = 200000;
  const double h = 100.0 / n;
  const double p_hi = 1 - cdf(100);
  double m1 = 100 * p_hi, m2 = 100 * 100 * p_hi;
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) * h;
    m1 += x * pdf(x) * h;
    m2 += x * x * pdf(x) * h;
  }
  return {m1, std::sqrt(m2 - m1 * m1)};
}

TEST(Synthetic, ClippedMomentsMatchOracle) {
  for (auto [mu, a] : std::vector<std::pair<double, double>>{{98, 6}, {35, 6}, {50, 3}, {2, 10}, {110, 5}}) {
    const auto got = clipped_logistic_moments(mu, a), want = clipped_oracle(mu, a);
    EXPECT_NEAR(got.mean, want.mean, 1e-6) << mu;
    EXPECT_NEAR(got.stddev, want.stddev, 1e-6) << mu;
  }
  // far from the bounds: the unclipped moments
  const auto mid = clipped_logistic_moments(50, 2);
  EXPECT_NEAR(mid.mean, 50, 1e-9);
  EXPECT_NEAR(mid.stddev, logistic_std(2), 1e-6);
}

TEST(Synthetic, DefaultSpecIsMonotone) {
  const auto s = SyntheticSpec::desk_default();
  s.validate();
  ASSERT_EQ(s.grid.size(), 5u);
  EXPECT_EQ(s.n_excerpts, 200);
  EXPECT_EQ(s.listeners, 20);
  EXPECT_EQ(s.a_star, 6.0);
  double ref = 0, lp7 = 0;
  for (const auto& d : s.grid) {
    if (d.name == "hidden_ref") ref = d.mu_star;
    if (d.name == "lp7000") lp7 = d.mu_star;
  }
  EXPECT_LT(lp7, ref);
  auto bad = s;
  bad.grid[2].mu_star = 20;  // lp7000 below the more severe lp3500
  expect_errc([&] { bad.validate(); }, Errc::invalid_config);
  bad = s;
  bad.a_star = 0;
  expect_errc([&] { bad.validate(); }, Errc::nonpositive_scale);
}

TEST(Synthetic, PanelMeansWithinThreeStandardErrors) {
  auto s = SyntheticSpec::desk_default();
  s.listeners = 200;
  s.seed = 11;
  for (std::size_t c = 0; c < s.grid.size(); ++c) {
    const auto scores = synthetic_panel(s, 3, c);
    ASSERT_EQ(scores.size(), 200u);
    double mean = 0;
    for (double v : scores) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 100.0);
      mean += v;
    }
    mean /= 200;
    const auto truth = clipped_oracle(s.grid[c].mu_star, s.a_star);
    EXPECT_LE(std::fabs(mean - truth.mean), 3 * truth.stddev / std::sqrt(200.0)) << s.grid[c].name;
  }
}

SyntheticSpec tiny_spec() {
  auto s = SyntheticSpec::desk_default();
  s.n_excerpts = 2;
  s.listeners = 4;
  s.duration_s = 0.1;
  s.seed = 5;
  return s;
}

TEST(Synthetic, GeneratesConsistentDataset) {
  TempDir dir("synth");
  const auto s = tiny_spec();
  const auto ds = generate_synthetic(s, dir.path());
  EXPECT_EQ(ds.manifest.entries.size(), 10u);
  EXPECT_EQ(ds.truth.size(), 10u);
  const auto loaded = load_manifest(dir / "manifest.csv");
  EXPECT_EQ(loaded.entries, ds.manifest.entries);
  EXPECT_EQ(load_truth(dir / "truth.csv"), ds.truth);
  const auto panels = parse_subjective_csv(read_file(dir / "subjective.csv"));
  ASSERT_EQ(panels.size(), 10u);
  EXPECT_EQ(panels[0].scores.size(), 4u);

  for (const auto& e : ds.manifest.entries) {
    const auto ref = read_file(ds.manifest.resolve(e.ref_path));
    const auto cod = read_file(ds.manifest.resolve(e.cod_path));
    if (e.condition_id == "hidden_ref") {
      EXPECT_EQ(ref, cod) << e.key();
    } else {
      EXPECT_NE(ref, cod) << e.key();
      EXPECT_EQ(decode_wav(cod).n_samples(), s.n_samples());
    }
  }

  // same seed, same bytes
  TempDir again("synth2");
  generate_synthetic(s, again.path());
  for (const char* f : {"manifest.csv", "subjective.csv", "truth.csv", "audio/ex0001_severe.wav"})
    EXPECT_EQ(read_file(dir / f), read_file(again / f)) << f;
}

TEST(Synthetic, LowpassAttenuatesAboveCutoff) {
  const auto chain = butterworth_lowpass(3500.0);
  auto gain_at = [&](double hz) {
    std::vector<double> x(48000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * std::numbers::pi * hz * i / kSampleRate);
    const auto y = apply_filter(chain, x);
    double e = 0;
    for (std::size_t i = 24000; i < y.size(); ++i) e += y[i] * y[i];
    return std::sqrt(e / 12000.0);
  };
  EXPECT_NEAR(gain_at(500), 1.0, 0.01);
  EXPECT_NEAR(gain_at(3500), std::sqrt(0.5), 0.01);  // -3 dB at the cutoff
  EXPECT_LT(gain_at(7000), 0.01);
}

TEST(Featurize, CacheReuseAndInvalidation) {
  TempDir dir("feat");
  const auto ds = generate_synthetic(tiny_spec(), dir / "data");
  GammatoneConfig cfg;
  const auto first = featurize(ds.manifest, cfg, dir / "f", 1);
  EXPECT_EQ(first.computed, 10u);
  EXPECT_EQ(first.reused, 0u);
  const auto second = featurize(ds.manifest, cfg, dir / "f", 1);
  EXPECT_EQ(second.computed, 0u);
  EXPECT_EQ(second.reused, 10u);
  const auto idx = load_feature_index(dir / "f");
  ASSERT_EQ(idx.size(), 10u);
  EXPECT_EQ(load_feature_frontend(dir / "f"), cfg);

  // cached features equal a direct computation
  const auto& e = ds.manifest.entries[3];
  const auto ref = load_audio(ds.manifest.resolve(e.ref_path)), cod = load_audio(ds.manifest.resolve(e.cod_path));
  const auto items = load_rated_items(ds.manifest, dir / "f");
  ASSERT_EQ(items.size(), 10u);
  EXPECT_EQ(items[3].input, build_input(ref, cod, cfg, e.excerpt_id));
  EXPECT_EQ(items[3].scores.size(), 4u);

  auto changed = cfg;
  changed.compression_exponent = 0.5;
  const auto third = featurize(ds.manifest, changed, dir / "f", 1);
  EXPECT_EQ(third.computed, 10u);
  EXPECT_NE(load_feature_index(dir / "f")[0].key, idx[0].key);
}

TEST(Featurize, KeyCoversEveryConfigFieldAndFileContent) {
  const GammatoneConfig base;
  const std::string k0 = feature_cache_key(base, 4800, "ref", "cod");
  std::vector<GammatoneConfig> variants(7, base);
  variants[0].n_bands = 16;
  variants[1].f_min = 60;
  variants[2].f_max = 16000;
  variants[3].filter_order = 3;
  variants[4].frame_hop = 256;
  variants[5].frame_len = 2048;
  variants[6].compression_exponent = 0.25;
  for (const auto& v : variants) EXPECT_NE(feature_cache_key(v, 4800, "ref", "cod"), k0);
  EXPECT_NE(feature_cache_key(base, 4801, "ref", "cod"), k0);
  EXPECT_NE(feature_cache_key(base, 4800, "reF", "cod"), k0);
  EXPECT_NE(feature_cache_key(base, 4800, "ref", "cod "), k0);
  EXPECT_EQ(feature_cache_key(base, 4800, "ref", "cod"), k0);
}

TEST(Featurize, StaleCacheFileIsRecomputed) {
  TempDir dir("stale");
  const auto ds = generate_synthetic(tiny_spec(), dir / "data");
  featurize(ds.manifest, GammatoneConfig{}, dir / "f", 1);
  const auto idx = load_feature_index(dir / "f");
  write_file_atomic(dir / "f" / idx[0].cache_file, "garbage");
  const auto st = featurize(ds.manifest, GammatoneConfig{}, dir / "f", 1);
  EXPECT_EQ(st.computed, 1u);
  EXPECT_EQ(st.reused, 9u);
}

TEST(Artifacts, PredictionsAndLossRoundTrip) {
  std::vector<ConditionPrediction> preds = {{"ex0000/lp3500", {Family::logistic, 35.25, 1.75}},
                                            {"ex0000/hidden_ref", {Family::gaussian, 97.0, 0.5}}};
  const auto back = parse_predictions_csv(format_predictions_csv(preds));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].condition_id, preds[i].condition_id);
    EXPECT_EQ(back[i].distribution.mu, preds[i].distribution.mu);
    EXPECT_EQ(back[i].distribution.log_scale, preds[i].distribution.log_scale);
    EXPECT_EQ(back[i].distribution.family, preds[i].distribution.family);
  }
  expect_errc([] { parse_predictions_csv("condition_id,mu,log_scale,family\na/b,1,2,cauchy\n"); }, Errc::parse_error);
  const std::vector<net::LossRecord> curve = {{0, 0, "train", 4.5}, {0, 0, "validation", 4.75}};
  EXPECT_EQ(parse_loss_csv(format_loss_csv(curve)), curve);
}

TEST(Artifacts, SubjectiveParsing) {
  const auto panels = parse_subjective_csv("condition_id,listener_id,score\nb/x,L1,10\na/y,L1,20\nb/x,L2,30\n");
  ASSERT_EQ(panels.size(), 2u);
  EXPECT_EQ(panels[0].condition_id, "b/x");
  EXPECT_EQ(panels[0].scores, (std::vector<double>{10, 30}));
  expect_errc([] { parse_subjective_csv("condition_id,listener_id,score\na,L1,1\na,L1,2\n"); },
              Errc::duplicate_record);
  expect_errc([] { parse_subjective_csv("condition_id,listener_id,score\na,L1,-1\n"); }, Errc::out_of_range_score);
}

TEST(Artifacts, SimulateIsDeterministicAndClipped) {
  std::vector<ConditionPrediction> preds = {{"a/1", {Family::logistic, 99.0, std::log(6.0)}},
                                            {"a/2", {Family::gaussian, 40.0, std::log(10.0)}}};
  const auto one = simulate_panels_csv(preds, 9, 7), two = simulate_panels_csv(preds, 9, 7);
  EXPECT_EQ(one, two);
  EXPECT_NE(one, simulate_panels_csv(preds, 9, 8));
  const auto panels = parse_subjective_csv(one);
  ASSERT_EQ(panels.size(), 2u);
  EXPECT_EQ(panels[0].scores.size(), 9u);
  expect_errc([&] { simulate_panels_csv(preds, 0, 7); }, Errc::invalid_argument);
}

TEST(Config, RoundTripAndUnknownKeys) {
  RunConfig c;
  c.train.epochs_per_fold = 3;
  c.gammatone.n_bands = 24;
  c.synthetic.n_excerpts = 7;
  const auto back = parse_run_config(to_json(c).dump());
  EXPECT_EQ(to_json(back), to_json(c));
  expect_errc([] { parse_run_config(R"({"train": {"epochs": 3}})"); }, Errc::invalid_config);
}

TEST(TruthEval, PerfectPredictionsScorePerfectly) {
  const auto s = tiny_spec();
  std::vector<SyntheticTruth> truth;
  std::vector<ConditionPrediction> preds;
  for (int e = 0; e < s.n_excerpts; ++e)
    for (const auto& d : s.grid) {
      const auto m = clipped_logistic_moments(d.mu_star, s.a_star);
      truth.push_back({excerpt_name(e), d.name, d.mu_star, s.a_star, m.mean, m.stddev});
      preds.push_back({truth.back().key(), {Family::gaussian, m.mean, std::log(m.stddev)}});
    }
  const auto rep = evaluate_against_truth("t", preds, truth, 20);
  EXPECT_EQ(rep.conditions.size(), 10u);
  EXPECT_EQ(rep.outlier_ratio, 0.0);
  EXPECT_NEAR(rep.ci_rmse, 0.0, 1e-9);
  EXPECT_NEAR(*rep.mean_spearman, 1.0, 1e-12);
  preds[0].condition_id = "nope/x";
  expect_errc([&] { evaluate_against_truth("t", preds, truth, 20); }, Errc::id_mismatch);
}

}  // namespace
}  // namespace gml::harness
