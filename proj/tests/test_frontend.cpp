#include <cmath>
#include <complex>
#include <cstring>
#include <numbers>

#include "common.hpp"

using namespace gml;
using gml::test::expect_errc;
using gml::test::random_signal;
using gml::test::TempDir;

namespace {

// Independent RIFF writer used as the decoding oracle.
std::string make_wav(std::uint16_t channels, std::uint32_t rate, std::uint16_t bits, const std::vector<std::int32_t>& samples,
                     std::uint16_t format = 1) {
  const std::uint32_t bps = bits / 8;
  const std::uint32_t data = static_cast<std::uint32_t>(samples.size()) * bps;
  std::string out;
  auto u32 = [&](std::uint32_t v) { for (int i = 0; i < 4; ++i) out.push_back(char(v >> (8 * i))); };
  auto u16 = [&](std::uint16_t v) { out.push_back(char(v)); out.push_back(char(v >> 8)); };
  out += "RIFF";
  u32(36 + data);
  out += "WAVEfmt ";
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bps);
  u16(static_cast<std::uint16_t>(channels * bps));
  u16(bits);
  out += "data";
  u32(data);
  for (std::int32_t s : samples)
    for (std::uint32_t i = 0; i < bps; ++i) out.push_back(char((static_cast<std::uint32_t>(s) >> (8 * i)) & 0xff));
  return out;
}

}  // namespace

TEST(Wav, SilenceOneSecond) {
  const auto s = decode_wav(make_wav(2, 48000, 16, std::vector<std::int32_t>(96000, 0)));
  ASSERT_EQ(s.n_samples(), 48000u);
  for (std::size_t i = 0; i < s.n_samples(); ++i) {
    ASSERT_EQ(s.left[i], 0.0f);
    ASSERT_EQ(s.right[i], 0.0f);
  }
}

TEST(Wav, FullScaleSquareWave16) {
  std::vector<std::int32_t> pcm;
  for (int i = 0; i < 400; ++i) {
    const std::int32_t v = (i / 20) % 2 ? -32768 : 32767;
    pcm.push_back(v);
    pcm.push_back(v);
  }
  const auto s = decode_wav(make_wav(2, 48000, 16, pcm));
  for (std::size_t i = 0; i < s.n_samples(); ++i) {
    const float expect = (i / 20) % 2 ? -1.0f : static_cast<float>(32767.0 / 32768.0);
    ASSERT_EQ(s.left[i], expect);
    ASSERT_EQ(s.right[i], expect);
  }
}

TEST(Wav, TwentyFourBitScaling) {
  const auto s = decode_wav(make_wav(2, 48000, 24, {-8388608, 8388607, 1, -1}));
  EXPECT_EQ(s.left[0], -1.0f);
  EXPECT_EQ(s.right[0], static_cast<float>(8388607.0 / 8388608.0));
  EXPECT_EQ(s.left[1], static_cast<float>(1.0 / 8388608.0));
  EXPECT_EQ(s.right[1], static_cast<float>(-1.0 / 8388608.0));
}

TEST(Wav, RejectsUnsupported) {
  expect_errc([] { decode_wav(make_wav(1, 48000, 16, {0, 0})); }, Errc::unsupported_format);
  expect_errc([] { decode_wav(make_wav(2, 44100, 16, {0, 0})); }, Errc::unsupported_format);
  expect_errc([] { decode_wav(make_wav(2, 48000, 8, {0, 0})); }, Errc::unsupported_format);
  expect_errc([] { decode_wav(make_wav(2, 48000, 16, {0, 0}, 3)); }, Errc::unsupported_format);
  expect_errc([] { decode_wav("not a wav file"); }, Errc::unsupported_format);
}

TEST(Wav, MissingFileIsIoFailure) {
  expect_errc([] { load_audio("/nonexistent/dir/x.wav"); }, Errc::io_failure);
}

TEST(Wav, EncodeDecodeRoundTrip24) {
  TempDir dir("wav");
  const auto s = random_signal(3000, 5);
  write_file_atomic(dir / "a.wav", encode_wav(s, 24));
  const auto back = load_audio(dir / "a.wav");
  ASSERT_EQ(back.n_samples(), s.n_samples());
  for (std::size_t i = 0; i < s.n_samples(); ++i) {
    ASSERT_NEAR(back.left[i], s.left[i], 1.0 / 8388608.0);
    ASSERT_NEAR(back.right[i], s.right[i], 1.0 / 8388608.0);
  }
  // a second round trip is exact
  EXPECT_EQ(decode_wav(encode_wav(back, 24)), back);
}

TEST(Channels, IdenticalAndAntiPhase) {
  auto s = random_signal(500, 1);
  s.right = s.left;
  auto c = derive_channels(s);
  for (std::size_t i = 0; i < 500; ++i) {
    ASSERT_EQ(c.M[i], s.left[i]);
    ASSERT_EQ(c.S[i], 0.0f);
  }
  for (std::size_t i = 0; i < 500; ++i) s.right[i] = -s.left[i];
  c = derive_channels(s);
  for (std::size_t i = 0; i < 500; ++i) {
    ASSERT_EQ(c.M[i], 0.0f);
    ASSERT_EQ(c.S[i], s.left[i]);
  }
}

TEST(Channels, ReconstructionWithinUlp) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto s = random_signal(4000, seed, 1.0);
    const auto c = derive_channels(s);
    const float peak = s.peak();
    for (std::size_t i = 0; i < s.n_samples(); ++i) {
      const float l = c.M[i] + c.S[i], r = c.M[i] - c.S[i];
      ASSERT_LE(std::fabs(r - s.right[i]), std::ldexp(peak, -20));
      ASSERT_LE(std::fabs(l - s.left[i]), std::ldexp(peak, -20));
    }
  }
}

TEST(Pad, IdentityEvenAndOdd) {
  const auto s10 = random_signal(10, 4);
  EXPECT_EQ(pad_to_length(s10, 10), s10);
  // index bookkeeping oracle
  for (std::size_t n : {7u, 8u}) {
    const auto s = random_signal(n, 9);
    const auto p = pad_to_length(s, 12);
    ASSERT_EQ(p.n_samples(), 12u);
    const std::size_t lead = (12 - n) / 2;
    for (std::size_t i = 0; i < 12; ++i) {
      const bool inside = i >= lead && i < lead + n;
      ASSERT_EQ(p.left[i], inside ? s.left[i - lead] : 0.0f) << i;
      ASSERT_EQ(p.right[i], inside ? s.right[i - lead] : 0.0f) << i;
    }
  }
  const auto p7 = pad_to_length(random_signal(7, 9), 12);
  EXPECT_EQ(p7.left[1], 0.0f);
  EXPECT_NE(p7.left[2], 0.0f);
  EXPECT_EQ(p7.left[9], 0.0f);
  expect_errc([&] { pad_to_length(s10, 9); }, Errc::target_too_small);
}

TEST(Swap, InvolutionAndMidSide) {
  const auto s = random_signal(300, 12);
  EXPECT_EQ(swap_channels(swap_channels(s)), s);
  auto sym = s;
  sym.right = sym.left;
  EXPECT_EQ(swap_channels(sym), sym);
  const auto a = derive_channels(s), b = derive_channels(swap_channels(s));
  for (std::size_t i = 0; i < 300; ++i) {
    ASSERT_EQ(a.M[i], b.M[i]);
    ASSERT_EQ(a.S[i], -b.S[i]);
  }
}

TEST(SignalValidate, RejectsBadSignals) {
  StereoSignal s = random_signal(10, 1);
  s.right.pop_back();
  expect_errc([&] { s.validate(); }, Errc::length_mismatch);
  s = random_signal(10, 1);
  s.sample_rate = 44100;
  expect_errc([&] { s.validate(); }, Errc::unsupported_format);
}

TEST(Gammatone, ZeroInput) {
  const GammatoneConfig cfg;
  const std::vector<float> x(4096, 0.0f);
  const auto m = gammatone_spectrogram(x, cfg);
  ASSERT_EQ(m.rows, 32u);
  ASSERT_EQ(m.cols, cfg.n_frames(4096));
  for (float v : m.data) ASSERT_EQ(v, 0.0f);
}

TEST(Gammatone, TooShort) {
  const GammatoneConfig cfg;
  expect_errc([&] { gammatone_spectrogram(std::vector<float>(1023, 0.1f), cfg); }, Errc::input_too_short);
}

TEST(Gammatone, ConfigValidation) {
  GammatoneConfig c;
  c.n_bands = 3;
  expect_errc([&] { c.validate(); }, Errc::invalid_config);
  c = {};
  c.f_max = 30000;
  expect_errc([&] { c.validate(); }, Errc::invalid_config);
  c = {};
  c.frame_hop = 2048;
  expect_errc([&] { c.validate(); }, Errc::invalid_config);
}

TEST(Gammatone, ToneAtCenterPeaksInItsBand) {
  GammatoneConfig cfg;
  const GammatoneFilterbank fb(cfg);
  const auto& fc = fb.center_frequencies();
  for (int k : {2, 8, 15, 22, 28}) {
    std::vector<float> x(48000 / 4);
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = static_cast<float>(0.5 * std::sin(2.0 * std::numbers::pi * fc[k] * static_cast<double>(i) / kSampleRate));
    const auto m = fb.spectrogram(x);
    for (std::size_t t = 2; t + 2 < m.cols; ++t) {
      std::size_t best = 0;
      for (std::size_t b = 1; b < m.rows; ++b)
        if (m(b, t) > m(best, t)) best = b;
      ASSERT_EQ(best, static_cast<std::size_t>(k)) << "frame " << t;
    }
  }
}

TEST(Gammatone, UnitGainAtCenter) {
  // a real tone of amplitude A yields a complex envelope of A/2 at the center
  const GammatoneConfig cfg;
  const GammatoneFilterbank fb(cfg);
  const int k = 20;
  const double f = fb.center_frequencies()[k];
  std::vector<float> x(24000);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<float>(std::cos(2.0 * std::numbers::pi * f * static_cast<double>(i) / kSampleRate));
  const auto env = fb.envelope(x);
  EXPECT_NEAR(env(k, env.cols - 2), 0.5, 0.01);
}

TEST(Gammatone, EquivalentRectangularBandwidth) {
  // Numerical ERB of the analytic cascade response: integral of |H|^2 over
  // frequency divided by its peak.
  GammatoneConfig cfg;
  const GammatoneFilterbank fb(cfg);
  for (int k : {0, 10, 20, 31}) {
    const double fc = fb.center_frequencies()[k];
    const double b = gammatone_bandwidth(fc, cfg.filter_order);
    const double p = std::exp(-2.0 * std::numbers::pi * b / kSampleRate);
    double acc = 0.0;
    const int n = 400000;
    const double df = double(kSampleRate) / n;
    for (int i = 0; i < n; ++i) {
      const double w = 2.0 * std::numbers::pi * (i * df - kSampleRate / 2.0) / kSampleRate;
      const std::complex<double> h = (1.0 - p) / (1.0 - p * std::exp(std::complex<double>(0.0, -w)));
      acc += std::pow(std::norm(h), cfg.filter_order) * df;
    }
    EXPECT_NEAR(acc / erb_hz(fc), 1.0, 0.02) << "band " << k;
  }
}

TEST(Gammatone, LinearityAndSignInvariance) {
  const GammatoneConfig cfg;
  const GammatoneFilterbank fb(cfg);
  const auto s = random_signal(6000, 21);
  std::vector<float> x = s.left, x2(x.size()), neg(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x2[i] = 2.0f * x[i];
    neg[i] = -x[i];
  }
  const auto e1 = fb.envelope(x), e2 = fb.envelope(x2);
  for (std::size_t i = 0; i < e1.data.size(); ++i) ASSERT_DOUBLE_EQ(e2.data[i], 2.0 * e1.data[i]);
  EXPECT_EQ(fb.spectrogram(neg), fb.spectrogram(x));
  EXPECT_EQ(fb.spectrogram(x), gammatone_spectrogram(x, cfg));
}

TEST(BuildInput, PlaneOrderAndIdentities) {
  GammatoneConfig cfg;
  cfg.n_bands = 8;
  const auto ref = random_signal(4096, 30), cod = random_signal(4096, 31);
  const auto in = build_input(ref, cod, cfg, "e1");
  EXPECT_EQ(in.excerpt_id, "e1");
  EXPECT_EQ(in.n_bands, 8u);
  EXPECT_EQ(in.n_frames, cfg.n_frames(4096));
  const auto c = derive_channels(ref);
  const auto sl = gammatone_spectrogram(c.S, cfg);
  for (std::size_t b = 0; b < 8; ++b)
    for (std::size_t t = 0; t < in.n_frames; ++t) ASSERT_EQ(in.at(kRefS, b, t), sl(b, t));
  for (float v : in.data) ASSERT_TRUE(std::isfinite(v) && v >= 0.0f);

  const auto same = build_input(ref, ref, cfg, "e1");
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < same.plane_size(); ++i) ASSERT_EQ(same.plane(k)[i], same.plane(k + 4)[i]);

  auto mono = ref;
  mono.right = mono.left;
  const auto m = build_input(mono, mono, cfg, "m");
  for (float v : m.plane(kRefS)) ASSERT_EQ(v, 0.0f);
  for (float v : m.plane(kCodS)) ASSERT_EQ(v, 0.0f);

  expect_errc([&] { build_input(ref, random_signal(4000, 1), cfg, "x"); }, Errc::length_mismatch);
}

TEST(BuildInput, JointSwapPermutesPlanes) {
  GammatoneConfig cfg;
  cfg.n_bands = 8;
  const auto ref = random_signal(5000, 40), cod = random_signal(5000, 41);
  const auto a = build_input(ref, cod, cfg, "e");
  const auto b = build_input(swap_channels(ref), swap_channels(cod), cfg, "e");
  const std::size_t perm[8] = {1, 0, 2, 3, 5, 4, 6, 7};
  for (std::size_t k = 0; k < 8; ++k)
    for (std::size_t i = 0; i < a.plane_size(); ++i) ASSERT_EQ(b.plane(k)[i], a.plane(perm[k])[i]) << "plane " << k;
  EXPECT_EQ(swap_input_channels(a), b);
  EXPECT_EQ(swap_input_channels(swap_input_channels(a)), a);
}

TEST(BuildInput, Deterministic) {
  GammatoneConfig cfg;
  const auto ref = random_signal(3000, 50), cod = random_signal(3000, 51);
  EXPECT_EQ(build_input(ref, cod, cfg, "e"), build_input(ref, cod, cfg, "e"));
}

TEST(SpectrogramCache, RoundTripAndLayout) {
  TempDir dir("spec");
  const auto in = gml::test::random_input(6, 5, 3, "excerpt-7");
  write_spectrogram_cache(dir / "a.gmlspec", in);
  EXPECT_EQ(read_spectrogram_cache(dir / "a.gmlspec"), in);
  const std::string bytes = read_file(dir / "a.gmlspec");
  ASSERT_EQ(bytes.substr(0, 8), "GMLSPEC1");
  std::uint32_t hdr[4];
  std::memcpy(hdr, bytes.data() + 8, sizeof hdr);
  EXPECT_EQ(hdr[0], 6u);
  EXPECT_EQ(hdr[1], 5u);
  EXPECT_EQ(hdr[2], 8u);
  EXPECT_EQ(hdr[3], 9u);
  EXPECT_EQ(bytes.substr(24, 9), "excerpt-7");
  ASSERT_EQ(bytes.size(), 24 + 9 + in.data.size() * 4);
  float first;
  std::memcpy(&first, bytes.data() + 33, 4);
  EXPECT_EQ(first, in.at(0, 0, 0));
  expect_errc([&] { decode_spectrogram_cache(bytes.substr(0, bytes.size() - 1)); }, Errc::unsupported_format);
  expect_errc([&] { decode_spectrogram_cache("GMLSPEC2" + bytes.substr(8)); }, Errc::unsupported_format);
}
