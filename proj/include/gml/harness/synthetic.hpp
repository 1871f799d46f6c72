#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <numbers>
#include <string>
#include <vector>

#include "gml/error.hpp"
#include "gml/eval.hpp"
#include "gml/harness/csv.hpp"
#include "gml/harness/manifest.hpp"
#include "gml/io.hpp"
#include "gml/prob.hpp"
#include "gml/random.hpp"
#include "gml/signal.hpp"
#include "gml/wav.hpp"

namespace gml::harness {

/// One rung of the degradation ladder. lowpass_hz <= 0 disables the filter,
/// noise_db = -inf disables the additive noise.
struct Degradation {
  std::string name;
  double lowpass_hz = 0.0;
  double noise_db = -std::numeric_limits<double>::infinity();
  int severity = 0;  // 0 = untouched; larger is worse
  double mu_star = 100.0;

  bool identity() const { return lowpass_hz <= 0.0 && std::isinf(noise_db); }
};

struct SyntheticSpec {
  int n_excerpts = 200;
  std::vector<Degradation> grid;
  double a_star = 6.0;
  int listeners = 20;
  double duration_s = 0.25;
  std::uint64_t seed = 0;

  static SyntheticSpec desk_default() {
    SyntheticSpec s;
    const double off = -std::numeric_limits<double>::infinity();
    s.grid = {{"hidden_ref", 0.0, off, 0, 98.0},
              {"lp3500", 3500.0, off, 4, 35.0},
              {"lp7000", 7000.0, off, 2, 55.0},
              {"mild", 14000.0, -35.0, 1, 70.0},
              {"severe", 10000.0, -20.0, 3, 45.0}};
    return s;
  }

  std::size_t n_samples() const { return static_cast<std::size_t>(std::llround(duration_s * kSampleRate)); }

  void validate() const {
    require(n_excerpts >= 1, Errc::invalid_config, "n_excerpts must be >= 1");
    require(listeners >= 2, Errc::insufficient_listeners, "need at least 2 listeners per condition");
    require(a_star > 0.0 && std::isfinite(a_star), Errc::nonpositive_scale, "a_star must be positive");
    require(duration_s > 0.0 && n_samples() >= 2048, Errc::invalid_config, "duration too short");
    require(!grid.empty(), Errc::invalid_config, "empty degradation grid");
    std::vector<const Degradation*> sorted;
    for (const auto& d : grid) {
      require(!d.name.empty() && d.name.find_first_of("/,\"") == std::string::npos, Errc::invalid_config,
              "bad degradation name '" + d.name + "'");
      require(d.mu_star >= 0.0 && d.mu_star <= 100.0, Errc::out_of_range_score, d.name + ": mu_star outside [0, 100]");
      require(d.lowpass_hz <= 0.0 || d.lowpass_hz < 0.5 * kSampleRate, Errc::invalid_config,
              d.name + ": cutoff above Nyquist");
      require(d.identity() == (d.severity == 0), Errc::invalid_config,
              d.name + ": severity 0 is reserved for the untouched condition");
      sorted.push_back(&d);
    }
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->severity < b->severity; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      require(sorted[i]->severity > sorted[i - 1]->severity, Errc::invalid_config, "severities must be distinct");
      require(sorted[i]->mu_star < sorted[i - 1]->mu_star, Errc::invalid_config,
              "mu_star must decrease with severity (" + sorted[i]->name + ")");
    }
  }
};

/// Mean and standard deviation of Logistic(mu, a) clipped to [0, 100]: the
/// mass outside the range sits on the endpoints.
struct ClippedMoments {
  double mean = 0.0;
  double stddev = 0.0;
};

inline ClippedMoments clipped_logistic_moments(double mu, double a) {
  require(a > 0.0, Errc::nonpositive_scale, "scale must be positive");
  auto cdf = [&](double s) { return 1.0 / (1.0 + std::exp(-(s - mu) / a)); };
  auto pdf = [&](double s) {
    const double z = std::fabs(s - mu) / a;
    const double e = std::exp(-z);
    return e / (a * (1.0 + e) * (1.0 + e));
  };
  // composite Simpson on (0, 100)
  const int n = 20000;
  const double h = 100.0 / n;
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double s = i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double p = pdf(s);
    m1 += w * s * p;
    m2 += w * s * s * p;
  }
  m1 *= h / 3.0;
  m2 *= h / 3.0;
  const double top = 1.0 - cdf(100.0);
  m1 += 100.0 * top;
  m2 += 10000.0 * top;
  return {m1, std::sqrt(std::max(0.0, m2 - m1 * m1))};
}

/// Second-order section, transposed direct form II.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
  double z1 = 0, z2 = 0;
  double step(double x) {
    const double y = b0 * x + z1;
    z1 = b1 * x - a1 * y + z2;
    z2 = b2 * x - a2 * y;
    return y;
  }
};

/// 8th-order Butterworth low-pass as four cascaded sections.
inline std::vector<Biquad> butterworth_lowpass(double cutoff_hz, double fs = kSampleRate, int order = 8) {
  require(order % 2 == 0 && order > 0, Errc::invalid_argument, "order must be even");
  require(cutoff_hz > 0.0 && cutoff_hz < 0.5 * fs, Errc::invalid_argument, "cutoff outside (0, fs/2)");
  std::vector<Biquad> out;
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / fs;
  const double cw = std::cos(w0), sw = std::sin(w0);
  for (int k = 0; k < order / 2; ++k) {
    const double q = 1.0 / (2.0 * std::cos(std::numbers::pi * (2 * k + 1) / (2.0 * order)));
    const double alpha = sw / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad b;
    b.b0 = (1.0 - cw) / 2.0 / a0;
    b.b1 = (1.0 - cw) / a0;
    b.b2 = b.b0;
    b.a1 = -2.0 * cw / a0;
    b.a2 = (1.0 - alpha) / a0;
    out.push_back(b);
  }
  return out;
}

inline std::vector<double> apply_filter(std::vector<Biquad> chain, const std::vector<double>& x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = x[i];
    for (auto& b : chain) v = b.step(v);
    y[i] = v;
  }
  return y;
}

namespace detail {

struct StereoD {
  std::vector<double> l, r;
};

/// Tone mixture plus correlated broadband noise under a slow amplitude envelope.
inline StereoD synth_reference(std::size_t n, Rng& rng) {
  StereoD s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  const double fs = kSampleRate;
  const int tones = 3 + static_cast<int>(rng.below(6));
  for (int k = 0; k < tones; ++k) {
    const double f = 80.0 * std::pow(16000.0 / 80.0, rng.uniform_open());
    const double amp = 0.2 + 0.8 * rng.uniform_open();
    const double pan = rng.uniform_open() * std::numbers::pi / 2.0;
    const double phase = 2.0 * std::numbers::pi * rng.uniform_open();
    const double gl = amp * std::cos(pan), gr = amp * std::sin(pan);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs + phase);
      s.l[i] += gl * v;
      s.r[i] += gr * v;
    }
  }
  const double noise = 0.05 + 0.25 * rng.uniform_open();
  const double rho = rng.uniform_open();
  const double rho_c = std::sqrt(1.0 - rho * rho);
  const double f_am = 2.0 + 6.0 * rng.uniform_open();
  const double am_phase = 2.0 * std::numbers::pi * rng.uniform_open();
  for (std::size_t i = 0; i < n; ++i) {
    const double n1 = rng.normal(), n2 = rng.normal();
    const double env = 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * f_am * static_cast<double>(i) / fs + am_phase);
    s.l[i] = env * (s.l[i] + noise * n1);
    s.r[i] = env * (s.r[i] + noise * (rho * n1 + rho_c * n2));
  }
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) peak = std::max({peak, std::fabs(s.l[i]), std::fabs(s.r[i])});
  const double g = 0.5 / std::max(peak, 1e-12);
  for (std::size_t i = 0; i < n; ++i) {
    s.l[i] *= g;
    s.r[i] *= g;
  }
  return s;
}

inline double rms(const StereoD& s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.l.size(); ++i) acc += s.l[i] * s.l[i] + s.r[i] * s.r[i];
  return std::sqrt(acc / static_cast<double>(2 * s.l.size()));
}

inline StereoD degrade(const StereoD& ref, const Degradation& d, Rng& rng) {
  StereoD out = ref;
  if (d.lowpass_hz > 0.0) {
    const auto chain = butterworth_lowpass(d.lowpass_hz);
    out.l = apply_filter(chain, ref.l);
    out.r = apply_filter(chain, ref.r);
  }
  if (!std::isinf(d.noise_db)) {
    const double g = rms(ref) * std::pow(10.0, d.noise_db / 20.0);
    for (std::size_t i = 0; i < out.l.size(); ++i) {
      out.l[i] += g * rng.normal();
      out.r[i] += g * rng.normal();
    }
  }
  return out;
}

inline StereoSignal to_signal(const StereoD& s) {
  StereoSignal out;
  out.left.resize(s.l.size());
  out.right.resize(s.r.size());
  for (std::size_t i = 0; i < s.l.size(); ++i) {
    out.left[i] = static_cast<float>(std::clamp(s.l[i], -1.0, 1.0));
    out.right[i] = static_cast<float>(std::clamp(s.r[i], -1.0, 1.0));
  }
  return out;
}

}  // namespace detail

/// Truth for one (excerpt, condition) cell.
struct SyntheticTruth {
  std::string excerpt_id;
  std::string condition_id;
  double mu_star = 0.0;
  double a_star = 0.0;
  double clipped_mean = 0.0;
  double clipped_std = 0.0;

  std::string key() const { return excerpt_id + "/" + condition_id; }
  bool operator==(const SyntheticTruth&) const = default;
};

struct SyntheticDataset {
  Manifest manifest;
  std::vector<SyntheticTruth> truth;
};

inline std::string excerpt_name(int i) {
  std::string n = std::to_string(i);
  return "ex" + std::string(n.size() < 4 ? 4 - n.size() : 0, '0') + n;
}

inline std::string listener_name(int i) {
  std::string n = std::to_string(i + 1);
  return "L" + std::string(n.size() < 2 ? 2 - n.size() : 0, '0') + n;
}

/// Scores only; no audio. Same draws as generate_synthetic.
inline std::vector<double> synthetic_panel(const SyntheticSpec& spec, int excerpt, std::size_t condition) {
  Rng rng = Rng(spec.seed, 0x5c0e).split(static_cast<std::uint64_t>(excerpt)).split(condition);
  const ScoreDistribution d{Family::logistic, spec.grid[condition].mu_star, std::log(spec.a_star)};
  auto scores = sample_scores(d, static_cast<std::size_t>(spec.listeners), rng);
  for (auto& s : scores) s = std::clamp(s, 0.0, 100.0);
  return scores;
}

inline const std::vector<std::string> kTruthHeader = {"condition_id", "mu_star", "a_star", "clipped_mean",
                                                      "clipped_std"};

inline std::string format_truth(const std::vector<SyntheticTruth>& truth) {
  std::string out = "condition_id,mu_star,a_star,clipped_mean,clipped_std\n";
  for (const auto& t : truth)
    out += csv_field(t.key()) + "," + format_double(t.mu_star) + "," + format_double(t.a_star) + "," +
           format_double(t.clipped_mean) + "," + format_double(t.clipped_std) + "\n";
  return out;
}

inline std::vector<SyntheticTruth> load_truth(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::vector<SyntheticTruth> out;
  for (const auto& row : expect_header(parse_csv(read_file(path), name), kTruthHeader, name)) {
    const std::string where = name + ":" + std::to_string(row.line);
    const auto& f = row.fields;
    const auto slash = f[0].find('/');
    require(slash != std::string::npos, Errc::parse_error, where + ": condition id lacks '/'");
    out.push_back({f[0].substr(0, slash), f[0].substr(slash + 1), parse_double(f[1], where),
                   parse_double(f[2], where), parse_double(f[3], where), parse_double(f[4], where)});
  }
  return out;
}

/// Writes audio/<excerpt>_<condition>.wav (and _ref.wav), manifest.csv,
/// subjective.csv and truth.csv under out_dir.
inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "audio", ec);
  require(!ec, Errc::io_failure, "cannot create " + (out_dir / "audio").string() + ": " + ec.message());

  SyntheticDataset ds;
  ds.manifest.base_dir = out_dir;
  const std::size_t n = spec.n_samples();
  const Rng audio_root(spec.seed, 0xa0d10);
  std::string subjective = "condition_id,listener_id,score\n";
  for (int e = 0; e < spec.n_excerpts; ++e) {
    const std::string ex = excerpt_name(e);
    Rng ref_rng = audio_root.split(static_cast<std::uint64_t>(e));
    const auto ref = detail::synth_reference(n, ref_rng);
    const std::string ref_rel = "audio/" + ex + "_ref.wav";
    write_file_atomic(out_dir / ref_rel, encode_wav(detail::to_signal(ref)));
    for (std::size_t c = 0; c < spec.grid.size(); ++c) {
      const Degradation& d = spec.grid[c];
      Rng deg_rng = ref_rng.split(1000 + c);
      const std::string cod_rel = "audio/" + ex + "_" + d.name + ".wav";
      write_file_atomic(out_dir / cod_rel, encode_wav(detail::to_signal(d.identity() ? ref : detail::degrade(ref, d, deg_rng))));

      ManifestEntry entry{ex, d.name, ref_rel, cod_rel, {}};
      const auto scores = synthetic_panel(spec, e, c);
      for (int l = 0; l < spec.listeners; ++l) {
        entry.ratings.push_back({ex, d.name, listener_name(l), scores[static_cast<std::size_t>(l)]});
        subjective += csv_field(entry.key()) + "," + listener_name(l) + "," +
                      format_double(scores[static_cast<std::size_t>(l)]) + "\n";
      }
      ds.manifest.entries.push_back(std::move(entry));
      const auto m = clipped_logistic_moments(d.mu_star, spec.a_star);
      ds.truth.push_back({ex, d.name, d.mu_star, spec.a_star, m.mean, m.stddev});
    }
  }
  write_manifest(out_dir / "manifest.csv", ds.manifest);
  write_file_atomic(out_dir / "subjective.csv", subjective);
  write_file_atomic(out_dir / "truth.csv", format_truth(ds.truth));
  return ds;
}

/// Scores predictions against the generating distribution: the subjective side
/// is the clipped-distribution mean with a t interval from the clipped
/// standard deviation and the panel size.
inline TestSetReport evaluate_against_truth(std::string name, std::span<const ConditionPrediction> predictions,
                                            std::span<const SyntheticTruth> truth, int n_listeners,
                                            double level = 0.95) {
  std::map<std::string, const SyntheticTruth*> by_key;
  for (const auto& t : truth)
    require(by_key.emplace(t.key(), &t).second, Errc::duplicate_record, "duplicate truth for " + t.key());
  std::vector<ConditionResult> results;
  std::set<std::string> seen;
  for (const auto& p : predictions) {
    require(seen.insert(p.condition_id).second, Errc::duplicate_record, "duplicate prediction for " + p.condition_id);
    auto it = by_key.find(p.condition_id);
    require(it != by_key.end(), Errc::id_mismatch, "no truth for condition " + p.condition_id);
    const SyntheticTruth& t = *it->second;
    ConditionResult r;
    r.excerpt_id = t.excerpt_id;
    r.condition_id = p.condition_id;
    r.subjective_mean = t.clipped_mean;
    r.subjective_ci = confidence_interval(t.clipped_std, n_listeners, t.clipped_mean, level);
    r.predicted_mean = p.distribution.mu;
    r.predicted_ci = confidence_interval(p.distribution.stddev(), n_listeners, p.distribution.mu, level);
    r.n_listeners = n_listeners;
    results.push_back(std::move(r));
  }
  return summarize(std::move(name), std::move(results));
}

}  // namespace gml::harness
