#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "gml/error.hpp"
#include "gml/eval.hpp"
#include "gml/frontend.hpp"
#include "gml/harness/csv.hpp"
#include "gml/harness/manifest.hpp"
#include "gml/io.hpp"
#include "gml/json_config.hpp"
#include "gml/net/train.hpp"
#include "gml/spectrogram_cache.hpp"
#include "gml/wav.hpp"

namespace gml::harness {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception
/// is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned threads = std::thread::hardware_concurrency()) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct FeatureIndexEntry {
  std::string excerpt_id;
  std::string condition_id;
  std::string cache_file;  // relative to the features directory
  std::string key;
  bool operator==(const FeatureIndexEntry&) const = default;
};

inline const std::vector<std::string> kFeatureIndexHeader = {"excerpt_id", "condition_id", "cache_file", "key"};

/// Hash of the canonical config JSON, the pad length and both files' bytes.
inline std::string feature_cache_key(const GammatoneConfig& cfg, std::size_t pad_length, std::string_view ref_bytes,
                                     std::string_view cod_bytes) {
  std::uint64_t h = fnv1a64(to_json(cfg).dump());
  h = fnv1a64("|pad=" + std::to_string(pad_length), h);
  h = fnv1a64("|ref=" + hex64(fnv1a64(ref_bytes)), h);
  h = fnv1a64("|cod=" + hex64(fnv1a64(cod_bytes)), h);
  return hex64(h);
}

inline std::vector<FeatureIndexEntry> load_feature_index(const std::filesystem::path& dir) {
  const auto path = dir / "features.csv";
  require(std::filesystem::exists(path), Errc::missing_file, "no feature index at " + path.string());
  std::vector<FeatureIndexEntry> out;
  for (const auto& row : expect_header(parse_csv(read_file(path), path.string()), kFeatureIndexHeader, path.string()))
    out.push_back({row.fields[0], row.fields[1], row.fields[2], row.fields[3]});
  return out;
}

inline GammatoneConfig load_feature_frontend(const std::filesystem::path& dir) {
  const auto path = dir / "frontend.json";
  require(std::filesystem::exists(path), Errc::missing_file, "no frontend config at " + path.string());
  GammatoneConfig cfg;
  try {
    from_json(json::parse(read_file(path)), cfg);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

struct FeaturizeStats {
  std::size_t computed = 0;
  std::size_t reused = 0;
};

/// Loads every pair, zero-pads all signals to the longest one, and writes one
/// GMLSPEC1 file per (excerpt, condition) plus features.csv and frontend.json.
/// A cache file whose key matches is reused; any other is recomputed.
inline FeaturizeStats featurize(const Manifest& m, const GammatoneConfig& cfg, const std::filesystem::path& out_dir,
                                unsigned threads = std::thread::hardware_concurrency()) {
  cfg.validate();
  require(!m.entries.empty(), Errc::empty_dataset, "manifest has no entries");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "cache", ec);
  require(!ec, Errc::io_failure, "cannot create " + (out_dir / "cache").string() + ": " + ec.message());

  std::map<std::string, std::string> bytes;  // path -> file contents
  std::map<std::string, StereoSignal> audio;
  for (const auto& e : m.entries)
    for (const auto* p : {&e.ref_path, &e.cod_path}) {
      if (bytes.count(*p)) continue;
      const auto path = m.resolve(*p);
      require(std::filesystem::exists(path), Errc::missing_file, "no such file " + path.string());
      bytes[*p] = read_file(path);
      audio[*p] = decode_wav(bytes[*p], path.string());
    }
  std::size_t pad = 0;
  for (const auto& [_, s] : audio) pad = std::max(pad, s.n_samples());
  require(pad >= static_cast<std::size_t>(cfg.frame_len), Errc::input_too_short,
          "longest signal is shorter than one frame");

  // group entries by excerpt so each reference is analysed once per worker item
  std::vector<std::string> excerpts;
  std::map<std::string, std::vector<std::size_t>> by_excerpt;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    auto [it, fresh] = by_excerpt.try_emplace(m.entries[i].excerpt_id);
    if (fresh) excerpts.push_back(m.entries[i].excerpt_id);
    it->second.push_back(i);
  }

  std::vector<FeatureIndexEntry> index(m.entries.size());
  std::atomic<std::size_t> computed{0}, reused{0};
  const GammatoneFilterbank fb(cfg);
  parallel_for(
      excerpts.size(),
      [&](std::size_t x) {
        std::map<std::string, std::array<Matrix<float>, 4>> ref_cache;
        for (std::size_t i : by_excerpt.at(excerpts[x])) {
          const ManifestEntry& e = m.entries[i];
          const std::string key = feature_cache_key(cfg, pad, bytes.at(e.ref_path), bytes.at(e.cod_path));
          const std::string rel = "cache/" + key + ".gmlspec";
          index[i] = {e.excerpt_id, e.condition_id, rel, key};
          const auto path = out_dir / rel;
          if (std::filesystem::exists(path)) {
            try {
              const ModelInput cached = read_spectrogram_cache(path);
              if (cached.excerpt_id == e.excerpt_id) {
                ++reused;
                continue;
              }
            } catch (const Error&) {
              // unreadable: recompute below
            }
          }
          const StereoSignal& ref = audio.at(e.ref_path);
          const StereoSignal& cod = audio.at(e.cod_path);
          require(ref.n_samples() == cod.n_samples(), Errc::length_mismatch,
                  e.key() + ": reference and coded lengths differ");
          auto rit = ref_cache.find(e.ref_path);
          if (rit == ref_cache.end())
            rit = ref_cache.emplace(e.ref_path, channel_spectrograms(pad_to_length(ref, pad), fb)).first;
          const ModelInput in =
              assemble_input(rit->second, channel_spectrograms(pad_to_length(cod, pad), fb), e.excerpt_id);
          write_spectrogram_cache(path, in);
          ++computed;
        }
      },
      threads);

  std::string csv = "excerpt_id,condition_id,cache_file,key\n";
  for (const auto& f : index)
    csv += csv_field(f.excerpt_id) + "," + csv_field(f.condition_id) + "," + f.cache_file + "," + f.key + "\n";
  write_file_atomic(out_dir / "features.csv", csv);
  write_file_atomic(out_dir / "frontend.json", to_json(cfg).dump(2) + "\n");
  return {computed.load(), reused.load()};
}

/// Pairs the cached inputs with the manifest's listener scores.
inline std::vector<net::RatedItem> load_rated_items(const Manifest& m, const std::filesystem::path& features_dir) {
  std::map<std::pair<std::string, std::string>, const FeatureIndexEntry*> lookup;
  const auto index = load_feature_index(features_dir);
  for (const auto& f : index) lookup[{f.excerpt_id, f.condition_id}] = &f;
  std::vector<net::RatedItem> items;
  for (const auto& e : m.entries) {
    auto it = lookup.find({e.excerpt_id, e.condition_id});
    require(it != lookup.end(), Errc::id_mismatch, "no cached features for " + e.key() + "; run featurize");
    net::RatedItem item{e.excerpt_id, e.condition_id, read_spectrogram_cache(features_dir / it->second->cache_file), {}};
    require(item.input.excerpt_id == e.excerpt_id, Errc::id_mismatch,
            "cache file " + it->second->cache_file + " belongs to " + item.input.excerpt_id);
    for (const auto& r : e.ratings) item.scores.push_back(r.score);
    items.push_back(std::move(item));
  }
  return items;
}

/// Features for prediction without a cache. A pair shorter than the model's
/// frame count needs is zero-padded to the shortest length that yields it.
inline ModelInput input_for_checkpoint(const StereoSignal& ref, const StereoSignal& cod, const GammatoneConfig& cfg,
                                       std::size_t frames, const std::string& excerpt_id) {
  require(ref.n_samples() == cod.n_samples(), Errc::length_mismatch, excerpt_id + ": reference and coded lengths differ");
  const auto len = static_cast<std::size_t>(cfg.frame_len), hop = static_cast<std::size_t>(cfg.frame_hop);
  const std::size_t shortest = len + (frames - 1) * hop;
  const std::size_t longest = shortest + hop - 1;
  require(ref.n_samples() <= longest, Errc::shape_mismatch,
          excerpt_id + ": signal of " + std::to_string(ref.n_samples()) + " samples gives more than the model's " +
              std::to_string(frames) + " frames");
  const std::size_t target = std::max(ref.n_samples(), shortest);
  return build_input(pad_to_length(ref, target), pad_to_length(cod, target), cfg, excerpt_id);
}

// ---- CSV artifacts ----

inline std::string format_loss_csv(std::span<const net::LossRecord> curve) {
  std::string out = "fold,epoch,split,nll\n";
  for (const auto& r : curve)
    out += std::to_string(r.fold) + "," + std::to_string(r.epoch) + "," + r.split + "," + format_double(r.nll) + "\n";
  return out;
}

inline std::vector<net::LossRecord> parse_loss_csv(std::string_view text, const std::string& name = "loss.csv") {
  std::vector<net::LossRecord> out;
  for (const auto& row : expect_header(parse_csv(text, name), {"fold", "epoch", "split", "nll"}, name)) {
    const std::string where = name + ":" + std::to_string(row.line);
    out.push_back({static_cast<int>(parse_double(row.fields[0], where)),
                   static_cast<int>(parse_double(row.fields[1], where)), row.fields[2],
                   parse_double(row.fields[3], where)});
  }
  return out;
}

inline std::string format_provenance_csv(std::span<const net::MixRecord> log) {
  std::string out = "fold,batch,epoch,id_A,id_B,lambda_raw,lambda_eff,band_lo,band_hi,frame_lo,frame_hi\n";
  for (const auto& r : log) {
    const auto& k = r.spec.mask;
    out += std::to_string(r.fold) + "," + std::to_string(r.batch) + "," + std::to_string(r.epoch) + "," +
           csv_field(r.id_a) + "," + csv_field(r.id_b) + "," + format_double(r.spec.lambda_raw) + "," +
           format_double(r.spec.lambda_eff) + "," + std::to_string(k.band_lo) + "," + std::to_string(k.band_hi) + "," +
           std::to_string(k.frame_lo) + "," + std::to_string(k.frame_hi) + "\n";
  }
  return out;
}

inline std::string format_predictions_csv(std::span<const ConditionPrediction> preds) {
  std::string out = "condition_id,mu,log_scale,family\n";
  for (const auto& p : preds)
    out += csv_field(p.condition_id) + "," + format_double(p.distribution.mu) + "," +
           format_double(p.distribution.log_scale) + "," + std::string(family_name(p.distribution.family)) + "\n";
  return out;
}

inline std::vector<ConditionPrediction> parse_predictions_csv(std::string_view text,
                                                              const std::string& name = "predictions.csv") {
  std::vector<ConditionPrediction> out;
  for (const auto& row :
       expect_header(parse_csv(text, name), {"condition_id", "mu", "log_scale", "family"}, name)) {
    const std::string where = name + ":" + std::to_string(row.line);
    ScoreDistribution d;
    try {
      d.family = parse_family(row.fields[3]);
    } catch (const Error& e) {
      throw Error(Errc::parse_error, where + ": " + e.what());
    }
    d.mu = parse_double(row.fields[1], where);
    d.log_scale = parse_double(row.fields[2], where);
    require(std::isfinite(d.mu) && std::isfinite(d.log_scale), Errc::parse_error, where + ": non-finite value");
    out.push_back({row.fields[0], d});
  }
  return out;
}

/// Rows are grouped into panels by condition id, in order of first appearance.
inline std::vector<SubjectivePanel> parse_subjective_csv(std::string_view text,
                                                         const std::string& name = "subjective.csv") {
  std::vector<SubjectivePanel> out;
  std::map<std::string, std::size_t> where_of;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& row : expect_header(parse_csv(text, name), {"condition_id", "listener_id", "score"}, name)) {
    const std::string where = name + ":" + std::to_string(row.line);
    const double s = parse_double(row.fields[2], where);
    require(s >= 0.0 && s <= 100.0, Errc::out_of_range_score, where + ": score outside [0, 100]");
    require(seen.emplace(row.fields[0], row.fields[1]).second, Errc::duplicate_record,
            where + ": duplicate listener " + row.fields[1] + " for " + row.fields[0]);
    auto [it, fresh] = where_of.try_emplace(row.fields[0], out.size());
    if (fresh) out.push_back({row.fields[0], {}});
    out[it->second].scores.push_back(s);
  }
  return out;
}

/// Simulated panels: n draws per prediction, each condition from its own
/// stream, clipped to the MUSHRA range.
inline std::string simulate_panels_csv(std::span<const ConditionPrediction> preds, std::size_t n,
                                       std::uint64_t seed) {
  require(n >= 1, Errc::invalid_argument, "--n must be >= 1");
  const Rng root(seed, 0x51a);
  std::string out = "condition_id,listener_id,score\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    Rng rng = root.split(i);
    const auto draws = sample_scores(preds[i].distribution, n, rng);
    for (std::size_t l = 0; l < n; ++l)
      out += csv_field(preds[i].condition_id) + ",sim" + std::to_string(l + 1) + "," +
             format_double(std::clamp(draws[l], 0.0, 100.0)) + "\n";
  }
  return out;
}

}  // namespace gml::harness
