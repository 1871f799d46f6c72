#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <zlib.h>

#include "gml/io.hpp"
#include "gml/json_config.hpp"
#include "gml/net/adam.hpp"
#include "gml/net/model.hpp"

namespace gml::net {

inline constexpr std::string_view kCheckpointMagic = "GMLCKPT1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingMeta {
  int fold = 0;
  int epoch = 0;
  std::vector<double> train_nll;
  std::vector<double> validation_nll;
  std::string augmentation = "none";
  std::uint64_t train_seed = 0;

  bool operator==(const TrainingMeta&) const = default;
};

struct Checkpoint {
  BackboneConfig backbone;
  GammatoneConfig frontend;
  Family family = Family::logistic;
  ModelParams params;
  AdamState optimizer;
  NormalizationStats norm;
  TrainingMeta meta;

  Model model() const { return {backbone, params, norm, family}; }
  bool operator==(const Checkpoint&) const = default;
};

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

/// Layout: magic "GMLCKPT1", u32 version, u64 length + canonical JSON (configs,
/// family, metadata), u64 count + f64 parameters, u64 Adam step, u64 count +
/// f64 first moments, u64 count + f64 second moments, f64 x8 plane means,
/// f64 x8 plane stds, f64 score mean, f64 score std, u32 CRC-32 of all prior bytes.
inline std::string encode_checkpoint(const Checkpoint& c) {
  json meta = {{"backbone", to_json(c.backbone)},
               {"frontend", to_json(c.frontend)},
               {"family", std::string(family_name(c.family))},
               {"init_seed", c.params.init_seed},
               {"training",
                {{"fold", c.meta.fold},
                 {"epoch", c.meta.epoch},
                 {"train_nll", c.meta.train_nll},
                 {"validation_nll", c.meta.validation_nll},
                 {"augmentation", c.meta.augmentation},
                 {"seed", c.meta.train_seed}}}};
  const std::string text = meta.dump();
  ByteWriter w;
  w.put_bytes(kCheckpointMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(text.size());
  w.put_bytes(text);
  w.put<std::uint64_t>(c.params.values.size());
  w.put_span<double>(c.params.values);
  w.put<std::uint64_t>(c.optimizer.step);
  w.put<std::uint64_t>(c.optimizer.m.size());
  w.put_span<double>(c.optimizer.m);
  w.put<std::uint64_t>(c.optimizer.v.size());
  w.put_span<double>(c.optimizer.v);
  w.put_span<double>(c.norm.mean);
  w.put_span<double>(c.norm.std);
  w.put<double>(c.norm.score_mean);
  w.put<double>(c.norm.score_std);
  w.put<std::uint32_t>(crc32_of(w.bytes()));
  return w.take();
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  constexpr auto bad = Errc::corrupt_checkpoint;
  require(bytes.size() >= kCheckpointMagic.size() + 4 + 4, bad, "file too short");
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  ByteReader tail(bytes.substr(bytes.size() - 4), bad);
  require(tail.get<std::uint32_t>() == crc32_of(body), bad, "CRC mismatch");

  ByteReader r(body, bad);
  require(r.get_bytes(kCheckpointMagic.size()) == kCheckpointMagic, bad, "bad magic");
  const auto version = r.get<std::uint32_t>();
  require(version == kCheckpointVersion, bad, "unsupported version " + std::to_string(version));
  const auto text_len = r.get<std::uint64_t>();
  require(text_len <= r.remaining(), bad, "config block overruns file");
  Checkpoint c;
  try {
    const json meta = json::parse(r.get_bytes(text_len));
    from_json(meta.at("backbone"), c.backbone);
    from_json(meta.at("frontend"), c.frontend);
    c.family = parse_family(meta.at("family").get<std::string>());
    c.params.init_seed = meta.at("init_seed").get<std::uint64_t>();
    const json& t = meta.at("training");
    c.meta.fold = t.at("fold").get<int>();
    c.meta.epoch = t.at("epoch").get<int>();
    c.meta.train_nll = t.at("train_nll").get<std::vector<double>>();
    c.meta.validation_nll = t.at("validation_nll").get<std::vector<double>>();
    c.meta.augmentation = t.at("augmentation").get<std::string>();
    c.meta.train_seed = t.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(bad, std::string("config block: ") + e.what());
  } catch (const Error& e) {
    throw Error(bad, e.what());
  }
  auto read_vec = [&](std::vector<double>& v) {
    const auto n = r.get<std::uint64_t>();
    require(n <= r.remaining() / sizeof(double), bad, "array overruns file");
    v.resize(n);
    r.get_into<double>(v);
  };
  read_vec(c.params.values);
  c.optimizer.step = r.get<std::uint64_t>();
  read_vec(c.optimizer.m);
  read_vec(c.optimizer.v);
  r.get_into<double>(c.norm.mean);
  r.get_into<double>(c.norm.std);
  c.norm.score_mean = r.get<double>();
  c.norm.score_std = r.get<double>();
  require(r.remaining() == 0, bad, "trailing bytes");
  try {
    c.backbone.validate();
  } catch (const Error& e) {
    throw Error(bad, e.what());
  }
  require(c.params.values.size() == parameter_count(c.backbone), bad, "parameter count does not match config");
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file_atomic(path, encode_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace gml::net
