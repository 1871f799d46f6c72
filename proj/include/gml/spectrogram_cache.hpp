#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "gml/frontend.hpp"
#include "gml/io.hpp"

namespace gml {

inline constexpr std::string_view kSpecMagic = "GMLSPEC1";

/// Cache layout: magic, u32 n_bands, u32 n_frames, u32 plane count (8),
/// u32 id byte length, UTF-8 id, then the planes as little-endian f32, row-major.
inline std::string encode_spectrogram_cache(const ModelInput& in) {
  ByteWriter w;
  w.put_bytes(kSpecMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(in.n_bands));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(in.n_frames));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(kPlanes));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(in.excerpt_id.size()));
  w.put_bytes(in.excerpt_id);
  w.put_span<float>(in.data);
  return w.take();
}

inline ModelInput decode_spectrogram_cache(std::string_view bytes) {
  ByteReader r(bytes, Errc::unsupported_format);
  require(r.get_bytes(kSpecMagic.size()) == kSpecMagic, Errc::unsupported_format, "bad spectrogram cache magic");
  const auto bands = r.get<std::uint32_t>();
  const auto frames = r.get<std::uint32_t>();
  const auto planes = r.get<std::uint32_t>();
  require(planes == kPlanes, Errc::unsupported_format, "plane count must be 8");
  const auto id_len = r.get<std::uint32_t>();
  std::string id(r.get_bytes(id_len));
  ModelInput in(bands, frames, std::move(id));
  r.get_into<float>(in.data);
  require(r.remaining() == 0, Errc::unsupported_format, "trailing bytes in spectrogram cache");
  return in;
}

inline void write_spectrogram_cache(const std::filesystem::path& path, const ModelInput& in) {
  write_file_atomic(path, encode_spectrogram_cache(in));
}

inline ModelInput read_spectrogram_cache(const std::filesystem::path& path) {
  return decode_spectrogram_cache(read_file(path));
}

}  // namespace gml
