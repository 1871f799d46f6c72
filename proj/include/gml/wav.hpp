#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gml/error.hpp"
#include "gml/io.hpp"
#include "gml/signal.hpp"

namespace gml {

namespace detail {

inline std::uint32_t read_le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t read_le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_le32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_le16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace detail

/// Decodes an in-memory RIFF/WAVE image. Accepts PCM (or extensible PCM),
/// 2 channels, 48 kHz, 16- or 24-bit.
inline StereoSignal decode_wav(const std::string& bytes, const std::string& name = "<memory>") {
  auto bad = [&](const std::string& why) { return Error(Errc::unsupported_format, name + ": " + why); };
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0)
    throw bad("not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  const unsigned char* pcm = nullptr;
  std::size_t pcm_bytes = 0;

  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const unsigned char* chunk = data + pos;
    std::size_t len = detail::read_le32(chunk + 4);
    std::size_t body = pos + 8;
    if (body + len > size) len = size - body;  // tolerate truncated trailing chunk
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) throw bad("short fmt chunk");
      format = detail::read_le16(data + body);
      channels = detail::read_le16(data + body + 2);
      rate = detail::read_le32(data + body + 4);
      block_align = detail::read_le16(data + body + 12);
      bits = detail::read_le16(data + body + 14);
      if (format == 0xFFFE) {
        if (len < 40) throw bad("short extensible fmt chunk");
        format = detail::read_le16(data + body + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      pcm = data + body;
      pcm_bytes = len;
    }
    pos = body + len + (len & 1);
  }

  if (!have_fmt) throw bad("missing fmt chunk");
  if (!pcm) throw bad("missing data chunk");
  if (format != 1) throw bad("encoding is not integer PCM");
  if (channels != 2) throw bad("expected 2 channels, got " + std::to_string(channels));
  if (rate != kSampleRate) throw bad("expected 48000 Hz, got " + std::to_string(rate));
  if (bits != 16 && bits != 24) throw bad("expected 16- or 24-bit samples, got " + std::to_string(bits));
  const std::size_t bytes_per_sample = bits / 8;
  if (block_align != 2 * bytes_per_sample) throw bad("inconsistent block alignment");

  const std::size_t frames = pcm_bytes / block_align;
  StereoSignal s;
  s.left.resize(frames);
  s.right.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char* f = pcm + i * block_align;
    for (int ch = 0; ch < 2; ++ch) {
      const unsigned char* p = f + ch * bytes_per_sample;
      float v;
      if (bits == 16) {
        auto raw = static_cast<std::int16_t>(detail::read_le16(p));
        v = static_cast<float>(raw) / 32768.0f;
      } else {
        std::int32_t raw = std::int32_t(p[0]) | (std::int32_t(p[1]) << 8) | (std::int32_t(p[2]) << 16);
        if (raw & 0x800000) raw -= 0x1000000;
        v = static_cast<float>(raw) / 8388608.0f;
      }
      (ch == 0 ? s.left : s.right)[i] = v;
    }
  }
  return s;
}

inline StereoSignal load_audio(const std::filesystem::path& path) {
  return decode_wav(read_file(path), path.string());
}

/// Encodes a stereo signal as 48 kHz PCM WAV. Samples are rounded and clipped
/// to the integer range of the chosen bit depth.
inline std::string encode_wav(const StereoSignal& s, int bits = 24) {
  require(bits == 16 || bits == 24, Errc::unsupported_format, "bits must be 16 or 24");
  require(s.left.size() == s.right.size(), Errc::length_mismatch, "channel lengths differ");
  const std::uint32_t bps = static_cast<std::uint32_t>(bits / 8);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(s.left.size() * 2 * bps);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_le32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put_le32(out, 16);
  detail::put_le16(out, 1);
  detail::put_le16(out, 2);
  detail::put_le32(out, kSampleRate);
  detail::put_le32(out, kSampleRate * 2 * bps);
  detail::put_le16(out, static_cast<std::uint16_t>(2 * bps));
  detail::put_le16(out, static_cast<std::uint16_t>(bits));
  out += "data";
  detail::put_le32(out, data_bytes);
  const double full = bits == 16 ? 32768.0 : 8388608.0;
  for (std::size_t i = 0; i < s.left.size(); ++i) {
    for (float x : {s.left[i], s.right[i]}) {
      double q = std::nearbyint(static_cast<double>(x) * full);
      q = std::clamp(q, -full, full - 1.0);
      auto v = static_cast<std::int32_t>(q);
      for (std::uint32_t b = 0; b < bps; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
    }
  }
  return out;
}

}  // namespace gml
