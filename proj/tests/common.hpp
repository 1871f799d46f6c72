#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "gml/gml.hpp"

namespace gml::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("gml_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline StereoSignal random_signal(std::size_t n, std::uint64_t seed, double amp = 0.5) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  StereoSignal s;
  s.left.resize(n);
  s.right.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.left[i] = static_cast<float>(u(eng));
    s.right[i] = static_cast<float>(u(eng));
  }
  return s;
}

inline ModelInput random_input(std::size_t bands, std::size_t frames, std::uint64_t seed, const std::string& id = "x") {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ModelInput in(bands, frames, id);
  for (auto& v : in.data) v = u(eng);
  return in;
}

/// Expects `fn` to throw gml::Error with the given code.
template <class Fn>
void expect_errc(Fn&& fn, Errc code) {
  try {
    fn();
    ADD_FAILURE() << "expected " << errc_name(code) << ", nothing thrown";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace gml::test
