#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace gml {

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Seeded random stream. Owned by the caller; derive independent substreams
/// with split() instead of sharing one engine across tasks.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(detail::splitmix64(detail::splitmix64(seed) ^ (stream * 0xd1342543de82ef95ULL + 1))),
        engine_(key_) {}

  /// Deterministic child stream; independent of how much this stream was consumed.
  Rng split(std::uint64_t id) const { return Rng(key_, id + 1); }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in the open interval (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    std::uniform_int_distribution<std::uint64_t> d(0, n - 1);
    return d(engine_);
  }

  double normal() { return normal_(engine_); }

  double gamma(double shape) {
    std::gamma_distribution<double> d(shape, 1.0);
    return d(engine_);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates with below(); std::shuffle's draw sequence is implementation-defined.
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace gml
