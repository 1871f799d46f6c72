#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gml/error.hpp"
#include "gml/random.hpp"

namespace gml::net {

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// K-fold partition of item indices grouped by excerpt id: every item of an
/// excerpt (all conditions, both channel orders) lands in the same fold.
/// Excerpts are sorted, shuffled with `seed`, and dealt into k contiguous
/// chunks whose sizes differ by at most one.
inline std::vector<Fold> kfold_split(std::span<const std::string> item_excerpt_ids, int k, std::uint64_t seed) {
  require(k >= 2, Errc::invalid_config, "need at least 2 folds");
  std::vector<std::string> excerpts(item_excerpt_ids.begin(), item_excerpt_ids.end());
  std::sort(excerpts.begin(), excerpts.end());
  excerpts.erase(std::unique(excerpts.begin(), excerpts.end()), excerpts.end());
  require(excerpts.size() >= static_cast<std::size_t>(k), Errc::too_few_excerpts,
          "need at least " + std::to_string(k) + " excerpts, got " + std::to_string(excerpts.size()));
  Rng rng(seed, 0xf01d);
  rng.shuffle(excerpts);

  std::map<std::string, int> fold_of;
  const std::size_t n = excerpts.size(), base = n / k, extra = n % k;
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    const std::size_t len = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    for (std::size_t i = 0; i < len; ++i) fold_of[excerpts[pos++]] = f;
  }

  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < item_excerpt_ids.size(); ++i) {
    const int f = fold_of.at(item_excerpt_ids[i]);
    for (int j = 0; j < k; ++j) (j == f ? folds[j].validation : folds[j].train).push_back(i);
  }
  return folds;
}

}  // namespace gml::net
