#pragma once

#include <cstdint>

#include "gml/augment.hpp"
#include "gml/error.hpp"
#include "gml/prob.hpp"

namespace gml::net {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 8;
  int epochs_per_fold = 10;
  int folds = 5;
  Family loss_family = Family::logistic;
  Augmentation augmentation = Augmentation::none;
  double alpha = 0.7;
  /// Mix panel means instead of individual scores (mean-score baseline variant).
  bool mix_mean_scores = false;
  /// Expand the training split with channel-swapped twins.
  bool channel_swap = true;
  std::uint64_t seed = 0;
  /// Batch order stream; 0 derives it from `seed`.
  std::uint64_t shuffle_seed = 0;

  void validate() const {
    require(folds >= 2, Errc::invalid_config, "folds must be >= 2");
    require(batch_size >= 1, Errc::invalid_config, "batch_size must be >= 1");
    require(learning_rate > 0, Errc::invalid_config, "learning_rate must be > 0");
    require(epochs_per_fold >= 0, Errc::invalid_config, "epochs_per_fold must be >= 0");
    require(alpha > 0, Errc::invalid_config, "alpha must be > 0");
    require(augmentation == Augmentation::none || batch_size >= 2, Errc::invalid_config,
            "mixing augmentation needs batch_size >= 2");
  }

  bool operator==(const TrainConfig&) const = default;
};

}  // namespace gml::net
