#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gml/augment.hpp"
#include "gml/error.hpp"
#include "gml/frontend.hpp"
#include "gml/net/adam.hpp"
#include "gml/net/checkpoint.hpp"
#include "gml/net/kfold.hpp"
#include "gml/net/model.hpp"
#include "gml/net/train_config.hpp"

namespace gml::net {

/// One (excerpt, condition) input with every listener score it received.
struct RatedItem {
  std::string excerpt_id;
  std::string condition_id;
  ModelInput input;
  std::vector<double> scores;
};

struct LossRecord {
  int fold = 0;
  int epoch = 0;
  std::string split;  // "train" or "validation"
  double nll = 0.0;   // mean nats per listener score
  bool operator==(const LossRecord&) const = default;
};

struct MixRecord {
  int fold = 0;
  int epoch = 0;
  std::size_t batch = 0;
  std::string id_a, id_b;
  MixSpec spec;
};

struct TrainHooks {
  std::function<void(const LossRecord&)> on_epoch;
  bool record_provenance = false;
};

struct TrainResult {
  std::vector<Checkpoint> checkpoints;  // one per fold
  std::vector<LossRecord> curve;
  std::vector<Fold> folds;
  std::vector<MixRecord> provenance;
};

/// Inputs that the normalization of a fold is fitted on: the training items
/// and, when enabled, their channel-swapped twins.
inline std::vector<const ModelInput*> fold_training_inputs(std::span<const RatedItem> items,
                                                           std::span<const ModelInput> swapped, const Fold& fold,
                                                           bool channel_swap) {
  std::vector<const ModelInput*> out;
  for (std::size_t i : fold.train) {
    out.push_back(&items[i].input);
    if (channel_swap) out.push_back(&swapped[i]);
  }
  return out;
}

inline std::uint64_t fold_init_seed(std::uint64_t backbone_seed, int fold) {
  return gml::detail::splitmix64(backbone_seed ^ (0x5eedULL + static_cast<std::uint64_t>(fold)));
}

namespace detail {

struct Sample {
  const ModelInput* input;
  std::span<const double> scores;
};

inline double mean_nll(const Network<double>& net, std::span<const double> params, Family family,
                       const NormalizationStats& norm, std::span<const Sample> samples) {
  std::vector<double> buf;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : samples) {
    buf.resize(s.input->data.size());
    norm.apply<double>(*s.input, buf);
    sum += loss_only<double>(net, params, buf, family, norm, s.scores);
    count += s.scores.size();
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace detail

/// K-fold training on individual listener scores. Each fold: fit normalization
/// on its training split, initialize, log epoch-0 losses, then run
/// epochs_per_fold epochs of shuffled minibatches with Adam. A minibatch loss
/// is the mean NLL over every listener score of every input in the batch.
/// Validation always uses the un-augmented, un-swapped items.
inline TrainResult train(std::span<const RatedItem> items, const TrainConfig& cfg, BackboneConfig backbone,
                         const GammatoneConfig& frontend, const TrainHooks& hooks = {}) {
  cfg.validate();
  require(!items.empty(), Errc::empty_dataset, "no training items");
  backbone.input_bands = static_cast<int>(items[0].input.n_bands);
  backbone.input_frames = static_cast<int>(items[0].input.n_frames);
  backbone.validate();
  std::vector<std::string> ids;
  for (const auto& it : items) {
    require(it.input.same_shape(items[0].input), Errc::shape_mismatch, "items have different input shapes");
    require(!it.scores.empty(), Errc::too_few_scores, "item " + it.excerpt_id + "/" + it.condition_id + " has no scores");
    ids.push_back(it.excerpt_id);
  }
  std::vector<ModelInput> swapped;
  swapped.reserve(items.size());
  for (const auto& it : items) swapped.push_back(swap_input_channels(it.input));

  TrainResult result;
  result.folds = kfold_split(ids, cfg.folds, cfg.seed);
  const std::uint64_t shuffle_seed = cfg.shuffle_seed ? cfg.shuffle_seed : gml::detail::splitmix64(cfg.seed ^ 0xba7c4);
  const Rng aug_root(cfg.seed, 0xa06);

  for (int f = 0; f < cfg.folds; ++f) {
    const Fold& fold = result.folds[f];
    std::vector<detail::Sample> train_set, val_set;
    std::vector<double> train_scores;
    for (std::size_t i : fold.train) {
      train_set.push_back({&items[i].input, items[i].scores});
      if (cfg.channel_swap) train_set.push_back({&swapped[i], items[i].scores});
      train_scores.insert(train_scores.end(), items[i].scores.begin(), items[i].scores.end());
    }
    for (std::size_t i : fold.validation) val_set.push_back({&items[i].input, items[i].scores});

    Checkpoint ck;
    ck.backbone = backbone;
    ck.backbone.seed = fold_init_seed(backbone.seed, f);
    ck.frontend = frontend;
    ck.family = cfg.loss_family;
    ck.norm = normalize_fit(fold_training_inputs(items, swapped, fold, cfg.channel_swap));
    fit_score_scaling(ck.norm, train_scores);
    ck.params = init_params(ck.backbone);
    ck.optimizer = AdamState(ck.params.count());
    ck.meta.fold = f;
    ck.meta.augmentation = std::string(augmentation_name(cfg.augmentation));
    ck.meta.train_seed = cfg.seed;

    const Network<double> net(ck.backbone);
    auto log = [&](int epoch, const char* split, double v) {
      LossRecord rec{f, epoch, split, v};
      result.curve.push_back(rec);
      if (hooks.on_epoch) hooks.on_epoch(rec);
    };
    auto validate_epoch = [&](int epoch) {
      const double v = detail::mean_nll(net, ck.params.values, cfg.loss_family, ck.norm, val_set);
      ck.meta.validation_nll.push_back(v);
      log(epoch, "validation", v);
    };

    const double t0 = detail::mean_nll(net, ck.params.values, cfg.loss_family, ck.norm, train_set);
    ck.meta.train_nll.push_back(t0);
    log(0, "train", t0);
    validate_epoch(0);

    std::vector<double> grad(ck.params.count());
    std::vector<double> buf;
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 1; epoch <= cfg.epochs_per_fold; ++epoch) {
      Rng order_rng(shuffle_seed, static_cast<std::uint64_t>(f) * 100003 + static_cast<std::uint64_t>(epoch));
      const auto order = order_rng.permutation(train_set.size());
      double epoch_loss = 0.0;
      std::size_t epoch_count = 0;
      for (std::size_t start = 0, b = 0; start < order.size(); start += bs, ++b) {
        const std::size_t end = std::min(order.size(), start + bs);
        std::vector<RatedMix> mixed;
        std::vector<detail::Sample> batch;
        if (cfg.augmentation != Augmentation::none && end - start >= 2) {
          std::vector<RatedInput> rated;
          for (std::size_t k = start; k < end; ++k) rated.push_back({train_set[order[k]].input, train_set[order[k]].scores});
          Rng rng = aug_root.split(static_cast<std::uint64_t>(f)).split(static_cast<std::uint64_t>(epoch)).split(b);
          mixed = mix_rated(rated, cfg.augmentation, cfg.alpha, cfg.mix_mean_scores, rng);
          for (const auto& m : mixed) {
            batch.push_back({&m.input, m.labels});
            if (hooks.record_provenance) result.provenance.push_back({f, epoch, b, m.id_a, m.id_b, m.spec});
          }
        } else {
          for (std::size_t k = start; k < end; ++k) batch.push_back(train_set[order[k]]);
        }

        std::size_t n_scores = 0;
        for (const auto& s : batch) n_scores += s.scores.size();
        const double weight = 1.0 / static_cast<double>(n_scores);
        std::fill(grad.begin(), grad.end(), 0.0);
        double batch_loss = 0.0;
        for (const auto& s : batch) {
          buf.resize(s.input->data.size());
          ck.norm.apply<double>(*s.input, buf);
          batch_loss += loss_and_gradient<double>(net, ck.params.values, buf, cfg.loss_family, ck.norm, s.scores,
                                                  weight, grad);
        }
        if (!std::isfinite(batch_loss))
          throw Error(Errc::non_finite_loss, "fold " + std::to_string(f) + " epoch " + std::to_string(epoch) +
                                                 " batch " + std::to_string(b) + ": loss is " +
                                                 std::to_string(batch_loss));
        adam_step(ck.params.values, grad, ck.optimizer, cfg.learning_rate);
        for (double p : ck.params.values)
          if (!std::isfinite(p))
            throw Error(Errc::non_finite_loss, "fold " + std::to_string(f) + " epoch " + std::to_string(epoch) +
                                                   ": non-finite parameter after update");
        epoch_loss += batch_loss;
        epoch_count += n_scores;
      }
      const double tr = epoch_count ? epoch_loss / static_cast<double>(epoch_count) : 0.0;
      ck.meta.train_nll.push_back(tr);
      log(epoch, "train", tr);
      validate_epoch(epoch);
      ck.meta.epoch = epoch;
    }
    result.checkpoints.push_back(std::move(ck));
  }
  return result;
}

/// Prediction from a raw (un-normalized) input using the stored normalization.
inline ScoreDistribution predict(const Checkpoint& ck, const ModelInput& input) {
  require(input.n_bands == static_cast<std::size_t>(ck.backbone.input_bands) &&
              input.n_frames == static_cast<std::size_t>(ck.backbone.input_frames),
          Errc::shape_mismatch,
          "input is " + std::to_string(input.n_bands) + "x" + std::to_string(input.n_frames) + ", checkpoint expects " +
              std::to_string(ck.backbone.input_bands) + "x" + std::to_string(ck.backbone.input_frames));
  return forward(ck.model(), ck.norm.apply<double>(input));
}

/// Fold ensemble: arithmetic mean of locations, root-mean-square of scales.
inline ScoreDistribution ensemble(std::span<const ScoreDistribution> members) {
  require(!members.empty(), Errc::empty_dataset, "empty ensemble");
  double mu = 0.0, sq = 0.0;
  for (const auto& d : members) {
    require(d.family == members[0].family, Errc::invalid_argument, "ensemble members differ in family");
    mu += d.mu;
    sq += d.scale() * d.scale();
  }
  const double n = static_cast<double>(members.size());
  return {members[0].family, mu / n, clamp_log_scale(0.5 * std::log(sq / n))};
}

inline ScoreDistribution predict_ensemble(std::span<const Checkpoint> cks, const ModelInput& input) {
  std::vector<ScoreDistribution> members;
  for (const auto& ck : cks) members.push_back(predict(ck, input));
  return ensemble(members);
}

/// Held-out prediction for every item, each from the fold that validated it.
inline std::vector<ScoreDistribution> out_of_fold_predictions(const TrainResult& r, std::span<const RatedItem> items) {
  std::vector<ScoreDistribution> out(items.size());
  for (std::size_t f = 0; f < r.folds.size(); ++f)
    for (std::size_t i : r.folds[f].validation) out[i] = predict(r.checkpoints[f], items[i].input);
  return out;
}

}  // namespace gml::net
