#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gml {

enum class Errc {
  invalid_argument,
  unsupported_format,
  io_failure,
  target_too_small,
  input_too_short,
  length_mismatch,
  nonpositive_scale,
  invalid_dof,
  insufficient_listeners,
  too_few_scores,
  out_of_range_score,
  invalid_config,
  shape_mismatch,
  dimension_mismatch,
  empty_dataset,
  too_few_excerpts,
  non_finite_loss,
  corrupt_checkpoint,
  nonpositive_alpha,
  batch_too_small,
  degenerate_input,
  missing_ci,
  id_mismatch,
  parse_error,
  missing_file,
  duplicate_record,
};

constexpr std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::unsupported_format: return "unsupported-format";
    case Errc::io_failure: return "io-failure";
    case Errc::target_too_small: return "target-too-small";
    case Errc::input_too_short: return "input-too-short";
    case Errc::length_mismatch: return "length-mismatch";
    case Errc::nonpositive_scale: return "nonpositive-scale";
    case Errc::invalid_dof: return "invalid-dof";
    case Errc::insufficient_listeners: return "insufficient-listeners";
    case Errc::too_few_scores: return "too-few-scores";
    case Errc::out_of_range_score: return "out-of-range-score";
    case Errc::invalid_config: return "invalid-config";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::empty_dataset: return "empty-dataset";
    case Errc::too_few_excerpts: return "too-few-excerpts";
    case Errc::non_finite_loss: return "non-finite-loss";
    case Errc::corrupt_checkpoint: return "corrupt-checkpoint";
    case Errc::nonpositive_alpha: return "nonpositive-alpha";
    case Errc::batch_too_small: return "batch-too-small";
    case Errc::degenerate_input: return "degenerate-constant-input";
    case Errc::missing_ci: return "missing-ci";
    case Errc::id_mismatch: return "id-mismatch";
    case Errc::parse_error: return "parse-error";
    case Errc::missing_file: return "missing-file";
    case Errc::duplicate_record: return "duplicate-record";
  }
  return "unknown";
}

/// Exception carrying a machine-checkable error kind.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

  /// Failures caused by bad input (exit 1) rather than the environment (exit 2).
  bool is_validation() const noexcept {
    return code_ != Errc::io_failure && code_ != Errc::non_finite_loss;
  }

 private:
  Errc code_;
};

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace gml
