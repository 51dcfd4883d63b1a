#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "udts/errors.hpp"
#include "udts/matrix.hpp"
#include "udts/mlp.hpp"

namespace udts {

struct LossConfig {
  double unlabeled_weight = 1.0;        // lambda in the semi-supervised objective
  std::vector<double> class_weights;    // empty means uniform 1
  double uncertainty_loss_weight = 1.0;
  bool downweight_by_uncertainty = false;  // sample weight 1 - u_hat instead of 1

  void validate(std::size_t class_count) const {
    if (!std::isfinite(unlabeled_weight) || unlabeled_weight < 0.0) {
      throw ConfigError("loss config: unlabeled weight must be finite and >= 0");
    }
    if (!std::isfinite(uncertainty_loss_weight) || uncertainty_loss_weight < 0.0) {
      throw ConfigError("loss config: uncertainty loss weight must be finite and >= 0");
    }
    if (!class_weights.empty()) {
      if (class_weights.size() != class_count) {
        throw ConfigError("loss config: class weight length mismatch");
      }
      for (double w : class_weights) {
        if (!std::isfinite(w) || w <= 0.0) {
          throw ConfigError("loss config: class weights must be positive and finite");
        }
      }
    }
  }

  double class_weight(std::uint32_t c) const {
    return class_weights.empty() ? 1.0 : class_weights[c];
  }
};

// Inverse-frequency class weights, normalized to mean 1.
inline std::vector<double> inverse_frequency_weights(const std::vector<std::size_t>& counts) {
  if (counts.empty()) throw ConfigError("class weights: empty counts");
  std::vector<double> weights(counts.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw ConfigError("class weights: zero class count");
    weights[c] = 1.0 / static_cast<double>(counts[c]);
    sum += weights[c];
  }
  const double mean = sum / static_cast<double>(counts.size());
  for (auto& w : weights) w /= mean;
  return weights;
}

namespace detail {

inline double ce_row(const DenseMatrix& probs, std::size_t row, std::uint32_t target) {
  if (target >= probs.cols) throw IndexError("cross entropy: target out of range");
  return -std::log(std::max(probs(row, target), kLogFloor));
}

}  // namespace detail

// Supervised and unlabeled terms of the semi-supervised objective, separately:
// (1/N_l) sum w_y CE  and  (lambda/N_u) sum omega_i w_y CE. The unlabeled term
// is 0 when there are no pseudo samples.
inline std::pair<double, double> semi_supervised_ce_parts(
    const DenseMatrix& labeled_probs, const std::vector<std::uint32_t>& labeled_targets,
    const DenseMatrix& pseudo_probs, const std::vector<std::uint32_t>& pseudo_targets,
    const std::vector<double>& sample_weights, const LossConfig& cfg) {
  if (labeled_probs.rows == 0) throw ConfigError("semi-supervised CE: no labeled samples");
  if (labeled_targets.size() != labeled_probs.rows ||
      pseudo_targets.size() != pseudo_probs.rows || sample_weights.size() != pseudo_probs.rows) {
    throw ShapeError("semi-supervised CE: row/target/weight mismatch");
  }
  cfg.validate(labeled_probs.cols);

  double supervised = 0.0;
  for (std::size_t i = 0; i < labeled_probs.rows; ++i) {
    supervised += cfg.class_weight(labeled_targets[i]) * detail::ce_row(labeled_probs, i, labeled_targets[i]);
  }
  supervised /= static_cast<double>(labeled_probs.rows);

  double unlabeled = 0.0;
  if (pseudo_probs.rows > 0) {
    for (std::size_t i = 0; i < pseudo_probs.rows; ++i) {
      if (sample_weights[i] < 0.0) throw DomainError("semi-supervised CE: negative sample weight");
      unlabeled += sample_weights[i] * cfg.class_weight(pseudo_targets[i]) *
                   detail::ce_row(pseudo_probs, i, pseudo_targets[i]);
    }
    unlabeled *= cfg.unlabeled_weight / static_cast<double>(pseudo_probs.rows);
  }
  return {supervised, unlabeled};
}

inline double semi_supervised_ce(const DenseMatrix& labeled_probs,
                                 const std::vector<std::uint32_t>& labeled_targets,
                                 const DenseMatrix& pseudo_probs,
                                 const std::vector<std::uint32_t>& pseudo_targets,
                                 const std::vector<double>& sample_weights, const LossConfig& cfg) {
  const auto [supervised, unlabeled] = semi_supervised_ce_parts(
      labeled_probs, labeled_targets, pseudo_probs, pseudo_targets, sample_weights, cfg);
  return supervised + unlabeled;
}

// Gate-masked cross-entropy against hard pseudo-targets, averaged over the
// full batch size B, not over the gated subset.
inline double uncertainty_loss(const DenseMatrix& probs,
                               const std::vector<std::uint32_t>& pseudo_targets,
                               const std::vector<char>& gates, std::size_t batch_size) {
  if (gates.size() != probs.rows || pseudo_targets.size() != probs.rows) {
    throw ShapeError("uncertainty loss: gate/target length mismatch");
  }
  if (batch_size == 0) throw ConfigError("uncertainty loss: zero batch size");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    if (gates[i]) total += detail::ce_row(probs, i, pseudo_targets[i]);
  }
  return total / static_cast<double>(batch_size);
}

struct LossBreakdown {
  double supervised = 0.0;
  double unlabeled = 0.0;
  double uncertainty = 0.0;
};

inline double total_loss(const LossBreakdown& parts, const LossConfig& cfg) {
  const double total =
      parts.supervised + parts.unlabeled + cfg.uncertainty_loss_weight * parts.uncertainty;
  if (!std::isfinite(total)) throw NumericError("total loss is not finite");
  return total;
}

}  // namespace udts
