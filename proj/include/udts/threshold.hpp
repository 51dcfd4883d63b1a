#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "udts/errors.hpp"

namespace udts {

// Per-sample statistics of one epoch's unlabeled inference, in threshold scale:
// confidences are max mean-probabilities, entropies are normalized by ln C.
struct EpochObservation {
  std::vector<double> confidences;
  std::vector<double> norm_entropies;
  std::vector<std::uint32_t> predicted_classes;

  void validate(std::size_t class_count) const {
    if (confidences.empty()) throw ConfigError("epoch observation: empty");
    if (confidences.size() != norm_entropies.size() ||
        confidences.size() != predicted_classes.size()) {
      throw ShapeError("epoch observation: field lengths differ");
    }
    for (std::size_t i = 0; i < confidences.size(); ++i) {
      if (confidences[i] < 0.0 || confidences[i] > 1.0) {
        throw DomainError("epoch observation: confidence outside [0,1]");
      }
      if (norm_entropies[i] < 0.0 || norm_entropies[i] > 1.0 + 1e-12) {
        throw DomainError("epoch observation: normalized entropy outside [0,1]");
      }
      if (predicted_classes[i] >= class_count) {
        throw IndexError("epoch observation: predicted class out of range");
      }
    }
  }
};

struct ThresholdState {
  std::size_t epoch = 0;
  double global_tau = 0.0;                 // tau_t
  std::vector<double> learning_state;      // p~_t(c)
  std::vector<double> uncertainty_state;   // u~_t(c)
  double ema_coeff = 0.999;

  // derived per-class thresholds, valid while derived_epoch == epoch
  std::vector<double> class_tau;
  std::vector<double> class_unc_norm;
  std::size_t derived_epoch = std::numeric_limits<std::size_t>::max();

  std::size_t class_count() const { return learning_state.size(); }
  bool thresholds_current() const { return derived_epoch == epoch; }
};

struct ThresholdOptions {
  double lambda_ema = 0.999;
  bool gamma_inverse = false;   // read the imbalance coefficient as head/class instead
  double tau0_override = -1.0;  // < 0 keeps the 1/C default
  bool uniform_init = false;    // ignore counts, seed p~_0(c) = 1/C everywhere

  void validate() const {
    if (lambda_ema < 0.0 || lambda_ema > 1.0) {
      throw ConfigError("threshold options: lambda_ema must lie in [0,1]");
    }
    if (tau0_override > 1.0) throw ConfigError("threshold options: tau0 above 1");
  }
};

inline std::vector<double> max_norm(std::span<const double> values) {
  if (values.empty()) throw DomainError("max_norm: empty input");
  double maximum = 0.0;
  for (double v : values) {
    if (v < 0.0) throw DomainError("max_norm: negative entry");
    maximum = std::max(maximum, v);
  }
  if (maximum == 0.0) throw DomainError("max_norm: all entries zero");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] / maximum;
  return out;
}

// Initial state: the imbalance coefficient of each class seeds its learning
// state, so tail classes start with proportionally lower derived thresholds;
// the scalar tau starts at the uniform prior 1/C.
inline ThresholdState init_state(const std::vector<std::size_t>& labeled_counts,
                                 const ThresholdOptions& opts) {
  opts.validate();
  if (labeled_counts.size() < 2) throw ConfigError("init_state: need at least 2 classes");
  for (std::size_t n : labeled_counts) {
    if (n == 0) throw ConfigError("init_state: zero class count");
  }
  const double c = static_cast<double>(labeled_counts.size());
  ThresholdState state;
  state.ema_coeff = opts.lambda_ema;
  state.global_tau = opts.tau0_override >= 0.0 ? opts.tau0_override : 1.0 / c;
  state.learning_state.resize(labeled_counts.size());
  for (std::size_t i = 0; i < labeled_counts.size(); ++i) {
    double coeff = 1.0;
    if (!opts.uniform_init) {
      coeff = opts.gamma_inverse
                  ? static_cast<double>(labeled_counts[0]) / static_cast<double>(labeled_counts[i])
                  : static_cast<double>(labeled_counts[i]) / static_cast<double>(labeled_counts[0]);
    }
    state.learning_state[i] = std::min(1.0, coeff / c);
  }
  state.uncertainty_state.assign(labeled_counts.size(), 1.0);
  return state;
}

inline ThresholdState init_state(const std::vector<std::size_t>& labeled_counts,
                                 double lambda_ema) {
  ThresholdOptions opts;
  opts.lambda_ema = lambda_ema;
  return init_state(labeled_counts, opts);
}

// One EMA step over an epoch's observations. Classes nobody was predicted as
// keep their previous learning and uncertainty state.
inline ThresholdState update_state(const ThresholdState& state, const EpochObservation& obs) {
  obs.validate(state.class_count());
  const double lambda = state.ema_coeff;
  const double n = static_cast<double>(obs.confidences.size());

  double mean_conf = 0.0;
  std::vector<double> class_mass(state.class_count(), 0.0);
  std::vector<double> class_entropy(state.class_count(), 0.0);
  std::vector<std::size_t> class_seen(state.class_count(), 0);
  for (std::size_t i = 0; i < obs.confidences.size(); ++i) {
    const auto c = obs.predicted_classes[i];
    mean_conf += obs.confidences[i];
    class_mass[c] += obs.confidences[i];
    class_entropy[c] += obs.norm_entropies[i];
    ++class_seen[c];
  }
  mean_conf /= n;

  ThresholdState next = state;
  next.epoch = state.epoch + 1;
  next.global_tau = lambda * state.global_tau + (1.0 - lambda) * mean_conf;
  for (std::size_t c = 0; c < state.class_count(); ++c) {
    next.learning_state[c] =
        lambda * state.learning_state[c] + (1.0 - lambda) * (class_mass[c] / n);
    if (class_seen[c] > 0) {
      next.uncertainty_state[c] =
          lambda * state.uncertainty_state[c] +
          (1.0 - lambda) * (class_entropy[c] / static_cast<double>(class_seen[c]));
    }
  }
  return next;
}

// Per-class thresholds: confidence gate MaxNorm(p~_t)(c) * tau_t and the
// uncertainty modulation MaxNorm(u~_t)(c). Cached until the next update.
inline std::pair<const std::vector<double>&, const std::vector<double>&> derive_thresholds(
    ThresholdState& state) {
  state.class_tau = max_norm(state.learning_state);
  for (auto& v : state.class_tau) v *= state.global_tau;
  state.class_unc_norm = max_norm(state.uncertainty_state);
  state.derived_epoch = state.epoch;
  return {state.class_tau, state.class_unc_norm};
}

}  // namespace udts
