#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "udts/dataset.hpp"
#include "udts/errors.hpp"
#include "udts/threshold.hpp"
#include "udts/uncertainty.hpp"

namespace udts {

enum class UncertaintyMetric : std::uint8_t { entropy = 0, std_dev = 1 };

struct GateConfig {
  UncertaintyMetric uncertainty_metric = UncertaintyMetric::entropy;
  bool per_class_unc_modulation = false;
  bool score_ranking = false;
  double score_beta = 0.0;
  double score_keep_fraction = 1.0;     // top fraction of gated samples kept when ranking
  double unc_threshold_override = -1.0; // < 0 tracks the dynamic tau_t; 1 disables the gate

  void validate() const {
    if (!std::isfinite(score_beta) || score_beta < 0.0) {
      throw ConfigError("gate config: score_beta must be finite and >= 0");
    }
    if (score_keep_fraction <= 0.0 || score_keep_fraction > 1.0) {
      throw ConfigError("gate config: score_keep_fraction must lie in (0,1]");
    }
    if (unc_threshold_override > 1.0) {
      throw ConfigError("gate config: uncertainty threshold above 1");
    }
  }
};

namespace detail {

// Uncertainty on the [0,1] gate scale: normalized entropy directly; the std
// metric is scaled by 2 (a Bernoulli pass distribution maxes out at std 0.5).
inline double gate_uncertainty(const UncertaintyEstimate& est, const GateConfig& cfg) {
  if (cfg.uncertainty_metric == UncertaintyMetric::entropy) {
    const double c = static_cast<double>(est.mean_probs.size());
    return std::min(1.0, est.entropy / std::log(c));
  }
  return std::min(1.0, 2.0 * est.std_dev);
}

struct GateParts {
  bool uncertainty_ok = false;
  bool confidence_ok = false;
};

inline GateParts gate_parts(const UncertaintyEstimate& est, const ThresholdState& state,
                            const GateConfig& cfg) {
  if (!state.thresholds_current()) {
    throw StateError("gate: thresholds not derived for the current epoch");
  }
  const auto c = est.predicted_class;
  if (c >= state.class_count()) throw IndexError("gate: predicted class out of range");
  const double u_hat = gate_uncertainty(est, cfg);
  double tau_unc = cfg.unc_threshold_override >= 0.0 ? cfg.unc_threshold_override
                                                     : state.global_tau;
  if (cfg.per_class_unc_modulation) tau_unc *= state.class_unc_norm[c];
  return {u_hat <= tau_unc, est.confidence >= state.class_tau[c]};
}

}  // namespace detail

// Two-gate selection rule: certain enough AND confident enough for its class.
inline bool gate_sample(const UncertaintyEstimate& est, const ThresholdState& state,
                        const GateConfig& cfg) {
  cfg.validate();
  const auto parts = detail::gate_parts(est, state, cfg);
  return parts.uncertainty_ok && parts.confidence_ok;
}

struct SelectionOutcome {
  std::vector<std::size_t> selected_indices;
  std::vector<std::uint32_t> pseudo_labels;     // aligned with selected_indices
  std::vector<char> gates;                      // one flag per input estimate
  std::vector<std::size_t> class_counts;        // selected per predicted class
  std::vector<double> class_mean_uncertainty;   // gate-scale uncertainty of selected, 0 if none
  std::size_t rejected_confidence = 0;          // failed the confidence gate only
  std::size_t rejected_uncertainty = 0;         // failed the uncertainty gate only
  std::size_t rejected_both = 0;
  std::size_t dropped_by_ranking = 0;
};

inline SelectionOutcome select_batch(const std::vector<UncertaintyEstimate>& estimates,
                                     const ThresholdState& state, const GateConfig& cfg) {
  cfg.validate();
  if (estimates.empty()) throw ConfigError("select_batch: no estimates");

  SelectionOutcome out;
  out.gates.assign(estimates.size(), 0);
  out.class_counts.assign(state.class_count(), 0);
  out.class_mean_uncertainty.assign(state.class_count(), 0.0);

  std::vector<std::size_t> passed;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const auto parts = detail::gate_parts(estimates[i], state, cfg);
    if (parts.uncertainty_ok && parts.confidence_ok) {
      passed.push_back(i);
    } else if (parts.uncertainty_ok) {
      ++out.rejected_confidence;
    } else if (parts.confidence_ok) {
      ++out.rejected_uncertainty;
    } else {
      ++out.rejected_both;
    }
  }

  if (cfg.score_ranking && !passed.empty()) {
    std::vector<double> score(estimates.size(), 0.0);
    for (std::size_t i : passed) {
      score[i] = estimates[i].confidence - cfg.score_beta * detail::gate_uncertainty(estimates[i], cfg);
    }
    const auto keep = static_cast<std::size_t>(std::floor(
        cfg.score_keep_fraction * static_cast<double>(passed.size()) + 0.5));
    if (keep < passed.size()) {
      std::stable_sort(passed.begin(), passed.end(),
                       [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
      out.dropped_by_ranking = passed.size() - keep;
      passed.resize(keep);
      std::sort(passed.begin(), passed.end());
    }
  }

  for (std::size_t i : passed) {
    out.gates[i] = 1;
    out.selected_indices.push_back(i);
    out.pseudo_labels.push_back(estimates[i].predicted_class);
    out.class_counts[estimates[i].predicted_class] += 1;
    out.class_mean_uncertainty[estimates[i].predicted_class] +=
        detail::gate_uncertainty(estimates[i], cfg);
  }
  for (std::size_t c = 0; c < state.class_count(); ++c) {
    if (out.class_counts[c] > 0) {
      out.class_mean_uncertainty[c] /= static_cast<double>(out.class_counts[c]);
    }
  }
  return out;
}

// One row of the merged training view: either a labeled sample with its true
// label or a selected unlabeled sample with its pseudo-label.
struct MergedSample {
  bool pseudo = false;
  std::size_t row = 0;  // row in the owning feature matrix
  std::uint32_t label = 0;
};

struct MergedView {
  const DenseMatrix* labeled_features = nullptr;
  const DenseMatrix* unlabeled_features = nullptr;
  std::vector<MergedSample> samples;  // labeled block first, then selected

  std::size_t size() const { return samples.size(); }
  std::size_t labeled_size() const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [](const MergedSample& s) { return !s.pseudo; }));
  }

  std::span<const double> features(std::size_t i) const {
    const auto& s = samples.at(i);
    return (s.pseudo ? *unlabeled_features : *labeled_features).row(s.row);
  }
  std::uint32_t label(std::size_t i) const { return samples.at(i).label; }
  bool is_pseudo(std::size_t i) const { return samples.at(i).pseudo; }
};

inline MergedView merge_selected(const TrainView& view, const SelectionOutcome& outcome) {
  MergedView merged;
  merged.labeled_features = view.labeled_features;
  merged.unlabeled_features = view.unlabeled_features;
  merged.samples.reserve(view.labeled_labels->size() + outcome.selected_indices.size());
  for (std::size_t i = 0; i < view.labeled_labels->size(); ++i) {
    merged.samples.push_back({false, i, (*view.labeled_labels)[i]});
  }
  for (std::size_t k = 0; k < outcome.selected_indices.size(); ++k) {
    const std::size_t row = outcome.selected_indices[k];
    if (row >= view.unlabeled_features->rows) {
      throw IndexError("merge_selected: selected index out of range");
    }
    merged.samples.push_back({true, row, outcome.pseudo_labels[k]});
  }
  return merged;
}

}  // namespace udts
