#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "udts/dataset.hpp"
#include "udts/errors.hpp"
#include "udts/io.hpp"
#include "udts/losses.hpp"
#include "udts/metrics.hpp"
#include "udts/mlp.hpp"
#include "udts/rng.hpp"
#include "udts/selector.hpp"
#include "udts/threshold.hpp"
#include "udts/uncertainty.hpp"

namespace udts {

enum class RunMode : std::uint8_t { udts = 0, fixed_baseline = 1, supervised_only = 2 };
enum class ClassWeighting : std::uint8_t { inverse_frequency = 0, uniform = 1 };

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t inner_steps = 0;  // 0 means one pass over the merged view per epoch
  std::vector<std::size_t> hidden_sizes{32, 32};
  double dropout_rate = 0.5;
  SgdConfig sgd;
  McConfig mc;
  GateConfig gate;
  LossConfig loss;
  ThresholdOptions threshold;
  ClassWeighting class_weighting = ClassWeighting::inverse_frequency;
  RunMode mode = RunMode::udts;
  double fixed_confidence_threshold = 0.95;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (hidden_sizes.empty()) throw ConfigError("train config: need at least one hidden layer");
    for (std::size_t h : hidden_sizes) {
      if (h < 1) throw ConfigError("train config: hidden sizes must be >= 1");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
      throw ConfigError("train config: dropout_rate must lie in [0,1)");
    }
    if (fixed_confidence_threshold < 0.0 || fixed_confidence_threshold > 1.0) {
      throw ConfigError("train config: fixed_confidence_threshold must lie in [0,1]");
    }
    sgd.validate();
    mc.validate();
    gate.validate();
    threshold.validate();
  }
};

inline std::uint64_t config_fingerprint(const TrainConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  auto mixd = [&mix](double v) { mix(std::bit_cast<std::uint64_t>(v)); };
  // epochs is only the stopping rule; checkpoints stay valid across it.
  mix(cfg.inner_steps);
  mix(cfg.hidden_sizes.size());
  for (std::size_t s : cfg.hidden_sizes) mix(s);
  mixd(cfg.dropout_rate);
  mixd(cfg.sgd.learning_rate);
  mixd(cfg.sgd.momentum);
  mixd(cfg.sgd.weight_decay);
  mix(cfg.sgd.batch_size);
  mix(cfg.mc.passes);
  mixd(cfg.mc.dropout_rate);
  mix(static_cast<std::uint64_t>(cfg.gate.uncertainty_metric));
  mix(cfg.gate.per_class_unc_modulation);
  mix(cfg.gate.score_ranking);
  mixd(cfg.gate.score_beta);
  mixd(cfg.gate.score_keep_fraction);
  mixd(cfg.gate.unc_threshold_override);
  mixd(cfg.loss.unlabeled_weight);
  mix(cfg.loss.class_weights.size());
  for (double w : cfg.loss.class_weights) mixd(w);
  mixd(cfg.loss.uncertainty_loss_weight);
  mix(cfg.loss.downweight_by_uncertainty);
  mixd(cfg.threshold.lambda_ema);
  mix(cfg.threshold.gamma_inverse);
  mixd(cfg.threshold.tau0_override);
  mix(cfg.threshold.uniform_init);
  mix(static_cast<std::uint64_t>(cfg.class_weighting));
  mix(static_cast<std::uint64_t>(cfg.mode));
  mixd(cfg.fixed_confidence_threshold);
  mix(cfg.seed);
  return h;
}

// The selection feeding the next epoch's training view; checkpointed so a
// resumed run trains on exactly the same merged view.
struct PendingSelection {
  std::vector<std::size_t> indices;
  std::vector<std::uint32_t> labels;
  std::vector<double> omegas;

  bool operator==(const PendingSelection&) const = default;
};

struct RunState {
  MlpModel model;
  SgdState sgd;
  ThresholdState thresholds;
  std::size_t epoch = 0;  // completed epochs
  PendingSelection pending;
  std::vector<TrainLogRecord> records;
  std::vector<ThresholdLogRecord> threshold_log;
  std::vector<SelectionLogRecord> selection_log;
};

struct RunResult {
  RunState state;
  bool diverged = false;
  std::size_t diverged_epoch = 0;  // first epoch that failed; state is from before it
  std::vector<EpochObservation> observations;           // per epoch run in this call
  std::vector<std::vector<std::size_t>> selected_sets;  // per epoch run in this call
};

// Deterministic test-time inference: dropout off, argmax prediction.
inline ClassificationResult evaluate(const MlpModel& model, const DenseMatrix& features,
                                     const std::vector<std::uint32_t>& labels) {
  if (features.rows == 0) throw ConfigError("evaluate: empty test split");
  auto [logits, trace] = forward(model, features, false, 0);
  const DenseMatrix probs = softmax(logits);
  std::vector<std::uint32_t> preds(features.rows);
  for (std::size_t i = 0; i < features.rows; ++i) {
    preds[i] = static_cast<std::uint32_t>(argmax_row(probs.row(i)));
  }
  return compute_classification(preds, labels, probs);
}

namespace detail {

inline double normalized_entropy(const UncertaintyEstimate& est) {
  const double c = static_cast<double>(est.mean_probs.size());
  return std::min(1.0, est.entropy / std::log(c));
}

// Confidence-only gate of the fixed-threshold baseline, kept as a fully
// independent path rather than a reparameterized select_batch call.
inline SelectionOutcome fixed_threshold_outcome(const std::vector<UncertaintyEstimate>& estimates,
                                                double threshold, std::size_t class_count) {
  SelectionOutcome out;
  out.gates.assign(estimates.size(), 0);
  out.class_counts.assign(class_count, 0);
  out.class_mean_uncertainty.assign(class_count, 0.0);
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i].confidence >= threshold) {
      out.gates[i] = 1;
      out.selected_indices.push_back(i);
      out.pseudo_labels.push_back(estimates[i].predicted_class);
      out.class_counts[estimates[i].predicted_class] += 1;
      out.class_mean_uncertainty[estimates[i].predicted_class] += normalized_entropy(estimates[i]);
    } else {
      ++out.rejected_confidence;
    }
  }
  for (std::size_t c = 0; c < class_count; ++c) {
    if (out.class_counts[c] > 0) {
      out.class_mean_uncertainty[c] /= static_cast<double>(out.class_counts[c]);
    }
  }
  return out;
}

inline EpochObservation make_observation(const std::vector<UncertaintyEstimate>& estimates) {
  EpochObservation obs;
  obs.confidences.reserve(estimates.size());
  obs.norm_entropies.reserve(estimates.size());
  obs.predicted_classes.reserve(estimates.size());
  for (const auto& est : estimates) {
    obs.confidences.push_back(est.confidence);
    obs.norm_entropies.push_back(normalized_entropy(est));
    obs.predicted_classes.push_back(est.predicted_class);
  }
  return obs;
}

inline std::vector<std::size_t> shuffled_indices(std::size_t count, std::uint64_t stream_seed) {
  std::vector<std::size_t> perm(count);
  for (std::size_t i = 0; i < count; ++i) perm[i] = i;
  RngStream stream(stream_seed);
  for (std::size_t i = count; i > 1; --i) {
    std::swap(perm[i - 1], perm[stream.next_below(i)]);
  }
  return perm;
}

}  // namespace detail

inline RunResult run(const TrainConfig& cfg, const SemiDataset& dataset, RunState start) {
  cfg.validate();
  const std::size_t class_count = dataset.class_count();
  if (class_count < 2) throw ConfigError("run: dataset needs at least 2 classes");
  const TrainView view = dataset.train_view();

  LossConfig loss_cfg = cfg.loss;
  if (loss_cfg.class_weights.empty()) {
    loss_cfg.class_weights = cfg.class_weighting == ClassWeighting::uniform
                                 ? std::vector<double>(class_count, 1.0)
                                 : inverse_frequency_weights(view.labeled_class_counts);
  }
  loss_cfg.validate(class_count);

  RunResult result;
  result.state = std::move(start);
  RunState& state = result.state;
  if (state.epoch == 0 && state.model.layer_count() == 0) {
    std::vector<std::size_t> layers{dataset.feature_dim()};
    layers.insert(layers.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
    layers.push_back(class_count);
    state.model = init_model(layers, derive_stream(cfg.seed, stream_tag("model")));
    state.model.set_dropout(cfg.dropout_rate);
    state.sgd = SgdState::zeros_like(state.model);
    state.thresholds = init_state(view.labeled_class_counts, cfg.threshold);
    derive_thresholds(state.thresholds);
  }
  if (state.model.input_dim() != dataset.feature_dim() ||
      state.model.class_count() != class_count) {
    throw ConfigError("run: model shape does not match dataset");
  }

  const DenseMatrix& unlabeled = *view.unlabeled_features;
  const std::size_t labeled_n = view.labeled_labels->size();

  for (std::size_t epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    const MlpModel model_snapshot = state.model;
    const SgdState sgd_snapshot = state.sgd;
    const ThresholdState threshold_snapshot = state.thresholds;
    const PendingSelection pending_snapshot = state.pending;
    try {
      // 1. SGD over the merged view built by the previous epoch's selection.
      const std::size_t view_size = labeled_n + state.pending.indices.size();
      const auto perm = detail::shuffled_indices(
          view_size, derive_stream(cfg.seed, stream_tag("perm"), epoch));
      const std::size_t chunk = cfg.sgd.batch_size;
      const std::size_t chunks = (view_size + chunk - 1) / chunk;
      const std::size_t steps = cfg.inner_steps == 0 ? chunks : cfg.inner_steps;
      for (std::size_t step = 0; step < steps; ++step) {
        const std::size_t c = step % chunks;
        const std::size_t begin = c * chunk;
        const std::size_t rows = std::min(chunk, view_size - begin);

        DenseMatrix batch(rows, dataset.feature_dim());
        std::vector<std::uint32_t> targets(rows);
        std::vector<bool> pseudo_row(rows);
        std::vector<double> omega_row(rows, 1.0);
        std::size_t labeled_rows = 0;
        std::size_t pseudo_rows = 0;
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t m = perm[begin + r];
          std::span<const double> src;
          if (m < labeled_n) {
            src = view.labeled_features->row(m);
            targets[r] = (*view.labeled_labels)[m];
            ++labeled_rows;
          } else {
            const std::size_t k = m - labeled_n;
            src = unlabeled.row(state.pending.indices[k]);
            targets[r] = state.pending.labels[k];
            pseudo_row[r] = true;
            omega_row[r] = state.pending.omegas[k];
            ++pseudo_rows;
          }
          std::copy(src.begin(), src.end(), batch.row(r).begin());
        }

        std::vector<double> loss_weights(rows, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
          const double w = loss_cfg.class_weights[targets[r]];
          if (pseudo_row[r]) {
            loss_weights[r] =
                (loss_cfg.unlabeled_weight * omega_row[r] * w +
                 loss_cfg.uncertainty_loss_weight) /
                static_cast<double>(pseudo_rows);
          } else {
            loss_weights[r] = w / static_cast<double>(labeled_rows);
          }
        }

        auto [logits, trace] = forward(state.model, batch, true,
                                       derive_stream(cfg.seed, stream_tag("train"), epoch, step));
        const DenseMatrix probs = softmax(logits);
        const Gradients grads =
            backward_weighted(state.model, trace, probs, targets, loss_weights);
        sgd_apply(state.model, grads, cfg.sgd, state.sgd);
      }

      // 2-4. Estimate, select, and stage the next epoch's merged view.
      std::vector<UncertaintyEstimate> estimates;
      SelectionOutcome outcome;
      outcome.gates.assign(unlabeled.rows, 0);
      outcome.class_counts.assign(class_count, 0);
      outcome.class_mean_uncertainty.assign(class_count, 0.0);
      if (cfg.mode != RunMode::supervised_only) {
        McConfig mc_cfg = cfg.mc;
        mc_cfg.rng_stream = derive_stream(cfg.seed, stream_tag("mc"), epoch);
        estimates = mc_estimate(state.model, unlabeled, mc_cfg);
        outcome = cfg.mode == RunMode::udts
                      ? select_batch(estimates, state.thresholds, cfg.gate)
                      : detail::fixed_threshold_outcome(
                            estimates, cfg.fixed_confidence_threshold, class_count);
      }
      state.pending.indices = outcome.selected_indices;
      state.pending.labels = outcome.pseudo_labels;
      state.pending.omegas.assign(outcome.selected_indices.size(), 1.0);
      if (loss_cfg.downweight_by_uncertainty) {
        for (std::size_t k = 0; k < outcome.selected_indices.size(); ++k) {
          state.pending.omegas[k] =
              1.0 - detail::gate_uncertainty(estimates[outcome.selected_indices[k]], cfg.gate);
        }
      }
      result.selected_sets.push_back(outcome.selected_indices);

      // 5. Threshold EMA update.
      if (cfg.mode == RunMode::udts) {
        EpochObservation obs = detail::make_observation(estimates);
        state.thresholds = update_state(state.thresholds, obs);
        derive_thresholds(state.thresholds);
        result.observations.push_back(std::move(obs));
      } else {
        result.observations.emplace_back();
      }

      // 6. Loss bookkeeping and evaluation on the post-step model.
      LossBreakdown parts;
      {
        auto [llogits, ltrace] = forward(state.model, *view.labeled_features, false, 0);
        const DenseMatrix lprobs = softmax(llogits);
        DenseMatrix pseudo_probs(0, class_count);
        std::vector<std::uint32_t> pseudo_targets;
        double unc = 0.0;
        if (cfg.mode != RunMode::supervised_only) {
          auto [ulogits, utrace] = forward(state.model, unlabeled, false, 0);
          const DenseMatrix uprobs = softmax(ulogits);
          pseudo_probs = DenseMatrix(outcome.selected_indices.size(), class_count);
          for (std::size_t k = 0; k < outcome.selected_indices.size(); ++k) {
            const auto row = uprobs.row(outcome.selected_indices[k]);
            std::copy(row.begin(), row.end(), pseudo_probs.row(k).begin());
            pseudo_targets.push_back(outcome.pseudo_labels[k]);
          }
          std::vector<std::uint32_t> predicted_all(unlabeled.rows, 0);
          for (std::size_t i = 0; i < estimates.size(); ++i) {
            predicted_all[i] = estimates[i].predicted_class;
          }
          unc = uncertainty_loss(uprobs, predicted_all, outcome.gates, unlabeled.rows);
        }
        const auto [sup, unl] =
            semi_supervised_ce_parts(lprobs, *view.labeled_labels, pseudo_probs, pseudo_targets,
                                     state.pending.omegas, loss_cfg);
        parts = {sup, unl, unc};
      }
      const double total = total_loss(parts, loss_cfg);

      const ClassificationResult eval =
          evaluate(state.model, dataset.test_features(), dataset.test_labels());

      TrainLogRecord record;
      record.epoch = epoch + 1;
      record.loss_supervised = parts.supervised;
      record.loss_unlabeled = parts.unlabeled;
      record.loss_uncertainty = parts.uncertainty;
      record.loss_total = total;
      if (cfg.mode == RunMode::udts) {
        record.global_tau = state.thresholds.global_tau;
        record.class_tau = state.thresholds.class_tau;
      } else if (cfg.mode == RunMode::fixed_baseline) {
        record.global_tau = cfg.fixed_confidence_threshold;
        record.class_tau.assign(class_count, cfg.fixed_confidence_threshold);
      }
      record.selected_counts = outcome.class_counts;
      record.top1 = eval.top1;
      record.top5 = eval.top5;
      record.class_recall = eval.class_recall;
      record.class_uncertainty.assign(class_count, kUndefined);
      for (std::size_t c = 0; c < class_count; ++c) {
        if (outcome.class_counts[c] > 0) {
          record.class_uncertainty[c] = outcome.class_mean_uncertainty[c];
        }
      }

      SelectionLogRecord sel;
      sel.epoch = epoch + 1;
      sel.selected_counts = outcome.class_counts;
      sel.class_precision.assign(class_count, kUndefined);
      sel.rejected_confidence = outcome.rejected_confidence;
      sel.rejected_uncertainty = outcome.rejected_uncertainty;
      sel.rejected_both = outcome.rejected_both;
      sel.dropped_by_ranking = outcome.dropped_by_ranking;
      if (cfg.mode != RunMode::supervised_only && dataset.has_hidden_truth()) {
        const PseudoLabelQuality quality =
            pseudo_label_quality(outcome, dataset.hidden_truth_for_evaluation(), class_count);
        record.pl_precision = quality.precision;
        record.pl_recall = quality.recall;
        sel.class_precision = quality.class_precision;
      }
      state.records.push_back(std::move(record));
      state.selection_log.push_back(std::move(sel));

      if (cfg.mode == RunMode::udts) {
        ThresholdLogRecord tl;
        tl.epoch = epoch + 1;
        tl.global_tau = state.thresholds.global_tau;
        tl.learning_state = state.thresholds.learning_state;
        tl.uncertainty_state = state.thresholds.uncertainty_state;
        tl.class_tau = state.thresholds.class_tau;
        state.threshold_log.push_back(std::move(tl));
      }

      state.epoch = epoch + 1;
    } catch (const NumericError&) {
      state.model = model_snapshot;
      state.sgd = sgd_snapshot;
      state.thresholds = threshold_snapshot;
      state.pending = pending_snapshot;
      result.diverged = true;
      result.diverged_epoch = epoch;
      break;
    }
  }
  return result;
}

inline RunResult run(const TrainConfig& cfg, const SemiDataset& dataset) {
  return run(cfg, dataset, RunState{});
}

// -------------------------------------------------------------------------
// Checkpointing
// -------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'U', 'D', 'T', 'S', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_f64_vec(BinaryWriter& w, const std::vector<double>& v) {
  w.write_u32(static_cast<std::uint32_t>(v.size()));
  w.write_f64_seq(v);
}

inline std::vector<double> read_f64_vec(BinaryReader& r) {
  return r.read_f64_seq(r.read_u32());
}

inline void write_u64_vec(BinaryWriter& w, const std::vector<std::size_t>& v) {
  w.write_u32(static_cast<std::uint32_t>(v.size()));
  for (std::size_t x : v) w.write_u64(x);
}

inline std::vector<std::size_t> read_u64_vec(BinaryReader& r) {
  std::vector<std::size_t> v(r.read_u32());
  for (auto& x : v) x = r.read_u64();
  return v;
}

inline void write_u32_vec(BinaryWriter& w, const std::vector<std::uint32_t>& v) {
  w.write_u32(static_cast<std::uint32_t>(v.size()));
  w.write_u32_seq(v);
}

inline std::vector<std::uint32_t> read_u32_vec(BinaryReader& r) {
  return r.read_u32_seq(r.read_u32());
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const TrainConfig& cfg,
                            const RunState& state) {
  BinaryWriter w(path);
  w.write_magic(kCheckpointMagic);
  w.write_u32(kCheckpointVersion);
  w.write_u64(config_fingerprint(cfg));
  w.write_u64(state.epoch);

  write_model(w, state.model);
  for (const auto& v : state.sgd.weight_velocity) w.write_f64_seq(v.values);
  for (const auto& v : state.sgd.bias_velocity) w.write_f64_seq(v);

  const ThresholdState& t = state.thresholds;
  w.write_u64(t.epoch);
  w.write_f64(t.global_tau);
  w.write_f64(t.ema_coeff);
  detail::write_f64_vec(w, t.learning_state);
  detail::write_f64_vec(w, t.uncertainty_state);
  w.write_u8(t.thresholds_current() ? 1 : 0);

  detail::write_u64_vec(w, state.pending.indices);
  detail::write_u32_vec(w, state.pending.labels);
  detail::write_f64_vec(w, state.pending.omegas);

  w.write_u32(static_cast<std::uint32_t>(state.records.size()));
  for (const auto& r : state.records) {
    w.write_u64(r.epoch);
    for (double v : {r.loss_supervised, r.loss_unlabeled, r.loss_uncertainty, r.loss_total,
                     r.global_tau, r.pl_precision, r.pl_recall, r.top1, r.top5}) {
      w.write_f64(v);
    }
    detail::write_f64_vec(w, r.class_tau);
    detail::write_u64_vec(w, r.selected_counts);
    detail::write_f64_vec(w, r.class_recall);
    detail::write_f64_vec(w, r.class_uncertainty);
  }
  w.write_u32(static_cast<std::uint32_t>(state.threshold_log.size()));
  for (const auto& r : state.threshold_log) {
    w.write_u64(r.epoch);
    w.write_f64(r.global_tau);
    detail::write_f64_vec(w, r.learning_state);
    detail::write_f64_vec(w, r.uncertainty_state);
    detail::write_f64_vec(w, r.class_tau);
  }
  w.write_u32(static_cast<std::uint32_t>(state.selection_log.size()));
  for (const auto& r : state.selection_log) {
    w.write_u64(r.epoch);
    detail::write_u64_vec(w, r.selected_counts);
    detail::write_f64_vec(w, r.class_precision);
    w.write_u64(r.rejected_confidence);
    w.write_u64(r.rejected_uncertainty);
    w.write_u64(r.rejected_both);
    w.write_u64(r.dropped_by_ranking);
  }
  w.close();
}

inline RunState load_checkpoint(const std::string& path, const TrainConfig& cfg) {
  BinaryReader r(path);
  r.expect_magic(kCheckpointMagic, "checkpoint");
  const std::uint32_t version = r.read_u32();
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t fingerprint = r.read_u64();
  if (fingerprint != config_fingerprint(cfg)) {
    throw FormatError(path + ": checkpoint was produced by a different configuration");
  }

  RunState state;
  state.epoch = r.read_u64();
  state.model = read_model(r);
  state.sgd = SgdState::zeros_like(state.model);
  for (auto& v : state.sgd.weight_velocity) v.values = r.read_f64_seq(v.values.size());
  for (auto& v : state.sgd.bias_velocity) v = r.read_f64_seq(v.size());

  ThresholdState& t = state.thresholds;
  t.epoch = r.read_u64();
  t.global_tau = r.read_f64();
  t.ema_coeff = r.read_f64();
  t.learning_state = detail::read_f64_vec(r);
  t.uncertainty_state = detail::read_f64_vec(r);
  if (r.read_u8() != 0) derive_thresholds(t);

  state.pending.indices = detail::read_u64_vec(r);
  state.pending.labels = detail::read_u32_vec(r);
  state.pending.omegas = detail::read_f64_vec(r);

  state.records.resize(r.read_u32());
  for (auto& rec : state.records) {
    rec.epoch = r.read_u64();
    rec.loss_supervised = r.read_f64();
    rec.loss_unlabeled = r.read_f64();
    rec.loss_uncertainty = r.read_f64();
    rec.loss_total = r.read_f64();
    rec.global_tau = r.read_f64();
    rec.pl_precision = r.read_f64();
    rec.pl_recall = r.read_f64();
    rec.top1 = r.read_f64();
    rec.top5 = r.read_f64();
    rec.class_tau = detail::read_f64_vec(r);
    rec.selected_counts = detail::read_u64_vec(r);
    rec.class_recall = detail::read_f64_vec(r);
    rec.class_uncertainty = detail::read_f64_vec(r);
  }
  state.threshold_log.resize(r.read_u32());
  for (auto& rec : state.threshold_log) {
    rec.epoch = r.read_u64();
    rec.global_tau = r.read_f64();
    rec.learning_state = detail::read_f64_vec(r);
    rec.uncertainty_state = detail::read_f64_vec(r);
    rec.class_tau = detail::read_f64_vec(r);
  }
  state.selection_log.resize(r.read_u32());
  for (auto& rec : state.selection_log) {
    rec.epoch = r.read_u64();
    rec.selected_counts = detail::read_u64_vec(r);
    rec.class_precision = detail::read_f64_vec(r);
    rec.rejected_confidence = r.read_u64();
    rec.rejected_uncertainty = r.read_u64();
    rec.rejected_both = r.read_u64();
    rec.dropped_by_ranking = r.read_u64();
  }
  return state;
}

}  // namespace udts
