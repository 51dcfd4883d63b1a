#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "udts/config.hpp"
#include "udts/dataset.hpp"
#include "udts/metrics.hpp"
#include "udts/trainer.hpp"
#include "udts/uncertainty.hpp"

namespace udts {

struct SweepRow {
  std::size_t passes = 0;
  double top1 = 0.0;
  double mc_std_error = 0.0;
  double wall_seconds = 0.0;
};

// Mean over probe samples and classes of the standard deviation, across
// `repeats` independent estimates, of the MC class-probability mean.
inline double mc_spread(const MlpModel& model, const DenseMatrix& unlabeled, std::size_t passes,
                        double dropout_rate, std::size_t repeats, std::size_t probe_samples,
                        std::uint64_t seed) {
  if (unlabeled.rows == 0) throw ConfigError("mc_spread: no unlabeled samples");
  if (repeats < 2) throw ConfigError("mc_spread: repeats must be >= 2");
  const std::size_t probe = std::min(probe_samples, unlabeled.rows);
  const std::size_t classes = model.class_count();
  DenseMatrix probe_batch(probe, unlabeled.cols);
  std::copy(unlabeled.values.begin(), unlabeled.values.begin() + probe * unlabeled.cols,
            probe_batch.values.begin());

  McConfig cfg;
  cfg.passes = passes;
  cfg.dropout_rate = dropout_rate;

  std::vector<double> sum(probe * classes, 0.0);
  std::vector<double> sum_sq(probe * classes, 0.0);
  for (std::size_t r = 0; r < repeats; ++r) {
    cfg.rng_stream = derive_stream(seed, stream_tag("sweepmc"), passes, r);
    const auto estimates = mc_estimate(model, probe_batch, cfg);
    for (std::size_t i = 0; i < probe; ++i) {
      for (std::size_t c = 0; c < classes; ++c) {
        const double v = estimates[i].mean_probs[c];
        sum[i * classes + c] += v;
        sum_sq[i * classes + c] += v * v;
      }
    }
  }
  double total = 0.0;
  const double n = static_cast<double>(repeats);
  for (std::size_t k = 0; k < sum.size(); ++k) {
    const double mean = sum[k] / n;
    const double var = std::max(0.0, sum_sq[k] / n - mean * mean);
    total += std::sqrt(var);
  }
  return total / static_cast<double>(sum.size());
}

// One training run per configured pass count. The spread statistic is always
// measured on the network trained at the first pass count in the list, so the
// column reflects only how the estimator tightens with more passes.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const SemiDataset& dataset) {
  cfg.sweep.validate();
  std::vector<SweepRow> rows;
  MlpModel reference;
  for (std::size_t t : cfg.sweep.passes) {
    TrainConfig train_cfg = cfg.train;
    train_cfg.mc.passes = t;

    const auto begin = std::chrono::steady_clock::now();
    const RunResult result = run(train_cfg, dataset);
    const auto end = std::chrono::steady_clock::now();
    if (result.state.records.empty()) throw StateError("run_sweep: run produced no records");
    if (reference.layer_count() == 0) reference = result.state.model;

    SweepRow row;
    row.passes = t;
    row.top1 = result.state.records.back().top1;
    row.mc_std_error =
        mc_spread(reference, *dataset.train_view().unlabeled_features, t,
                  train_cfg.mc.dropout_rate, cfg.sweep.repeats, cfg.sweep.probe_samples,
                  train_cfg.seed);
    row.wall_seconds = std::chrono::duration<double>(end - begin).count();
    rows.push_back(row);
  }
  return rows;
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  detail::CsvWriter out(path);
  out.row({"T", "top1", "mc_std_error", "wall_time"});
  for (const SweepRow& row : rows) {
    out.row({std::to_string(row.passes), format_metric(row.top1),
             format_metric(row.mc_std_error), format_metric(row.wall_seconds)});
  }
  out.close();
}

}  // namespace udts
