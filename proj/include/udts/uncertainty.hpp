#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "udts/errors.hpp"
#include "udts/matrix.hpp"
#include "udts/mlp.hpp"
#include "udts/rng.hpp"

namespace udts {

struct McConfig {
  std::size_t passes = 10;  // T
  double dropout_rate = 0.5;
  std::uint64_t rng_stream = 0;

  void validate() const {
    if (passes < 1) throw ConfigError("mc config: passes must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
      throw ConfigError("mc config: dropout rate must lie in [0,1)");
    }
  }
};

struct UncertaintyEstimate {
  std::vector<double> mean_probs;
  double entropy = 0.0;
  double std_dev = 0.0;
  std::uint32_t predicted_class = 0;
  double confidence = 0.0;
};

// Natural-log predictive entropy with 0*log 0 := 0. Input must be a probability vector.
inline double predictive_entropy(std::span<const double> mean_probs) {
  double sum = 0.0;
  for (double p : mean_probs) {
    if (p < 0.0) throw DomainError("predictive_entropy: negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw DomainError("predictive_entropy: probabilities must sum to 1");
  double h = 0.0;
  for (double p : mean_probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(0.0, h);
}

// Per-class population standard deviation across passes, averaged over classes.
inline double std_uncertainty(const DenseMatrix& pass_probs) {
  if (pass_probs.rows < 1 || pass_probs.cols < 1) throw ShapeError("std_uncertainty: empty passes");
  const double t = static_cast<double>(pass_probs.rows);
  double acc = 0.0;
  for (std::size_t c = 0; c < pass_probs.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < pass_probs.rows; ++r) mean += pass_probs(r, c);
    mean /= t;
    double var = 0.0;
    for (std::size_t r = 0; r < pass_probs.rows; ++r) {
      const double d = pass_probs(r, c) - mean;
      var += d * d;
    }
    acc += std::sqrt(var / t);
  }
  return acc / static_cast<double>(pass_probs.cols);
}

inline double std_uncertainty(const std::vector<std::vector<double>>& pass_probs) {
  if (pass_probs.empty()) throw ShapeError("std_uncertainty: empty passes");
  DenseMatrix m(pass_probs.size(), pass_probs.front().size());
  for (std::size_t r = 0; r < pass_probs.size(); ++r) {
    if (pass_probs[r].size() != m.cols) throw ShapeError("std_uncertainty: ragged pass rows");
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = pass_probs[r][c];
  }
  return std_uncertainty(m);
}

namespace detail {

// Reduce T pass probability matrices (each rows x C) to per-sample estimates.
inline std::vector<UncertaintyEstimate> reduce_passes(const std::vector<DenseMatrix>& passes) {
  if (passes.empty()) throw ConfigError("reduce_passes: no passes");
  const std::size_t rows = passes.front().rows;
  const std::size_t classes = passes.front().cols;
  for (const auto& p : passes) {
    if (p.rows != rows || p.cols != classes) throw ShapeError("reduce_passes: pass shape mismatch");
  }

  std::vector<UncertaintyEstimate> out(rows);
  DenseMatrix sample_passes(passes.size(), classes);
  for (std::size_t i = 0; i < rows; ++i) {
    auto& est = out[i];
    est.mean_probs.assign(classes, 0.0);
    for (std::size_t t = 0; t < passes.size(); ++t) {
      const auto row = passes[t].row(i);
      for (std::size_t c = 0; c < classes; ++c) {
        est.mean_probs[c] += row[c];
        sample_passes(t, c) = row[c];
      }
    }
    for (auto& v : est.mean_probs) v /= static_cast<double>(passes.size());
    est.entropy = predictive_entropy(est.mean_probs);
    est.std_dev = passes.size() == 1 ? 0.0 : std_uncertainty(sample_passes);
    est.predicted_class = static_cast<std::uint32_t>(argmax_row(est.mean_probs));
    est.confidence = est.mean_probs[est.predicted_class];
  }
  return out;
}

}  // namespace detail

// T stochastic forward passes with dropout active; pass t draws its masks from
// the substream (rng_stream, "mcpass", t), keyed per row so splitting a batch
// cannot change any estimate as long as row offsets are preserved.
inline std::vector<UncertaintyEstimate> mc_estimate(const MlpModel& model, const DenseMatrix& batch,
                                                    const McConfig& cfg, std::size_t row_offset = 0) {
  cfg.validate();
  if (batch.rows == 0) throw ShapeError("mc_estimate: empty batch");

  MlpModel sampler = model;
  sampler.set_dropout(cfg.dropout_rate);

  std::vector<DenseMatrix> passes;
  passes.reserve(cfg.passes);
  for (std::size_t t = 0; t < cfg.passes; ++t) {
    const std::uint64_t pass_stream = derive_stream(cfg.rng_stream, stream_tag("mcpass"), t);
    auto [logits, trace] = forward(sampler, batch, true, pass_stream, row_offset);
    passes.push_back(softmax(logits));
  }
  return detail::reduce_passes(passes);
}

}  // namespace udts
