#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "udts/errors.hpp"
#include "udts/io.hpp"
#include "udts/matrix.hpp"
#include "udts/rng.hpp"

namespace udts {

// Minimal feed-forward classifier: dense layers, ReLU hidden units with
// inverted dropout, linear output head. Small enough to train in seconds yet
// expressive enough to exhibit the confidence/uncertainty dynamics the rest
// of the library studies.

inline constexpr double kLogFloor = 1e-12;  // floor before log(): no -inf on confident misses

struct SgdConfig {
  double learning_rate = 0.03;
  double momentum = 0.99;
  double weight_decay = 0.0005;
  std::size_t batch_size = 64;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("sgd learning_rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("sgd momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("sgd weight_decay must be >= 0");
    if (batch_size == 0) throw ConfigError("sgd batch_size must be >= 1");
  }
};

struct MlpModel {
  std::vector<std::size_t> layer_sizes;   // input dim, hidden dims..., class count
  std::vector<DenseMatrix> weights;       // weights[l]: layer_sizes[l] x layer_sizes[l+1]
  std::vector<std::vector<double>> biases;
  std::vector<double> dropout_rates;      // one per hidden layer, in [0,1)

  std::size_t layer_count() const { return layer_sizes.size(); }
  std::size_t hidden_count() const { return layer_sizes.size() - 2; }
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t class_count() const { return layer_sizes.back(); }

  void set_dropout(double rate) {
    for (auto& r : dropout_rates) r = rate;
  }

  bool all_finite() const {
    for (const auto& w : weights) {
      if (!w.all_finite()) return false;
    }
    for (const auto& b : biases) {
      for (double v : b) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  bool operator==(const MlpModel&) const = default;
};

// Per-layer intermediates retained for backpropagation. activations[l] feeds
// weights[l]; masks hold inverted-dropout factors {0, 1/(1-p)} per hidden
// activation, or stay empty when dropout was inactive for that layer.
struct ForwardTrace {
  std::vector<DenseMatrix> activations;      // activations[0] = input batch
  std::vector<DenseMatrix> pre_activations;  // pre_activations[l] = activations[l] * W_l + b_l
  std::vector<DenseMatrix> masks;            // one slot per hidden layer
  std::size_t batch_rows = 0;

  bool matches(const MlpModel& model) const {
    if (activations.size() != model.layer_count() - 1) return false;
    if (pre_activations.size() != model.layer_count() - 1) return false;
    if (masks.size() != model.hidden_count()) return false;
    for (std::size_t l = 0; l + 1 < model.layer_count(); ++l) {
      if (activations[l].rows != batch_rows) return false;
      if (activations[l].cols != model.layer_sizes[l]) return false;
      if (pre_activations[l].cols != model.layer_sizes[l + 1]) return false;
    }
    return true;
  }
};

inline MlpModel init_model(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw ConfigError("init_model: need at least 2 layer sizes");
  for (std::size_t s : layer_sizes) {
    if (s < 1) throw ConfigError("init_model: layer sizes must be >= 1");
  }
  MlpModel model;
  model.layer_sizes = layer_sizes;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l];
    const std::size_t fan_out = layer_sizes[l + 1];
    DenseMatrix w(fan_in, fan_out);
    RngStream stream(derive_stream(seed, stream_tag("init"), l));
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : w.values) v = stream.next_normal() * scale;
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(fan_out, 0.0);
  }
  model.dropout_rates.assign(layer_sizes.size() - 2, 0.5);
  return model;
}

namespace detail {

// y += x * W (x: rows x in, W: in x out, y: rows x out)
inline void add_matmul(const DenseMatrix& x, const DenseMatrix& w, DenseMatrix& y) {
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.values.data() + i * x.cols;
    double* yi = y.values.data() + i * y.cols;
    for (std::size_t k = 0; k < x.cols; ++k) {
      const double xv = xi[k];
      if (xv == 0.0) continue;
      const double* wk = w.values.data() + k * w.cols;
      for (std::size_t j = 0; j < w.cols; ++j) yi[j] += xv * wk[j];
    }
  }
}

// y += x^T * g (x: rows x in, g: rows x out, y: in x out)
inline void add_matmul_at_b(const DenseMatrix& x, const DenseMatrix& g, DenseMatrix& y) {
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.values.data() + i * x.cols;
    const double* gi = g.values.data() + i * g.cols;
    for (std::size_t k = 0; k < x.cols; ++k) {
      const double xv = xi[k];
      if (xv == 0.0) continue;
      double* yk = y.values.data() + k * y.cols;
      for (std::size_t j = 0; j < g.cols; ++j) yk[j] += xv * gi[j];
    }
  }
}

// y += g * W^T (g: rows x out, W: in x out, y: rows x in)
inline void add_matmul_bt(const DenseMatrix& g, const DenseMatrix& w, DenseMatrix& y) {
  for (std::size_t i = 0; i < g.rows; ++i) {
    const double* gi = g.values.data() + i * g.cols;
    double* yi = y.values.data() + i * y.cols;
    for (std::size_t k = 0; k < w.rows; ++k) {
      const double* wk = w.values.data() + k * w.cols;
      double acc = 0.0;
      for (std::size_t j = 0; j < w.cols; ++j) acc += gi[j] * wk[j];
      yi[k] += acc;
    }
  }
}

}  // namespace detail

// Stochastic pass with per-row dropout streams. The mask stream for row r of
// hidden layer l is derive_stream(rng_stream, row_offset + r, l): rows keep
// their masks when a batch is split, which is what makes MC estimation
// invariant to batch partitioning.
inline std::pair<DenseMatrix, ForwardTrace> forward(const MlpModel& model, const DenseMatrix& batch,
                                                    bool dropout_active, std::uint64_t rng_stream,
                                                    std::size_t row_offset = 0) {
  if (batch.cols != model.input_dim()) {
    throw ShapeError("forward: batch cols " + std::to_string(batch.cols) + " != input dim " +
                     std::to_string(model.input_dim()));
  }
  ForwardTrace trace;
  trace.batch_rows = batch.rows;
  trace.activations.reserve(model.layer_count() - 1);
  trace.pre_activations.reserve(model.layer_count() - 1);
  trace.masks.resize(model.hidden_count());

  DenseMatrix act = batch;
  for (std::size_t l = 0; l + 1 < model.layer_count(); ++l) {
    trace.activations.push_back(act);
    DenseMatrix z(act.rows, model.layer_sizes[l + 1]);
    for (std::size_t i = 0; i < z.rows; ++i) {
      double* zi = z.values.data() + i * z.cols;
      const double* b = model.biases[l].data();
      for (std::size_t j = 0; j < z.cols; ++j) zi[j] = b[j];
    }
    detail::add_matmul(act, model.weights[l], z);
    trace.pre_activations.push_back(z);

    const bool is_hidden = l + 2 < model.layer_count();
    if (!is_hidden) {
      act = std::move(z);
      break;
    }
    // ReLU, then inverted dropout
    DenseMatrix h = std::move(z);
    for (auto& v : h.values) v = v > 0.0 ? v : 0.0;
    const double p = model.dropout_rates[l];
    if (dropout_active && p > 0.0) {
      DenseMatrix mask(h.rows, h.cols);
      const double keep = 1.0 - p;
      const double inv_keep = 1.0 / keep;
      for (std::size_t r = 0; r < h.rows; ++r) {
        RngStream stream(derive_stream(rng_stream, row_offset + r, l));
        double* mr = mask.values.data() + r * mask.cols;
        double* hr = h.values.data() + r * h.cols;
        for (std::size_t j = 0; j < h.cols; ++j) {
          mr[j] = stream.next_bernoulli(keep) ? inv_keep : 0.0;
          hr[j] *= mr[j];
        }
      }
      trace.masks[l] = std::move(mask);
    }
    act = std::move(h);
  }
  return {std::move(act), std::move(trace)};
}

// Row-wise softmax with max subtraction.
inline DenseMatrix softmax(const DenseMatrix& logits) {
  if (!logits.all_finite()) throw NumericError("softmax: non-finite logits");
  DenseMatrix probs(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const double* row = logits.values.data() + i * logits.cols;
    double* out = probs.values.data() + i * probs.cols;
    double mx = row[0];
    for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      out[j] = std::exp(row[j] - mx);
      sum += out[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < logits.cols; ++j) out[j] *= inv;
  }
  return probs;
}

// (1/N) * sum_i w[y_i] * -log(p_{i,y_i}); probabilities floored at kLogFloor.
inline double weighted_cross_entropy(const DenseMatrix& probs,
                                     const std::vector<std::uint32_t>& targets,
                                     const std::vector<double>& class_weights) {
  if (targets.size() != probs.rows) throw ShapeError("weighted_cross_entropy: targets/rows mismatch");
  if (class_weights.size() != probs.cols) {
    throw ConfigError("weighted_cross_entropy: class_weights length must equal class count");
  }
  for (double w : class_weights) {
    if (!(w > 0.0)) throw ConfigError("weighted_cross_entropy: class weights must be > 0");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const std::uint32_t y = targets[i];
    if (y >= probs.cols) {
      throw IndexError("weighted_cross_entropy: target " + std::to_string(y) + " out of range");
    }
    total += class_weights[y] * -std::log(std::max(probs(i, y), kLogFloor));
  }
  return probs.rows == 0 ? 0.0 : total / static_cast<double>(probs.rows);
}

// -------------------------------------------------------------------------
// Backpropagation and SGD
// -------------------------------------------------------------------------

struct Gradients {
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;
};

// Gradient of sum_i loss_weight[i] * -log(p_{i,y_i}) through softmax.
// Per-sample normalization and class/gate weighting are the caller's job,
// folded into loss_weights.
inline Gradients backward_weighted(const MlpModel& model, const ForwardTrace& trace,
                                   const DenseMatrix& probs,
                                   const std::vector<std::uint32_t>& targets,
                                   const std::vector<double>& loss_weights) {
  if (!trace.matches(model) || probs.rows != trace.batch_rows || probs.cols != model.class_count()) {
    throw StateError("backward: trace does not match model/probs shapes");
  }
  if (targets.size() != probs.rows || loss_weights.size() != probs.rows) {
    throw ShapeError("backward: targets/loss_weights length mismatch");
  }

  Gradients grads;
  grads.weights.reserve(model.weights.size());
  grads.biases.reserve(model.biases.size());
  for (std::size_t l = 0; l + 1 < model.layer_count(); ++l) {
    grads.weights.emplace_back(model.layer_sizes[l], model.layer_sizes[l + 1]);
    grads.biases.emplace_back(model.layer_sizes[l + 1], 0.0);
  }

  // dL/dlogits = w_i * (p_i - onehot(y_i))
  DenseMatrix delta(probs.rows, probs.cols);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const double wi = loss_weights[i];
    if (targets[i] >= probs.cols) throw IndexError("backward: target out of range");
    if (wi == 0.0) continue;
    const double* pi = probs.values.data() + i * probs.cols;
    double* di = delta.values.data() + i * delta.cols;
    for (std::size_t j = 0; j < probs.cols; ++j) di[j] = wi * pi[j];
    di[targets[i]] -= wi;
  }

  for (std::size_t l = model.layer_count() - 1; l-- > 0;) {
    detail::add_matmul_at_b(trace.activations[l], delta, grads.weights[l]);
    for (std::size_t i = 0; i < delta.rows; ++i) {
      const double* di = delta.values.data() + i * delta.cols;
      for (std::size_t j = 0; j < delta.cols; ++j) grads.biases[l][j] += di[j];
    }
    if (l == 0) break;

    DenseMatrix prev(delta.rows, model.layer_sizes[l]);
    detail::add_matmul_bt(delta, model.weights[l], prev);
    // back through dropout mask, then ReLU
    const DenseMatrix& mask = trace.masks[l - 1];
    const DenseMatrix& z = trace.pre_activations[l - 1];
    for (std::size_t idx = 0; idx < prev.values.size(); ++idx) {
      double g = prev.values[idx];
      if (!mask.values.empty()) g *= mask.values[idx];
      prev.values[idx] = z.values[idx] > 0.0 ? g : 0.0;
    }
    delta = std::move(prev);
  }
  return grads;
}

// Momentum buffers; one slot per parameter tensor.
struct SgdState {
  std::vector<DenseMatrix> weight_velocity;
  std::vector<std::vector<double>> bias_velocity;

  static SgdState zeros_like(const MlpModel& model) {
    SgdState s;
    for (std::size_t l = 0; l + 1 < model.layer_count(); ++l) {
      s.weight_velocity.emplace_back(model.layer_sizes[l], model.layer_sizes[l + 1]);
      s.bias_velocity.emplace_back(model.layer_sizes[l + 1], 0.0);
    }
    return s;
  }

  bool operator==(const SgdState&) const = default;
};

// v = momentum * v + (g + wd * theta); theta -= lr * v
inline void sgd_apply(MlpModel& model, const Gradients& grads, const SgdConfig& cfg,
                      SgdState& state) {
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    auto& w = model.weights[l].values;
    auto& v = state.weight_velocity[l].values;
    const auto& g = grads.weights[l].values;
    for (std::size_t k = 0; k < w.size(); ++k) {
      v[k] = cfg.momentum * v[k] + g[k] + cfg.weight_decay * w[k];
      w[k] -= cfg.learning_rate * v[k];
    }
    auto& b = model.biases[l];
    auto& vb = state.bias_velocity[l];
    const auto& gb = grads.biases[l];
    for (std::size_t k = 0; k < b.size(); ++k) {
      vb[k] = cfg.momentum * vb[k] + gb[k] + cfg.weight_decay * b[k];
      b[k] -= cfg.learning_rate * vb[k];
    }
  }
  if (!model.all_finite()) throw NumericError("sgd_apply: parameters became non-finite");
}

// One SGD step on the weighted cross-entropy over gated samples: sample i
// contributes gate[i] * class_weights[y_i] / N to the loss weighting.
inline void train_step(MlpModel& model, const ForwardTrace& trace, const DenseMatrix& probs,
                       const std::vector<std::uint32_t>& targets,
                       const std::vector<double>& class_weights,
                       const std::vector<char>& sample_gates, const SgdConfig& cfg,
                       SgdState& state) {
  if (sample_gates.size() != probs.rows) throw ShapeError("train_step: gates length mismatch");
  if (class_weights.size() != model.class_count()) {
    throw ConfigError("train_step: class_weights length must equal class count");
  }
  std::vector<double> loss_weights(probs.rows, 0.0);
  const double inv_n = probs.rows > 0 ? 1.0 / static_cast<double>(probs.rows) : 0.0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    if (!sample_gates[i]) continue;
    if (targets[i] >= model.class_count()) throw IndexError("train_step: target out of range");
    loss_weights[i] = class_weights[targets[i]] * inv_n;
  }
  const Gradients grads = backward_weighted(model, trace, probs, targets, loss_weights);
  sgd_apply(model, grads, cfg, state);
}

// -------------------------------------------------------------------------
// Model serialization (bit-exact round trip)
// -------------------------------------------------------------------------

inline constexpr char kModelMagic[8] = {'U', 'D', 'T', 'S', 'M', 'O', 'D', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;

inline void write_model(BinaryWriter& w, const MlpModel& model) {
  w.write_u32(static_cast<std::uint32_t>(model.layer_sizes.size()));
  for (std::size_t s : model.layer_sizes) w.write_u64(s);
  for (double r : model.dropout_rates) w.write_f64(r);
  for (const auto& weights : model.weights) w.write_f64_seq(weights.values);
  for (const auto& bias : model.biases) w.write_f64_seq(bias);
}

inline MlpModel read_model(BinaryReader& r) {
  const std::uint32_t layer_count = r.read_u32();
  if (layer_count < 2 || layer_count > 64) {
    throw FormatError(r.path() + ": implausible layer count at byte " + std::to_string(r.offset()));
  }
  MlpModel model;
  model.layer_sizes.resize(layer_count);
  for (auto& s : model.layer_sizes) s = r.read_u64();
  model.dropout_rates = r.read_f64_seq(layer_count - 2);
  for (std::size_t l = 0; l + 1 < layer_count; ++l) {
    DenseMatrix w(model.layer_sizes[l], model.layer_sizes[l + 1]);
    w.values = r.read_f64_seq(w.rows * w.cols);
    model.weights.push_back(std::move(w));
  }
  for (std::size_t l = 0; l + 1 < layer_count; ++l) {
    model.biases.push_back(r.read_f64_seq(model.layer_sizes[l + 1]));
  }
  return model;
}

inline void save_model_file(const std::string& path, const MlpModel& model) {
  BinaryWriter w(path);
  w.write_magic(kModelMagic);
  w.write_u32(kModelVersion);
  write_model(w, model);
  w.close();
}

inline MlpModel load_model_file(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kModelMagic, "model");
  const std::uint32_t version = r.read_u32();
  if (version != kModelVersion) {
    throw FormatError(path + ": unsupported model version " + std::to_string(version));
  }
  return read_model(r);
}

}  // namespace udts
