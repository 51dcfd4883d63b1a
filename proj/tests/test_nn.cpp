#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "udts/mlp.hpp"

using namespace udts;

namespace {

DenseMatrix random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  DenseMatrix m(rows, cols);
  RngStream stream(seed);
  for (auto& v : m.values) v = stream.next_normal();
  return m;
}

// Loss the gradient check differentiates: (1/N) sum_i gate_i * w_{y_i} * -log p_{i,y_i},
// evaluated with dropout off so the loss is a deterministic function of the parameters.
double gated_ce_loss(const MlpModel& model, const DenseMatrix& batch,
                     const std::vector<std::uint32_t>& targets,
                     const std::vector<double>& class_weights, const std::vector<char>& gates) {
  auto [logits, trace] = forward(model, batch, false, 0);
  const DenseMatrix probs = softmax(logits);
  double total = 0.0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    if (!gates[i]) continue;
    total += class_weights[targets[i]] * -std::log(std::max(probs(i, targets[i]), kLogFloor));
  }
  return total / static_cast<double>(probs.rows);
}

}  // namespace

TEST_CASE("init_model is deterministic and shape-correct") {
  const MlpModel a = init_model({2, 4, 3}, 7);
  const MlpModel b = init_model({2, 4, 3}, 7);
  CHECK(a == b);

  const MlpModel c = init_model({2, 8, 5}, 3);
  REQUIRE(c.weights.size() == 2);
  CHECK(c.weights[0].rows == 2);
  CHECK(c.weights[0].cols == 8);
  CHECK(c.weights[1].rows == 8);
  CHECK(c.weights[1].cols == 5);
  CHECK(c.biases[0].size() == 8);
  CHECK(c.biases[1].size() == 5);
  for (double v : c.biases[0]) CHECK(v == 0.0);
  CHECK(c.dropout_rates == std::vector<double>{0.5});

  CHECK_THROWS_AS(init_model({2}, 1), ConfigError);
  CHECK_THROWS_AS(init_model({}, 1), ConfigError);
  CHECK_THROWS_AS(init_model({2, 0, 3}, 1), ConfigError);
}

TEST_CASE("init_model weight scale tracks 1/sqrt(fan_in)") {
  const MlpModel m = init_model({64, 256, 4}, 11);
  double sq = 0.0;
  for (double v : m.weights[0].values) sq += v * v;
  const double emp_std = std::sqrt(sq / static_cast<double>(m.weights[0].values.size()));
  CHECK(emp_std == Catch::Approx(1.0 / 8.0).epsilon(0.1));
}

TEST_CASE("forward without dropout is deterministic") {
  const MlpModel model = init_model({3, 6, 4}, 21);
  const DenseMatrix batch = random_batch(5, 3, 99);
  auto [l1, t1] = forward(model, batch, false, 1);
  auto [l2, t2] = forward(model, batch, false, 2);
  CHECK(l1 == l2);
  CHECK(l1.rows == 5);
  CHECK(l1.cols == 4);

  CHECK_THROWS_AS(forward(model, random_batch(2, 4, 1), false, 0), ShapeError);
}

TEST_CASE("dropout_rate 0 with dropout active equals inactive") {
  MlpModel model = init_model({3, 6, 4}, 22);
  model.set_dropout(0.0);
  const DenseMatrix batch = random_batch(4, 3, 5);
  auto [active, t1] = forward(model, batch, true, 77);
  auto [inactive, t2] = forward(model, batch, false, 0);
  CHECK(active == inactive);
}

TEST_CASE("inverted dropout preserves activation expectation over 10000 masks") {
  MlpModel model = init_model({2, 8, 3}, 31);
  model.set_dropout(0.5);
  const DenseMatrix batch = random_batch(1, 2, 12);

  auto [det_logits, det_trace] = forward(model, batch, false, 0);
  const DenseMatrix& reference = det_trace.activations.back();  // hidden layer, post-ReLU

  std::vector<double> mean(reference.values.size(), 0.0);
  const int draws = 10000;
  for (int d = 0; d < draws; ++d) {
    auto [logits, trace] = forward(model, batch, true, derive_stream(1000, d));
    const DenseMatrix& masked = trace.activations.back();
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += masked.values[k];
  }
  for (auto& v : mean) v /= draws;

  for (std::size_t k = 0; k < mean.size(); ++k) {
    if (reference.values[k] < 0.05) continue;
    CHECK(std::abs(mean[k] - reference.values[k]) / reference.values[k] < 0.05);
  }
}

TEST_CASE("masks carry only {0, 1/(1-p)} and rows keep masks across batch splits") {
  MlpModel model = init_model({3, 10, 2}, 41);
  model.set_dropout(0.25);
  const DenseMatrix batch = random_batch(6, 3, 8);
  auto [logits, trace] = forward(model, batch, true, 555);
  for (double m : trace.masks[0].values) {
    CHECK((m == 0.0 || m == Catch::Approx(1.0 / 0.75)));
  }

  // second half of the batch, presented alone with the matching row offset
  DenseMatrix tail(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) tail(i, j) = batch(i + 3, j);
  auto [tail_logits, tail_trace] = forward(model, tail, true, 555, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(tail_logits(i, j) == logits(i + 3, j));
}

TEST_CASE("softmax matches hand-computed rows") {
  DenseMatrix logits(3, 3);
  logits.row(0)[0] = 0.0;
  logits.row(0)[1] = 0.0;
  logits.row(0)[2] = 0.0;
  logits.row(1)[0] = 1000.0;
  logits.row(1)[1] = 0.0;
  logits.row(1)[2] = 0.0;
  logits.row(2)[0] = 1.0;
  logits.row(2)[1] = 2.0;
  logits.row(2)[2] = 3.0;

  const DenseMatrix p = softmax(logits);
  for (std::size_t j = 0; j < 3; ++j) CHECK(p(0, j) == Catch::Approx(1.0 / 3.0).margin(1e-12));
  CHECK(p(1, 0) == Catch::Approx(1.0).margin(1e-9));
  CHECK(p(1, 1) == Catch::Approx(0.0).margin(1e-9));
  // direct evaluation of exp/sum
  CHECK(p(2, 0) == Catch::Approx(0.09003057).margin(1e-5));
  CHECK(p(2, 1) == Catch::Approx(0.24472847).margin(1e-5));
  CHECK(p(2, 2) == Catch::Approx(0.66524096).margin(1e-5));

  DenseMatrix bad(1, 2);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(softmax(bad), NumericError);
}

TEST_CASE("softmax rows sum to one for magnitudes up to 1e3") {
  RngStream stream(7);
  for (int rep = 0; rep < 200; ++rep) {
    DenseMatrix logits(1, 6);
    for (auto& v : logits.values) v = stream.next_normal() * 1e3;
    const DenseMatrix p = softmax(logits);
    double sum = 0.0;
    for (double v : p.values) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("weighted cross entropy hand values") {
  DenseMatrix perfect(2, 3);
  perfect(0, 0) = 1.0;
  perfect(1, 2) = 1.0;
  CHECK(weighted_cross_entropy(perfect, {0, 2}, {1, 1, 1}) == Catch::Approx(0.0).margin(1e-12));

  DenseMatrix uniform(1, 10, 0.1);
  CHECK(weighted_cross_entropy(uniform, {4}, std::vector<double>(10, 1.0)) ==
        Catch::Approx(std::log(10.0)).margin(1e-12));

  DenseMatrix row(1, 3);
  row(0, 0) = 0.7;
  row(0, 1) = 0.2;
  row(0, 2) = 0.1;
  CHECK(weighted_cross_entropy(row, {0}, {2, 1, 1}) == Catch::Approx(0.7133499).margin(1e-6));

  CHECK_THROWS_AS(weighted_cross_entropy(row, {3}, {1, 1, 1}), IndexError);
  CHECK_THROWS_AS(weighted_cross_entropy(row, {0}, {1, 1}), ConfigError);
}

TEST_CASE("all-false gates leave parameters unchanged when weight decay is zero") {
  MlpModel model = init_model({3, 5, 4}, 17);
  const MlpModel before = model;
  const DenseMatrix batch = random_batch(4, 3, 2);
  const std::vector<std::uint32_t> targets{0, 1, 2, 3};

  auto [logits, trace] = forward(model, batch, false, 0);
  const DenseMatrix probs = softmax(logits);

  SgdConfig cfg;
  cfg.weight_decay = 0.0;
  cfg.momentum = 0.9;
  SgdState state = SgdState::zeros_like(model);
  train_step(model, trace, probs, targets, {1, 1, 1, 1}, std::vector<char>(4, 0), cfg, state);
  CHECK(model == before);

  // with weight decay the parameters shrink even with empty gradient
  cfg.weight_decay = 0.01;
  train_step(model, trace, probs, targets, {1, 1, 1, 1}, std::vector<char>(4, 0), cfg, state);
  CHECK(model.weights[0](0, 0) != before.weights[0](0, 0));
}

TEST_CASE("vanilla SGD applies -lr * g exactly") {
  MlpModel model = init_model({2, 3}, 5);  // single layer: logits = x W + b
  const MlpModel before = model;
  DenseMatrix batch(1, 2);
  batch(0, 0) = 0.3;
  batch(0, 1) = -1.2;
  const std::vector<std::uint32_t> targets{1};

  auto [logits, trace] = forward(model, batch, false, 0);
  const DenseMatrix probs = softmax(logits);

  SgdConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  SgdState state = SgdState::zeros_like(model);
  train_step(model, trace, probs, targets, {1, 1, 1}, {1}, cfg, state);

  // dL/dlogits = p - onehot(1); dW = x^T dlogits
  for (std::size_t j = 0; j < 3; ++j) {
    const double dlogit = probs(0, j) - (j == 1 ? 1.0 : 0.0);
    CHECK(model.weights[0](0, j) == Catch::Approx(before.weights[0](0, j) - 0.1 * 0.3 * dlogit).margin(1e-15));
    CHECK(model.weights[0](1, j) == Catch::Approx(before.weights[0](1, j) - 0.1 * -1.2 * dlogit).margin(1e-15));
    CHECK(model.biases[0][j] == Catch::Approx(before.biases[0][j] - 0.1 * dlogit).margin(1e-15));
  }
}

TEST_CASE("backprop matches central finite differences on random [3,5,4] nets") {
  const double eps = 1e-4;
  double worst = 0.0;
  for (int instance = 0; instance < 10; ++instance) {
    MlpModel model = init_model({3, 5, 4}, 100 + instance);
    const DenseMatrix batch = random_batch(6, 3, 200 + instance);
    RngStream stream(300 + instance);
    std::vector<std::uint32_t> targets(6);
    for (auto& t : targets) t = static_cast<std::uint32_t>(stream.next_below(4));
    const std::vector<double> class_weights{1.0, 0.5, 2.0, 1.25};
    std::vector<char> gates(6, 1);
    gates[instance % 6] = 0;  // one masked sample per net

    auto [logits, trace] = forward(model, batch, false, 0);
    const DenseMatrix probs = softmax(logits);
    std::vector<double> loss_weights(6, 0.0);
    for (std::size_t i = 0; i < 6; ++i) {
      if (gates[i]) loss_weights[i] = class_weights[targets[i]] / 6.0;
    }
    const Gradients grads = backward_weighted(model, trace, probs, targets, loss_weights);

    auto check_param = [&](double* param, double analytic) {
      const double saved = *param;
      *param = saved + eps;
      const double up = gated_ce_loss(model, batch, targets, class_weights, gates);
      *param = saved - eps;
      const double down = gated_ce_loss(model, batch, targets, class_weights, gates);
      *param = saved;
      const double fd = (up - down) / (2 * eps);
      const double denom = std::max(std::abs(fd), std::abs(analytic));
      if (denom < 1e-7) return;
      const double rel = std::abs(fd - analytic) / denom;
      worst = std::max(worst, rel);
    };

    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      for (std::size_t k = 0; k < model.weights[l].values.size(); ++k) {
        check_param(&model.weights[l].values[k], grads.weights[l].values[k]);
      }
      for (std::size_t k = 0; k < model.biases[l].size(); ++k) {
        check_param(&model.biases[l][k], grads.biases[l][k]);
      }
    }
  }
  INFO("max relative error " << worst);
  CHECK(worst < 1e-3);
}

TEST_CASE("identical seeds produce bit-identical models after several steps") {
  auto run = [] {
    MlpModel model = init_model({3, 8, 4}, 77);
    SgdState state = SgdState::zeros_like(model);
    SgdConfig cfg;
    const DenseMatrix batch = random_batch(8, 3, 4);
    RngStream stream(5);
    std::vector<std::uint32_t> targets(8);
    for (auto& t : targets) t = static_cast<std::uint32_t>(stream.next_below(4));
    for (int step = 0; step < 5; ++step) {
      auto [logits, trace] = forward(model, batch, true, derive_stream(9, step));
      const DenseMatrix probs = softmax(logits);
      train_step(model, trace, probs, targets, {1, 1, 1, 1}, std::vector<char>(8, 1), cfg, state);
    }
    return model;
  };
  CHECK(run() == run());
}

TEST_CASE("stale trace is rejected") {
  MlpModel model = init_model({3, 5, 4}, 1);
  const DenseMatrix batch = random_batch(2, 3, 1);
  auto [logits, trace] = forward(model, batch, false, 0);
  const DenseMatrix probs = softmax(logits);

  MlpModel other = init_model({3, 6, 4}, 2);
  SgdState state = SgdState::zeros_like(other);
  CHECK_THROWS_AS(
      train_step(other, trace, probs, {0, 1}, {1, 1, 1, 1}, std::vector<char>(2, 1), SgdConfig{}, state),
      StateError);
}

TEST_CASE("model file round trip is bit exact") {
  const MlpModel model = init_model({4, 7, 3}, 9);
  const auto path = (std::filesystem::temp_directory_path() / "udts_model_rt.bin").string();
  save_model_file(path, model);
  const MlpModel loaded = load_model_file(path);
  CHECK(loaded == model);
  std::filesystem::remove(path);
}
