#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "udts/dataset.hpp"
#include "udts/metrics.hpp"
#include "udts/rng.hpp"

using namespace udts;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  return cells;
}

DenseMatrix one_hot_probs(const std::vector<std::uint32_t>& preds, std::size_t classes) {
  DenseMatrix m(preds.size(), classes);
  for (std::size_t i = 0; i < preds.size(); ++i) m(i, preds[i]) = 1.0;
  return m;
}

}  // namespace

TEST_CASE("classification on perfect predictions") {
  const std::vector<std::uint32_t> truths{0, 1, 2, 1, 0};
  const auto result = compute_classification(truths, truths, one_hot_probs(truths, 3));
  CHECK(result.top1 == 1.0);
  CHECK(result.top5 == 1.0);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(result.class_recall[c] == 1.0);
    for (std::size_t p = 0; p < 3; ++p) {
      CHECK(result.confusion.at(c, p) == (c == p ? (c == 0 || c == 1 ? 2u : 1u) : 0u));
    }
  }
  CHECK(result.confusion.total() == 5);
  CHECK(result.macro_recall == 1.0);
}

TEST_CASE("classification hand count") {
  const std::vector<std::uint32_t> truths{0, 0, 1};
  const std::vector<std::uint32_t> preds{0, 1, 1};
  const auto result = compute_classification(preds, truths, one_hot_probs(preds, 2));
  CHECK(result.class_recall[0] == Catch::Approx(0.5).margin(1e-12));
  CHECK(result.class_recall[1] == 1.0);
  CHECK(result.top1 == Catch::Approx(2.0 / 3.0).margin(1e-12));
  CHECK(result.confusion.at(0, 1) == 1);

  CHECK_THROWS_AS(compute_classification(preds, {0, 0}, one_hot_probs(preds, 2)), ShapeError);
}

TEST_CASE("top-5 saturates when k reaches the class count") {
  RngStream stream(4);
  DenseMatrix probs(50, 5);
  std::vector<std::uint32_t> truths(50);
  std::vector<std::uint32_t> preds(50);
  for (std::size_t i = 0; i < 50; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      probs(i, c) = -std::log(1.0 - stream.next_unit());
      sum += probs(i, c);
    }
    for (std::size_t c = 0; c < 5; ++c) probs(i, c) /= sum;
    truths[i] = static_cast<std::uint32_t>(stream.next_below(5));
    preds[i] = static_cast<std::uint32_t>(argmax_row(probs.row(i)));
  }
  const auto result = compute_classification(preds, truths, probs);
  CHECK(result.top5 == 1.0);
}

TEST_CASE("top-k ties break toward the lower class index") {
  DenseMatrix probs(2, 3);
  probs(0, 0) = 0.4;
  probs(0, 1) = 0.4;
  probs(0, 2) = 0.2;
  probs(1, 0) = 0.4;
  probs(1, 1) = 0.4;
  probs(1, 2) = 0.2;
  // same tied row; truth 0 wins the tie, truth 1 loses it
  const auto result = compute_classification({0, 0}, {0, 1}, probs);
  CHECK(result.top1 == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("count-weighted per-class recalls reproduce top-1") {
  RngStream stream(9);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t classes = 2 + stream.next_below(6);
    const std::size_t n = 20 + stream.next_below(200);
    std::vector<std::uint32_t> truths(n);
    std::vector<std::uint32_t> preds(n);
    for (std::size_t i = 0; i < n; ++i) {
      truths[i] = static_cast<std::uint32_t>(stream.next_below(classes));
      preds[i] = static_cast<std::uint32_t>(stream.next_below(classes));
    }
    const auto result = compute_classification(preds, truths, one_hot_probs(preds, classes));

    double weighted = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      std::size_t row_total = 0;
      for (std::size_t p = 0; p < classes; ++p) row_total += result.confusion.at(c, p);
      if (row_total > 0) weighted += result.class_recall[c] * static_cast<double>(row_total);
    }
    CHECK(weighted / static_cast<double>(n) == Catch::Approx(result.top1).margin(1e-12));
  }
}

TEST_CASE("absent classes get the undefined sentinel, not zero") {
  const std::vector<std::uint32_t> truths{0, 0, 1};
  const std::vector<std::uint32_t> preds{0, 2, 1};
  const auto result = compute_classification(preds, truths, one_hot_probs(preds, 3));
  CHECK(is_defined(result.class_recall[0]));
  CHECK(is_defined(result.class_recall[1]));
  CHECK_FALSE(is_defined(result.class_recall[2]));
  CHECK(result.macro_recall == Catch::Approx(0.75).margin(1e-12));
  CHECK(format_metric(result.class_recall[2]) == "NA");
}

TEST_CASE("pseudo-label quality counting") {
  std::vector<std::uint32_t> hidden{0, 0, 1, 1, 2, 2};
  SelectionOutcome outcome;
  outcome.selected_indices = {0, 2, 3, 4};
  outcome.pseudo_labels = {0, 1, 0, 2};  // 3 of 4 correct

  const auto q = pseudo_label_quality(outcome, hidden, 3);
  CHECK(q.precision == Catch::Approx(0.75).margin(1e-12));
  CHECK(q.recall == Catch::Approx(0.5).margin(1e-12));
  CHECK(q.selected == 4);
  CHECK(q.correct == 3);
  CHECK(q.class_precision[0] == Catch::Approx(0.5).margin(1e-12));  // one of {0,3} correct
  CHECK(q.class_precision[1] == 1.0);
  CHECK(q.class_precision[2] == 1.0);
  CHECK(q.class_recall[0] == Catch::Approx(0.5).margin(1e-12));
  CHECK(q.class_recall[1] == Catch::Approx(0.5).margin(1e-12));
  CHECK(q.class_recall[2] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("pseudo-label quality degenerate cases") {
  const std::vector<std::uint32_t> hidden{0, 1, 0};
  SelectionOutcome empty;
  const auto none = pseudo_label_quality(empty, hidden, 2);
  CHECK_FALSE(is_defined(none.precision));
  CHECK(none.recall == 0.0);

  SelectionOutcome all;
  all.selected_indices = {0, 1, 2};
  all.pseudo_labels = {0, 1, 0};
  const auto perfect = pseudo_label_quality(all, hidden, 2);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);

  SelectionOutcome bad;
  bad.selected_indices = {5};
  bad.pseudo_labels = {0};
  CHECK_THROWS_AS(pseudo_label_quality(bad, hidden, 2), IndexError);
}

TEST_CASE("pseudo-label precision ignores selection order") {
  RngStream stream(12);
  std::vector<std::uint32_t> hidden(100);
  for (auto& y : hidden) y = static_cast<std::uint32_t>(stream.next_below(4));

  SelectionOutcome outcome;
  for (std::size_t i = 0; i < 40; ++i) {
    outcome.selected_indices.push_back(i);
    outcome.pseudo_labels.push_back(static_cast<std::uint32_t>(stream.next_below(4)));
  }
  const auto base = pseudo_label_quality(outcome, hidden, 4);

  SelectionOutcome reversed;
  for (std::size_t k = outcome.selected_indices.size(); k-- > 0;) {
    reversed.selected_indices.push_back(outcome.selected_indices[k]);
    reversed.pseudo_labels.push_back(outcome.pseudo_labels[k]);
  }
  const auto flipped = pseudo_label_quality(reversed, hidden, 4);
  CHECK(flipped.precision == base.precision);
  CHECK(flipped.recall == base.recall);
  CHECK(flipped.class_precision == base.class_precision);
}

TEST_CASE("quality metrics require the evaluation capability") {
  DatasetSpec spec;
  spec.labeled = {3, 12, 2.0};
  spec.unlabeled = {3, 24, 2.0};
  spec.test_per_class = 4;
  const SemiDataset data = generate_synthetic(spec);
  const auto path = temp_path("udts_metrics_cap.bin");
  save_dataset_file(path, data);
  const SemiDataset stripped = load_dataset_file(path, LoadMode::training_only);

  SelectionOutcome outcome;
  outcome.selected_indices = {0};
  outcome.pseudo_labels = {0};
  CHECK_THROWS_AS(
      pseudo_label_quality(outcome, stripped.hidden_truth_for_evaluation(), 3),
      CapabilityError);
  std::filesystem::remove(path);
}

TEST_CASE("metric formatting uses 6 significant digits and the NA sentinel") {
  CHECK(format_metric(0.123456789) == "0.123457");
  CHECK(format_metric(1234567.0) == "1.23457e+06");
  CHECK(format_metric(0.5) == "0.5");
  CHECK(format_metric(0.0) == "0");
  CHECK(format_metric(kUndefined) == "NA");
}

TEST_CASE("metrics csv is byte deterministic with the documented schema") {
  std::vector<TrainLogRecord> records(2);
  records[0].epoch = 1;
  records[0].loss_supervised = 0.71335;
  records[0].loss_unlabeled = 0.15;
  records[0].loss_uncertainty = 1.0397;
  records[0].loss_total = 1.90305;
  records[0].global_tau = 0.5;
  records[0].class_tau = {0.5, 0.25};
  records[0].selected_counts = {3, 1};
  records[0].pl_precision = 0.75;
  records[0].pl_recall = 0.5;
  records[0].top1 = 0.625;
  records[0].top5 = 1.0;
  records[0].class_recall = {0.8, kUndefined};
  records[0].class_uncertainty = {0.123456789, kUndefined};
  records[1] = records[0];
  records[1].epoch = 2;

  const auto path_a = temp_path("udts_metrics_a.csv");
  const auto path_b = temp_path("udts_metrics_b.csv");
  write_metrics_csv(path_a, records, 2);
  write_metrics_csv(path_b, records, 2);
  const std::string body_a = slurp(path_a);
  CHECK(body_a == slurp(path_b));

  std::istringstream lines(body_a);
  std::string header_line;
  std::getline(lines, header_line);
  const auto header = split_csv_line(header_line);
  const auto expected = metrics_csv_header(2);
  CHECK(header == expected);
  CHECK(header.front() == "epoch");
  CHECK(header.back() == "unc_c1");

  std::string row_line;
  std::getline(lines, row_line);
  const auto cells = split_csv_line(row_line);
  REQUIRE(cells.size() == expected.size());
  CHECK(cells[0] == "1");
  // parse-back at 6 significant digits
  CHECK(std::stod(cells[1]) == Catch::Approx(0.71335).epsilon(1e-5));
  CHECK(std::stod(cells[5]) == Catch::Approx(0.5).epsilon(1e-9));
  const std::size_t unc1_col = expected.size() - 1;
  CHECK(cells[unc1_col] == "NA");
  CHECK(cells[unc1_col - 1] == "0.123457");

  std::filesystem::remove(path_a);
  std::filesystem::remove(path_b);

  CHECK_THROWS_AS(write_metrics_csv("/nonexistent-dir/x.csv", records, 2), IoError);
  CHECK_THROWS_AS(write_metrics_csv(path_a, {}, 2), ConfigError);
}

TEST_CASE("threshold and selection logs carry per-class columns") {
  ThresholdLogRecord t;
  t.epoch = 3;
  t.global_tau = 0.4;
  t.learning_state = {0.3, 0.1};
  t.uncertainty_state = {0.9, 0.8};
  t.class_tau = {0.4, 0.13333};
  const auto tpath = temp_path("udts_thresh.csv");
  write_threshold_csv(tpath, {t}, 2);
  std::istringstream tlines(slurp(tpath));
  std::string theader;
  std::getline(tlines, theader);
  CHECK(split_csv_line(theader) ==
        std::vector<std::string>{"epoch", "tau", "p_c0", "p_c1", "u_c0", "u_c1", "tau_c0",
                                 "tau_c1"});
  std::filesystem::remove(tpath);

  SelectionLogRecord s;
  s.epoch = 3;
  s.selected_counts = {5, 0};
  s.class_precision = {0.8, kUndefined};
  s.rejected_confidence = 7;
  s.rejected_uncertainty = 2;
  s.rejected_both = 1;
  const auto spath = temp_path("udts_sel.csv");
  write_selection_csv(spath, {s}, 2);
  std::istringstream slines(slurp(spath));
  std::string sheader, srow;
  std::getline(slines, sheader);
  std::getline(slines, srow);
  CHECK(split_csv_line(sheader) ==
        std::vector<std::string>{"epoch", "sel_c0", "sel_c1", "prec_c0", "prec_c1", "rej_conf",
                                 "rej_unc", "rej_both", "dropped_rank"});
  CHECK(split_csv_line(srow) ==
        std::vector<std::string>{"3", "5", "0", "0.8", "NA", "7", "2", "1", "0"});
  std::filesystem::remove(spath);
}

TEST_CASE("uncertainty csv dump lists one row per sample") {
  std::vector<UncertaintyEstimate> estimates(2);
  estimates[0].predicted_class = 1;
  estimates[0].confidence = 0.9;
  estimates[0].entropy = 0.3;
  estimates[0].std_dev = 0.05;
  estimates[1].predicted_class = 0;
  estimates[1].confidence = 0.6;
  estimates[1].entropy = 0.9;
  estimates[1].std_dev = 0.2;

  const auto path = temp_path("udts_unc.csv");
  write_uncertainty_csv(path, estimates);
  std::istringstream lines(slurp(path));
  std::string header, row0, row1;
  std::getline(lines, header);
  std::getline(lines, row0);
  std::getline(lines, row1);
  CHECK(split_csv_line(header) ==
        std::vector<std::string>{"sample", "predicted", "confidence", "entropy", "std"});
  CHECK(split_csv_line(row0) == std::vector<std::string>{"0", "1", "0.9", "0.3", "0.05"});
  CHECK(split_csv_line(row1) == std::vector<std::string>{"1", "0", "0.6", "0.9", "0.2"});
  std::filesystem::remove(path);
}
