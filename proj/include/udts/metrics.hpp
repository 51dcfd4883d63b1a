#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "udts/errors.hpp"
#include "udts/matrix.hpp"
#include "udts/selector.hpp"
#include "udts/uncertainty.hpp"

namespace udts {

struct ConfusionMatrix {
  std::size_t class_count = 0;
  std::vector<std::size_t> counts;  // row-major, rows = true class, cols = predicted

  explicit ConfusionMatrix(std::size_t c = 0) : class_count(c), counts(c * c, 0) {}
  std::size_t& at(std::size_t truth, std::size_t pred) { return counts[truth * class_count + pred]; }
  std::size_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * class_count + pred];
  }
  std::size_t total() const {
    std::size_t sum = 0;
    for (std::size_t v : counts) sum += v;
    return sum;
  }
  bool operator==(const ConfusionMatrix&) const = default;
};

// Undefined rates (empty denominators) are carried as NaN and emitted as "NA".
inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

inline bool is_defined(double v) { return !std::isnan(v); }

struct ClassificationResult {
  ConfusionMatrix confusion;
  double top1 = 0.0;
  double top5 = 0.0;
  std::vector<double> class_recall;  // NaN for classes absent from truths
  double macro_recall = 0.0;         // mean over defined recalls
};

namespace detail {

// Rank of the true class among the row's probabilities; ties go to the lower
// class index, so the result is platform-independent.
inline std::size_t true_class_rank(std::span<const double> row, std::uint32_t truth) {
  std::size_t rank = 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] > row[truth] || (row[j] == row[truth] && j < truth)) ++rank;
  }
  return rank;
}

}  // namespace detail

inline ClassificationResult compute_classification(const std::vector<std::uint32_t>& preds,
                                                   const std::vector<std::uint32_t>& truths,
                                                   const DenseMatrix& probs) {
  if (preds.size() != truths.size() || probs.rows != preds.size()) {
    throw ShapeError("classification metrics: length mismatch");
  }
  if (preds.empty()) throw ConfigError("classification metrics: no samples");
  const std::size_t classes = probs.cols;

  ClassificationResult result;
  result.confusion = ConfusionMatrix(classes);
  std::size_t top1_hits = 0;
  std::size_t top5_hits = 0;
  const std::size_t k5 = std::min<std::size_t>(5, classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= classes || truths[i] >= classes) {
      throw IndexError("classification metrics: class out of range");
    }
    result.confusion.at(truths[i], preds[i]) += 1;
    const std::size_t rank = detail::true_class_rank(probs.row(i), truths[i]);
    top1_hits += rank < 1;
    top5_hits += rank < k5;
  }
  result.top1 = static_cast<double>(top1_hits) / static_cast<double>(preds.size());
  result.top5 = static_cast<double>(top5_hits) / static_cast<double>(preds.size());

  result.class_recall.assign(classes, kUndefined);
  double recall_sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t row_total = 0;
    for (std::size_t p = 0; p < classes; ++p) row_total += result.confusion.at(c, p);
    if (row_total > 0) {
      result.class_recall[c] =
          static_cast<double>(result.confusion.at(c, c)) / static_cast<double>(row_total);
      recall_sum += result.class_recall[c];
      ++defined;
    }
  }
  result.macro_recall = defined > 0 ? recall_sum / static_cast<double>(defined) : kUndefined;
  return result;
}

struct PseudoLabelQuality {
  double precision = kUndefined;  // NaN when nothing selected
  double recall = 0.0;
  std::vector<double> class_precision;  // by pseudo-label class, NaN when none selected
  std::vector<double> class_recall;     // by true class, NaN when class absent
  std::size_t selected = 0;
  std::size_t correct = 0;
};

inline PseudoLabelQuality pseudo_label_quality(const SelectionOutcome& outcome,
                                               const std::vector<std::uint32_t>& hidden_truths,
                                               std::size_t class_count) {
  PseudoLabelQuality q;
  q.class_precision.assign(class_count, kUndefined);
  q.class_recall.assign(class_count, kUndefined);

  std::vector<std::size_t> selected_per_class(class_count, 0);
  std::vector<std::size_t> correct_per_class(class_count, 0);  // keyed by true class
  for (std::size_t k = 0; k < outcome.selected_indices.size(); ++k) {
    const std::size_t i = outcome.selected_indices[k];
    if (i >= hidden_truths.size()) throw IndexError("pseudo-label quality: index out of range");
    const std::uint32_t pseudo = outcome.pseudo_labels[k];
    ++selected_per_class[pseudo];
    ++q.selected;
    if (pseudo == hidden_truths[i]) {
      ++q.correct;
      ++correct_per_class[hidden_truths[i]];
    }
  }

  std::vector<std::size_t> truth_per_class(class_count, 0);
  for (std::uint32_t y : hidden_truths) {
    if (y >= class_count) throw IndexError("pseudo-label quality: truth out of range");
    ++truth_per_class[y];
  }

  if (q.selected > 0) {
    q.precision = static_cast<double>(q.correct) / static_cast<double>(q.selected);
  }
  q.recall = hidden_truths.empty()
                 ? 0.0
                 : static_cast<double>(q.correct) / static_cast<double>(hidden_truths.size());
  for (std::size_t c = 0; c < class_count; ++c) {
    std::size_t correct_pseudo_c = 0;
    for (std::size_t k = 0; k < outcome.selected_indices.size(); ++k) {
      if (outcome.pseudo_labels[k] == c &&
          hidden_truths[outcome.selected_indices[k]] == outcome.pseudo_labels[k]) {
        ++correct_pseudo_c;
      }
    }
    if (selected_per_class[c] > 0) {
      q.class_precision[c] =
          static_cast<double>(correct_pseudo_c) / static_cast<double>(selected_per_class[c]);
    }
    if (truth_per_class[c] > 0) {
      q.class_recall[c] =
          static_cast<double>(correct_per_class[c]) / static_cast<double>(truth_per_class[c]);
    }
  }
  return q;
}

// One metrics row per epoch; schema identical across run modes.
struct TrainLogRecord {
  std::size_t epoch = 0;
  double loss_supervised = 0.0;
  double loss_unlabeled = 0.0;
  double loss_uncertainty = 0.0;
  double loss_total = 0.0;
  double global_tau = kUndefined;
  std::vector<double> class_tau;
  std::vector<std::size_t> selected_counts;
  double pl_precision = kUndefined;
  double pl_recall = kUndefined;
  double top1 = 0.0;
  double top5 = 0.0;
  std::vector<double> class_recall;
  std::vector<double> class_uncertainty;
};

struct ThresholdLogRecord {
  std::size_t epoch = 0;
  double global_tau = 0.0;
  std::vector<double> learning_state;
  std::vector<double> uncertainty_state;
  std::vector<double> class_tau;
};

struct SelectionLogRecord {
  std::size_t epoch = 0;
  std::vector<std::size_t> selected_counts;
  std::vector<double> class_precision;
  std::size_t rejected_confidence = 0;
  std::size_t rejected_uncertainty = 0;
  std::size_t rejected_both = 0;
  std::size_t dropped_by_ranking = 0;
};

// 6 significant digits; undefined values become the NA sentinel.
inline std::string format_metric(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

namespace detail {

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : path_(path), out_(path) {
    if (!out_) throw IoError("cannot open for writing: " + path);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    if (!out_) throw IoError("write failed: " + path_);
  }

  void close() {
    out_.close();
    if (!out_) throw IoError("close failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

inline void append_class_headers(std::vector<std::string>& header, const char* prefix,
                                 std::size_t class_count) {
  for (std::size_t c = 0; c < class_count; ++c) {
    header.push_back(std::string(prefix) + std::to_string(c));
  }
}

}  // namespace detail

inline std::vector<std::string> metrics_csv_header(std::size_t class_count) {
  std::vector<std::string> header{"epoch",      "loss_sup", "loss_unl",     "loss_unc",
                                  "loss_total", "tau",      "pl_precision", "pl_recall",
                                  "top1",       "top5"};
  detail::append_class_headers(header, "tau_c", class_count);
  detail::append_class_headers(header, "sel_c", class_count);
  detail::append_class_headers(header, "recall_c", class_count);
  detail::append_class_headers(header, "unc_c", class_count);
  return header;
}

inline void write_metrics_csv(const std::string& path, const std::vector<TrainLogRecord>& records,
                              std::size_t class_count) {
  if (records.empty()) throw ConfigError("metrics csv: no records");
  detail::CsvWriter csv(path);
  csv.row(metrics_csv_header(class_count));
  for (const auto& r : records) {
    std::vector<std::string> cells{std::to_string(r.epoch),
                                   format_metric(r.loss_supervised),
                                   format_metric(r.loss_unlabeled),
                                   format_metric(r.loss_uncertainty),
                                   format_metric(r.loss_total),
                                   format_metric(r.global_tau),
                                   format_metric(r.pl_precision),
                                   format_metric(r.pl_recall),
                                   format_metric(r.top1),
                                   format_metric(r.top5)};
    auto push_doubles = [&](const std::vector<double>& vs) {
      for (std::size_t c = 0; c < class_count; ++c) {
        cells.push_back(c < vs.size() ? format_metric(vs[c]) : "NA");
      }
    };
    push_doubles(r.class_tau);
    for (std::size_t c = 0; c < class_count; ++c) {
      cells.push_back(c < r.selected_counts.size() ? std::to_string(r.selected_counts[c]) : "0");
    }
    push_doubles(r.class_recall);
    push_doubles(r.class_uncertainty);
    csv.row(cells);
  }
  csv.close();
}

inline void write_threshold_csv(const std::string& path,
                                const std::vector<ThresholdLogRecord>& records,
                                std::size_t class_count) {
  if (records.empty()) throw ConfigError("threshold csv: no records");
  std::vector<std::string> header{"epoch", "tau"};
  detail::append_class_headers(header, "p_c", class_count);
  detail::append_class_headers(header, "u_c", class_count);
  detail::append_class_headers(header, "tau_c", class_count);
  detail::CsvWriter csv(path);
  csv.row(header);
  for (const auto& r : records) {
    std::vector<std::string> cells{std::to_string(r.epoch), format_metric(r.global_tau)};
    for (const auto* seq : {&r.learning_state, &r.uncertainty_state, &r.class_tau}) {
      for (std::size_t c = 0; c < class_count; ++c) {
        cells.push_back(c < seq->size() ? format_metric((*seq)[c]) : "NA");
      }
    }
    csv.row(cells);
  }
  csv.close();
}

inline void write_selection_csv(const std::string& path,
                                const std::vector<SelectionLogRecord>& records,
                                std::size_t class_count) {
  if (records.empty()) throw ConfigError("selection csv: no records");
  std::vector<std::string> header{"epoch"};
  detail::append_class_headers(header, "sel_c", class_count);
  detail::append_class_headers(header, "prec_c", class_count);
  header.insert(header.end(), {"rej_conf", "rej_unc", "rej_both", "dropped_rank"});
  detail::CsvWriter csv(path);
  csv.row(header);
  for (const auto& r : records) {
    std::vector<std::string> cells{std::to_string(r.epoch)};
    for (std::size_t c = 0; c < class_count; ++c) {
      cells.push_back(c < r.selected_counts.size() ? std::to_string(r.selected_counts[c]) : "0");
    }
    for (std::size_t c = 0; c < class_count; ++c) {
      cells.push_back(c < r.class_precision.size() ? format_metric(r.class_precision[c]) : "NA");
    }
    cells.push_back(std::to_string(r.rejected_confidence));
    cells.push_back(std::to_string(r.rejected_uncertainty));
    cells.push_back(std::to_string(r.rejected_both));
    cells.push_back(std::to_string(r.dropped_by_ranking));
    csv.row(cells);
  }
  csv.close();
}

// Per-sample ensemble statistics, the data behind uncertainty-evolution plots.
inline void write_uncertainty_csv(const std::string& path,
                                  const std::vector<UncertaintyEstimate>& estimates) {
  if (estimates.empty()) throw ConfigError("uncertainty csv: no estimates");
  detail::CsvWriter csv(path);
  csv.row({"sample", "predicted", "confidence", "entropy", "std"});
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    csv.row({std::to_string(i), std::to_string(estimates[i].predicted_class),
             format_metric(estimates[i].confidence), format_metric(estimates[i].entropy),
             format_metric(estimates[i].std_dev)});
  }
  csv.close();
}

}  // namespace udts
