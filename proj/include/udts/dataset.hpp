#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "udts/errors.hpp"
#include "udts/io.hpp"
#include "udts/matrix.hpp"
#include "udts/rng.hpp"

namespace udts {

// Long-tailed class profile: head count n_1 and head/tail ratio gamma.
struct ClassProfile {
  std::size_t class_count = 0;
  std::size_t head_count = 0;
  double imbalance_ratio = 1.0;
};

// Exponential profile n_c = round(n_1 * gamma^(-c/(C-1))), round half up, clamped to >= 1.
inline std::vector<std::size_t> class_counts(const ClassProfile& profile) {
  if (profile.class_count < 2) throw ConfigError("class_counts: need at least 2 classes");
  if (profile.imbalance_ratio < 1.0) throw ConfigError("class_counts: imbalance ratio must be >= 1");
  if (profile.head_count < profile.class_count) {
    throw ConfigError("class_counts: head count smaller than class count");
  }
  std::vector<std::size_t> counts(profile.class_count);
  const double denom = static_cast<double>(profile.class_count - 1);
  for (std::size_t c = 0; c < profile.class_count; ++c) {
    const double raw = static_cast<double>(profile.head_count) *
                       std::pow(profile.imbalance_ratio, -static_cast<double>(c) / denom);
    counts[c] = static_cast<std::size_t>(std::max(1.0, std::floor(raw + 0.5)));
  }
  return counts;
}

enum class GeneratorKind : std::uint8_t { gaussian_blobs = 0, two_moons_like = 1 };

struct DatasetSpec {
  GeneratorKind kind = GeneratorKind::gaussian_blobs;
  std::size_t feature_dim = 2;
  ClassProfile labeled;
  ClassProfile unlabeled;
  std::size_t test_per_class = 100;
  double separation = 4.0;
  double spread = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (feature_dim < 1) throw ConfigError("dataset spec: feature dim must be >= 1");
    if (labeled.class_count != unlabeled.class_count) {
      throw ConfigError("dataset spec: labeled/unlabeled class counts differ");
    }
    if (labeled.class_count < 2) throw ConfigError("dataset spec: need at least 2 classes");
    if (separation <= 0.0) throw ConfigError("dataset spec: separation must be positive");
    if (spread <= 0.0) throw ConfigError("dataset spec: spread must be positive");
    if (test_per_class < 1) throw ConfigError("dataset spec: test_per_class must be >= 1");
  }
};

enum class LoadMode : std::uint8_t { full = 0, training_only = 1 };

// What the training loop is allowed to see: no ground truth for unlabeled rows.
struct TrainView {
  const DenseMatrix* labeled_features = nullptr;
  const std::vector<std::uint32_t>* labeled_labels = nullptr;
  const DenseMatrix* unlabeled_features = nullptr;
  std::vector<std::size_t> labeled_class_counts;
};

class SemiDataset {
 public:
  SemiDataset() = default;
  SemiDataset(std::size_t feature_dim, std::size_t class_count, DenseMatrix labeled_features,
              std::vector<std::uint32_t> labeled_labels, DenseMatrix unlabeled_features,
              std::vector<std::uint32_t> hidden_labels, DenseMatrix test_features,
              std::vector<std::uint32_t> test_labels, bool has_hidden_truth)
      : feature_dim_(feature_dim),
        class_count_(class_count),
        labeled_features_(std::move(labeled_features)),
        labeled_labels_(std::move(labeled_labels)),
        unlabeled_features_(std::move(unlabeled_features)),
        hidden_labels_(std::move(hidden_labels)),
        test_features_(std::move(test_features)),
        test_labels_(std::move(test_labels)),
        has_hidden_truth_(has_hidden_truth) {
    check_shapes();
  }

  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t class_count() const { return class_count_; }

  const DenseMatrix& labeled_features() const { return labeled_features_; }
  const std::vector<std::uint32_t>& labeled_labels() const { return labeled_labels_; }
  const DenseMatrix& unlabeled_features() const { return unlabeled_features_; }
  const DenseMatrix& test_features() const { return test_features_; }
  const std::vector<std::uint32_t>& test_labels() const { return test_labels_; }

  bool has_hidden_truth() const { return has_hidden_truth_; }

  // Evaluation-only accessor; a dataset loaded for training cannot reach the labels.
  const std::vector<std::uint32_t>& hidden_truth_for_evaluation() const {
    if (!has_hidden_truth_) {
      throw CapabilityError("hidden ground truth not available in this load mode");
    }
    return hidden_labels_;
  }

  TrainView train_view() const {
    TrainView view;
    view.labeled_features = &labeled_features_;
    view.labeled_labels = &labeled_labels_;
    view.unlabeled_features = &unlabeled_features_;
    view.labeled_class_counts = per_class_counts(labeled_labels_);
    return view;
  }

  std::vector<std::size_t> labeled_counts() const { return per_class_counts(labeled_labels_); }
  std::vector<std::size_t> test_counts() const { return per_class_counts(test_labels_); }
  std::vector<std::size_t> unlabeled_counts_for_evaluation() const {
    return per_class_counts(hidden_truth_for_evaluation());
  }

  bool operator==(const SemiDataset& other) const {
    return feature_dim_ == other.feature_dim_ && class_count_ == other.class_count_ &&
           labeled_features_ == other.labeled_features_ &&
           labeled_labels_ == other.labeled_labels_ &&
           unlabeled_features_ == other.unlabeled_features_ &&
           hidden_labels_ == other.hidden_labels_ && test_features_ == other.test_features_ &&
           test_labels_ == other.test_labels_ && has_hidden_truth_ == other.has_hidden_truth_;
  }

 private:
  std::vector<std::size_t> per_class_counts(const std::vector<std::uint32_t>& labels) const {
    std::vector<std::size_t> counts(class_count_, 0);
    for (std::uint32_t y : labels) {
      if (y >= class_count_) throw IndexError("label out of range");
      ++counts[y];
    }
    return counts;
  }

  void check_shapes() const {
    if (labeled_features_.cols != feature_dim_ || unlabeled_features_.cols != feature_dim_ ||
        test_features_.cols != feature_dim_) {
      throw ShapeError("dataset sections disagree on feature dim");
    }
    if (labeled_labels_.size() != labeled_features_.rows ||
        test_labels_.size() != test_features_.rows) {
      throw ShapeError("label count does not match feature rows");
    }
    if (has_hidden_truth_ && hidden_labels_.size() != unlabeled_features_.rows) {
      throw ShapeError("hidden label count does not match unlabeled rows");
    }
  }

  std::size_t feature_dim_ = 0;
  std::size_t class_count_ = 0;
  DenseMatrix labeled_features_;
  std::vector<std::uint32_t> labeled_labels_;
  DenseMatrix unlabeled_features_;
  std::vector<std::uint32_t> hidden_labels_;
  DenseMatrix test_features_;
  std::vector<std::uint32_t> test_labels_;
  bool has_hidden_truth_ = false;
};

namespace detail {

// Class centers: regular polygon in the first two dims so adjacent centers sit
// `separation` apart; a line with that pitch when only one dim is available.
inline std::vector<double> class_center(std::size_t c, std::size_t class_count,
                                        std::size_t feature_dim, double separation) {
  std::vector<double> center(feature_dim, 0.0);
  if (feature_dim == 1 || class_count == 2) {
    center[0] = separation * static_cast<double>(c);
    return center;
  }
  const double radius =
      separation / (2.0 * std::sin(std::numbers::pi / static_cast<double>(class_count)));
  const double angle =
      2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(class_count);
  center[0] = radius * std::cos(angle);
  center[1] = radius * std::sin(angle);
  return center;
}

inline void fill_blob_rows(DenseMatrix& out, std::size_t first_row, std::size_t rows,
                           const std::vector<double>& center, double spread, RngStream& stream) {
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = out.row(first_row + r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = center[j] + spread * stream.next_normal();
    }
  }
}

// Interleaved arcs: each class is a half-circle segment rotated and shifted so
// neighbouring classes overlap near the arc tips. Harder than blobs on purpose.
inline void fill_arc_rows(DenseMatrix& out, std::size_t first_row, std::size_t rows, std::size_t c,
                          std::size_t class_count, double separation, double spread,
                          RngStream& stream) {
  const double radius = separation;
  const double rotation = std::numbers::pi * static_cast<double>(c) / static_cast<double>(class_count);
  const double shift = 0.5 * separation * static_cast<double>(c % 2);
  for (std::size_t r = 0; r < rows; ++r) {
    const double theta = std::numbers::pi * stream.next_unit();
    auto row = out.row(first_row + r);
    const double x = radius * std::cos(theta + rotation) + shift;
    const double y = radius * std::sin(theta + rotation) * (c % 2 == 0 ? 1.0 : -1.0);
    row[0] = x + spread * stream.next_normal();
    if (row.size() > 1) row[1] = y + spread * stream.next_normal();
    for (std::size_t j = 2; j < row.size(); ++j) row[j] = spread * stream.next_normal();
  }
}

struct SectionPlan {
  const char* tag;
  std::vector<std::size_t> counts;
};

}  // namespace detail

inline SemiDataset generate_synthetic(const DatasetSpec& spec) {
  spec.validate();
  const std::size_t class_count = spec.labeled.class_count;

  const detail::SectionPlan sections[3] = {
      {"lab", class_counts(spec.labeled)},
      {"ulb", class_counts(spec.unlabeled)},
      {"tst", std::vector<std::size_t>(class_count, spec.test_per_class)},
  };

  DenseMatrix features[3];
  std::vector<std::uint32_t> labels[3];
  for (int s = 0; s < 3; ++s) {
    std::size_t total = 0;
    for (std::size_t n : sections[s].counts) total += n;
    features[s] = DenseMatrix(total, spec.feature_dim);
    labels[s].reserve(total);
    std::size_t row = 0;
    for (std::size_t c = 0; c < class_count; ++c) {
      const std::size_t n = sections[s].counts[c];
      RngStream stream(derive_stream(spec.seed, stream_tag(sections[s].tag), c));
      if (spec.kind == GeneratorKind::gaussian_blobs) {
        const auto center = detail::class_center(c, class_count, spec.feature_dim, spec.separation);
        detail::fill_blob_rows(features[s], row, n, center, spec.spread, stream);
      } else {
        detail::fill_arc_rows(features[s], row, n, c, class_count, spec.separation, spec.spread,
                              stream);
      }
      labels[s].insert(labels[s].end(), n, static_cast<std::uint32_t>(c));
      row += n;
    }
  }

  return SemiDataset(spec.feature_dim, class_count, std::move(features[0]), std::move(labels[0]),
                     std::move(features[1]), std::move(labels[1]), std::move(features[2]),
                     std::move(labels[2]), true);
}

inline constexpr char kDatasetMagic[9] = "UDTSDATA";
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kDatasetFlagHiddenTruth = 1u;

// Layout: magic, version, dim, C, flags, per-class u64 counts for the three
// sections, six u64 absolute section offsets, then the sections themselves
// (features as f64 rows, labels as u32 sequences).
inline void save_dataset_file(const std::string& path, const SemiDataset& dataset) {
  BinaryWriter writer(path);
  writer.write_magic(kDatasetMagic);
  writer.write_u32(kDatasetVersion);
  writer.write_u32(static_cast<std::uint32_t>(dataset.feature_dim()));
  writer.write_u32(static_cast<std::uint32_t>(dataset.class_count()));
  writer.write_u32(dataset.has_hidden_truth() ? kDatasetFlagHiddenTruth : 0u);

  const auto labeled = dataset.labeled_counts();
  std::vector<std::size_t> unlabeled(dataset.class_count(), 0);
  if (dataset.has_hidden_truth()) {
    unlabeled = dataset.unlabeled_counts_for_evaluation();
  } else {
    unlabeled[0] = dataset.unlabeled_features().rows;  // per-class split unknown
  }
  const auto test = dataset.test_counts();
  for (std::size_t n : labeled) writer.write_u64(n);
  for (std::size_t n : unlabeled) writer.write_u64(n);
  for (std::size_t n : test) writer.write_u64(n);

  const std::uint64_t header_end = writer.offset() + 6 * sizeof(std::uint64_t);
  std::uint64_t offsets[6];
  std::uint64_t cursor = header_end;
  const auto f64_bytes = [](const DenseMatrix& m) { return m.values.size() * sizeof(double); };
  offsets[0] = cursor;
  cursor += f64_bytes(dataset.labeled_features());
  offsets[1] = cursor;
  cursor += dataset.labeled_labels().size() * sizeof(std::uint32_t);
  offsets[2] = cursor;
  cursor += f64_bytes(dataset.unlabeled_features());
  offsets[3] = dataset.has_hidden_truth() ? cursor : 0;
  if (dataset.has_hidden_truth()) {
    cursor += dataset.hidden_truth_for_evaluation().size() * sizeof(std::uint32_t);
  }
  offsets[4] = cursor;
  cursor += f64_bytes(dataset.test_features());
  offsets[5] = cursor;
  for (std::uint64_t off : offsets) writer.write_u64(off);

  writer.write_f64_seq(dataset.labeled_features().values);
  writer.write_u32_seq(dataset.labeled_labels());
  writer.write_f64_seq(dataset.unlabeled_features().values);
  if (dataset.has_hidden_truth()) writer.write_u32_seq(dataset.hidden_truth_for_evaluation());
  writer.write_f64_seq(dataset.test_features().values);
  writer.write_u32_seq(dataset.test_labels());
  writer.close();
}

inline SemiDataset load_dataset_file(const std::string& path, LoadMode mode = LoadMode::full) {
  BinaryReader reader(path);
  reader.expect_magic(kDatasetMagic, "dataset");
  const std::uint32_t version = reader.read_u32();
  if (version != kDatasetVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version));
  }
  const std::size_t dim = reader.read_u32();
  const std::size_t class_count = reader.read_u32();
  const std::uint32_t flags = reader.read_u32();
  if (dim < 1 || class_count < 2) throw FormatError("dataset header has degenerate shape");

  auto read_counts = [&] {
    std::vector<std::size_t> counts(class_count);
    for (auto& n : counts) n = reader.read_u64();
    return counts;
  };
  const auto labeled_counts = read_counts();
  const auto unlabeled_counts = read_counts();
  const auto test_counts = read_counts();
  std::uint64_t offsets[6];
  for (auto& off : offsets) off = reader.read_u64();
  (void)offsets;

  auto total = [](const std::vector<std::size_t>& counts) {
    std::size_t sum = 0;
    for (std::size_t n : counts) sum += n;
    return sum;
  };

  auto read_features = [&](std::size_t rows) {
    DenseMatrix m(rows, dim);
    m.values = reader.read_f64_seq(rows * dim);
    return m;
  };
  auto read_labels = [&](std::size_t rows) {
    std::vector<std::uint32_t> labels = reader.read_u32_seq(rows);
    for (std::uint32_t y : labels) {
      if (y >= class_count) throw FormatError("label out of range in dataset file");
    }
    return labels;
  };

  DenseMatrix labeled_features = read_features(total(labeled_counts));
  std::vector<std::uint32_t> labeled_labels = read_labels(labeled_features.rows);
  DenseMatrix unlabeled_features = read_features(total(unlabeled_counts));
  std::vector<std::uint32_t> hidden_labels;
  const bool file_has_truth = (flags & kDatasetFlagHiddenTruth) != 0;
  if (file_has_truth) hidden_labels = read_labels(unlabeled_features.rows);
  DenseMatrix test_features = read_features(total(test_counts));
  std::vector<std::uint32_t> test_labels = read_labels(test_features.rows);

  const bool keep_truth = file_has_truth && mode == LoadMode::full;
  if (!keep_truth) hidden_labels.clear();
  return SemiDataset(dim, class_count, std::move(labeled_features), std::move(labeled_labels),
                     std::move(unlabeled_features), std::move(hidden_labels),
                     std::move(test_features), std::move(test_labels), keep_truth);
}

}  // namespace udts
