#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "udts/dataset.hpp"
#include "udts/errors.hpp"
#include "udts/selector.hpp"
#include "udts/trainer.hpp"

namespace udts {

struct SweepConfig {
  std::vector<std::size_t> passes{2, 6, 10, 12};
  std::size_t repeats = 24;        // repeated estimates per pass count
  std::size_t probe_samples = 96;  // unlabeled rows probed per estimate

  void validate() const {
    if (passes.empty()) throw ConfigError("sweep config: passes list must not be empty");
    for (std::size_t t : passes) {
      if (t < 1) throw ConfigError("sweep config: every pass count must be >= 1");
    }
    if (repeats < 2) throw ConfigError("sweep config: repeats must be >= 2");
    if (probe_samples < 1) throw ConfigError("sweep config: probe_samples must be >= 1");
  }
};

struct ExperimentConfig {
  DatasetSpec data;
  std::string dataset_path = "dataset.bin";  // relative to the output directory
  TrainConfig train;
  SweepConfig sweep;

  ExperimentConfig() {
    data.labeled = {5, 100, 20.0};
    data.unlabeled = {5, 400, 20.0};
    data.seed = 1;
  }

  void validate() const {
    data.validate();
    train.validate();
    sweep.validate();
    if (dataset_path.empty()) throw ConfigError("config: dataset path must not be empty");
  }
};

// ---------------------------------------------------------------------------
// Enum names shared by the config file and the command line.
// ---------------------------------------------------------------------------

inline std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::udts: return "udts";
    case RunMode::fixed_baseline: return "fixed_baseline";
    case RunMode::supervised_only: return "supervised_only";
  }
  throw ConfigError("unknown run mode value");
}

inline RunMode run_mode_from(const std::string& name) {
  if (name == "udts") return RunMode::udts;
  if (name == "fixed_baseline") return RunMode::fixed_baseline;
  if (name == "supervised_only") return RunMode::supervised_only;
  throw ConfigError("unknown mode '" + name +
                    "' (expected udts, fixed_baseline, or supervised_only)");
}

inline std::string to_string(UncertaintyMetric metric) {
  return metric == UncertaintyMetric::entropy ? "entropy" : "std";
}

inline UncertaintyMetric metric_from(const std::string& name) {
  if (name == "entropy") return UncertaintyMetric::entropy;
  if (name == "std") return UncertaintyMetric::std_dev;
  throw ConfigError("unknown metric '" + name + "' (expected entropy or std)");
}

inline std::string to_string(GeneratorKind kind) {
  return kind == GeneratorKind::gaussian_blobs ? "gaussian_blobs" : "two_moons";
}

inline GeneratorKind generator_from(const std::string& name) {
  if (name == "gaussian_blobs") return GeneratorKind::gaussian_blobs;
  if (name == "two_moons") return GeneratorKind::two_moons_like;
  throw ConfigError("unknown kind '" + name + "' (expected gaussian_blobs or two_moons)");
}

inline std::string to_string(ClassWeighting weighting) {
  return weighting == ClassWeighting::inverse_frequency ? "inverse_frequency" : "uniform";
}

inline ClassWeighting weighting_from(const std::string& name) {
  if (name == "inverse_frequency") return ClassWeighting::inverse_frequency;
  if (name == "uniform") return ClassWeighting::uniform;
  throw ConfigError("unknown class_weighting '" + name +
                    "' (expected inverse_frequency or uniform)");
}

// ---------------------------------------------------------------------------
// INI-style parsing: [section] headers, key = value lines, # or ; comments,
// last assignment wins, unknown sections and keys rejected with their line.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

struct ConfigCursor {
  std::string source;
  std::size_t line = 0;
  std::string key;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(source + " line " + std::to_string(line) + ": key '" + key + "': " + what);
  }
};

inline double parse_double(const std::string& value, const ConfigCursor& at) {
  const std::string v = trim(value);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) at.fail("expected a number, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_u64(const std::string& value, const ConfigCursor& at) {
  const std::string v = trim(value);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    at.fail("expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

inline std::size_t parse_size(const std::string& value, const ConfigCursor& at) {
  return static_cast<std::size_t>(parse_u64(value, at));
}

inline bool parse_bool(const std::string& value, const ConfigCursor& at) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  at.fail("expected a boolean, got '" + v + "'");
}

inline std::vector<std::size_t> parse_size_list(const std::string& value, const ConfigCursor& at) {
  std::vector<std::size_t> out;
  std::stringstream stream(value);
  std::string item;
  while (std::getline(stream, item, ',')) {
    out.push_back(parse_size(item, at));
  }
  if (out.empty()) at.fail("expected a comma-separated list of integers");
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  std::optional<double> mc_dropout;  // mirrors the training dropout unless set

  detail::ConfigCursor at;
  at.source = source;
  using Handler = std::function<void(const std::string&)>;
  const std::map<std::string, Handler> handlers = {
      {"data.kind", [&](const std::string& v) { cfg.data.kind = generator_from(detail::trim(v)); }},
      {"data.feature_dim", [&](const std::string& v) { cfg.data.feature_dim = detail::parse_size(v, at); }},
      {"data.classes",
       [&](const std::string& v) {
         const std::size_t c = detail::parse_size(v, at);
         cfg.data.labeled.class_count = c;
         cfg.data.unlabeled.class_count = c;
       }},
      {"data.labeled_head", [&](const std::string& v) { cfg.data.labeled.head_count = detail::parse_size(v, at); }},
      {"data.labeled_gamma", [&](const std::string& v) { cfg.data.labeled.imbalance_ratio = detail::parse_double(v, at); }},
      {"data.unlabeled_head", [&](const std::string& v) { cfg.data.unlabeled.head_count = detail::parse_size(v, at); }},
      {"data.unlabeled_gamma", [&](const std::string& v) { cfg.data.unlabeled.imbalance_ratio = detail::parse_double(v, at); }},
      {"data.test_per_class", [&](const std::string& v) { cfg.data.test_per_class = detail::parse_size(v, at); }},
      {"data.separation", [&](const std::string& v) { cfg.data.separation = detail::parse_double(v, at); }},
      {"data.spread", [&](const std::string& v) { cfg.data.spread = detail::parse_double(v, at); }},
      {"data.seed", [&](const std::string& v) { cfg.data.seed = detail::parse_u64(v, at); }},
      {"data.path", [&](const std::string& v) { cfg.dataset_path = detail::trim(v); }},

      {"train.epochs", [&](const std::string& v) { cfg.train.epochs = detail::parse_size(v, at); }},
      {"train.inner_steps", [&](const std::string& v) { cfg.train.inner_steps = detail::parse_size(v, at); }},
      {"train.hidden_sizes", [&](const std::string& v) { cfg.train.hidden_sizes = detail::parse_size_list(v, at); }},
      {"train.dropout_rate", [&](const std::string& v) { cfg.train.dropout_rate = detail::parse_double(v, at); }},
      {"train.learning_rate", [&](const std::string& v) { cfg.train.sgd.learning_rate = detail::parse_double(v, at); }},
      {"train.momentum", [&](const std::string& v) { cfg.train.sgd.momentum = detail::parse_double(v, at); }},
      {"train.weight_decay", [&](const std::string& v) { cfg.train.sgd.weight_decay = detail::parse_double(v, at); }},
      {"train.batch_size", [&](const std::string& v) { cfg.train.sgd.batch_size = detail::parse_size(v, at); }},
      {"train.mode", [&](const std::string& v) { cfg.train.mode = run_mode_from(detail::trim(v)); }},
      {"train.fixed_threshold", [&](const std::string& v) { cfg.train.fixed_confidence_threshold = detail::parse_double(v, at); }},
      {"train.seed", [&](const std::string& v) { cfg.train.seed = detail::parse_u64(v, at); }},
      {"train.class_weighting", [&](const std::string& v) { cfg.train.class_weighting = weighting_from(detail::trim(v)); }},

      {"mc.passes", [&](const std::string& v) { cfg.train.mc.passes = detail::parse_size(v, at); }},
      {"mc.dropout_rate", [&](const std::string& v) { mc_dropout = detail::parse_double(v, at); }},

      {"gate.metric", [&](const std::string& v) { cfg.train.gate.uncertainty_metric = metric_from(detail::trim(v)); }},
      {"gate.per_class_modulation", [&](const std::string& v) { cfg.train.gate.per_class_unc_modulation = detail::parse_bool(v, at); }},
      {"gate.score_ranking", [&](const std::string& v) { cfg.train.gate.score_ranking = detail::parse_bool(v, at); }},
      {"gate.score_beta", [&](const std::string& v) { cfg.train.gate.score_beta = detail::parse_double(v, at); }},
      {"gate.score_keep_fraction", [&](const std::string& v) { cfg.train.gate.score_keep_fraction = detail::parse_double(v, at); }},
      {"gate.unc_threshold", [&](const std::string& v) { cfg.train.gate.unc_threshold_override = detail::parse_double(v, at); }},

      {"loss.unlabeled_weight", [&](const std::string& v) { cfg.train.loss.unlabeled_weight = detail::parse_double(v, at); }},
      {"loss.uncertainty_weight", [&](const std::string& v) { cfg.train.loss.uncertainty_loss_weight = detail::parse_double(v, at); }},
      {"loss.downweight_by_uncertainty", [&](const std::string& v) { cfg.train.loss.downweight_by_uncertainty = detail::parse_bool(v, at); }},

      {"threshold.lambda_ema", [&](const std::string& v) { cfg.train.threshold.lambda_ema = detail::parse_double(v, at); }},
      {"threshold.gamma_inverse", [&](const std::string& v) { cfg.train.threshold.gamma_inverse = detail::parse_bool(v, at); }},
      {"threshold.tau0", [&](const std::string& v) { cfg.train.threshold.tau0_override = detail::parse_double(v, at); }},
      {"threshold.uniform_init", [&](const std::string& v) { cfg.train.threshold.uniform_init = detail::parse_bool(v, at); }},

      {"sweep.passes", [&](const std::string& v) { cfg.sweep.passes = detail::parse_size_list(v, at); }},
      {"sweep.repeats", [&](const std::string& v) { cfg.sweep.repeats = detail::parse_size(v, at); }},
      {"sweep.probe_samples", [&](const std::string& v) { cfg.sweep.probe_samples = detail::parse_size(v, at); }},
  };
  const std::set<std::string> known_sections = {"data", "train", "mc",
                                                "gate", "loss",  "threshold", "sweep"};

  std::string section;
  std::istringstream stream(text);
  std::string raw;
  for (std::size_t line = 1; std::getline(stream, raw); ++line) {
    at.line = line;
    at.key.clear();
    const auto comment = raw.find_first_of("#;");
    if (comment != std::string::npos) raw.erase(comment);
    const std::string stripped = detail::trim(raw);
    if (stripped.empty()) continue;

    if (stripped.front() == '[') {
      if (stripped.back() != ']') {
        throw ConfigError(source + " line " + std::to_string(line) + ": unterminated section header");
      }
      section = detail::trim(stripped.substr(1, stripped.size() - 2));
      if (!known_sections.contains(section)) {
        throw ConfigError(source + " line " + std::to_string(line) + ": unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + " line " + std::to_string(line) + ": expected key = value");
    }
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = stripped.substr(eq + 1);
    if (key.empty()) {
      throw ConfigError(source + " line " + std::to_string(line) + ": empty key name");
    }
    if (section.empty()) {
      throw ConfigError(source + " line " + std::to_string(line) + ": key '" + key +
                        "' appears before any [section]");
    }
    at.key = key;
    const auto handler = handlers.find(section + "." + key);
    if (handler == handlers.end()) {
      throw ConfigError(source + " line " + std::to_string(line) + ": unknown key '" + key +
                        "' in section [" + section + "]");
    }
    handler->second(value);
  }

  cfg.train.mc.dropout_rate = mc_dropout.value_or(cfg.train.dropout_rate);
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw IoError("cannot open config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

}  // namespace udts
