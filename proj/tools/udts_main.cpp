#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "udts/udts.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes: 0 success, 1 usage, 2 configuration, 3 data/format, 4 numeric.
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
};

fs::path resolve_out_dir(const CommonArgs& args) {
  const char* env = std::getenv("UDTS_OUT_DIR");
  fs::path dir = (env != nullptr && *env != '\0') ? fs::path(env) : fs::path(args.out_dir);
  fs::create_directories(dir);
  return dir;
}

udts::ExperimentConfig load_config(const CommonArgs& args) {
  udts::ExperimentConfig cfg = udts::parse_config(args.config_path);
  if (args.seed) cfg.train.seed = *args.seed;
  if (args.mode) cfg.train.mode = udts::run_mode_from(*args.mode);
  cfg.validate();
  return cfg;
}

json json_metric(double value) {
  if (!udts::is_defined(value)) return nullptr;
  return value;
}

json config_echo(const udts::ExperimentConfig& cfg) {
  json j;
  j["data"] = {{"kind", udts::to_string(cfg.data.kind)},
               {"feature_dim", cfg.data.feature_dim},
               {"classes", cfg.data.labeled.class_count},
               {"labeled_head", cfg.data.labeled.head_count},
               {"labeled_gamma", cfg.data.labeled.imbalance_ratio},
               {"unlabeled_head", cfg.data.unlabeled.head_count},
               {"unlabeled_gamma", cfg.data.unlabeled.imbalance_ratio},
               {"test_per_class", cfg.data.test_per_class},
               {"separation", cfg.data.separation},
               {"spread", cfg.data.spread},
               {"seed", cfg.data.seed},
               {"path", cfg.dataset_path}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"inner_steps", cfg.train.inner_steps},
                {"hidden_sizes", cfg.train.hidden_sizes},
                {"dropout_rate", cfg.train.dropout_rate},
                {"learning_rate", cfg.train.sgd.learning_rate},
                {"momentum", cfg.train.sgd.momentum},
                {"weight_decay", cfg.train.sgd.weight_decay},
                {"batch_size", cfg.train.sgd.batch_size},
                {"mode", udts::to_string(cfg.train.mode)},
                {"fixed_threshold", cfg.train.fixed_confidence_threshold},
                {"seed", cfg.train.seed},
                {"class_weighting", udts::to_string(cfg.train.class_weighting)}};
  j["mc"] = {{"passes", cfg.train.mc.passes}, {"dropout_rate", cfg.train.mc.dropout_rate}};
  j["gate"] = {{"metric", udts::to_string(cfg.train.gate.uncertainty_metric)},
               {"per_class_modulation", cfg.train.gate.per_class_unc_modulation},
               {"score_ranking", cfg.train.gate.score_ranking},
               {"score_beta", cfg.train.gate.score_beta},
               {"score_keep_fraction", cfg.train.gate.score_keep_fraction},
               {"unc_threshold", cfg.train.gate.unc_threshold_override}};
  j["loss"] = {{"unlabeled_weight", cfg.train.loss.unlabeled_weight},
               {"uncertainty_weight", cfg.train.loss.uncertainty_loss_weight},
               {"downweight_by_uncertainty", cfg.train.loss.downweight_by_uncertainty}};
  j["threshold"] = {{"lambda_ema", cfg.train.threshold.lambda_ema},
                    {"gamma_inverse", cfg.train.threshold.gamma_inverse},
                    {"tau0", cfg.train.threshold.tau0_override},
                    {"uniform_init", cfg.train.threshold.uniform_init}};
  j["sweep"] = {{"passes", cfg.sweep.passes},
                {"repeats", cfg.sweep.repeats},
                {"probe_samples", cfg.sweep.probe_samples}};
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw udts::IoError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw udts::IoError("write failed: " + path.string());
}

int cmd_gen_data(const CommonArgs& args) {
  const udts::ExperimentConfig cfg = load_config(args);
  const fs::path out = resolve_out_dir(args);
  const udts::SemiDataset dataset = udts::generate_synthetic(cfg.data);
  const fs::path target = out / cfg.dataset_path;
  udts::save_dataset_file(target.string(), dataset);
  std::cout << "wrote " << target.string() << " (labeled " << dataset.labeled_labels().size()
            << ", unlabeled " << dataset.unlabeled_features().rows << ", test "
            << dataset.test_labels().size() << ", classes " << dataset.class_count() << ")\n";
  return 0;
}

int cmd_train(const CommonArgs& args, const std::string& resume_path) {
  const udts::ExperimentConfig cfg = load_config(args);
  const fs::path out = resolve_out_dir(args);
  const fs::path dataset_path = out / cfg.dataset_path;
  if (!fs::exists(dataset_path)) {
    throw udts::IoError("dataset file not found: " + dataset_path.string() +
                        " (run gen-data first)");
  }
  const udts::SemiDataset dataset =
      udts::load_dataset_file(dataset_path.string(), udts::LoadMode::full);

  udts::RunState start;
  if (!resume_path.empty()) start = udts::load_checkpoint(resume_path, cfg.train);

  const auto begin = std::chrono::steady_clock::now();
  const udts::RunResult result = udts::run(cfg.train, dataset, std::move(start));
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();

  if (!result.state.records.empty()) {
    udts::write_metrics_csv((out / "metrics.csv").string(), result.state.records,
                            dataset.class_count());
    udts::write_selection_csv((out / "selections.csv").string(), result.state.selection_log,
                              dataset.class_count());
  }
  if (cfg.train.mode == udts::RunMode::udts && !result.state.threshold_log.empty()) {
    udts::write_threshold_csv((out / "thresholds.csv").string(), result.state.threshold_log,
                              dataset.class_count());
  }
  udts::save_checkpoint((out / "checkpoint.bin").string(), cfg.train, result.state);

  json summary;
  summary["subcommand"] = "train";
  summary["config"] = config_echo(cfg);
  summary["seed"] = cfg.train.seed;
  summary["mode"] = udts::to_string(cfg.train.mode);
  summary["epochs_completed"] = result.state.epoch;
  summary["diverged"] = result.diverged;
  if (result.diverged) summary["diverged_epoch"] = result.diverged_epoch;
  if (!result.state.records.empty()) {
    const udts::TrainLogRecord& last = result.state.records.back();
    summary["final"] = {{"top1", json_metric(last.top1)},
                        {"top5", json_metric(last.top5)},
                        {"loss_total", json_metric(last.loss_total)},
                        {"tau", json_metric(last.global_tau)},
                        {"pl_precision", json_metric(last.pl_precision)},
                        {"pl_recall", json_metric(last.pl_recall)}};
  } else {
    summary["final"] = nullptr;
  }
  summary["wall_time_seconds"] = wall;
  write_json(out / "summary.json", summary);

  std::cout << "trained " << result.state.epoch << " epochs in mode "
            << udts::to_string(cfg.train.mode) << "; outputs in " << out.string() << '\n';
  if (result.diverged) {
    std::cerr << "numeric divergence at epoch " << result.diverged_epoch
              << "; state rolled back to last finished epoch\n";
    return kExitNumeric;
  }
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path) {
  const udts::ExperimentConfig cfg = load_config(args);
  const fs::path out = resolve_out_dir(args);
  const udts::RunState state = udts::load_checkpoint(checkpoint_path, cfg.train);
  const fs::path dataset_path = out / cfg.dataset_path;
  if (!fs::exists(dataset_path)) {
    throw udts::IoError("dataset file not found: " + dataset_path.string());
  }
  const udts::SemiDataset dataset =
      udts::load_dataset_file(dataset_path.string(), udts::LoadMode::full);

  const udts::ClassificationResult eval =
      udts::evaluate(state.model, dataset.test_features(), dataset.test_labels());
  std::cout << "epochs_completed " << state.epoch << '\n';
  std::cout << "top1 " << udts::format_metric(eval.top1) << '\n';
  std::cout << "top5 " << udts::format_metric(eval.top5) << '\n';
  std::cout << "macro_recall " << udts::format_metric(eval.macro_recall) << '\n';
  for (std::size_t c = 0; c < eval.class_recall.size(); ++c) {
    std::cout << "recall_c" << c << ' ' << udts::format_metric(eval.class_recall[c]) << '\n';
  }
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  const udts::ExperimentConfig cfg = load_config(args);
  const fs::path out = resolve_out_dir(args);
  const fs::path dataset_path = out / cfg.dataset_path;
  if (!fs::exists(dataset_path)) {
    throw udts::IoError("dataset file not found: " + dataset_path.string() +
                        " (run gen-data first)");
  }
  const udts::SemiDataset dataset =
      udts::load_dataset_file(dataset_path.string(), udts::LoadMode::full);

  const std::vector<udts::SweepRow> rows = udts::run_sweep(cfg, dataset);
  udts::write_sweep_csv((out / "sweep.csv").string(), rows);
  std::cout << "T,top1,mc_std_error,wall_time\n";
  for (const udts::SweepRow& row : rows) {
    std::cout << row.passes << ',' << udts::format_metric(row.top1) << ','
              << udts::format_metric(row.mc_std_error) << ','
              << udts::format_metric(row.wall_seconds) << '\n';
  }
  return 0;
}

int cmd_report(const std::string& metrics_path) {
  std::ifstream in(metrics_path);
  if (!in.good()) throw udts::IoError("cannot open metrics file: " + metrics_path);
  std::string header;
  if (!std::getline(in, header)) throw udts::FormatError(metrics_path + ": empty metrics file");
  std::string line;
  std::string last;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      last = line;
      ++rows;
    }
  }
  if (rows == 0) throw udts::FormatError(metrics_path + ": no data rows");

  std::vector<std::string> names;
  std::vector<std::string> cells;
  std::stringstream hs(header);
  std::stringstream ls(last);
  for (std::string item; std::getline(hs, item, ',');) names.push_back(item);
  for (std::string item; std::getline(ls, item, ',');) cells.push_back(item);
  if (names.size() != cells.size()) {
    throw udts::FormatError(metrics_path + ": header/row column mismatch");
  }
  std::cout << "epochs " << rows << '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::cout << names[i] << ' ' << cells[i] << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uncertainty-aware dynamic threshold selection laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string resume_path;
  std::string checkpoint_path;
  std::string metrics_path = "metrics.csv";

  auto add_common = [&args](CLI::App* cmd, bool with_overrides) {
    cmd->add_option("--config", args.config_path, "experiment config file")->required();
    cmd->add_option("--out", args.out_dir,
                    "output directory (UDTS_OUT_DIR environment variable wins)");
    if (with_overrides) {
      cmd->add_option("--seed", args.seed, "override the training seed");
      cmd->add_option("--mode", args.mode, "override the run mode");
    }
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic long-tailed dataset file");
  add_common(gen, false);
  CLI::App* train = app.add_subcommand("train", "train on a generated dataset and emit logs");
  add_common(train, true);
  train->add_option("--resume", resume_path, "checkpoint file to continue from");
  CLI::App* eval = app.add_subcommand("eval", "load a checkpoint and print test metrics");
  add_common(eval, true);
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint file to evaluate")->required();
  CLI::App* sweep = app.add_subcommand("sweep-t", "train across MC pass counts and compare");
  add_common(sweep, true);
  CLI::App* report = app.add_subcommand("report", "print the final row of a metrics CSV");
  report->add_option("--metrics", metrics_path, "metrics CSV to summarize");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(args);
    if (train->parsed()) return cmd_train(args, resume_path);
    if (eval->parsed()) return cmd_eval(args, checkpoint_path);
    if (sweep->parsed()) return cmd_sweep(args);
    if (report->parsed()) return cmd_report(metrics_path);
  } catch (const udts::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const udts::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const udts::Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
