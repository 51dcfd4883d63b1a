// Minimal end-to-end use of the library: synthesize a long-tailed dataset,
// train the dynamic-threshold selector against the fixed baseline, and print
// the final records side by side.
#include <cstdio>

#include "udts/udts.hpp"

int main() {
  udts::DatasetSpec data;
  data.kind = udts::GeneratorKind::gaussian_blobs;
  data.feature_dim = 2;
  data.labeled = {5, 100, 20.0};
  data.unlabeled = {5, 400, 20.0};
  data.test_per_class = 200;
  data.separation = 3.5;
  data.seed = 1;
  const udts::SemiDataset dataset = udts::generate_synthetic(data);

  udts::TrainConfig cfg;
  cfg.epochs = 30;
  cfg.hidden_sizes = {32, 32};
  cfg.sgd.momentum = 0.9;
  cfg.class_weighting = udts::ClassWeighting::uniform;
  cfg.seed = 1;

  for (const udts::RunMode mode :
       {udts::RunMode::udts, udts::RunMode::fixed_baseline}) {
    cfg.mode = mode;
    const udts::RunResult result = udts::run(cfg, dataset);
    const udts::TrainLogRecord& last = result.state.records.back();
    std::size_t selected = 0;
    for (const std::size_t n : last.selected_counts) selected += n;
    std::printf("%-14s top1 %.3f  selected %3zu  pl-precision %s\n",
                udts::to_string(mode).c_str(), last.top1, selected,
                udts::is_defined(last.pl_precision)
                    ? std::to_string(last.pl_precision).c_str()
                    : "NA");
  }
  return 0;
}
