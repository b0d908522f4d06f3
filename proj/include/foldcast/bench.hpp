#pragma once

#include <vector>

#include "foldcast/data.hpp"
#include "foldcast/model.hpp"
#include "foldcast/training.hpp"

namespace foldcast {

struct BenchResult {
  std::int64_t context = 0;
  double ms_per_iter = 0.0;
  double peak_rss_mb = 0.0;
  std::vector<int> periods;
  std::vector<std::int64_t> tokens_per_branch;
};

/// Peak resident set size of this process, in MiB.
double peak_rss_mb();

/// Times full training iterations (forward, backward, optimizer) on a fixed
/// batch of training windows: `warmup` unmeasured iterations, then the mean
/// of `iters` measured ones. Runs single-threaded for stable numbers.
BenchResult bench_training_iteration(const Dataset& ds, const ModelConfig& model_cfg,
                                     const TrainConfig& train_cfg, int warmup = 3,
                                     int iters = 20);

}  // namespace foldcast
