#include "foldcast/bench.hpp"

#include <sys/resource.h>

#include <chrono>
#include <cstdio>
#include <cstring>

namespace foldcast {

double peak_rss_mb() {
  // VmHWM from /proc is the high-water mark in kB on Linux.
  if (std::FILE* f = std::fopen("/proc/self/status", "r")) {
    char line[256];
    while (std::fgets(line, sizeof line, f)) {
      if (std::strncmp(line, "VmHWM:", 6) == 0) {
        long kb = 0;
        if (std::sscanf(line + 6, "%ld", &kb) == 1) {
          std::fclose(f);
          return static_cast<double>(kb) / 1024.0;
        }
      }
    }
    std::fclose(f);
  }
  struct rusage ru {};
  getrusage(RUSAGE_SELF, &ru);
  return static_cast<double>(ru.ru_maxrss) / 1024.0;
}

BenchResult bench_training_iteration(const Dataset& ds, const ModelConfig& model_cfg,
                                     const TrainConfig& train_cfg, int warmup, int iters) {
  if (iters < 1) throw ConfigError("bench: iters must be >= 1");
  const int saved_threads = max_threads();
  set_max_threads(1);

  BenchResult res;
  res.context = model_cfg.context;
  res.periods = resolve_periods(ds, model_cfg);
  Model<float> model(model_cfg, res.periods, train_cfg.seed);
  for (const auto& bd : model.branches()) res.tokens_per_branch.push_back(bd.tokens);
  res.periods = model.ranked_periods();

  WindowSet ws = windows(ds, Split::kTrain, model_cfg.context, model_cfg.horizon);
  if (ws.count() == 0) throw DataError("bench: " + ws.warning());
  const std::int64_t take = std::min<std::int64_t>(train_cfg.batch_size, ws.count());
  std::vector<Matrix> xs;
  std::vector<float> targets;
  for (std::int64_t i = 0; i < take; ++i) {
    WindowSample s = ws.get(i);
    xs.push_back(std::move(s.x));
    for (double v : s.y.data()) targets.push_back(static_cast<float>(v));
  }
  Tensor<float> target =
      Tensor<float>::from({take, ds.channels(), model_cfg.horizon}, std::move(targets));

  Rng dropout_rng(train_cfg.seed);
  AdamState<float> adam;
  auto step = [&]() {
    Tape<float> tape;
    Tape<float>::Scope scope(tape);
    Forecast<float> fc = model.forward(xs, true, &dropout_rng);
    Tensor<float> loss = mse_loss(fc.prediction, target);
    tape.backward(loss);
    clip_gradients<float>(model.parameters(), train_cfg.clip_norm);
    adam_step<float>(model.parameters(), adam, train_cfg);
  };
  for (int i = 0; i < warmup; ++i) step();
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < iters; ++i) step();
  const auto t1 = std::chrono::steady_clock::now();
  res.ms_per_iter =
      std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(iters);
  res.peak_rss_mb = peak_rss_mb();

  set_max_threads(saved_threads);
  return res;
}

}  // namespace foldcast
