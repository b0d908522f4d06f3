#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "foldcast/data.hpp"
#include "foldcast/model.hpp"

namespace foldcast {

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 32;
  int max_epochs = 30;
  int patience = 5;
  std::uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;  // global-norm gradient clip; 0 disables

  void validate() const;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  std::int64_t step = 0;
};

/// One Adam update with bias correction on a flat parameter buffer.
template <typename T>
void adam_update(std::vector<T>& w, const std::vector<T>& g, std::vector<T>& m,
                 std::vector<T>& v, std::int64_t step, const TrainConfig& cfg);

/// Applies Adam to every model parameter, then clears the gradients.
/// Throws NumericError naming the parameter if a gradient is not finite.
template <typename T>
void adam_step(std::vector<typename Model<T>::Param>& params, AdamState<T>& state,
               const TrainConfig& cfg);

/// Scales all gradients so their global L2 norm is at most max_norm.
/// Returns the pre-clip norm.
template <typename T>
double clip_gradients(std::vector<typename Model<T>::Param>& params, double max_norm);

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;        // 1-based; 0 when no epoch ran
  double best_val_mse = 0.0;
  bool early_stopped = false;
};

struct EvalReport {
  double mse = 0.0;
  double mae = 0.0;
  std::vector<double> per_step_mse;  // horizon-position error curve
  double repeat_last_mse = 0.0, repeat_last_mae = 0.0;
  double seasonal_naive_mse = 0.0, seasonal_naive_mae = 0.0;
  int naive_period = 0;
  std::int64_t window_count = 0;
};

/// Amplitude-ranked periods for a model: presets when given, otherwise
/// detection over the training split.
std::vector<int> resolve_periods(const Dataset& ds, const ModelConfig& cfg);

/// Seeded mini-batch training with per-epoch validation and early stopping.
/// The model is left holding the best-validation weights.
template <typename T>
TrainResult train(Model<T>& model, const Dataset& ds, const TrainConfig& cfg,
                  std::ostream* log = nullptr);

/// MSE/MAE over every window of a split (normalized space, stride 1,
/// contexts may extend before the split start), plus repeat-last and
/// seasonal-naive baselines computed on the same windows.
template <typename T>
EvalReport evaluate(Model<T>& model, const Dataset& ds, Split split, int batch_size = 32);

/// evaluate() with an arbitrary prediction function ([B] windows -> [B,M,H]).
/// Windows are visited in origin order, batch by batch.
template <typename T>
EvalReport evaluate_with(const Dataset& ds, Split split, std::int64_t context,
                         std::int64_t horizon, int batch_size,
                         const std::function<Tensor<T>(const std::vector<Matrix>&)>& predict);

struct AblationRow {
  std::string name;
  AblationFlags flags;
  double val_mse = 0.0;
  double test_mse = 0.0;
  double test_mae = 0.0;
};

/// Trains and evaluates the six architecture-study rows with a shared seed
/// and budget.
template <typename T>
std::vector<AblationRow> run_ablation(const Dataset& ds, const ModelConfig& model_cfg,
                                      const TrainConfig& train_cfg,
                                      const std::vector<int>& periods,
                                      std::ostream* log = nullptr);

}  // namespace foldcast
