#include "foldcast/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "foldcast/spectral.hpp"

namespace foldcast {

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("adam betas must be in [0, 1)");
  if (adam_eps <= 0.0) throw ConfigError("adam_eps must be positive");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
}

template <typename T>
void adam_update(std::vector<T>& w, const std::vector<T>& g, std::vector<T>& m,
                 std::vector<T>& v, std::int64_t step, const TrainConfig& cfg) {
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = static_cast<double>(g[i]);
    const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
    const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double mhat = mi / corr1;
    const double vhat = vi / corr2;
    w[i] = static_cast<T>(static_cast<double>(w[i]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
  }
}

template <typename T>
void adam_step(std::vector<typename Model<T>::Param>& params, AdamState<T>& state,
               const TrainConfig& cfg) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].tensor.data().size(), T(0));
      state.v[i].assign(params[i].tensor.data().size(), T(0));
    }
  }
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    for (T gi : p.tensor.grad())
      if (!std::isfinite(static_cast<double>(gi)))
        throw NumericError("non-finite gradient in parameter '" + p.name + "'");
    adam_update(p.tensor.data(), p.tensor.grad(), state.m[i], state.v[i], state.step, cfg);
    p.tensor.zero_grad();
  }
}

template <typename T>
double clip_gradients(std::vector<typename Model<T>::Param>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (T gi : p.tensor.grad()) sq += static_cast<double>(gi) * static_cast<double>(gi);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& p : params)
      for (T& gi : p.tensor.grad()) gi *= s;
  }
  return norm;
}

std::vector<int> resolve_periods(const Dataset& ds, const ModelConfig& cfg) {
  if (!cfg.preset_periods.empty()) return cfg.preset_periods;
  const Matrix train = ds.window(0, ds.train_end());
  return top_k_periods(train, cfg.top_k).periods;
}

namespace {

template <typename T>
Tensor<T> targets_tensor(const std::vector<WindowSample>& batch) {
  const std::int64_t B = static_cast<std::int64_t>(batch.size());
  const std::int64_t M = batch[0].y.rows();
  const std::int64_t H = batch[0].y.cols();
  std::vector<T> flat;
  flat.reserve(static_cast<std::size_t>(B * M * H));
  for (const auto& s : batch)
    for (double v : s.y.data()) flat.push_back(static_cast<T>(v));
  return Tensor<T>::from({B, M, H}, std::move(flat));
}

// First detected period that fits a context of length L (detection can rank
// a period longer than the window first when the trend dominates).
int naive_period_for(const Dataset& ds, std::int64_t L) {
  const std::int64_t train_len = ds.train_end();
  if (train_len < 4) return 1;
  const Matrix train = ds.window(0, train_len);
  const auto det = top_k_periods(train, 8);
  for (int p : det.periods)
    if (p <= L) return p;
  return static_cast<int>(std::min<std::int64_t>(L, 24));
}

}  // namespace

template <typename T>
TrainResult train(Model<T>& model, const Dataset& ds, const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  const std::int64_t L = model.config().context;
  const std::int64_t H = model.config().horizon;
  WindowSet train_ws = windows(ds, Split::kTrain, L, H);
  if (train_ws.count() == 0) throw DataError("train: " + train_ws.warning());
  WindowSet val_ws = windows(ds, Split::kVal, L, H, 1, true);
  if (val_ws.count() == 0) throw DataError("train: validation split: " + val_ws.warning());

  Rng order_rng(cfg.seed);
  Rng dropout_rng(cfg.seed ^ 0x5851f42d4c957f2dull);
  AdamState<T> adam;
  TrainResult result;
  std::vector<std::vector<T>> best_weights = model.weight_snapshot();
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  std::vector<std::int64_t> order(static_cast<std::size_t>(train_ws.count()));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double sse_weighted = 0.0;
    std::int64_t samples = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                     order.size() - pos);
      std::vector<WindowSample> batch;
      std::vector<Matrix> xs;
      batch.reserve(take);
      xs.reserve(take);
      for (std::size_t i = 0; i < take; ++i) {
        batch.push_back(train_ws.get(order[pos + i]));
        xs.push_back(batch.back().x);
      }
      Tape<T> tape;
      typename Tape<T>::Scope scope(tape);
      Forecast<T> fc = model.forward(xs, true, &dropout_rng);
      Tensor<T> loss = mse_loss(fc.prediction, targets_tensor<T>(batch));
      const double loss_v = static_cast<double>(loss.item());
      if (!std::isfinite(loss_v))
        throw NumericError("loss is not finite at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(pos / static_cast<std::size_t>(cfg.batch_size)));
      tape.backward(loss);
      clip_gradients<T>(model.parameters(), cfg.clip_norm);
      adam_step<T>(model.parameters(), adam, cfg);
      sse_weighted += loss_v * static_cast<double>(take);
      samples += static_cast<std::int64_t>(take);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = sse_weighted / static_cast<double>(samples);
    rec.val_mse = evaluate(model, ds, Split::kVal, cfg.batch_size).mse;
    result.history.push_back(rec);
    if (log)
      *log << "epoch " << epoch << "  train_mse " << rec.train_mse << "  val_mse " << rec.val_mse
           << "\n";
    if (rec.val_mse < best_val) {
      best_val = rec.val_mse;
      best_epoch = epoch;
      best_weights = model.weight_snapshot();
    } else if (epoch - best_epoch >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }
  model.restore_weights(best_weights);
  result.best_epoch = best_epoch;
  result.best_val_mse = best_val;
  return result;
}

template <typename T>
EvalReport evaluate_with(const Dataset& ds, Split split, std::int64_t context,
                         std::int64_t horizon, int batch_size,
                         const std::function<Tensor<T>(const std::vector<Matrix>&)>& predict) {
  WindowSet ws = windows(ds, split, context, horizon, 1, split != Split::kTrain);
  EvalReport rep;
  rep.window_count = ws.count();
  if (ws.count() == 0) return rep;
  rep.naive_period = naive_period_for(ds, context);
  rep.per_step_mse.assign(static_cast<std::size_t>(horizon), 0.0);

  const std::int64_t M = ds.channels();
  double sse = 0.0, sae = 0.0, rl_sse = 0.0, rl_sae = 0.0, sn_sse = 0.0, sn_sae = 0.0;
  for (std::int64_t pos = 0; pos < ws.count(); pos += batch_size) {
    const std::int64_t take = std::min<std::int64_t>(batch_size, ws.count() - pos);
    std::vector<WindowSample> batch;
    std::vector<Matrix> xs;
    for (std::int64_t i = 0; i < take; ++i) {
      batch.push_back(ws.get(pos + i));
      xs.push_back(batch.back().x);
    }
    Tensor<T> pred = predict(xs);
    const auto& pv = pred.data();
    for (std::int64_t b = 0; b < take; ++b) {
      const auto& x = batch[static_cast<std::size_t>(b)].x;
      const auto& y = batch[static_cast<std::size_t>(b)].y;
      for (std::int64_t m = 0; m < M; ++m) {
        const double last = x.at(m, context - 1);
        for (std::int64_t t = 0; t < horizon; ++t) {
          const double truth = y.at(m, t);
          const double p = static_cast<double>(pv[static_cast<std::size_t>((b * M + m) * horizon + t)]);
          const double d = p - truth;
          sse += d * d;
          sae += std::abs(d);
          rep.per_step_mse[static_cast<std::size_t>(t)] += d * d;
          const double drl = last - truth;
          rl_sse += drl * drl;
          rl_sae += std::abs(drl);
          const double snv = x.at(m, context - rep.naive_period + t % rep.naive_period);
          const double dsn = snv - truth;
          sn_sse += dsn * dsn;
          sn_sae += std::abs(dsn);
        }
      }
    }
  }
  const double n = static_cast<double>(ws.count() * M * horizon);
  rep.mse = sse / n;
  rep.mae = sae / n;
  rep.repeat_last_mse = rl_sse / n;
  rep.repeat_last_mae = rl_sae / n;
  rep.seasonal_naive_mse = sn_sse / n;
  rep.seasonal_naive_mae = sn_sae / n;
  const double per_step_n = static_cast<double>(ws.count() * M);
  for (auto& v : rep.per_step_mse) v /= per_step_n;
  return rep;
}

template <typename T>
EvalReport evaluate(Model<T>& model, const Dataset& ds, Split split, int batch_size) {
  return evaluate_with<T>(
      ds, split, model.config().context, model.config().horizon, batch_size,
      [&](const std::vector<Matrix>& xs) { return model.forward(xs, false, nullptr).prediction; });
}

template <typename T>
std::vector<AblationRow> run_ablation(const Dataset& ds, const ModelConfig& model_cfg,
                                      const TrainConfig& train_cfg,
                                      const std::vector<int>& periods, std::ostream* log) {
  // Flag order: decomposition, intra, inter, cross.
  const std::vector<std::pair<std::string, AblationFlags>> rows = {
      {"baseline", {true, true, true, true}},  {"aba1", {false, true, true, true}},
      {"aba2", {false, true, true, false}},    {"aba3", {false, true, false, false}},
      {"aba4", {false, false, true, false}},   {"aba5", {true, true, false, false}},
  };
  std::vector<AblationRow> out;
  for (const auto& [name, flags] : rows) {
    ModelConfig cfg = model_cfg;
    cfg.ablation = flags;
    Model<T> model(cfg, periods, train_cfg.seed);
    if (log) *log << "[" << name << "] training\n";
    TrainResult tr = train(model, ds, train_cfg, log);
    EvalReport test = evaluate(model, ds, Split::kTest, train_cfg.batch_size);
    AblationRow row;
    row.name = name;
    row.flags = flags;
    row.val_mse = tr.best_val_mse;
    row.test_mse = test.mse;
    row.test_mae = test.mae;
    out.push_back(row);
    if (log)
      *log << "[" << name << "] val_mse " << row.val_mse << "  test_mse " << row.test_mse
           << "  test_mae " << row.test_mae << "\n";
  }
  return out;
}

#define FOLDCAST_INSTANTIATE_TRAINING(T)                                                        \
  template void adam_update<T>(std::vector<T>&, const std::vector<T>&, std::vector<T>&,         \
                               std::vector<T>&, std::int64_t, const TrainConfig&);              \
  template void adam_step<T>(std::vector<typename Model<T>::Param>&, AdamState<T>&,             \
                             const TrainConfig&);                                               \
  template double clip_gradients<T>(std::vector<typename Model<T>::Param>&, double);            \
  template TrainResult train<T>(Model<T>&, const Dataset&, const TrainConfig&, std::ostream*);  \
  template EvalReport evaluate<T>(Model<T>&, const Dataset&, Split, int);                       \
  template EvalReport evaluate_with<T>(                                                         \
      const Dataset&, Split, std::int64_t, std::int64_t, int,                                   \
      const std::function<Tensor<T>(const std::vector<Matrix>&)>&);                             \
  template std::vector<AblationRow> run_ablation<T>(const Dataset&, const ModelConfig&,         \
                                                    const TrainConfig&, const std::vector<int>&, \
                                                    std::ostream*);

FOLDCAST_INSTANTIATE_TRAINING(float)
FOLDCAST_INSTANTIATE_TRAINING(double)

#undef FOLDCAST_INSTANTIATE_TRAINING

}  // namespace foldcast
