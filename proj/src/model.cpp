#include "foldcast/model.hpp"

#include <algorithm>
#include <cmath>

namespace foldcast {

void ModelConfig::validate() const {
  if (context < 4) throw ConfigError("context must be >= 4");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (embed_dim < 1 || heads < 1 || embed_dim % heads != 0)
    throw ConfigError("embed_dim must be a positive multiple of heads");
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (rho < 1) throw ConfigError("rho must be >= 1");
  if (blocks < 1) throw ConfigError("blocks must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  if (!ablation.use_intra && !ablation.use_inter)
    throw ConfigError("at least one of the intra/inter paths must be enabled");
}

std::int64_t folded_period_count(std::int64_t len, std::int64_t token_size, int rho) {
  const std::int64_t kept = std::min<std::int64_t>(len, static_cast<std::int64_t>(rho) * token_size);
  return ceil_div(kept, token_size);
}

namespace {

// Writes the folded view of every channel into dst (n * token_size values per
// channel): keep the most recent `kept` steps, replicate the window's first
// value on the left until the length is a whole number of periods.
template <typename T>
void fold_rows(const Matrix& component, std::int64_t token_size, int rho, T* dst) {
  const std::int64_t len = component.cols();
  const std::int64_t kept = std::min<std::int64_t>(len, static_cast<std::int64_t>(rho) * token_size);
  const std::int64_t n = ceil_div(kept, token_size);
  const std::int64_t padded = n * token_size;
  const std::int64_t pad = padded - kept;
  for (std::int64_t m = 0; m < component.rows(); ++m) {
    const double* row = component.row(m) + (len - kept);
    T* out = dst + m * padded;
    for (std::int64_t i = 0; i < pad; ++i) out[i] = static_cast<T>(row[0]);
    for (std::int64_t i = 0; i < kept; ++i) out[pad + i] = static_cast<T>(row[i]);
  }
}

}  // namespace

template <typename T>
Tensor<T> interp_matrix(std::int64_t eta, std::int64_t horizon) {
  Tensor<T> w(Shape{eta, horizon});
  auto& v = w.data();
  if (eta == 1) {
    std::fill(v.begin(), v.end(), T(1));
    return w;
  }
  for (std::int64_t j = 0; j < horizon; ++j) {
    // Uniform grid with pinned endpoints; H == 1 maps to the last source point.
    const double s = horizon == 1 ? static_cast<double>(eta - 1)
                                  : static_cast<double>(j) * static_cast<double>(eta - 1) /
                                        static_cast<double>(horizon - 1);
    const std::int64_t i0 = std::min<std::int64_t>(static_cast<std::int64_t>(s), eta - 2);
    const double frac = s - static_cast<double>(i0);
    v[static_cast<std::size_t>(i0 * horizon + j)] += static_cast<T>(1.0 - frac);
    v[static_cast<std::size_t>((i0 + 1) * horizon + j)] += static_cast<T>(frac);
  }
  return w;
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& kv,
                               const AttentionWeights<T>& w, int heads) {
  const std::int64_t N = q.dim(0), tq = q.dim(1), tk = kv.dim(1);
  const std::int64_t d = q.dim(2);
  if (d % heads != 0) throw ShapeError("attention: width not divisible by heads");
  const std::int64_t dh = d / heads;
  auto qp = add(matmul(q, w.wq), w.bq);
  auto kp = add(matmul(kv, w.wk), w.bk);
  auto vp = add(matmul(kv, w.wv), w.bv);
  auto qh = transpose(reshape(qp, {N, tq, heads, dh}), 1, 2);  // [N,h,tq,dh]
  auto kh = transpose(reshape(kp, {N, tk, heads, dh}), 1, 2);
  auto vh = transpose(reshape(vp, {N, tk, heads, dh}), 1, 2);
  auto scores = scale(matmul(qh, transpose(kh, 2, 3)),
                      static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
  auto probs = softmax(scores, 3);
  auto ctx = reshape(transpose(matmul(probs, vh), 1, 2), {N, tq, d});
  return add(matmul(ctx, w.wo), w.bo);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> embed_tokens(const Tensor<T>& folded, const Tensor<T>& phase_w,
                                             const Tensor<T>& phase_pos,
                                             const Tensor<T>& period_w,
                                             const Tensor<T>& period_pos) {
  auto phases = add(matmul(transpose(folded, 1, 2), phase_w), phase_pos);
  auto periods = add(matmul(folded, period_w), period_pos);
  return {std::move(phases), std::move(periods)};
}

template <typename T>
Tensor<T> truncate_and_fold(const Matrix& component, std::int64_t token_size, int rho) {
  if (token_size < 2) throw ShapeError("fold: token size must be >= 2");
  const std::int64_t n = folded_period_count(component.cols(), token_size, rho);
  Tensor<T> out(Shape{component.rows(), n, token_size});
  fold_rows(component, token_size, rho, out.data().data());
  return out;
}

// ---- Model -------------------------------------------------------------------

template <typename T>
Model<T>::Model(ModelConfig cfg, std::vector<int> periods, std::uint64_t init_seed)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (periods.empty()) throw ConfigError("model needs at least one period");
  for (int p : periods) {
    if (p < 2) continue;                  // too short to form a pattern
    if (p >= cfg_.context) continue;      // context must exceed every period
    if (std::find(ranked_periods_.begin(), ranked_periods_.end(), p) != ranked_periods_.end())
      continue;
    ranked_periods_.push_back(p);
  }
  if (ranked_periods_.empty())
    throw ConfigError("no usable period is shorter than the context; preset smaller periods or "
                      "lengthen the context");
  asc_periods_ = ranked_periods_;
  std::sort(asc_periods_.begin(), asc_periods_.end());

  if (cfg_.ablation.use_decomposition) {
    for (const auto& spec : branch_specs(cfg_.context, asc_periods_, cfg_.horizon))
      dims_.push_back({spec, 0, 0});
  } else {
    PeriodSpec spec;
    spec.period = ranked_periods_.front();
    spec.pool_window = 1;
    spec.pool_stride = 1;
    spec.pooled_len = cfg_.context;
    spec.token_size = std::clamp<std::int64_t>(spec.period, 2, spec.pooled_len);
    spec.pooled_horizon = cfg_.horizon;
    dims_.push_back({spec, 0, 0});
  }
  for (auto& bd : dims_) {
    bd.folded_periods = folded_period_count(bd.spec.pooled_len, bd.spec.token_size, cfg_.rho);
    bd.tokens = (cfg_.ablation.use_intra ? bd.spec.token_size : 0) +
                (cfg_.ablation.use_inter ? bd.folded_periods : 0);
  }

  Rng rng(init_seed);
  const std::int64_t d = cfg_.embed_dim;
  auto weight = [&](const std::string& name, Shape shape) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(shape.front()));
    Tensor<T> t = Tensor<T>::uniform(std::move(shape), rng, static_cast<T>(-bound),
                                     static_cast<T>(bound), true);
    params_.push_back({name, t});
    return t;
  };
  auto zeros = [&](const std::string& name, Shape shape) {
    Tensor<T> t(std::move(shape), true);
    params_.push_back({name, t});
    return t;
  };
  auto ones = [&](const std::string& name, Shape shape) {
    Tensor<T> t = Tensor<T>::full(std::move(shape), T(1));
    t.set_requires_grad(true);
    params_.push_back({name, t});
    return t;
  };
  auto make_attention = [&](const std::string& p) {
    AttentionWeights<T> a;
    a.wq = weight(p + ".wq", {d, d});
    a.bq = zeros(p + ".bq", {d});
    a.wk = weight(p + ".wk", {d, d});
    a.bk = zeros(p + ".bk", {d});
    a.wv = weight(p + ".wv", {d, d});
    a.bv = zeros(p + ".bv", {d});
    a.wo = weight(p + ".wo", {d, d});
    a.bo = zeros(p + ".bo", {d});
    return a;
  };
  auto make_norm = [&](const std::string& p) {
    NormWeights n;
    n.gain = ones(p + ".gain", {d});
    n.bias = zeros(p + ".bias", {d});
    return n;
  };
  auto make_mlp = [&](const std::string& p) {
    MlpWeights m;
    m.w1 = weight(p + ".w1", {d, 2 * d});
    m.b1 = zeros(p + ".b1", {2 * d});
    m.w2 = weight(p + ".w2", {2 * d, d});
    m.b2 = zeros(p + ".b2", {d});
    return m;
  };
  auto make_sublayer = [&](const std::string& p) {
    SubLayer s;
    s.msa = make_attention(p + ".msa");
    s.msa_norm = make_norm(p + ".msa_norm");
    s.mlp = make_mlp(p + ".mlp");
    s.mlp_norm = make_norm(p + ".mlp_norm");
    return s;
  };

  for (std::size_t bi = 0; bi < dims_.size(); ++bi) {
    const auto& bd = dims_[bi];
    const std::string bp = "b" + std::to_string(bi);
    Branch br;
    br.phase_embed = weight(bp + ".phase_embed.w", {bd.folded_periods, d});
    br.phase_pos = zeros(bp + ".phase_pos", {bd.spec.token_size, 1});
    br.period_embed = weight(bp + ".period_embed.w", {bd.spec.token_size, d});
    br.period_pos = zeros(bp + ".period_pos", {bd.folded_periods, 1});
    for (int blk = 0; blk < cfg_.blocks; ++blk) {
      const std::string kp = bp + ".blk" + std::to_string(blk);
      EncoderBlock eb;
      eb.intra_self = make_sublayer(kp + ".intra_self");
      eb.inter_self = make_sublayer(kp + ".inter_self");
      eb.intra_cross = make_sublayer(kp + ".intra_cross");
      eb.inter_cross = make_sublayer(kp + ".inter_cross");
      br.blocks.push_back(std::move(eb));
    }
    br.predictor_w = weight(bp + ".predictor.w", {bd.tokens * d, bd.spec.pooled_horizon});
    br.predictor_b = zeros(bp + ".predictor.b", {bd.spec.pooled_horizon});
    br.interp = interp_matrix<T>(bd.spec.pooled_horizon, cfg_.horizon);
    branches_.push_back(std::move(br));
  }
}

template <typename T>
Tensor<T> Model<T>::residual_norm(const Tensor<T>& x, const Tensor<T>& sub, const NormWeights& n,
                                  bool training, Rng* rng) const {
  Tensor<T> y = sub;
  if (training && cfg_.dropout > 0.0) y = dropout(y, cfg_.dropout, *rng);
  return layernorm(add(x, y), n.gain, n.bias);
}

template <typename T>
Tensor<T> Model<T>::mlp(const Tensor<T>& x, const MlpWeights& w) const {
  return add(matmul(gelu(add(matmul(x, w.w1), w.b1)), w.w2), w.b2);
}

template <typename T>
Tensor<T> Model<T>::encode(const Tensor<T>& folded, std::size_t branch_idx, bool training,
                           Rng* rng) const {
  const Branch& br = branches_[branch_idx];
  const AblationFlags& fl = cfg_.ablation;
  const bool cross = fl.use_cross && fl.use_intra && fl.use_inter;

  Tensor<T> sigma, mu;
  if (fl.use_intra && fl.use_inter) {
    std::tie(sigma, mu) =
        embed_tokens(folded, br.phase_embed, br.phase_pos, br.period_embed, br.period_pos);
  } else if (fl.use_intra) {
    sigma = add(matmul(transpose(folded, 1, 2), br.phase_embed), br.phase_pos);
  } else {
    mu = add(matmul(folded, br.period_embed), br.period_pos);
  }

  const int heads = cfg_.heads;
  for (const auto& blk : br.blocks) {
    if (fl.use_intra) {
      sigma = residual_norm(sigma, multi_head_attention(sigma, sigma, blk.intra_self.msa, heads),
                            blk.intra_self.msa_norm, training, rng);
      sigma = residual_norm(sigma, mlp(sigma, blk.intra_self.mlp), blk.intra_self.mlp_norm,
                            training, rng);
    }
    if (fl.use_inter) {
      mu = residual_norm(mu, multi_head_attention(mu, mu, blk.inter_self.msa, heads),
                         blk.inter_self.msa_norm, training, rng);
      mu = residual_norm(mu, mlp(mu, blk.inter_self.mlp), blk.inter_self.mlp_norm, training, rng);
    }
    if (cross) {
      // Both mixes read the stage-1 outputs, so update from saved copies.
      Tensor<T> s_in = sigma, m_in = mu;
      sigma = residual_norm(s_in, multi_head_attention(s_in, m_in, blk.intra_cross.msa, heads),
                            blk.intra_cross.msa_norm, training, rng);
      sigma = residual_norm(sigma, mlp(sigma, blk.intra_cross.mlp), blk.intra_cross.mlp_norm,
                            training, rng);
      mu = residual_norm(m_in, multi_head_attention(m_in, s_in, blk.inter_cross.msa, heads),
                         blk.inter_cross.msa_norm, training, rng);
      mu = residual_norm(mu, mlp(mu, blk.inter_cross.mlp), blk.inter_cross.mlp_norm, training,
                         rng);
    }
  }
  if (fl.use_intra && fl.use_inter) return concat<T>({sigma, mu}, 1);
  return fl.use_intra ? sigma : mu;
}

template <typename T>
Forecast<T> Model<T>::forward(const std::vector<Matrix>& windows, bool training, Rng* rng) {
  if (windows.empty()) throw ShapeError("forward: empty batch");
  const std::int64_t B = static_cast<std::int64_t>(windows.size());
  const std::int64_t M = windows[0].rows();
  for (const auto& w : windows)
    if (w.rows() != M || w.cols() != cfg_.context)
      throw ShapeError("forward: window is " + std::to_string(w.rows()) + "x" +
                       std::to_string(w.cols()) + ", expected " + std::to_string(M) + "x" +
                       std::to_string(cfg_.context));
  if (training && cfg_.dropout > 0.0 && rng == nullptr)
    throw ConfigError("training forward with dropout needs an rng");

  const std::int64_t H = cfg_.horizon;
  const std::size_t nb = dims_.size();

  // Decompose (or pass through) and fold each branch into one batch tensor.
  std::vector<Tensor<T>> folded(nb);
  {
    std::vector<std::vector<T>> bufs(nb);
    std::vector<std::int64_t> per_window(nb);
    for (std::size_t bi = 0; bi < nb; ++bi) {
      per_window[bi] = M * dims_[bi].folded_periods * dims_[bi].spec.token_size;
      bufs[bi].resize(static_cast<std::size_t>(B * per_window[bi]));
    }
    for (std::int64_t b = 0; b < B; ++b) {
      if (cfg_.ablation.use_decomposition) {
        SeriesGroup g = multi_period_decompose(windows[static_cast<std::size_t>(b)], asc_periods_, H);
        for (std::size_t bi = 0; bi < nb; ++bi) {
          FOLDCAST_DASSERT(g.specs[bi] == dims_[bi].spec, "decomposition specs drifted");
          fold_rows(g.components[bi], dims_[bi].spec.token_size, cfg_.rho,
                    bufs[bi].data() + b * per_window[bi]);
        }
      } else {
        fold_rows(windows[static_cast<std::size_t>(b)], dims_[0].spec.token_size, cfg_.rho,
                  bufs[0].data() + b * per_window[0]);
      }
    }
    for (std::size_t bi = 0; bi < nb; ++bi)
      folded[bi] = Tensor<T>::from(
          {B * M, dims_[bi].folded_periods, dims_[bi].spec.token_size}, std::move(bufs[bi]));
  }

  Forecast<T> out;
  Tensor<T> total;
  for (std::size_t bi = 0; bi < nb; ++bi) {
    Tensor<T> z = encode(folded[bi], bi, training, rng);
    Tensor<T> flat = reshape(z, {B * M, dims_[bi].tokens * cfg_.embed_dim});
    Tensor<T> y = add(matmul(flat, branches_[bi].predictor_w), branches_[bi].predictor_b);
    Tensor<T> contribution = matmul(y, branches_[bi].interp);  // [B*M, H]
    total = bi == 0 ? contribution : add(total, contribution);
    out.branch_outputs.push_back(reshape(y, {B, M, dims_[bi].spec.pooled_horizon}));
    out.branch_contributions.push_back(reshape(contribution, {B, M, H}));
  }
  out.prediction = reshape(total, {B, M, H});
  return out;
}

template <typename T>
std::vector<std::vector<T>> Model<T>::weight_snapshot() const {
  std::vector<std::vector<T>> snap;
  snap.reserve(params_.size());
  for (const auto& p : params_) snap.push_back(p.tensor.data());
  return snap;
}

template <typename T>
void Model<T>::restore_weights(const std::vector<std::vector<T>>& snapshot) {
  if (snapshot.size() != params_.size())
    throw ShapeError("restore_weights: snapshot does not match parameter count");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (snapshot[i].size() != params_[i].tensor.data().size())
      throw ShapeError("restore_weights: size mismatch for " + params_[i].name);
    params_[i].tensor.data() = snapshot[i];
  }
}

#define FOLDCAST_INSTANTIATE_MODEL(T)                                                        \
  template Tensor<T> truncate_and_fold<T>(const Matrix&, std::int64_t, int);                 \
  template Tensor<T> interp_matrix<T>(std::int64_t, std::int64_t);                           \
  template Tensor<T> multi_head_attention<T>(const Tensor<T>&, const Tensor<T>&,             \
                                             const AttentionWeights<T>&, int);               \
  template std::pair<Tensor<T>, Tensor<T>> embed_tokens<T>(                                  \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                \
      const Tensor<T>&);                                                                     \
  template class Model<T>;

FOLDCAST_INSTANTIATE_MODEL(float)
FOLDCAST_INSTANTIATE_MODEL(double)

#undef FOLDCAST_INSTANTIATE_MODEL

}  // namespace foldcast
