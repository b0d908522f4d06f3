#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foldcast/decomposition.hpp"
#include "foldcast/rng.hpp"
#include "foldcast/tensor.hpp"

namespace foldcast {

/// On/off switches for the architecture study.
struct AblationFlags {
  bool use_decomposition = true;  // multi-period decomposition front end
  bool use_intra = true;          // phase-token self-attention path
  bool use_inter = true;          // period-token self-attention path
  bool use_cross = true;          // second-stage cross attention

  bool operator==(const AblationFlags&) const = default;
};

struct ModelConfig {
  std::int64_t context = 336;  // input window length L
  std::int64_t horizon = 96;   // prediction length H
  int embed_dim = 64;          // token embedding width
  int heads = 4;
  int top_k = 3;   // periods to detect when none are preset
  int rho = 16;    // maximum periods kept per branch
  int blocks = 1;  // two-stage encoder blocks per branch
  double dropout = 0.1;
  std::vector<int> preset_periods;  // amplitude-ranked; empty = detect from data
  AblationFlags ablation;

  void validate() const;
};

/// Derived per-branch dimensions.
struct BranchDims {
  PeriodSpec spec;
  std::int64_t folded_periods = 0;  // rows after truncation + fold
  std::int64_t tokens = 0;          // active token count fed to the predictor
};

template <typename T>
struct Forecast {
  Tensor<T> prediction;                         // [B, M, H]
  std::vector<Tensor<T>> branch_outputs;        // [B, M, eta_j], pre-interpolation
  std::vector<Tensor<T>> branch_contributions;  // [B, M, H], summing to prediction
};

/// Number of period rows a component of length `len` folds into for a given
/// token size and truncation cap.
std::int64_t folded_period_count(std::int64_t len, std::int64_t token_size, int rho);

/// Keeps the most recent min(len, rho*token_size) steps, left-pads by edge
/// replication to a multiple of token_size, and reshapes each channel to
/// rows = periods x cols = phases. Output is [channels, n, token_size].
template <typename T>
Tensor<T> truncate_and_fold(const Matrix& component, std::int64_t token_size, int rho);

template <typename T>
struct AttentionWeights {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

/// Scaled dot-product attention with heads, q/kv of shape [N, tokens, d].
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& kv,
                               const AttentionWeights<T>& w, int heads);

/// Phase and period token embeddings of a folded [N, n, tau] block.
/// Phase token c is the length-n column c projected by phase_w [n, d] plus a
/// per-phase scalar position; period token r is the length-tau row r
/// projected by period_w [tau, d] plus a per-period scalar position.
/// Returns ([N, tau, d], [N, n, d]).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> embed_tokens(const Tensor<T>& folded, const Tensor<T>& phase_w,
                                             const Tensor<T>& phase_pos,
                                             const Tensor<T>& period_w,
                                             const Tensor<T>& period_pos);

/// Piecewise-linear resampling matrix [eta, H] over a uniform grid with
/// pinned endpoints; eta == 1 broadcasts the single value.
template <typename T>
Tensor<T> interp_matrix(std::int64_t eta, std::int64_t horizon);

template <typename T>
class Model {
 public:
  struct Param {
    std::string name;
    Tensor<T> tensor;
  };

  /// `periods` are amplitude-ranked (detection order or preset order). They
  /// are sorted ascending internally for the decomposition; periods[0] is
  /// the token size of the raw branch when decomposition is ablated away.
  Model(ModelConfig cfg, std::vector<int> periods, std::uint64_t init_seed);

  /// Batched forward. Each window is channels x context. Dropout is applied
  /// only when training is true (rng required if dropout > 0).
  Forecast<T> forward(const std::vector<Matrix>& windows, bool training = false,
                      Rng* rng = nullptr);

  std::vector<Param>& parameters() { return params_; }
  const std::vector<Param>& parameters() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  const std::vector<BranchDims>& branches() const { return dims_; }
  const std::vector<int>& ranked_periods() const { return ranked_periods_; }

  std::vector<std::vector<T>> weight_snapshot() const;
  void restore_weights(const std::vector<std::vector<T>>& snapshot);

 private:
  struct MlpWeights {
    Tensor<T> w1, b1, w2, b2;
  };
  struct NormWeights {
    Tensor<T> gain, bias;
  };
  struct SubLayer {
    AttentionWeights<T> msa;
    NormWeights msa_norm;
    MlpWeights mlp;
    NormWeights mlp_norm;
  };
  struct EncoderBlock {
    SubLayer intra_self, inter_self;   // stage 1
    SubLayer intra_cross, inter_cross; // stage 2
  };
  struct Branch {
    Tensor<T> phase_embed;    // [n, d]
    Tensor<T> phase_pos;      // [tau, 1]
    Tensor<T> period_embed;   // [tau, d]
    Tensor<T> period_pos;     // [n, 1]
    std::vector<EncoderBlock> blocks;
    Tensor<T> predictor_w;    // [tokens * d, eta]
    Tensor<T> predictor_b;    // [eta]
    Tensor<T> interp;         // constant [eta, H]
  };

  Tensor<T> residual_norm(const Tensor<T>& x, const Tensor<T>& sub, const NormWeights& n,
                          bool training, Rng* rng) const;
  Tensor<T> mlp(const Tensor<T>& x, const MlpWeights& w) const;
  Tensor<T> encode(const Tensor<T>& folded, std::size_t branch_idx, bool training,
                   Rng* rng) const;

  ModelConfig cfg_;
  std::vector<int> ranked_periods_;
  std::vector<int> asc_periods_;
  std::vector<BranchDims> dims_;
  std::vector<Branch> branches_;
  std::vector<Param> params_;
};

}  // namespace foldcast
