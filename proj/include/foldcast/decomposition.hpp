#pragma once

#include <utility>
#include <vector>

#include "foldcast/common.hpp"

namespace foldcast {

/// Bookkeeping for one decomposition branch after pooling.
struct PeriodSpec {
  int period = 0;                  // original period length, in time steps
  std::int64_t pool_window = 1;    // averaging window used for pooling
  std::int64_t pool_stride = 1;    // pooling stride
  std::int64_t pooled_len = 0;     // component length after pooling
  std::int64_t token_size = 0;     // period length after pooling (>= 2)
  std::int64_t pooled_horizon = 0; // prediction length emitted by the branch

  bool operator==(const PeriodSpec&) const = default;
};

/// The decomposed component sequences plus their specs. Components are
/// ordered by ascending original period; the last one is the pooled final
/// trend.
struct SeriesGroup {
  std::vector<Matrix> components;  // each channels x pooled_len
  std::vector<PeriodSpec> specs;
};

/// Sliding mean over each row of x (channels x length).
/// stride == 1: ends are padded by edge replication, output length == length.
/// stride  > 1: no padding; output length ceil((length-window)/stride)+1 with
/// the final partial window averaged over its actual overlap.
Matrix moving_average(const Matrix& x, std::int64_t window, std::int64_t stride);

/// Splits a series into (season, trend): trend is the centered stride-1
/// moving average with the period as window, season the remainder. The two
/// components add back to the input exactly.
std::pair<Matrix, Matrix> season_trend_split(const Matrix& x, std::int64_t period);

/// Branch bookkeeping for a context of length L, ascending periods, and
/// horizon H — k+1 entries, the last for the trend branch.
std::vector<PeriodSpec> branch_specs(std::int64_t L, const std::vector<int>& periods_asc,
                                     std::int64_t H);

/// Recursive season/trend extraction from short to long period with
/// progressively coarser pooling. periods must be strictly ascending and at
/// most the series length.
SeriesGroup multi_period_decompose(const Matrix& x, const std::vector<int>& periods_asc,
                                   std::int64_t horizon);

}  // namespace foldcast
