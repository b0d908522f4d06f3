#include "foldcast/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace foldcast {

namespace {

// Pool window/stride for round j is half the previous round's period, with
// p_0 = 2 so the shortest-period component keeps full resolution.
std::int64_t half_period(std::int64_t p) { return std::max<std::int64_t>(1, p / 2); }

std::int64_t pooled_size(std::int64_t length, std::int64_t window, std::int64_t stride) {
  return ceil_div(length - window, stride) + 1;
}

PeriodSpec make_spec(std::int64_t L, std::int64_t H, int period, std::int64_t pool) {
  PeriodSpec s;
  s.period = period;
  s.pool_window = pool;
  s.pool_stride = pool;
  s.pooled_len = pooled_size(L, pool, pool);
  s.pooled_horizon = pooled_size(H, pool, pool);
  const double tau = static_cast<double>(s.pooled_len) * period / static_cast<double>(L);
  s.token_size = std::clamp<std::int64_t>(std::llround(tau), 2, s.pooled_len);
  return s;
}

}  // namespace

Matrix moving_average(const Matrix& x, std::int64_t window, std::int64_t stride) {
  const std::int64_t M = x.rows();
  const std::int64_t L = x.cols();
  if (window < 1 || window > L)
    throw DataError("moving_average: window " + std::to_string(window) +
                    " outside [1, " + std::to_string(L) + "]");
  if (stride < 1) throw DataError("moving_average: stride must be >= 1");

  const std::int64_t out_len = stride == 1 ? L : pooled_size(L, window, stride);
  Matrix out(M, out_len);
  std::vector<double> prefix(static_cast<std::size_t>(L + 1), 0.0);
  for (std::int64_t m = 0; m < M; ++m) {
    const double* row = x.row(m);
    for (std::int64_t t = 0; t < L; ++t) prefix[static_cast<std::size_t>(t + 1)] =
        prefix[static_cast<std::size_t>(t)] + row[t];
    if (stride == 1) {
      // Centered window over an edge-replicated extension of the row.
      const std::int64_t left = (window - 1) / 2;
      for (std::int64_t t = 0; t < out_len; ++t) {
        const std::int64_t lo = t - left;
        const std::int64_t hi = lo + window;  // exclusive
        const std::int64_t clo = std::max<std::int64_t>(lo, 0);
        const std::int64_t chi = std::min<std::int64_t>(hi, L);
        double s = prefix[static_cast<std::size_t>(chi)] - prefix[static_cast<std::size_t>(clo)];
        if (lo < 0) s += static_cast<double>(-lo) * row[0];
        if (hi > L) s += static_cast<double>(hi - L) * row[L - 1];
        out.at(m, t) = s / static_cast<double>(window);
      }
    } else {
      for (std::int64_t t = 0; t < out_len; ++t) {
        const std::int64_t lo = t * stride;
        const std::int64_t hi = std::min<std::int64_t>(lo + window, L);
        out.at(m, t) = (prefix[static_cast<std::size_t>(hi)] - prefix[static_cast<std::size_t>(lo)]) /
                       static_cast<double>(hi - lo);
      }
    }
  }
  return out;
}

std::pair<Matrix, Matrix> season_trend_split(const Matrix& x, std::int64_t period) {
  if (period < 2 || period > x.cols())
    throw DataError("season_trend_split: period " + std::to_string(period) +
                    " outside [2, " + std::to_string(x.cols()) + "]");
  Matrix trend = moving_average(x, period, 1);
  Matrix season(x.rows(), x.cols());
  for (std::int64_t m = 0; m < x.rows(); ++m)
    for (std::int64_t t = 0; t < x.cols(); ++t) season.at(m, t) = x.at(m, t) - trend.at(m, t);
  return {std::move(season), std::move(trend)};
}

std::vector<PeriodSpec> branch_specs(std::int64_t L, const std::vector<int>& periods_asc,
                                     std::int64_t H) {
  if (periods_asc.empty()) throw ConfigError("branch_specs: no periods");
  std::vector<PeriodSpec> specs;
  int prev = 2;
  for (int p : periods_asc) {
    specs.push_back(make_spec(L, H, p, half_period(prev)));
    prev = p;
  }
  // Trend branch: pooled with the last period, no period of its own.
  specs.push_back(make_spec(L, H, periods_asc.back(), half_period(periods_asc.back())));
  return specs;
}

SeriesGroup multi_period_decompose(const Matrix& x, const std::vector<int>& periods_asc,
                                   std::int64_t horizon) {
  const std::int64_t L = x.cols();
  for (std::size_t j = 0; j < periods_asc.size(); ++j) {
    if (periods_asc[j] < 2 || periods_asc[j] > L)
      throw ConfigError("decompose: period " + std::to_string(periods_asc[j]) +
                        " outside [2, " + std::to_string(L) + "]");
    if (j > 0 && periods_asc[j] <= periods_asc[j - 1])
      throw ConfigError("decompose: periods must be strictly ascending");
  }

  SeriesGroup g;
  g.specs = branch_specs(L, periods_asc, horizon);
  Matrix trend = x;
  for (std::size_t j = 0; j < periods_asc.size(); ++j) {
    auto [season, next_trend] = season_trend_split(trend, periods_asc[j]);
    const auto& spec = g.specs[j];
    g.components.push_back(moving_average(season, spec.pool_window, spec.pool_stride));
    trend = std::move(next_trend);
  }
  const auto& tspec = g.specs.back();
  g.components.push_back(moving_average(trend, tspec.pool_window, tspec.pool_stride));

  for (std::size_t j = 0; j < g.components.size(); ++j)
    FOLDCAST_DASSERT(g.components[j].cols() == g.specs[j].pooled_len,
                     "pooled length disagrees with spec");
  return g;
}

}  // namespace foldcast
