#pragma once

// Independent reference implementations used as test oracles. These stay
// deliberately naive (plain loops, direct formulas) and must not call into
// the implementations they check.

#include <cmath>
#include <complex>
#include <vector>

#include "foldcast/common.hpp"
#include "foldcast/rng.hpp"

namespace oracle {

// C = A.B with the textbook triple loop; row-major flat buffers.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  std::int64_t m, std::int64_t k, std::int64_t n) {
  std::vector<double> c(static_cast<std::size_t>(m * n), 0.0);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      for (std::int64_t t = 0; t < k; ++t)
        c[static_cast<std::size_t>(i * n + j)] +=
            a[static_cast<std::size_t>(i * k + t)] * b[static_cast<std::size_t>(t * n + j)];
  return c;
}

// |DFT(x)[f]| for f = 0..floor(L/2) by direct O(L^2) summation.
inline std::vector<double> dft_magnitudes(const std::vector<double>& x) {
  const std::size_t L = x.size();
  std::vector<double> mags(L / 2 + 1);
  for (std::size_t f = 0; f < mags.size(); ++f) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < L; ++t) {
      const double ang = -2.0 * 3.14159265358979323846 * static_cast<double>(f) *
                         static_cast<double>(t) / static_cast<double>(L);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    mags[f] = std::abs(acc);
  }
  return mags;
}

// Centered stride-1 windowed mean with edge replication, one position at a time.
inline std::vector<double> moving_mean(const std::vector<double>& x, std::int64_t w) {
  const std::int64_t L = static_cast<std::int64_t>(x.size());
  const std::int64_t left = (w - 1) / 2;
  std::vector<double> out(static_cast<std::size_t>(L));
  for (std::int64_t t = 0; t < L; ++t) {
    double s = 0.0;
    for (std::int64_t j = 0; j < w; ++j) {
      std::int64_t idx = t - left + j;
      idx = std::max<std::int64_t>(0, std::min<std::int64_t>(idx, L - 1));
      s += x[static_cast<std::size_t>(idx)];
    }
    out[static_cast<std::size_t>(t)] = s / static_cast<double>(w);
  }
  return out;
}

inline std::vector<double> randu(foldcast::Rng& rng, std::int64_t n, double lo = -1.0,
                                 double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline foldcast::Matrix rand_matrix(foldcast::Rng& rng, std::int64_t rows, std::int64_t cols,
                                    double lo = -1.0, double hi = 1.0) {
  foldcast::Matrix m(rows, cols);
  for (auto& x : m.data()) x = rng.uniform(lo, hi);
  return m;
}

}  // namespace oracle
