#include "foldcast/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace foldcast {

namespace {

using cd = std::complex<double>;

bool is_pow2(std::size_t n) { return n && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative radix-2 FFT. inverse=true applies the conjugate
// transform without the 1/n factor.
void fft_pow2(std::vector<cd>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const cd wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cd w(1.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const cd u = a[i + j];
        const cd v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

#ifndef FOLDCAST_NAIVE_DFT

// Bluestein chirp transform: DFT of arbitrary length via one power-of-two
// circular convolution.
std::vector<cd> dft_bluestein(const std::vector<cd>& x) {
  const std::size_t n = x.size();
  const std::size_t m = next_pow2(2 * n - 1);
  std::vector<cd> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the phase argument small for long inputs.
    const std::size_t k2 = (k * k) % (2 * n);
    const double ang = std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
    chirp[k] = cd(std::cos(ang), -std::sin(ang));
  }
  std::vector<cd> a(m, cd(0.0)), b(m, cd(0.0));
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);
  fft_pow2(a, false);
  fft_pow2(b, false);
  for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
  fft_pow2(a, true);
  std::vector<cd> out(n);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * inv_m * chirp[k];
  return out;
}

#endif  // !FOLDCAST_NAIVE_DFT

std::vector<cd> dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
#ifdef FOLDCAST_NAIVE_DFT
  std::vector<cd> out(n, cd(0.0));
  for (std::size_t f = 0; f < n; ++f) {
    for (std::size_t t = 0; t < n; ++t) {
      const double ang =
          -2.0 * std::numbers::pi * static_cast<double>(f) * static_cast<double>(t) / static_cast<double>(n);
      out[f] += x[t] * cd(std::cos(ang), std::sin(ang));
    }
  }
  return out;
#else
  std::vector<cd> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = cd(x[i], 0.0);
  if (is_pow2(n)) {
    fft_pow2(a, false);
    return a;
  }
  return dft_bluestein(a);
#endif
}

}  // namespace

std::vector<double> rfft_magnitude(const std::vector<double>& x) {
  const std::int64_t L = static_cast<std::int64_t>(x.size());
  if (L < 4)
    throw DataError("spectral analysis needs at least 4 samples, got " + std::to_string(L));
  const auto spec = dft(x);
  std::vector<double> mags(static_cast<std::size_t>(L / 2 + 1));
  for (std::size_t f = 0; f < mags.size(); ++f) mags[f] = std::abs(spec[f]);
  return mags;
}

PeriodDetection top_k_periods(const Matrix& x, int k) {
  if (k < 1) throw ConfigError("top_k_periods: k must be >= 1");
  const std::int64_t M = x.rows();
  const std::int64_t L = x.cols();
  if (L < 4)
    throw DataError("spectral analysis needs at least 4 samples, got " + std::to_string(L));

  PeriodDetection det;
  det.amplitudes.assign(static_cast<std::size_t>(L / 2 + 1), 0.0);
  std::vector<double> channel(static_cast<std::size_t>(L));
  for (std::int64_t m = 0; m < M; ++m) {
    for (std::int64_t t = 0; t < L; ++t) channel[static_cast<std::size_t>(t)] = x.at(m, t);
    const auto mags = rfft_magnitude(channel);
    for (std::size_t f = 0; f < mags.size(); ++f) det.amplitudes[f] += mags[f];
  }
  for (auto& a : det.amplitudes) a /= static_cast<double>(M);

  // Rank non-DC bins by amplitude; ties break toward the lower frequency.
  std::vector<int> order;
  for (std::int64_t f = 1; f <= L / 2; ++f) order.push_back(static_cast<int>(f));
  std::stable_sort(order.begin(), order.end(), [&](int fa, int fb) {
    return det.amplitudes[static_cast<std::size_t>(fa)] > det.amplitudes[static_cast<std::size_t>(fb)];
  });

  for (int f : order) {
    if (static_cast<int>(det.periods.size()) == k) break;
    std::int64_t p = std::llround(static_cast<double>(L) / static_cast<double>(f));
    p = std::max<std::int64_t>(p, 2);
    if (std::find(det.periods.begin(), det.periods.end(), static_cast<int>(p)) !=
        det.periods.end())
      continue;
    det.periods.push_back(static_cast<int>(p));
    det.frequencies.push_back(f);
  }
  return det;
}

}  // namespace foldcast
