#include <doctest.h>

#include <cmath>
#include <numbers>

#include "foldcast/spectral.hpp"
#include "oracles.hpp"

using namespace foldcast;

namespace {

std::vector<double> tone(std::int64_t L, double period, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(static_cast<std::size_t>(L));
  for (std::int64_t t = 0; t < L; ++t)
    x[static_cast<std::size_t>(t)] =
        amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period + phase);
  return x;
}

Matrix single_row(const std::vector<double>& x) {
  Matrix m(1, static_cast<std::int64_t>(x.size()));
  m.data() = x;
  return m;
}

}  // namespace

TEST_CASE("pure tone concentrates at its bin") {
  auto mags = rfft_magnitude(tone(96, 24.0));
  // Period 24 over 96 samples is frequency index 4.
  for (std::size_t f = 0; f < mags.size(); ++f) {
    if (f == 4)
      CHECK(mags[f] > 40.0);
    else
      CHECK(mags[f] < 1e-9);
  }
}

TEST_CASE("constant series is DC only") {
  std::vector<double> x(64, 2.5);
  auto mags = rfft_magnitude(x);
  CHECK(mags[0] == doctest::Approx(64 * 2.5));
  for (std::size_t f = 1; f < mags.size(); ++f) CHECK(mags[f] < 1e-9);
}

TEST_CASE("fft magnitudes match the naive DFT oracle") {
  Rng rng(21);
  for (std::int64_t L : {128, 97, 250, 1680}) {
    auto x = oracle::randu(rng, L);
    auto mags = rfft_magnitude(x);
    auto ref = oracle::dft_magnitudes(x);
    REQUIRE(mags.size() == ref.size());
    double scale = 0.0;
    for (double r : ref) scale = std::max(scale, r);
    for (std::size_t f = 0; f < ref.size(); ++f) {
      INFO("L=" << L << " f=" << f);
      CHECK(std::abs(mags[f] - ref[f]) <= 1e-9 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("too-short input is rejected") {
  CHECK_THROWS_AS(rfft_magnitude({1.0, 2.0, 3.0}), DataError);
}

TEST_CASE("two tones yield both periods") {
  auto x = tone(96, 24.0);
  auto other = tone(96, 8.0, 0.5);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += other[i];
  auto det = top_k_periods(single_row(x), 2);
  REQUIRE(det.periods.size() == 2);
  CHECK(det.periods[0] == 24);  // larger amplitude first
  CHECK(det.periods[1] == 8);
}

TEST_CASE("white noise yields k distinct periods >= 2") {
  Rng rng(77);
  auto det = top_k_periods(single_row(oracle::randu(rng, 256)), 3);
  CHECK(det.periods.size() == 3);
  for (std::size_t i = 0; i < det.periods.size(); ++i) {
    CHECK(det.periods[i] >= 2);
    for (std::size_t j = i + 1; j < det.periods.size(); ++j)
      CHECK(det.periods[i] != det.periods[j]);
  }
  for (int f : det.frequencies) {
    CHECK(f >= 1);
    CHECK(f <= 128);
  }
}

TEST_CASE("long two-tone mix recovers daily and weekly periods") {
  const std::int64_t L = 1680;
  auto x = tone(L, 24.0);
  auto weekly = tone(L, 168.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += weekly[i];
  auto det = top_k_periods(single_row(x), 2);
  REQUIRE(det.periods.size() == 2);
  CHECK((det.periods[0] == 24 || det.periods[0] == 168));
  CHECK((det.periods[1] == 24 || det.periods[1] == 168));
  CHECK(det.periods[0] != det.periods[1]);

  // Cross-check the winning bins against the naive DFT.
  auto ref = oracle::dft_magnitudes(x);
  double others = 0.0;
  for (std::size_t g = 1; g < ref.size(); ++g)
    if (static_cast<int>(g) != det.frequencies[0] && static_cast<int>(g) != det.frequencies[1])
      others = std::max(others, ref[g]);
  for (int f : det.frequencies) CHECK(ref[static_cast<std::size_t>(f)] > others * 100.0);
}

TEST_CASE("amplitude ranking is scale invariant") {
  Rng rng(5);
  Matrix x = oracle::rand_matrix(rng, 3, 200);
  auto base = top_k_periods(x, 4);
  for (double c : {0.01, 3.0, 1e6}) {
    Matrix scaled(3, 200);
    for (std::size_t i = 0; i < x.data().size(); ++i) scaled.data()[i] = c * x.data()[i];
    auto det = top_k_periods(scaled, 4);
    CHECK(det.frequencies == base.frequencies);
  }
}

TEST_CASE("a dominant injected sinusoid becomes the top period") {
  Rng rng(6);
  const std::int64_t L = 240;
  Matrix x = oracle::rand_matrix(rng, 2, L);
  auto det0 = top_k_periods(x, 1);
  double peak = 0.0;
  for (std::size_t f = 1; f < det0.amplitudes.size(); ++f)
    peak = std::max(peak, det0.amplitudes[f]);
  const double amp = 4.0 * peak;  // exceeds every existing bin
  auto s = tone(L, 12.0, amp);
  for (std::int64_t m = 0; m < 2; ++m)
    for (std::int64_t t = 0; t < L; ++t) x.at(m, t) += s[static_cast<std::size_t>(t)];
  auto det = top_k_periods(x, 1);
  REQUIRE(det.periods.size() == 1);
  CHECK(det.periods[0] == 12);
}
