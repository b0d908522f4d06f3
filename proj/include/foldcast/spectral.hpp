#pragma once

#include <vector>

#include "foldcast/common.hpp"

namespace foldcast {

/// Result of frequency-domain period detection.
struct PeriodDetection {
  std::vector<double> amplitudes;  // channel-mean |DFT|, bins 0..floor(L/2)
  std::vector<int> frequencies;    // accepted bins, amplitude-ranked
  std::vector<int> periods;        // round(L/f) per accepted bin, deduplicated, >= 2
};

/// |DFT(x)[f]| for f = 0..floor(L/2). Throws DataError for L < 4.
std::vector<double> rfft_magnitude(const std::vector<double>& x);

/// Ranks bins 1..floor(L/2) by channel-mean amplitude and returns up to k
/// distinct periods (fewer when rounding collapses candidates).
/// x is channels x length.
PeriodDetection top_k_periods(const Matrix& x, int k);

}  // namespace foldcast
