#pragma once

#include <optional>
#include <string>
#include <vector>

#include "foldcast/common.hpp"

namespace foldcast {

struct NormStats {
  std::vector<double> mean, stdev;  // per channel, from training rows only
};

enum class Split { kTrain, kVal, kTest };

struct LoadOptions {
  // "auto" picks 6:2:2 for files whose stem contains "ETT", else 7:1:2.
  std::string split = "auto";
  // Replace a near-zero training std with 1 instead of rejecting the channel.
  bool epsilon_guard = false;
};

/// A normalized multivariate series with split boundaries. Values are stored
/// time x channels; immutable after load.
class Dataset {
 public:
  static Dataset load_csv(const std::string& path, const LoadOptions& opts = {});

  /// Assembles a dataset from raw (unnormalized) values, applying the same
  /// splitting and normalization as load_csv.
  static Dataset from_values(std::string name, Matrix values,
                             std::vector<std::string> channel_names, const LoadOptions& opts = {});

  const std::string& name() const { return name_; }
  std::int64_t length() const { return values_.rows(); }
  std::int64_t channels() const { return values_.cols(); }
  const Matrix& values() const { return values_; }  // normalized
  const std::vector<std::string>& channel_names() const { return channel_names_; }
  const std::vector<std::string>& timestamps() const { return timestamps_; }

  std::int64_t train_end() const { return train_end_; }
  std::int64_t val_end() const { return val_end_; }
  std::int64_t split_begin(Split s) const;
  std::int64_t split_end(Split s) const;
  const NormStats& norm_stats() const { return stats_; }

  /// channels x length slice of the normalized values, rows [t0, t1).
  Matrix window(std::int64_t t0, std::int64_t t1) const;

 private:
  std::string name_;
  Matrix values_;
  std::vector<std::string> timestamps_;
  std::vector<std::string> channel_names_;
  std::int64_t train_end_ = 0, val_end_ = 0;
  NormStats stats_;
};

struct WindowSample {
  Matrix x;             // channels x L
  Matrix y;             // channels x H, immediately following x
  std::int64_t origin;  // row index where x starts
};

/// Lazily indexed (x, y) pairs over one split. With extend_context the
/// context may begin up to L rows before the split start (targets always
/// stay inside the split); without it both x and y lie inside the split.
class WindowSet {
 public:
  WindowSet(const Dataset& ds, Split split, std::int64_t context, std::int64_t horizon,
            std::int64_t stride = 1, bool extend_context = false);

  std::int64_t count() const { return count_; }
  WindowSample get(std::int64_t i) const;
  const std::string& warning() const { return warning_; }

 private:
  const Dataset* ds_;
  std::int64_t context_, horizon_, stride_, first_origin_, count_;
  std::string warning_;
};

WindowSet windows(const Dataset& ds, Split split, std::int64_t context, std::int64_t horizon,
                  std::int64_t stride = 1, bool extend_context = false);

/// y_raw = y_norm * std + mean, rows are channels.
Matrix denormalize(const Matrix& y_norm, const NormStats& stats);

/// Deterministic benchmark-shaped synthetic series (date column + named
/// channels) for environments without the public benchmark files. `preset`
/// selects the sampling cadence and seasonal structure:
///   "etth"  — hourly; daily (24) and weekly (168) cycles; default 17420 rows
///   "ettm"  — 15-minute; daily (96) and weekly (672) cycles; default 20000 rows
Matrix synth_ett_like(const std::string& preset, std::int64_t rows, std::uint64_t seed,
                      std::vector<std::string>* channel_names_out = nullptr);

/// Writes the synthetic series as a benchmark-layout CSV.
void write_synth_csv(const std::string& path, const std::string& preset, std::int64_t rows,
                     std::uint64_t seed);

}  // namespace foldcast
