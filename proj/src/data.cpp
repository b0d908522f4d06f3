#include "foldcast/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "foldcast/rng.hpp"

namespace foldcast {

namespace {

std::vector<std::string> split_line(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string file_stem(const std::string& path) {
  std::size_t slash = path.find_last_of("/\\");
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  std::size_t dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

struct SplitRatios {
  int train, val, test;
};

SplitRatios parse_split(const std::string& spec, const std::string& name) {
  if (spec == "auto") {
    // Benchmark-suite convention: the ETT datasets split 6:2:2, others 7:1:2.
    if (name.find("ETT") != std::string::npos) return {6, 2, 2};
    return {7, 1, 2};
  }
  auto parts = split_line(spec, ':');
  if (parts.size() != 3) throw ConfigError("split must be 'auto' or 'a:b:c', got '" + spec + "'");
  SplitRatios r{};
  try {
    r.train = std::stoi(parts[0]);
    r.val = std::stoi(parts[1]);
    r.test = std::stoi(parts[2]);
  } catch (const std::exception&) {
    throw ConfigError("split must be 'auto' or 'a:b:c', got '" + spec + "'");
  }
  if (r.train <= 0 || r.val <= 0 || r.test <= 0)
    throw ConfigError("split ratios must all be positive");
  return r;
}

}  // namespace

std::int64_t Dataset::split_begin(Split s) const {
  switch (s) {
    case Split::kTrain: return 0;
    case Split::kVal: return train_end_;
    case Split::kTest: return val_end_;
  }
  return 0;
}

std::int64_t Dataset::split_end(Split s) const {
  switch (s) {
    case Split::kTrain: return train_end_;
    case Split::kVal: return val_end_;
    case Split::kTest: return length();
  }
  return 0;
}

Matrix Dataset::window(std::int64_t t0, std::int64_t t1) const {
  if (t0 < 0 || t1 > length() || t0 >= t1)
    throw ShapeError("window [" + std::to_string(t0) + ", " + std::to_string(t1) +
                     ") out of range");
  Matrix w(channels(), t1 - t0);
  for (std::int64_t t = t0; t < t1; ++t)
    for (std::int64_t m = 0; m < channels(); ++m) w.at(m, t - t0) = values_.at(t, m);
  return w;
}

Dataset Dataset::load_csv(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  auto header = split_line(trim(line));
  if (header.size() < 2)
    throw DataError("'" + path + "' has fewer than 2 columns");
  const bool has_date = lower(trim(header[0])) == "date";
  const std::size_t first_col = has_date ? 1 : 0;
  std::vector<std::string> names(header.begin() + static_cast<std::ptrdiff_t>(first_col),
                                 header.end());
  for (auto& n : names) n = trim(n);
  const std::int64_t M = static_cast<std::int64_t>(names.size());
  if (M < 1) throw DataError("'" + path + "' has no numeric columns");

  std::vector<double> flat;
  std::vector<std::string> timestamps;
  std::int64_t row = 0;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    ++row;
    auto cells = split_line(t);
    if (static_cast<std::int64_t>(cells.size()) != M + (has_date ? 1 : 0))
      throw DataError(path + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(M + (has_date ? 1 : 0)));
    if (has_date) timestamps.push_back(trim(cells[0]));
    for (std::int64_t c = 0; c < M; ++c) {
      const std::string cell = trim(cells[static_cast<std::size_t>(c) + first_col]);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size())
        throw DataError(path + ": row " + std::to_string(row) + ", column '" +
                        names[static_cast<std::size_t>(c)] + "': cannot parse '" + cell + "'");
      flat.push_back(v);
    }
  }
  const std::int64_t T = row;
  if (T < 3) throw DataError("'" + path + "' has too few rows (" + std::to_string(T) + ")");
  Matrix values(T, M);
  values.data() = std::move(flat);

  Dataset ds = from_values(file_stem(path), std::move(values), std::move(names), opts);
  ds.timestamps_ = std::move(timestamps);
  return ds;
}

Dataset Dataset::from_values(std::string name, Matrix values,
                             std::vector<std::string> channel_names, const LoadOptions& opts) {
  Dataset ds;
  ds.name_ = std::move(name);
  ds.values_ = std::move(values);
  ds.channel_names_ = std::move(channel_names);
  const std::int64_t T = ds.values_.rows();
  const std::int64_t M = ds.values_.cols();
  if (ds.channel_names_.empty())
    for (std::int64_t c = 0; c < M; ++c) ds.channel_names_.push_back("c" + std::to_string(c));

  const SplitRatios r = parse_split(opts.split, ds.name_);
  const std::int64_t total = r.train + r.val + r.test;
  ds.train_end_ = T * r.train / total;
  ds.val_end_ = T * (r.train + r.val) / total;
  if (ds.train_end_ < 1 || ds.train_end_ >= ds.val_end_ || ds.val_end_ > T)
    throw DataError("dataset '" + ds.name_ + "' has too few rows to split");

  ds.stats_.mean.assign(static_cast<std::size_t>(M), 0.0);
  ds.stats_.stdev.assign(static_cast<std::size_t>(M), 0.0);
  for (std::int64_t m = 0; m < M; ++m) {
    double mean = 0.0;
    for (std::int64_t t = 0; t < ds.train_end_; ++t) mean += ds.values_.at(t, m);
    mean /= static_cast<double>(ds.train_end_);
    double var = 0.0;
    for (std::int64_t t = 0; t < ds.train_end_; ++t) {
      const double c = ds.values_.at(t, m) - mean;
      var += c * c;
    }
    var /= static_cast<double>(ds.train_end_);
    double sd = std::sqrt(var);
    if (sd < 1e-12) {
      if (!opts.epsilon_guard)
        throw DataError("channel '" + ds.channel_names_[static_cast<std::size_t>(m)] +
                        "' is constant over the training split; enable the epsilon guard for "
                        "synthetic data or drop the column");
      sd = 1.0;
    }
    ds.stats_.mean[static_cast<std::size_t>(m)] = mean;
    ds.stats_.stdev[static_cast<std::size_t>(m)] = sd;
  }
  for (std::int64_t t = 0; t < T; ++t)
    for (std::int64_t m = 0; m < M; ++m)
      ds.values_.at(t, m) = (ds.values_.at(t, m) - ds.stats_.mean[static_cast<std::size_t>(m)]) /
                            ds.stats_.stdev[static_cast<std::size_t>(m)];
  return ds;
}

// ---- Windows -----------------------------------------------------------------

WindowSet::WindowSet(const Dataset& ds, Split split, std::int64_t context, std::int64_t horizon,
                     std::int64_t stride, bool extend_context)
    : ds_(&ds), context_(context), horizon_(horizon), stride_(stride) {
  if (context < 1 || horizon < 1 || stride < 1)
    throw ConfigError("windows: context, horizon, and stride must be positive");
  const std::int64_t begin = ds.split_begin(split);
  const std::int64_t end = ds.split_end(split);
  first_origin_ = extend_context ? std::max<std::int64_t>(0, begin - context) : begin;
  const std::int64_t last_origin = end - context - horizon;
  count_ = last_origin >= first_origin_ ? (last_origin - first_origin_) / stride_ + 1 : 0;
  if (count_ == 0)
    warning_ = "context+horizon (" + std::to_string(context + horizon) +
               ") does not fit in the split (" + std::to_string(end - first_origin_) +
               " rows); no windows";
}

WindowSample WindowSet::get(std::int64_t i) const {
  if (i < 0 || i >= count_) throw ShapeError("window index out of range");
  const std::int64_t o = first_origin_ + i * stride_;
  return {ds_->window(o, o + context_), ds_->window(o + context_, o + context_ + horizon_), o};
}

WindowSet windows(const Dataset& ds, Split split, std::int64_t context, std::int64_t horizon,
                  std::int64_t stride, bool extend_context) {
  return WindowSet(ds, split, context, horizon, stride, extend_context);
}

Matrix denormalize(const Matrix& y_norm, const NormStats& stats) {
  if (static_cast<std::size_t>(y_norm.rows()) != stats.mean.size())
    throw ShapeError("denormalize: " + std::to_string(y_norm.rows()) + " channels vs " +
                     std::to_string(stats.mean.size()) + " stat entries");
  Matrix out(y_norm.rows(), y_norm.cols());
  for (std::int64_t m = 0; m < y_norm.rows(); ++m)
    for (std::int64_t t = 0; t < y_norm.cols(); ++t)
      out.at(m, t) = y_norm.at(m, t) * stats.stdev[static_cast<std::size_t>(m)] +
                     stats.mean[static_cast<std::size_t>(m)];
  return out;
}

// ---- Synthetic benchmark stand-in ----------------------------------------------

Matrix synth_ett_like(const std::string& preset, std::int64_t rows, std::uint64_t seed,
                      std::vector<std::string>* channel_names_out) {
  double daily, weekly;
  if (preset == "etth") {
    daily = 24.0;
    weekly = 168.0;
  } else if (preset == "ettm") {
    daily = 96.0;
    weekly = 672.0;
  } else {
    throw ConfigError("unknown synth preset '" + preset + "' (use etth or ettm)");
  }
  const std::vector<std::string> names = {"HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT"};
  if (channel_names_out) *channel_names_out = names;
  const std::int64_t M = static_cast<std::int64_t>(names.size());
  const double two_pi = 6.283185307179586477;
  const double yearly = daily * 365.0;

  Matrix out(rows, M);
  Rng rng(seed);
  for (std::int64_t m = 0; m < M; ++m) {
    const double amp_d = 0.9 + 0.5 * rng.uniform();
    const double amp_w = 0.5 + 0.4 * rng.uniform();
    const double amp_y = 0.6 + 0.5 * rng.uniform();
    const double mod = 0.25 + 0.2 * rng.uniform();  // weekly modulation of the daily swing
    const double ph_d = two_pi * rng.uniform();
    const double ph_w = two_pi * rng.uniform();
    const double ph_y = two_pi * rng.uniform();
    const double drift = 0.2 * (rng.uniform() - 0.5);
    const double scale = 0.5 + 9.5 * rng.uniform();
    const double offset = 20.0 * (rng.uniform() - 0.5);
    const double ar = 0.72;
    const double noise_sd = 0.28;
    double e = 0.0;
    for (std::int64_t t = 0; t < rows; ++t) {
      const double td = static_cast<double>(t);
      const double day = std::sin(two_pi * td / daily + ph_d);
      const double week = std::sin(two_pi * td / weekly + ph_w);
      const double year = std::sin(two_pi * td / yearly + ph_y);
      // Box-Muller from two uniform draws.
      const double u1 = std::max(rng.uniform(), 1e-12);
      const double u2 = rng.uniform();
      const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
      e = ar * e + noise_sd * z;
      const double v = amp_d * day * (1.0 + mod * week) + amp_w * week + amp_y * year +
                       drift * td / static_cast<double>(rows) + e;
      out.at(t, m) = offset + scale * v;
    }
  }
  return out;
}

void write_synth_csv(const std::string& path, const std::string& preset, std::int64_t rows,
                     std::uint64_t seed) {
  std::vector<std::string> names;
  Matrix values = synth_ett_like(preset, rows, seed, &names);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "date";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  const std::time_t base = 1467331200;  // 2016-07-01 00:00:00 UTC
  const std::int64_t step = preset == "etth" ? 3600 : 900;
  char buf[32];
  char num[64];
  for (std::int64_t t = 0; t < values.rows(); ++t) {
    const std::time_t when = base + static_cast<std::time_t>(t * step);
    std::tm tmv{};
    gmtime_r(&when, &tmv);
    std::strftime(buf, sizeof buf, "%Y-%m-%d %H:%M:%S", &tmv);
    out << buf;
    for (std::int64_t m = 0; m < values.cols(); ++m) {
      std::snprintf(num, sizeof num, "%.6f", values.at(t, m));
      out << ',' << num;
    }
    out << '\n';
  }
}

}  // namespace foldcast
