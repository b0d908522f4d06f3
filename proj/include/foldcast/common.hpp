#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace foldcast {

using Shape = std::vector<std::int64_t>;

/// Contract violation on tensor shapes (mismatched operands, bad axis, ...).
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration (flags, config file keys, hyperparameters).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problems with input data (CSV parsing, constant channels, short series).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric failure at runtime (non-finite loss or gradient).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

/// Row-major strides (in elements) for a shape.
inline std::vector<std::int64_t> row_major_strides(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i)
    st[i] = st[i + 1] * s[i + 1];
  return st;
}

/// ceil(a / b) for b > 0, correct for negative a (rounds toward +inf).
inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  assert(b > 0);
  std::int64_t q = a / b;
  if (a % b != 0 && a > 0) ++q;
  return q;
}

/// Dense row-major 2-D double matrix. Used both as channels x length for
/// model windows and as time x channels for dataset storage.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::int64_t rows, std::int64_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows * cols), fill) {}

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }
  bool empty() const { return v_.empty(); }

  double& at(std::int64_t r, std::int64_t c) { return v_[static_cast<std::size_t>(r * cols_ + c)]; }
  double at(std::int64_t r, std::int64_t c) const { return v_[static_cast<std::size_t>(r * cols_ + c)]; }

  double* row(std::int64_t r) { return v_.data() + r * cols_; }
  const double* row(std::int64_t r) const { return v_.data() + r * cols_; }

  std::vector<double>& data() { return v_; }
  const std::vector<double>& data() const { return v_; }

 private:
  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::vector<double> v_;
};

}  // namespace foldcast

#if !defined(NDEBUG)
#define FOLDCAST_DASSERT(cond, msg) assert((cond) && (msg))
#else
#define FOLDCAST_DASSERT(cond, msg) ((void)0)
#endif
