#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "foldcast/common.hpp"
#include "foldcast/rng.hpp"

namespace foldcast {

namespace detail {

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated iff requires_grad
  bool requires_grad = false;
};

}  // namespace detail

/// Dense n-dimensional array handle with optional gradient buffer.
/// Copying a Tensor copies the handle, not the storage; ops produce fresh
/// nodes. Gradients accumulate (+=) so a weight used at several sites
/// collects contributions from all of them.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);

  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T v);
  static Tensor full(Shape shape, T v);
  /// Uniform init in [lo, hi), row-major draw order.
  static Tensor uniform(Shape shape, Rng& rng, T lo, T hi, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const { return n_->shape; }
  std::int64_t ndim() const { return static_cast<std::int64_t>(n_->shape.size()); }
  std::int64_t dim(std::int64_t i) const { return n_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(n_->value.size()); }

  std::vector<T>& data() { return n_->value; }
  const std::vector<T>& data() const { return n_->value; }
  std::vector<T>& grad();
  const std::vector<T>& grad() const;

  bool requires_grad() const { return n_ && n_->requires_grad; }
  void set_requires_grad(bool v);
  void zero_grad();

  /// Value of a single-element tensor.
  T item() const;

  detail::TensorNode<T>* node() const { return n_.get(); }
  std::shared_ptr<detail::TensorNode<T>> node_ptr() const { return n_; }

 private:
  std::shared_ptr<detail::TensorNode<T>> n_;
};

/// Records executed differentiable operations in execution order. One
/// training step builds and consumes one tape; single-writer.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward_step) { steps_.push_back(std::move(backward_step)); }
  std::size_t size() const { return steps_.size(); }
  void clear() { steps_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and runs recorded steps in reverse order,
  /// accumulating gradients; the tape is cleared afterwards.
  void backward(const Tensor<T>& loss);

  static Tape* active() { return active_slot(); }

  /// RAII activation of a tape on the current thread.
  class Scope {
   public:
    explicit Scope(Tape& t) : prev_(active_slot()) { active_slot() = &t; }
    ~Scope() { active_slot() = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

 private:
  // Function-local storage sidesteps cross-TU TLS init for template members.
  static Tape*& active_slot() {
    thread_local Tape* active = nullptr;
    return active;
  }

  std::vector<std::function<void()>> steps_;
};

// ---- Differentiable operations -------------------------------------------
// Elementwise binaries broadcast per numpy rules (right-aligned, size-1 dims
// stretch). Shape mismatches throw ShapeError naming both operand shapes.

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);

/// Batched matrix product. a: [..., m, k], b: [..., k, n]; leading batch
/// dimensions broadcast. Gradients: dA = dC.B^T, dB = A^T.dC (summed over
/// broadcast batch dimensions).
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> transpose(const Tensor<T>& a, std::int64_t d0, std::int64_t d1);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::int64_t axis);

/// Max-subtracted softmax along `axis`.
template <typename T> Tensor<T> softmax(const Tensor<T>& a, std::int64_t axis);

/// Layer normalization over the last axis, epsilon-stabilized, then affine.
/// gain/bias are 1-D of the last-axis size.
template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                    T eps = static_cast<T>(1e-5));

template <typename T> Tensor<T> gelu(const Tensor<T>& a);

/// Inverted dropout: each element kept with probability 1-rate and scaled by
/// 1/(1-rate). Draw order is row-major, one uniform per element.
template <typename T> Tensor<T> dropout(const Tensor<T>& a, double rate, Rng& rng);

template <typename T> Tensor<T> sum_all(const Tensor<T>& a);
template <typename T> Tensor<T> mean_all(const Tensor<T>& a);

/// Mean of squared differences over all elements (differentiable).
template <typename T> Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Mean absolute error as a plain value (metric only).
template <typename T> double mae_value(const Tensor<T>& a, const Tensor<T>& b);

void set_max_threads(int n);  // 0 = hardware default
int max_threads();

}  // namespace foldcast
