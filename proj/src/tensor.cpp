#include "foldcast/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace foldcast {

namespace {

int g_max_threads = 0;  // 0 = library default

// Parallel regions are only worth entering for enough work; below this many
// scalar ops the loop runs inline.
constexpr std::int64_t kParallelCutoff = 1 << 14;

template <typename T>
bool all_finite(const std::vector<T>& v) {
  for (T x : v)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1)
      throw ShapeError(std::string(op) + ": shapes not broadcast-compatible: " + shape_str(a) +
                       " vs " + shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

// Strides of `in` aligned to the (broader) `out` shape; 0 where broadcast.
std::vector<std::int64_t> aligned_strides(const Shape& in, const Shape& out) {
  auto st = row_major_strides(in);
  std::vector<std::int64_t> r(out.size(), 0);
  const std::size_t off = out.size() - in.size();
  for (std::size_t i = 0; i < in.size(); ++i)
    r[off + i] = (in[i] == 1 && out[off + i] != 1) ? 0 : st[i];
  return r;
}

// Odometer walk over `shape`, calling fn(out_flat, off_a, off_b).
template <typename Fn>
void for_each_broadcast(const Shape& shape, const std::vector<std::int64_t>& sa,
                        const std::vector<std::int64_t>& sb, Fn&& fn) {
  const std::int64_t total = numel(shape);
  const int rank = static_cast<int>(shape.size());
  if (rank == 0) {
    fn(0, 0, 0);
    return;
  }
  std::vector<std::int64_t> idx(rank, 0);
  std::int64_t oa = 0, ob = 0;
  for (std::int64_t f = 0; f < total; ++f) {
    fn(f, oa, ob);
    for (int d = rank - 1; d >= 0; --d) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < shape[d]) break;
      idx[d] = 0;
      oa -= sa[d] * shape[d];
      ob -= sb[d] * shape[d];
    }
  }
}

template <typename T>
void maybe_record(const Tensor<T>& out, std::function<void()> fn) {
  if (out.requires_grad()) Tape<T>::active()->record(std::move(fn));
}

template <typename T>
bool tracing(std::initializer_list<const Tensor<T>*> ins) {
  if (!Tape<T>::active()) return false;
  for (const Tensor<T>* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

// Elementwise binary with broadcasting. FwdOp(a,b)->v; bwd accumulates into
// input grads given (gout, a, b).
template <typename T, typename FwdOp, typename DaOp, typename DbOp>
Tensor<T> binary_op(const char* name, const Tensor<T>& a, const Tensor<T>& b, FwdOp fwd, DaOp da,
                    DbOp db) {
  const Shape os = broadcast_shapes(a.shape(), b.shape(), name);
  Tensor<T> out(os, tracing<T>({&a, &b}));
  const auto sa = aligned_strides(a.shape(), os);
  const auto sb = aligned_strides(b.shape(), os);
  const T* av = a.data().data();
  const T* bv = b.data().data();
  T* ov = out.data().data();
  if (a.shape() == os && b.shape() == os) {
    const std::int64_t n = out.size();
    for (std::int64_t i = 0; i < n; ++i) ov[i] = fwd(av[i], bv[i]);
  } else {
    for_each_broadcast(os, sa, sb,
                       [&](std::int64_t f, std::int64_t oa, std::int64_t ob) { ov[f] = fwd(av[oa], bv[ob]); });
  }
  maybe_record(out, [an = a.node_ptr(), bn = b.node_ptr(), on = out.node_ptr(), os, sa, sb, da,
                     db]() {
    const T* g = on->grad.data();
    const T* av2 = an->value.data();
    const T* bv2 = bn->value.data();
    T* ga = an->requires_grad ? an->grad.data() : nullptr;
    T* gb = bn->requires_grad ? bn->grad.data() : nullptr;
    for_each_broadcast(os, sa, sb, [&](std::int64_t f, std::int64_t oa, std::int64_t ob) {
      if (ga) ga[oa] += da(g[f], av2[oa], bv2[ob]);
      if (gb) gb[ob] += db(g[f], av2[oa], bv2[ob]);
    });
  });
  return out;
}

}  // namespace

void set_max_threads(int n) {
  g_max_threads = n;
#ifdef _OPENMP
  if (n > 0)
    omp_set_num_threads(n);
  else
    omp_set_num_threads(omp_get_num_procs());
#endif
}

int max_threads() { return g_max_threads; }

// ---- Tensor ----------------------------------------------------------------

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad) {
  n_ = std::make_shared<detail::TensorNode<T>>();
  n_->shape = std::move(shape);
  n_->value.assign(static_cast<std::size_t>(numel(n_->shape)), T(0));
  n_->requires_grad = requires_grad;
  if (requires_grad) n_->grad.assign(n_->value.size(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  if (numel(shape) != static_cast<std::int64_t>(values.size()))
    throw ShapeError("Tensor::from: " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  Tensor t(shape, requires_grad);
  t.n_->value = std::move(values);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T v) {
  return from({1}, {v});
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T v) {
  Tensor t(std::move(shape));
  std::fill(t.n_->value.begin(), t.n_->value.end(), v);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::uniform(Shape shape, Rng& rng, T lo, T hi, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  for (auto& x : t.n_->value)
    x = static_cast<T>(static_cast<double>(lo) +
                       (static_cast<double>(hi) - static_cast<double>(lo)) * rng.uniform());
  return t;
}

template <typename T>
std::vector<T>& Tensor<T>::grad() {
  if (!requires_grad()) throw ShapeError("grad(): tensor does not track gradients");
  return n_->grad;
}

template <typename T>
const std::vector<T>& Tensor<T>::grad() const {
  if (!requires_grad()) throw ShapeError("grad(): tensor does not track gradients");
  return n_->grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool v) {
  n_->requires_grad = v;
  if (v)
    n_->grad.assign(n_->value.size(), T(0));
  else
    n_->grad.clear();
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (requires_grad()) std::fill(n_->grad.begin(), n_->grad.end(), T(0));
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw ShapeError("item(): tensor has shape " + shape_str(shape()));
  return n_->value[0];
}

// ---- Tape -------------------------------------------------------------------

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (loss.size() != 1)
    throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  if (steps_.empty()) throw ShapeError("backward: tape is empty");
  if (!loss.requires_grad())
    throw ShapeError("backward: loss is not connected to the tape");
  loss.node()->grad[0] += T(1);
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  clear();
}

// ---- Elementwise ops --------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T g, T, T) { return g; },
      [](T g, T, T) { return g; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T g, T, T) { return g; },
      [](T g, T, T) { return -g; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T g, T, T y) { return g * y; },
      [](T g, T x, T) { return g * x; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  Tensor<T> out(a.shape(), tracing<T>({&a}));
  const T* av = a.data().data();
  T* ov = out.data().data();
  const std::int64_t n = a.size();
  for (std::int64_t i = 0; i < n; ++i) ov[i] = av[i] * s;
  maybe_record(out, [an = a.node_ptr(), on = out.node_ptr(), s, n]() {
    if (!an->requires_grad) return;
    for (std::int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i] * s;
  });
  return out;
}

// ---- matmul -----------------------------------------------------------------

namespace {

struct MatmulPlan {
  std::int64_t m, k, n, batches;
  std::vector<std::int64_t> a_off, b_off;  // element offsets per out-batch
  bool a_bcast = false, b_bcast = false;   // operand repeated across out batches
};

MatmulPlan plan_matmul(const Shape& sa, const Shape& sb) {
  if (sa.size() < 2 || sb.size() < 2)
    throw ShapeError("matmul: operands must be at least 2-D: " + shape_str(sa) + " vs " +
                     shape_str(sb));
  MatmulPlan p;
  p.m = sa[sa.size() - 2];
  p.k = sa.back();
  const std::int64_t k2 = sb[sb.size() - 2];
  p.n = sb.back();
  if (p.k != k2)
    throw ShapeError("matmul: inner dimensions disagree: " + shape_str(sa) + " vs " +
                     shape_str(sb));
  Shape ba(sa.begin(), sa.end() - 2), bb(sb.begin(), sb.end() - 2);
  Shape obatch = broadcast_shapes(ba, bb, "matmul");
  p.batches = numel(obatch);
  auto sta = aligned_strides(ba, obatch);
  auto stb = aligned_strides(bb, obatch);
  for (std::size_t i = 0; i < obatch.size(); ++i) {
    if (obatch[i] > 1 && sta[i] == 0) p.a_bcast = true;
    if (obatch[i] > 1 && stb[i] == 0) p.b_bcast = true;
  }
  p.a_off.resize(static_cast<std::size_t>(p.batches));
  p.b_off.resize(static_cast<std::size_t>(p.batches));
  std::int64_t ia = 0, ib = 0;
  std::vector<std::int64_t> idx(obatch.size(), 0);
  for (std::int64_t f = 0; f < p.batches; ++f) {
    p.a_off[static_cast<std::size_t>(f)] = ia * p.m * p.k;
    p.b_off[static_cast<std::size_t>(f)] = ib * p.k * p.n;
    for (int d = static_cast<int>(obatch.size()) - 1; d >= 0; --d) {
      ++idx[d];
      ia += sta[d];
      ib += stb[d];
      if (idx[d] < obatch[d]) break;
      idx[d] = 0;
      ia -= sta[d] * obatch[d];
      ib -= stb[d] * obatch[d];
    }
  }
  return p;
}

// C rows are owned by exactly one iteration each and every reduction runs in
// a fixed sequential order, so results are bit-identical for any thread count.
template <typename T>
void matmul_forward(const T* av, const T* bv, T* cv, const MatmulPlan& p) {
  const std::int64_t rows = p.batches * p.m;
  const bool par = rows * p.k * p.n >= kParallelCutoff;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::int64_t ob = r / p.m, i = r % p.m;
    const T* A = av + p.a_off[static_cast<std::size_t>(ob)] + i * p.k;
    const T* B = bv + p.b_off[static_cast<std::size_t>(ob)];
    T* C = cv + ob * p.m * p.n + i * p.n;
    for (std::int64_t j = 0; j < p.n; ++j) C[j] = T(0);
    for (std::int64_t kk = 0; kk < p.k; ++kk) {
      const T s = A[kk];
      const T* Brow = B + kk * p.n;
      for (std::int64_t j = 0; j < p.n; ++j) C[j] += s * Brow[j];
    }
  }
  (void)par;
}

// dA = dC . B^T
template <typename T>
void matmul_backward_a(const T* g, const T* bv, T* ag, const MatmulPlan& p) {
  const std::int64_t rows = p.batches * p.m;
  const bool par = rows * p.k * p.n >= kParallelCutoff;
  auto row_body = [&](std::int64_t ob, std::int64_t i) {
    const T* G = g + ob * p.m * p.n + i * p.n;
    const T* B = bv + p.b_off[static_cast<std::size_t>(ob)];
    T* dA = ag + p.a_off[static_cast<std::size_t>(ob)] + i * p.k;
    for (std::int64_t kk = 0; kk < p.k; ++kk) {
      const T* Brow = B + kk * p.n;
      T acc = T(0);
      for (std::int64_t j = 0; j < p.n; ++j) acc += G[j] * Brow[j];
      dA[kk] += acc;
    }
  };
  if (!p.a_bcast) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
    for (std::int64_t r = 0; r < rows; ++r) row_body(r / p.m, r % p.m);
  } else {
    // A repeated across batches: keep batch order sequential so accumulation
    // into the shared matrix stays deterministic.
    for (std::int64_t ob = 0; ob < p.batches; ++ob)
      for (std::int64_t i = 0; i < p.m; ++i) row_body(ob, i);
  }
  (void)par;
}

// dB = A^T . dC
template <typename T>
void matmul_backward_b(const T* g, const T* av, T* bg, const MatmulPlan& p) {
  const bool par = p.batches * p.m * p.k * p.n >= kParallelCutoff;
  if (!p.b_bcast) {
    const std::int64_t rows = p.batches * p.k;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
    for (std::int64_t r = 0; r < rows; ++r) {
      const std::int64_t ob = r / p.k, kk = r % p.k;
      const T* A = av + p.a_off[static_cast<std::size_t>(ob)];
      const T* G = g + ob * p.m * p.n;
      T* dB = bg + p.b_off[static_cast<std::size_t>(ob)] + kk * p.n;
      for (std::int64_t i = 0; i < p.m; ++i) {
        const T s = A[i * p.k + kk];
        const T* Grow = G + i * p.n;
        for (std::int64_t j = 0; j < p.n; ++j) dB[j] += s * Grow[j];
      }
    }
  } else {
    // B shared across batches (weight case): each thread owns a set of dB
    // rows and walks all batches in order.
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
    for (std::int64_t kk = 0; kk < p.k; ++kk) {
      for (std::int64_t ob = 0; ob < p.batches; ++ob) {
        const T* A = av + p.a_off[static_cast<std::size_t>(ob)];
        const T* G = g + ob * p.m * p.n;
        T* dB = bg + p.b_off[static_cast<std::size_t>(ob)] + kk * p.n;
        for (std::int64_t i = 0; i < p.m; ++i) {
          const T s = A[i * p.k + kk];
          const T* Grow = G + i * p.n;
          for (std::int64_t j = 0; j < p.n; ++j) dB[j] += s * Grow[j];
        }
      }
    }
  }
  (void)par;
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  MatmulPlan p = plan_matmul(a.shape(), b.shape());
  Shape os;
  {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    Shape ba(sa.begin(), sa.end() - 2), bb(sb.begin(), sb.end() - 2);
    os = broadcast_shapes(ba, bb, "matmul");
    os.push_back(p.m);
    os.push_back(p.n);
  }
  Tensor<T> out(os, tracing<T>({&a, &b}));
  matmul_forward(a.data().data(), b.data().data(), out.data().data(), p);
  maybe_record(out, [an = a.node_ptr(), bn = b.node_ptr(), on = out.node_ptr(), p]() {
    const T* g = on->grad.data();
    if (an->requires_grad) matmul_backward_a(g, bn->value.data(), an->grad.data(), p);
    if (bn->requires_grad) matmul_backward_b(g, an->value.data(), bn->grad.data(), p);
  });
  return out;
}

// ---- Shape ops --------------------------------------------------------------

namespace {

template <typename T>
void transpose_copy(const T* src, T* dst, const Shape& out_shape,
                    const std::vector<std::int64_t>& src_strides_for_out) {
  const std::int64_t total = numel(out_shape);
  const int rank = static_cast<int>(out_shape.size());
  std::vector<std::int64_t> idx(rank, 0);
  std::int64_t so = 0;
  for (std::int64_t f = 0; f < total; ++f) {
    dst[f] = src[so];
    for (int d = rank - 1; d >= 0; --d) {
      ++idx[d];
      so += src_strides_for_out[d];
      if (idx[d] < out_shape[d]) break;
      idx[d] = 0;
      so -= src_strides_for_out[d] * out_shape[d];
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> transpose(const Tensor<T>& a, std::int64_t d0, std::int64_t d1) {
  const std::int64_t r = a.ndim();
  if (d0 < 0 || d0 >= r || d1 < 0 || d1 >= r)
    throw ShapeError("transpose: axes out of range for " + shape_str(a.shape()));
  Shape os = a.shape();
  std::swap(os[d0], os[d1]);
  auto st = row_major_strides(a.shape());
  std::swap(st[d0], st[d1]);  // strides into src, indexed by out dims
  Tensor<T> out(os, tracing<T>({&a}));
  transpose_copy(a.data().data(), out.data().data(), os, st);
  maybe_record(out, [an = a.node_ptr(), on = out.node_ptr(), os, st]() {
    if (!an->requires_grad) return;
    const T* g = on->grad.data();
    T* ga = an->grad.data();
    const std::int64_t total = numel(os);
    const int rank = static_cast<int>(os.size());
    std::vector<std::int64_t> idx(rank, 0);
    std::int64_t so = 0;
    for (std::int64_t f = 0; f < total; ++f) {
      ga[so] += g[f];
      for (int d = rank - 1; d >= 0; --d) {
        ++idx[d];
        so += st[d];
        if (idx[d] < os[d]) break;
        idx[d] = 0;
        so -= st[d] * os[d];
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.size())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  Tensor<T> out(shape, tracing<T>({&a}));
  out.data() = a.data();
  maybe_record(out, [an = a.node_ptr(), on = out.node_ptr()]() {
    if (!an->requires_grad) return;
    const std::size_t n = an->grad.size();
    for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
  });
  return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::int64_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  const std::int64_t rank = static_cast<std::int64_t>(s0.size());
  if (axis < 0 || axis >= rank) throw ShapeError("concat: bad axis");
  Shape os = s0;
  os[axis] = 0;
  for (const auto& p : parts) {
    if (p.ndim() != rank) throw ShapeError("concat: rank mismatch");
    for (std::int64_t d = 0; d < rank; ++d)
      if (d != axis && p.shape()[d] != s0[d])
        throw ShapeError("concat: shape mismatch: " + shape_str(p.shape()) + " vs " +
                         shape_str(s0));
    os[axis] += p.shape()[axis];
  }
  bool track = false;
  if (Tape<T>::active())
    for (const auto& p : parts) track = track || p.requires_grad();
  Tensor<T> out(os, track);

  std::int64_t outer = 1, inner = 1;
  for (std::int64_t d = 0; d < axis; ++d) outer *= os[d];
  for (std::int64_t d = axis + 1; d < rank; ++d) inner *= os[d];

  T* ov = out.data().data();
  const std::int64_t out_row = os[axis] * inner;
  std::int64_t col0 = 0;
  for (const auto& p : parts) {
    const std::int64_t block = p.shape()[axis] * inner;
    const T* pv = p.data().data();
    for (std::int64_t o = 0; o < outer; ++o)
      std::memcpy(ov + o * out_row + col0, pv + o * block, static_cast<std::size_t>(block) * sizeof(T));
    col0 += block;
  }
  if (track) {
    std::vector<std::shared_ptr<detail::TensorNode<T>>> nodes;
    std::vector<std::int64_t> blocks;
    for (const auto& p : parts) {
      nodes.push_back(p.node_ptr());
      blocks.push_back(p.shape()[axis] * inner);
    }
    Tape<T>::active()->record([nodes, blocks, on = out.node_ptr(), outer, out_row]() {
      const T* g = on->grad.data();
      std::int64_t c0 = 0;
      for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
        const std::int64_t block = blocks[pi];
        if (nodes[pi]->requires_grad) {
          T* gp = nodes[pi]->grad.data();
          for (std::int64_t o = 0; o < outer; ++o) {
            const T* src = g + o * out_row + c0;
            T* dst = gp + o * block;
            for (std::int64_t j = 0; j < block; ++j) dst[j] += src[j];
          }
        }
        c0 += block;
      }
    });
  }
  return out;
}

// ---- Normalization / activations ---------------------------------------------

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::int64_t axis) {
  const std::int64_t rank = a.ndim();
  if (axis < 0 || axis >= rank)
    throw ShapeError("softmax: bad axis for " + shape_str(a.shape()));
  FOLDCAST_DASSERT(all_finite(a.data()), "softmax: non-finite input");
  const Shape& s = a.shape();
  std::int64_t outer = 1, inner = 1;
  const std::int64_t len = s[axis];
  for (std::int64_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::int64_t d = axis + 1; d < rank; ++d) inner *= s[d];

  Tensor<T> out(s, tracing<T>({&a}));
  const T* av = a.data().data();
  T* ov = out.data().data();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t in = 0; in < inner; ++in) {
      const std::int64_t base = o * len * inner + in;
      T mx = av[base];
      for (std::int64_t t = 1; t < len; ++t) mx = std::max(mx, av[base + t * inner]);
      T sum = T(0);
      for (std::int64_t t = 0; t < len; ++t) {
        const T e = std::exp(av[base + t * inner] - mx);
        ov[base + t * inner] = e;
        sum += e;
      }
      const T inv = T(1) / sum;
      for (std::int64_t t = 0; t < len; ++t) ov[base + t * inner] *= inv;
    }
  }
  maybe_record(out, [an = a.node_ptr(), on = out.node_ptr(), outer, inner, len]() {
    if (!an->requires_grad) return;
    const T* y = on->value.data();
    const T* g = on->grad.data();
    T* ga = an->grad.data();
    for (std::int64_t o = 0; o < outer; ++o) {
      for (std::int64_t in = 0; in < inner; ++in) {
        const std::int64_t base = o * len * inner + in;
        T dot = T(0);
        for (std::int64_t t = 0; t < len; ++t) dot += g[base + t * inner] * y[base + t * inner];
        for (std::int64_t t = 0; t < len; ++t) {
          const std::int64_t i = base + t * inner;
          ga[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  const std::int64_t d = x.shape().back();
  if (gain.ndim() != 1 || bias.ndim() != 1 || gain.dim(0) != d || bias.dim(0) != d)
    throw ShapeError("layernorm: gain/bias must be 1-D of size " + std::to_string(d) + ", got " +
                     shape_str(gain.shape()) + " and " + shape_str(bias.shape()));
  const std::int64_t rows = x.size() / d;
  Tensor<T> out(x.shape(), tracing<T>({&x, &gain, &bias}));
  const T* xv = x.data().data();
  const T* gv = gain.data().data();
  const T* bv = bias.data().data();
  T* ov = out.data().data();
  std::vector<T> means(static_cast<std::size_t>(rows)), invs(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* row = xv + r * d;
    T mean = T(0);
    for (std::int64_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<T>(d);
    T var = T(0);
    for (std::int64_t j = 0; j < d; ++j) {
      const T c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<T>(d);
    const T inv = T(1) / std::sqrt(var + eps);
    means[static_cast<std::size_t>(r)] = mean;
    invs[static_cast<std::size_t>(r)] = inv;
    T* orow = ov + r * d;
    for (std::int64_t j = 0; j < d; ++j) orow[j] = (row[j] - mean) * inv * gv[j] + bv[j];
  }
  maybe_record(out, [xn = x.node_ptr(), gn = gain.node_ptr(), bn = bias.node_ptr(),
                     on = out.node_ptr(), rows, d, means = std::move(means),
                     invs = std::move(invs)]() {
    const T* g = on->grad.data();
    const T* xv2 = xn->value.data();
    const T* gv2 = gn->value.data();
    for (std::int64_t r = 0; r < rows; ++r) {
      const T mean = means[static_cast<std::size_t>(r)];
      const T inv = invs[static_cast<std::size_t>(r)];
      const T* xrow = xv2 + r * d;
      const T* grow = g + r * d;
      T sum1 = T(0), sum2 = T(0);
      for (std::int64_t j = 0; j < d; ++j) {
        const T xhat = (xrow[j] - mean) * inv;
        const T dxhat = grow[j] * gv2[j];
        sum1 += dxhat;
        sum2 += dxhat * xhat;
        if (gn->requires_grad) gn->grad[static_cast<std::size_t>(j)] += grow[j] * xhat;
        if (bn->requires_grad) bn->grad[static_cast<std::size_t>(j)] += grow[j];
      }
      if (xn->requires_grad) {
        T* gx = xn->grad.data() + r * d;
        const T invd = T(1) / static_cast<T>(d);
        for (std::int64_t j = 0; j < d; ++j) {
          const T xhat = (xrow[j] - mean) * inv;
          const T dxhat = grow[j] * gv2[j];
          gx[j] += inv * (dxhat - sum1 * invd - xhat * sum2 * invd);
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  Tensor<T> out(a.shape(), tracing<T>({&a}));
  const T* av = a.data().data();
  T* ov = out.data().data();
  const std::int64_t n = a.size();
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(av[i]);
    ov[i] = static_cast<T>(0.5 * x * (1.0 + std::erf(x * inv_sqrt2)));
  }
  maybe_record(out, [an = a.node_ptr(), on = out.node_ptr(), n]() {
    if (!an->requires_grad) return;
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    for (std::int64_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(an->value[static_cast<std::size_t>(i)]);
      const double phi = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
      an->grad[static_cast<std::size_t>(i)] +=
          on->grad[static_cast<std::size_t>(i)] * static_cast<T>(phi + x * pdf);
    }
  });
  return out;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& a, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return a;
  Tensor<T> out(a.shape(), tracing<T>({&a}));
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  const std::int64_t n = a.size();
  std::vector<T> mask(static_cast<std::size_t>(n));
  const T* av = a.data().data();
  T* ov = out.data().data();
  for (std::int64_t i = 0; i < n; ++i) {
    mask[static_cast<std::size_t>(i)] = rng.uniform() < rate ? T(0) : keep_scale;
    ov[i] = av[i] * mask[static_cast<std::size_t>(i)];
  }
  maybe_record(out, [an = a.node_ptr(), on = out.node_ptr(), mask = std::move(mask), n]() {
    if (!an->requires_grad) return;
    for (std::int64_t i = 0; i < n; ++i)
      an->grad[static_cast<std::size_t>(i)] +=
          on->grad[static_cast<std::size_t>(i)] * mask[static_cast<std::size_t>(i)];
  });
  return out;
}

// ---- Reductions / losses -------------------------------------------------------

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  Tensor<T> out(Shape{1}, tracing<T>({&a}));
  T s = T(0);
  for (T x : a.data()) s += x;
  out.data()[0] = s;
  maybe_record(out, [an = a.node_ptr(), on = out.node_ptr()]() {
    if (!an->requires_grad) return;
    const T g = on->grad[0];
    for (auto& gx : an->grad) gx += g;
  });
  return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  Tensor<T> s = sum_all(a);
  return scale(s, T(1) / static_cast<T>(a.size()));
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("mse_loss: shape mismatch: " + shape_str(pred.shape()) + " vs " +
                     shape_str(target.shape()));
  Tensor<T> out(Shape{1}, tracing<T>({&pred, &target}));
  const std::int64_t n = pred.size();
  const T* pv = pred.data().data();
  const T* tv = target.data().data();
  T s = T(0);
  for (std::int64_t i = 0; i < n; ++i) {
    const T d = pv[i] - tv[i];
    s += d * d;
  }
  out.data()[0] = s / static_cast<T>(n);
  maybe_record(out, [pn = pred.node_ptr(), tn = target.node_ptr(), on = out.node_ptr(), n]() {
    const T coef = on->grad[0] * T(2) / static_cast<T>(n);
    for (std::int64_t i = 0; i < n; ++i) {
      const T d = pn->value[static_cast<std::size_t>(i)] - tn->value[static_cast<std::size_t>(i)];
      if (pn->requires_grad) pn->grad[static_cast<std::size_t>(i)] += coef * d;
      if (tn->requires_grad) tn->grad[static_cast<std::size_t>(i)] -= coef * d;
    }
  });
  return out;
}

template <typename T>
double mae_value(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("mae: shape mismatch: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  double s = 0;
  const std::int64_t n = a.size();
  for (std::int64_t i = 0; i < n; ++i)
    s += std::abs(static_cast<double>(a.data()[static_cast<std::size_t>(i)]) -
                  static_cast<double>(b.data()[static_cast<std::size_t>(i)]));
  return s / static_cast<double>(n);
}

// ---- Explicit instantiations ---------------------------------------------------

#define FOLDCAST_INSTANTIATE(T)                                                              \
  template class Tensor<T>;                                                                  \
  template class Tape<T>;                                                                    \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                          \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> transpose<T>(const Tensor<T>&, std::int64_t, std::int64_t);             \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                    \
  template Tensor<T> concat<T>(const std::vector<Tensor<T>>&, std::int64_t);                 \
  template Tensor<T> softmax<T>(const Tensor<T>&, std::int64_t);                             \
  template Tensor<T> layernorm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);  \
  template Tensor<T> gelu<T>(const Tensor<T>&);                                              \
  template Tensor<T> dropout<T>(const Tensor<T>&, double, Rng&);                             \
  template Tensor<T> sum_all<T>(const Tensor<T>&);                                           \
  template Tensor<T> mean_all<T>(const Tensor<T>&);                                          \
  template Tensor<T> mse_loss<T>(const Tensor<T>&, const Tensor<T>&);                        \
  template double mae_value<T>(const Tensor<T>&, const Tensor<T>&);

FOLDCAST_INSTANTIATE(float)
FOLDCAST_INSTANTIATE(double)

#undef FOLDCAST_INSTANTIATE

}  // namespace foldcast
