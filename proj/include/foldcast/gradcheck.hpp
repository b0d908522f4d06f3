#pragma once

#include <cmath>
#include <functional>

#include "foldcast/tensor.hpp"

namespace foldcast {

/// Compares the taped gradient of a scalar-valued function against central
/// finite differences, coordinate by coordinate. Returns the maximum
/// hybrid-relative error |analytic - numeric| / max(1, |analytic|, |numeric|).
/// Meant to run with T = double; float lacks the headroom for the
/// differences.
template <typename T>
double grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, Tensor<T>& x,
                  double eps = 1e-5) {
  x.set_requires_grad(true);
  Tape<T> tape;
  {
    typename Tape<T>::Scope scope(tape);
    Tensor<T> y = f(x);
    tape.backward(y);
  }
  std::vector<T> analytic = x.grad();
  x.set_requires_grad(false);

  double max_err = 0.0;
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    const T saved = x.data()[i];
    x.data()[i] = saved + static_cast<T>(eps);
    const double fp = static_cast<double>(f(x).item());
    x.data()[i] = saved - static_cast<T>(eps);
    const double fm = static_cast<double>(f(x).item());
    x.data()[i] = saved;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = static_cast<double>(analytic[i]);
    const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace foldcast
