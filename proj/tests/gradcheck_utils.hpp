#pragma once

// Finite-difference check of model parameter gradients, shared between the
// unit suite and the acceptance runner.

#include <cmath>
#include <vector>

#include "foldcast/model.hpp"
#include "foldcast/tensor.hpp"

namespace testutil {

// Max hybrid-relative error between taped gradients and central differences
// over every coord_stride-th coordinate of every parameter. Dropout must be
// off (the model is evaluated with training=false).
template <typename T>
double param_grad_check(foldcast::Model<T>& model, const std::vector<foldcast::Matrix>& xs,
                        const foldcast::Tensor<T>& target, std::size_t coord_stride = 1,
                        double eps = 1e-5) {
  using namespace foldcast;
  auto loss_value = [&]() {
    Forecast<T> fc = model.forward(xs, false, nullptr);
    return static_cast<double>(mse_loss(fc.prediction, target).item());
  };

  for (auto& p : model.parameters()) p.tensor.zero_grad();
  std::vector<std::vector<T>> analytic;
  {
    Tape<T> tape;
    typename Tape<T>::Scope scope(tape);
    Forecast<T> fc = model.forward(xs, false, nullptr);
    Tensor<T> loss = mse_loss(fc.prediction, target);
    tape.backward(loss);
  }
  for (auto& p : model.parameters()) analytic.push_back(p.tensor.grad());

  double max_err = 0.0;
  auto& params = model.parameters();
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& w = params[pi].tensor.data();
    for (std::size_t i = 0; i < w.size(); i += coord_stride) {
      const T saved = w[i];
      w[i] = saved + static_cast<T>(eps);
      const double fp = loss_value();
      w[i] = saved - static_cast<T>(eps);
      const double fm = loss_value();
      w[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = static_cast<double>(analytic[pi][i]);
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      max_err = std::max(max_err, err);
    }
    params[pi].tensor.zero_grad();
  }
  return max_err;
}

}  // namespace testutil
