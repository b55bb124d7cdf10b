#pragma once

// Central finite-difference oracle. Evaluates the loss on constant (untaped)
// tensors only, so it never touches the backward closures it is checking.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "transicd/tensor.hpp"

namespace transicd::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

using LossFn = std::function<numerics::Tensor(std::span<const numerics::Tensor>)>;

// |a - n| / max(|a|, |n|, floor). The floor keeps round-off in the difference
// quotient from dominating entries whose true gradient is ~0.
inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline std::vector<numerics::Tensor> analytic_gradients(const LossFn& loss,
                                                        const std::vector<numerics::Tensor>& inputs) {
  numerics::Tape tape;
  std::vector<numerics::Tensor> vars;
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  numerics::Tensor value = loss(vars);
  tape.backward(value);
  std::vector<numerics::Tensor> grads;
  for (const auto& v : vars) grads.push_back(tape.grad(v));
  return grads;
}

inline double numeric_partial(const LossFn& loss, std::vector<numerics::Tensor> inputs,
                              std::size_t which, std::size_t index, double step) {
  const numerics::Tensor base = inputs[which];
  auto shifted = [&](double delta) {
    auto values = base.to_vector();
    values[index] += delta;
    inputs[which] = numerics::Tensor(base.shape(), std::move(values));
    return loss(inputs).item();
  };
  const double plus = shifted(step);
  const double minus = shifted(-step);
  return (plus - minus) / (2.0 * step);
}

inline GradCheckResult check_gradients(const LossFn& loss, const std::vector<numerics::Tensor>& inputs,
                                       double step = 1e-6, double floor = 1e-5) {
  GradCheckResult result;
  const auto grads = analytic_gradients(loss, inputs);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double a = grads[i][j];
      const double n = numeric_partial(loss, inputs, i, j, step);
      const double err = relative_error(a, n, floor);
      ++result.checked;
      if (err >= result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_input = i;
        result.worst_index = j;
        result.worst_analytic = a;
        result.worst_numeric = n;
      }
    }
  }
  return result;
}

}  // namespace transicd::testing
