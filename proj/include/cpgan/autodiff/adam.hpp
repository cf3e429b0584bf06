#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cpgan/autodiff/tensor.hpp"
#include "cpgan/error.hpp"

namespace cpgan::ad {

struct AdamHyperparams {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment accumulators, one pair per parameter, plus the step count.
template <typename Real>
struct OptimizerState {
  AdamHyperparams hyper;
  std::uint64_t step = 0;
  std::vector<Tensor<Real>> first_moment;
  std::vector<Tensor<Real>> second_moment;

  static OptimizerState for_params(std::span<const Tensor<Real>> params,
                                   AdamHyperparams hyper = {}) {
    OptimizerState state;
    state.hyper = hyper;
    for (const auto& p : params) {
      state.first_moment.push_back(Tensor<Real>::zeros(p.shape()));
      state.second_moment.push_back(Tensor<Real>::zeros(p.shape()));
    }
    return state;
  }
};

/// Bias-corrected Adam step applied in place to `params` using `grads`.
template <typename Real>
void adam_update(std::span<Tensor<Real>> params, std::span<const std::span<const Real>> grads,
                 OptimizerState<Real>& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw ShapeError("adam_update: parameter, gradient and moment counts differ");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].size() != params[k].size() ||
        state.first_moment[k].shape() != params[k].shape() ||
        state.second_moment[k].shape() != params[k].shape())
      throw ShapeError("adam_update: shape mismatch for parameter " + std::to_string(k) + " " +
                       to_string(params[k].shape()));
  }
  state.step += 1;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const Real bc1 = static_cast<Real>(1.0 - std::pow(h.beta1, t));
  const Real bc2 = static_cast<Real>(1.0 - std::pow(h.beta2, t));
  const Real b1 = static_cast<Real>(h.beta1), b2 = static_cast<Real>(h.beta2);
  const Real lr = static_cast<Real>(h.learning_rate), eps = static_cast<Real>(h.epsilon);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].mutable_values();
    auto m = state.first_moment[k].mutable_values();
    auto v = state.second_moment[k].mutable_values();
    const auto g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const Real m_hat = m[i] / bc1;
      const Real v_hat = v[i] / bc2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
    check_finite<Real>("adam_update", p);
  }
}

/// Adam step using the gradients accumulated in each parameter.
template <typename Real>
void adam_update(std::span<Tensor<Real>> params, OptimizerState<Real>& state) {
  std::vector<std::span<const Real>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.push_back(p.grad());
  adam_update<Real>(params, grads, state);
}

template <typename Real>
void zero_grad(std::span<Tensor<Real>> params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace cpgan::ad
