#pragma once

// Central finite-difference oracle for reverse-mode gradients (64-bit only).

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "cpgan/autodiff.hpp"
#include "cpgan/util/random.hpp"

namespace cpgan::testing {

using ad::Tensor;
using TensorD = Tensor<double>;
using Builder = std::function<TensorD(const std::vector<TensorD>&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

inline TensorD random_tensor(ad::Shape shape, util::Rng& rng, double scale = 1.0) {
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = scale * util::normal01(rng);
  return TensorD::from(std::move(shape), std::move(v));
}

/// Keeps every value at least `gap` away from each listed kink location.
inline TensorD away_from(TensorD t, std::vector<double> kinks, double gap = 1e-3) {
  std::vector<double> v(t.values().begin(), t.values().end());
  for (auto& x : v)
    for (double k : kinks)
      if (std::abs(x - k) < gap) x = k + (x >= k ? gap : -gap);
  return TensorD::from(t.shape(), std::move(v));
}

namespace detail {
inline double weighted_sum(const TensorD& out, const std::vector<double>& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weights[i];
  return s;
}
}  // namespace detail

/// Compares reverse-mode gradients of sum(w * f(inputs)) for random fixed w against
/// central differences. Relative error per element is |a - n| / max(|a|, |n|, 1e-3).
/// Coordinates where the one-sided differences disagree at both h and h / 100 (a kink
/// of a piecewise-linear primitive lies inside the window) are skipped and counted.
inline GradCheckResult gradcheck(const Builder& f, const std::vector<TensorD>& inputs,
                                 util::Rng& rng, double h = 1e-5) {
  std::vector<TensorD> frozen;
  for (const auto& t : inputs) frozen.push_back(t.clone(false));
  const TensorD probe = f(frozen);
  std::vector<double> weights(probe.size());
  for (auto& w : weights) w = util::normal01(rng);

  std::vector<TensorD> tracked;
  for (const auto& t : inputs) tracked.push_back(t.clone(true));
  {
    ad::Tape<double> tape;
    ad::TapeScope<double> scope(tape);
    const TensorD out = f(tracked);
    const TensorD w = TensorD::from(out.shape(), weights);
    tape.backward(ad::sum(ad::mul(out, w)));
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto analytic = tracked[k].grad();
    std::vector<double> base(inputs[k].values().begin(), inputs[k].values().end());
    for (std::size_t i = 0; i < base.size(); ++i) {
      auto eval = [&](double delta) {
        std::vector<TensorD> args = frozen;
        std::vector<double> v = base;
        v[i] += delta;
        args[k] = TensorD::from(inputs[k].shape(), std::move(v));
        return detail::weighted_sum(f(args), weights);
      };
      const double a = analytic[i];
      const double f0 = eval(0.0);
      // Returns the relative error, or nothing if a kink lies inside [x - step, x + step].
      auto compare = [&](double step) -> std::optional<double> {
        const double fp = eval(step), fm = eval(-step);
        const double central = (fp - fm) / (2 * step);
        const double forward = (fp - f0) / step, backward = (f0 - fm) / step;
        if (std::abs(forward - backward) > 1e-3 * std::max(1.0, std::abs(central))) return std::nullopt;
        return std::abs(a - central) / std::max({std::abs(a), std::abs(central), 1e-3});
      };
      // A kink whose slope change is below the detection threshold still
      // biases the estimate; such coordinates get a second look at h / 100
      // and keep the closer of the two estimates.
      auto err = compare(h);
      if (!err || *err > 1e-6) {
        const auto fine = compare(h / 100);
        if (fine && (!err || *fine < *err)) err = fine;
      }
      if (!err) {
        ++result.skipped_kinks;
        continue;
      }
      result.max_rel_error = std::max(result.max_rel_error, *err);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace cpgan::testing
