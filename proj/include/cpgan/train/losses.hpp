#pragma once

// Generator and discriminator objectives. Image losses take batches (N, C, H, W)
// and sum per-sample losses over the batch; the discriminator losses are means.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cpgan/autodiff.hpp"
#include "cpgan/dct/perceptual.hpp"
#include "cpgan/models/networks.hpp"
#include "cpgan/util/random.hpp"

namespace cpgan::train {

using ad::Tensor;

inline constexpr double kProbEpsilon = 1e-7;

struct LossWeights {
  double mse = 1.0;         // alpha_1
  double perceptual = 0.1;  // alpha_2
  double adversarial = 1e-3;  // alpha_3

  void validate() const {
    if (!(mse >= 0 && perceptual >= 0 && adversarial >= 0))
      throw ConfigError("loss weights must be nonnegative");
    if (mse + perceptual + adversarial <= 0) throw ConfigError("at least one loss weight must be positive");
  }
};

/// (1 / (W H)) * ||g - x||^2 over channels and batch.
template <typename Real>
Tensor<Real> mse_loss(const Tensor<Real>& g, const Tensor<Real>& x) {
  if (g.shape() != x.shape())
    throw ShapeError("mse_loss: shapes " + ad::to_string(g.shape()) + " and " + ad::to_string(x.shape()) +
                     " differ");
  if (g.rank() < 3) throw ShapeError("mse_loss: expected C x H x W images");
  const std::size_t h = g.dim(g.rank() - 2), w = g.dim(g.rank() - 1);
  return ad::affine(ad::sum(ad::square(ad::sub(g, x))), Real(1) / static_cast<Real>(w * h));
}

template <typename Real>
Tensor<Real> clamp_probability(const Tensor<Real>& p) {
  const Real eps = static_cast<Real>(kProbEpsilon);
  return ad::clamp(p, eps, Real(1) - eps);
}

/// -sum log p over a batch of discriminator probabilities.
template <typename Real>
Tensor<Real> adversarial_loss_from_prob(const Tensor<Real>& p) {
  return ad::affine(ad::sum(ad::log(clamp_probability(p))), Real(-1));
}

/// -sum_n log D(g_n | y_n).
template <typename Real>
Tensor<Real> adversarial_loss(const Tensor<Real>& g, const Tensor<Real>& y,
                              const models::DiscriminatorParams<Real>& d, const models::ModelConfig& cfg) {
  return adversarial_loss_from_prob(models::discriminate(g, y, d, cfg));
}

/// Mean binary cross-entropy of probabilities p (N, 1) against 0/1 labels.
template <typename Real>
Tensor<Real> binary_cross_entropy(const Tensor<Real>& p, const std::vector<Real>& labels) {
  if (p.size() != labels.size())
    throw ShapeError("binary_cross_entropy: " + std::to_string(p.size()) + " probabilities, " +
                     std::to_string(labels.size()) + " labels");
  const auto pc = clamp_probability(p);
  const auto l = Tensor<Real>::from(p.shape(), labels);
  std::vector<Real> flipped(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) flipped[i] = 1 - labels[i];
  const auto lf = Tensor<Real>::from(p.shape(), std::move(flipped));
  const auto ll = ad::add(ad::mul(l, ad::log(pc)), ad::mul(lf, ad::log(ad::affine(pc, Real(-1), Real(1)))));
  return ad::affine(ad::mean(ll), Real(-1));
}

template <typename Real>
struct GeneratorLoss {
  Tensor<Real> total;
  // Component values for logging. A zero-weight component is evaluated on
  // untracked copies so it never enters the gradient.
  double mse = 0, perceptual = 0, adversarial = 0;
};

/// alpha_1 mse + alpha_2 perceptual + alpha_3 adversarial; zero-weight terms are
/// left out of the graph. D is used as a constant: no gradient reaches its parameters.
template <typename Real>
GeneratorLoss<Real> joint_generator_loss(const Tensor<Real>& g, const Tensor<Real>& x, const Tensor<Real>& y,
                                         const models::DiscriminatorParams<Real>& d,
                                         const models::ModelConfig& cfg, const LossWeights& w,
                                         std::size_t dct_k) {
  w.validate();
  const auto frozen = d.detached();
  GeneratorLoss<Real> out;
  std::vector<Tensor<Real>> terms;
  auto term = [&](double weight, double& value, auto&& f) {
    if (weight > 0) {
      const Tensor<Real> t = f(g, y);
      value = static_cast<double>(t.item());
      terms.push_back(weight == 1 ? t : ad::affine(t, static_cast<Real>(weight)));
    } else {
      value = static_cast<double>(f(g.detach(), y.detach()).item());
    }
  };
  term(w.mse, out.mse, [&](const Tensor<Real>& a, const Tensor<Real>&) { return mse_loss(a, x); });
  term(w.perceptual, out.perceptual,
       [&](const Tensor<Real>& a, const Tensor<Real>&) { return dct::perceptual_loss(a, x, dct_k); });
  term(w.adversarial, out.adversarial,
       [&](const Tensor<Real>& a, const Tensor<Real>& c) { return adversarial_loss(a, c, frozen, cfg); });
  out.total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) out.total = ad::add(out.total, terms[i]);
  return out;
}

/// Randomized label flip batch: I = beta x + (1 - beta) g per sample, label 1 iff beta > T.
template <typename Real>
struct RlfBatch {
  Tensor<Real> images;  // untracked
  std::vector<Real> labels;
  std::vector<double> betas;
};

/// Blend with given per-sample betas. x and g must share shape (N, ...).
template <typename Real>
RlfBatch<Real> rlf_blend(const Tensor<Real>& x, const Tensor<Real>& g, const std::vector<double>& betas,
                         double threshold) {
  if (x.shape() != g.shape())
    throw ShapeError("rlf_blend: shapes " + ad::to_string(x.shape()) + " and " + ad::to_string(g.shape()) +
                     " differ");
  const std::size_t n = x.dim(0), per = x.size() / n;
  if (betas.size() != n) throw ShapeError("rlf_blend: need one beta per sample");
  if (!(threshold >= 0 && threshold <= 1)) throw ConfigError("rlf_blend: threshold must lie in [0, 1]");
  RlfBatch<Real> out{{}, std::vector<Real>(n), betas};
  std::vector<Real> blended(x.size());
  const auto xv = x.values(), gv = g.values();
  for (std::size_t s = 0; s < n; ++s) {
    const Real b = static_cast<Real>(betas[s]);
    for (std::size_t i = s * per; i < (s + 1) * per; ++i) blended[i] = b * xv[i] + (1 - b) * gv[i];
    out.labels[s] = betas[s] > threshold ? Real(1) : Real(0);
  }
  out.images = Tensor<Real>::from(x.shape(), std::move(blended));
  return out;
}

/// Draws one beta ~ U(0, 1) per sample from rng.
template <typename Real>
RlfBatch<Real> rlf_blend(const Tensor<Real>& x, const Tensor<Real>& g, double threshold, util::Rng& rng) {
  if (x.rank() == 0) throw ShapeError("rlf_blend: empty batch");
  std::vector<double> betas(x.dim(0));
  for (auto& b : betas) b = util::uniform01(rng);
  return rlf_blend(x, g, betas, threshold);
}

/// Mean BCE of D on blended samples against RLF labels. g is detached.
template <typename Real>
Tensor<Real> discriminator_loss_rlf(const Tensor<Real>& x, const Tensor<Real>& g, const Tensor<Real>& y,
                                    double threshold, const models::DiscriminatorParams<Real>& d,
                                    const models::ModelConfig& cfg, util::Rng& rng) {
  const auto batch = rlf_blend(x, ad::stop_gradient(g), threshold, rng);
  return binary_cross_entropy(models::discriminate(batch.images, ad::stop_gradient(y), d, cfg), batch.labels);
}

/// Without RLF: real samples labeled 1, generated labeled 0, BCE averaged over 2N.
template <typename Real>
Tensor<Real> discriminator_loss_standard(const Tensor<Real>& x, const Tensor<Real>& g, const Tensor<Real>& y,
                                         const models::DiscriminatorParams<Real>& d,
                                         const models::ModelConfig& cfg) {
  if (x.shape() != g.shape()) throw ShapeError("discriminator_loss_standard: x and g differ in shape");
  const std::size_t n = x.dim(0);
  const auto images = ad::concat<Real>({x.detach(), ad::stop_gradient(g)}, 0);
  const auto yy = ad::concat<Real>({ad::stop_gradient(y), ad::stop_gradient(y)}, 0);
  std::vector<Real> labels(2 * n, Real(0));
  std::fill_n(labels.begin(), n, Real(1));
  return binary_cross_entropy(models::discriminate(images, yy, d, cfg), labels);
}

}  // namespace cpgan::train
