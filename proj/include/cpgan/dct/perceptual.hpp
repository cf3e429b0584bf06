#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "cpgan/autodiff.hpp"

namespace cpgan::dct {

using ad::Tensor;

/// Orthonormal DCT-II matrix of order k:
///   entry(i, j) = c(i) cos(pi (2j + 1) i / 2k),  c(0) = sqrt(1/k), c(i>0) = sqrt(2/k).
template <typename Real>
struct DctMatrix {
  std::size_t order = 0;
  std::vector<Real> entries;  // row-major order x order

  Real operator()(std::size_t i, std::size_t j) const { return entries[i * order + j]; }
};

template <typename Real>
DctMatrix<Real> make_dct_matrix(std::size_t k) {
  if (k == 0) throw ArgumentError("dct_matrix: order must be at least 1");
  DctMatrix<Real> m{k, std::vector<Real>(k * k)};
  const double kd = static_cast<double>(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double c = i == 0 ? std::sqrt(1.0 / kd) : std::sqrt(2.0 / kd);
    for (std::size_t j = 0; j < k; ++j)
      m.entries[i * k + j] = static_cast<Real>(
          c * std::cos(std::numbers::pi * (2.0 * static_cast<double>(j) + 1.0) *
                       static_cast<double>(i) / (2.0 * kd)));
  }
  return m;
}

/// Cached, thread-safe access to the order-k matrix.
template <typename Real>
std::shared_ptr<const DctMatrix<Real>> dct_matrix(std::size_t k) {
  static std::mutex mutex;
  static std::map<std::size_t, std::shared_ptr<const DctMatrix<Real>>> cache;
  if (k == 0) throw ArgumentError("dct_matrix: order must be at least 1");
  std::lock_guard lock(mutex);
  auto& slot = cache[k];
  if (!slot) slot = std::make_shared<const DctMatrix<Real>>(make_dct_matrix<Real>(k));
  return slot;
}

/// Copies each trailing H x W plane into the top-left corner of a k x k zero plane.
template <typename Real>
Tensor<Real> zero_pad(const Tensor<Real>& x, std::size_t k) {
  if (x.rank() < 2) throw ShapeError("zero_pad: need at least 2 dims, got " + ad::to_string(x.shape()));
  const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  if (h > k || w > k)
    throw ShapeError("zero_pad: plane " + std::to_string(h) + "x" + std::to_string(w) +
                     " larger than k=" + std::to_string(k));
  ad::Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = k;
  out_shape[out_shape.size() - 1] = k;
  const std::size_t planes = x.size() / (h * w);
  std::vector<Real> out(planes * k * k, Real(0));
  const auto xv = x.values();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t r = 0; r < h; ++r)
      std::copy_n(xv.begin() + (p * h + r) * w, w, out.begin() + (p * k + r) * k);
  auto xn = x.node();
  return ad::detail::emit<Real>(
      "zero_pad", out_shape, std::move(out), {x},
      [xn, planes, h, w, k](std::span<const Real> g, std::span<const Real>) {
        auto* gx = ad::detail::grad_buffer(xn);
        for (std::size_t p = 0; p < planes; ++p)
          for (std::size_t r = 0; r < h; ++r)
            for (std::size_t c = 0; c < w; ++c) (*gx)[(p * h + r) * w + c] += g[(p * k + r) * k + c];
      });
}

namespace detail {

// out_p = left * in_p * right for each k x k plane p.
template <typename Real>
void sandwich(const Real* in, std::size_t planes, std::size_t k, const Real* left,
              bool left_transposed, const Real* right, bool right_transposed, Real* out) {
  using Map = ad::ConstMatrixMap<Real>;
  const auto kk = static_cast<Eigen::Index>(k);
  Map l(left, kk, kk), r(right, kk, kk);
  ad::RowMatrix<Real> tmp(static_cast<Eigen::Index>(planes) * kk, kk);
  Map stacked(in, static_cast<Eigen::Index>(planes) * kk, kk);
  if (right_transposed)
    tmp.noalias() = stacked * r.transpose();
  else
    tmp.noalias() = stacked * r;
  for (std::size_t p = 0; p < planes; ++p) {
    ad::MatrixMap<Real> dst(out + p * k * k, kk, kk);
    const auto block = tmp.middleRows(static_cast<Eigen::Index>(p) * kk, kk);
    if (left_transposed)
      dst.noalias() = l.transpose() * block;
    else
      dst.noalias() = l * block;
  }
}

}  // namespace detail

/// 2-D DCT of every trailing k x k plane: Omega X Omega^T.
template <typename Real>
Tensor<Real> dct2(const Tensor<Real>& x, const DctMatrix<Real>& omega) {
  const std::size_t k = omega.order;
  if (x.rank() < 2 || x.dim(x.rank() - 2) != k || x.dim(x.rank() - 1) != k)
    throw ShapeError("dct2: expected trailing " + std::to_string(k) + "x" + std::to_string(k) +
                     " planes, got " + ad::to_string(x.shape()));
  const std::size_t planes = x.size() / (k * k);
  std::vector<Real> out(x.size());
  const Real* om = omega.entries.data();
  detail::sandwich(x.values().data(), planes, k, om, false, om, true, out.data());
  auto xn = x.node();
  auto entries = std::make_shared<std::vector<Real>>(omega.entries);
  return ad::detail::emit<Real>(
      "dct2", x.shape(), std::move(out), {x},
      [xn, entries, planes, k](std::span<const Real> g, std::span<const Real>) {
        auto* gx = ad::detail::grad_buffer(xn);
        std::vector<Real> back(g.size());
        const Real* om = entries->data();
        detail::sandwich(g.data(), planes, k, om, true, om, false, back.data());
        for (std::size_t i = 0; i < back.size(); ++i) (*gx)[i] += back[i];
      });
}

/// dct2(zero_pad(x, k)) without materializing the padding: for H x W planes,
/// Omega[:, :H] X Omega[:, :W]^T, a k x k plane each.
template <typename Real>
Tensor<Real> padded_dct2(const Tensor<Real>& x, const DctMatrix<Real>& omega) {
  const std::size_t k = omega.order;
  if (x.rank() < 2) throw ShapeError("padded_dct2: need at least 2 dims, got " + ad::to_string(x.shape()));
  const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  if (h > k || w > k)
    throw ShapeError("padded_dct2: plane " + std::to_string(h) + "x" + std::to_string(w) +
                     " larger than k=" + std::to_string(k));
  const std::size_t planes = x.size() / (h * w);
  ad::Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = k;
  out_shape[out_shape.size() - 1] = k;
  using Map = ad::ConstMatrixMap<Real>;
  const auto ki = static_cast<Eigen::Index>(k), hi = static_cast<Eigen::Index>(h),
             wi = static_cast<Eigen::Index>(w);
  auto entries = std::make_shared<std::vector<Real>>(omega.entries);
  Map om(entries->data(), ki, ki);
  std::vector<Real> out(planes * k * k);
  {
    // Right factor for all planes at once: (planes*H x W) * (W x k).
    ad::RowMatrix<Real> tmp(static_cast<Eigen::Index>(planes) * hi, ki);
    tmp.noalias() = Map(x.values().data(), static_cast<Eigen::Index>(planes) * hi, wi) *
                    om.leftCols(wi).transpose();
    for (std::size_t p = 0; p < planes; ++p)
      ad::MatrixMap<Real>(out.data() + p * k * k, ki, ki).noalias() =
          om.leftCols(hi) * tmp.middleRows(static_cast<Eigen::Index>(p) * hi, hi);
  }
  auto xn = x.node();
  return ad::detail::emit<Real>(
      "padded_dct2", out_shape, std::move(out), {x},
      [xn, entries, planes, ki, hi, wi](std::span<const Real> g, std::span<const Real>) {
        auto* gx = ad::detail::grad_buffer(xn);
        Map om(entries->data(), ki, ki);
        // dX = Omega[:, :H]^T G Omega[:, :W] per plane.
        ad::RowMatrix<Real> tmp(static_cast<Eigen::Index>(planes) * ki, wi);
        tmp.noalias() = Map(g.data(), static_cast<Eigen::Index>(planes) * ki, ki) * om.leftCols(wi);
        for (std::size_t p = 0; p < planes; ++p)
          ad::MatrixMap<Real>(gx->data() + p * static_cast<std::size_t>(hi * wi), hi, wi).noalias() +=
              om.leftCols(hi).transpose() * tmp.middleRows(static_cast<Eigen::Index>(p) * ki, ki);
      });
}

/// DCT perceptual distance between two images (C x H x W, or a batch N x C x H x W):
///   (1 / (W H)) * sum over planes || dct2(pad(a)) - dct2(pad(b)) ||_F^2
/// with W, H the unpadded extents. A batch yields the sum of per-image losses.
/// The transform is linear, so the difference is transformed once.
template <typename Real>
Tensor<Real> perceptual_loss(const Tensor<Real>& a, const Tensor<Real>& b, std::size_t k) {
  if (a.shape() != b.shape())
    throw ShapeError("perceptual_loss: shapes " + ad::to_string(a.shape()) + " and " +
                     ad::to_string(b.shape()) + " differ");
  if (a.rank() < 3) throw ShapeError("perceptual_loss: expected C x H x W images");
  const std::size_t h = a.dim(a.rank() - 2), w = a.dim(a.rank() - 1);
  const auto coeffs = padded_dct2(ad::sub(a, b), *dct_matrix<Real>(k));
  return ad::affine(ad::sum(ad::square(coeffs)), Real(1) / static_cast<Real>(w * h));
}

}  // namespace cpgan::dct
