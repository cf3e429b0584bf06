#pragma once

#include <cstddef>
#include <memory>
#include <sstream>
#include <vector>

#include "cpgan/autodiff/ops.hpp"

namespace cpgan::ad {

/// Integer stride and explicit zero padding, same on both spatial axes.
struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

namespace detail {

struct Im2ColShape {
  std::size_t batch, channels, height, width;  // image side
  std::size_t kernel_h, kernel_w;
  std::size_t out_h, out_w;  // sliding-window grid
  std::size_t stride, pad;

  std::size_t rows() const { return channels * kernel_h * kernel_w; }
  std::size_t cols() const { return batch * out_h * out_w; }
};

// Copies each plane into the centre of a zero border of width pad, so the
// window loops below need no bounds checks.
template <typename Real>
void pad_planes(const Real* img, std::size_t planes, std::size_t h, std::size_t w, std::size_t pad,
                Scratch<Real>& out) {
  const std::size_t wp = w + 2 * pad, hp = h + 2 * pad;
  out.assign(planes * hp * wp, Real(0));
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t r = 0; r < h; ++r)
      std::copy_n(img + (p * h + r) * w, w, out.data() + (p * hp + r + pad) * wp + pad);
}

// col[(c, i, j)][(n, oy, ox)] = img[n, c, oy*s - p + i, ox*s - p + j], zero outside.
template <typename Real>
void im2col(const Real* img, const Im2ColShape& s, Real* col) {
  Scratch<Real> padded;
  if (s.pad > 0) {
    pad_planes(img, s.batch * s.channels, s.height, s.width, s.pad, padded);
    img = padded.data();
  }
  const std::size_t cols = s.cols();
  const std::size_t hp = s.height + 2 * s.pad, wp = s.width + 2 * s.pad;
  const std::size_t grid = s.out_h * s.out_w;
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t i = 0; i < s.kernel_h; ++i)
      for (std::size_t j = 0; j < s.kernel_w; ++j) {
        Real* dst = col + ((c * s.kernel_h + i) * s.kernel_w + j) * cols;
        for (std::size_t n = 0; n < s.batch; ++n) {
          const Real* src = img + (n * s.channels + c) * hp * wp + i * wp + j;
          Real* row = dst + n * grid;
          for (std::size_t oy = 0; oy < s.out_h; ++oy) {
            const Real* line = src + oy * s.stride * wp;
            Real* out = row + oy * s.out_w;
            if (s.stride == 1)
              std::copy_n(line, s.out_w, out);
            else
              for (std::size_t ox = 0; ox < s.out_w; ++ox) out[ox] = line[ox * s.stride];
          }
        }
      }
}

// Adjoint of im2col: scatters (accumulates) columns back into the image.
template <typename Real>
void col2im(const Real* col, const Im2ColShape& s, Real* img) {
  const std::size_t hp = s.height + 2 * s.pad, wp = s.width + 2 * s.pad;
  Scratch<Real> padded;
  Real* target = img;
  if (s.pad > 0) {
    padded.assign(s.batch * s.channels * hp * wp, Real(0));
    target = padded.data();
  }
  const std::size_t cols = s.cols();
  const std::size_t grid = s.out_h * s.out_w;
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t i = 0; i < s.kernel_h; ++i)
      for (std::size_t j = 0; j < s.kernel_w; ++j) {
        const Real* srcrow = col + ((c * s.kernel_h + i) * s.kernel_w + j) * cols;
        for (std::size_t n = 0; n < s.batch; ++n) {
          Real* dst = target + (n * s.channels + c) * hp * wp + i * wp + j;
          const Real* row = srcrow + n * grid;
          for (std::size_t oy = 0; oy < s.out_h; ++oy) {
            Real* line = dst + oy * s.stride * wp;
            const Real* in = row + oy * s.out_w;
            for (std::size_t ox = 0; ox < s.out_w; ++ox) line[ox * s.stride] += in[ox];
          }
        }
      }
  if (s.pad > 0)
    for (std::size_t p = 0; p < s.batch * s.channels; ++p)
      for (std::size_t r = 0; r < s.height; ++r) {
        const Real* src = padded.data() + (p * hp + r + s.pad) * wp + s.pad;
        Real* dst = img + (p * s.height + r) * s.width;
        for (std::size_t x = 0; x < s.width; ++x) dst[x] += src[x];
      }
}

// (N, C, P) <-> (C, N*P) reorderings around the batched GEMM.
template <typename Real>
void batch_to_channel_major(const Real* src, std::size_t n, std::size_t c, std::size_t p,
                            Real* dst) {
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      std::copy_n(src + (b * c + ch) * p, p, dst + ch * n * p + b * p);
}

template <typename Real>
void channel_major_to_batch(const Real* src, std::size_t n, std::size_t c, std::size_t p,
                            Real* dst, bool accumulate) {
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const Real* s = src + ch * n * p + b * p;
      Real* d = dst + (b * c + ch) * p;
      if (accumulate)
        for (std::size_t i = 0; i < p; ++i) d[i] += s[i];
      else
        std::copy_n(s, p, d);
    }
}

inline void require_rank4(std::string_view op, const Shape& x, const Shape& w) {
  if (x.size() != 4 || w.size() != 4) shape_mismatch(op, x, w, "expected rank-4 input and kernel");
}

}  // namespace detail

/// Cross-correlation of x (N, C, H, W) with w (O, C, kh, kw) -> (N, O, Ho, Wo).
template <typename Real>
Tensor<Real> conv2d(const Tensor<Real>& x, const Tensor<Real>& w, ConvGeometry geom = {}) {
  detail::require_rank4("conv2d", x.shape(), w.shape());
  if (geom.stride == 0) throw ArgumentError("conv2d: stride must be positive");
  if (w.dim(1) != x.dim(1)) detail::shape_mismatch("conv2d", x.shape(), w.shape(), "channel count");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (h + 2 * geom.pad < kh || wd + 2 * geom.pad < kw)
    detail::shape_mismatch("conv2d", x.shape(), w.shape(), "kernel larger than padded input");
  const detail::Im2ColShape s{n, c, h, wd, kh, kw,
                              (h + 2 * geom.pad - kh) / geom.stride + 1,
                              (wd + 2 * geom.pad - kw) / geom.stride + 1,
                              geom.stride, geom.pad};
  const auto rows = static_cast<Eigen::Index>(s.rows());
  const auto cols = static_cast<Eigen::Index>(s.cols());
  auto col = std::make_shared<Scratch<Real>>(s.rows() * s.cols());
  detail::im2col(x.values().data(), s, col->data());
  Scratch<Real> mat(o * s.cols());
  MatrixMap<Real>(mat.data(), static_cast<Eigen::Index>(o), cols).noalias() =
      ConstMatrixMap<Real>(w.values().data(), static_cast<Eigen::Index>(o), rows) *
      ConstMatrixMap<Real>(col->data(), rows, cols);
  const std::size_t grid = s.out_h * s.out_w;
  std::vector<Real> out(n * o * grid);
  detail::channel_major_to_batch(mat.data(), n, o, grid, out.data(), false);
  auto xn = x.node();
  auto wn = w.node();
  return detail::emit<Real>(
      "conv2d", {n, o, s.out_h, s.out_w}, std::move(out), {x, w},
      [xn, wn, col, s, o, rows, cols, grid](std::span<const Real> g, std::span<const Real>) {
        Scratch<Real> gmat(o * s.cols());
        detail::batch_to_channel_major(g.data(), s.batch, o, grid, gmat.data());
        ConstMatrixMap<Real> gm(gmat.data(), static_cast<Eigen::Index>(o), cols);
        if (auto* gw = detail::grad_buffer(wn)) {
          MatrixMap<Real>(gw->data(), static_cast<Eigen::Index>(o), rows).noalias() +=
              gm * ConstMatrixMap<Real>(col->data(), rows, cols).transpose();
        }
        if (auto* gx = detail::grad_buffer(xn)) {
          Scratch<Real> gcol(s.rows() * s.cols());
          MatrixMap<Real>(gcol.data(), rows, cols).noalias() =
              ConstMatrixMap<Real>(wn->values->data(), static_cast<Eigen::Index>(o), rows)
                  .transpose() *
              gm;
          detail::col2im(gcol.data(), s, gx->data());
        }
      });
}

/// Transposed convolution (adjoint of conv2d): x (N, Cin, H, W), w (Cin, Cout, kh, kw)
/// -> (N, Cout, (H-1)*stride - 2*pad + kh, (W-1)*stride - 2*pad + kw).
template <typename Real>
Tensor<Real> conv_transpose2d(const Tensor<Real>& x, const Tensor<Real>& w,
                              ConvGeometry geom = {}) {
  detail::require_rank4("conv_transpose2d", x.shape(), w.shape());
  if (geom.stride == 0) throw ArgumentError("conv_transpose2d: stride must be positive");
  if (w.dim(0) != x.dim(1))
    detail::shape_mismatch("conv_transpose2d", x.shape(), w.shape(), "channel count");
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const std::size_t full_h = (h - 1) * geom.stride + kh;
  const std::size_t full_w = (wd - 1) * geom.stride + kw;
  if (full_h <= 2 * geom.pad || full_w <= 2 * geom.pad)
    detail::shape_mismatch("conv_transpose2d", x.shape(), w.shape(), "padding exceeds output");
  const detail::Im2ColShape s{n, cout, full_h - 2 * geom.pad, full_w - 2 * geom.pad,
                              kh, kw, h, wd, geom.stride, geom.pad};
  const auto rows = static_cast<Eigen::Index>(s.rows());  // cout*kh*kw
  const auto cols = static_cast<Eigen::Index>(s.cols());  // n*h*w
  const auto ci = static_cast<Eigen::Index>(cin);
  auto xmat = std::make_shared<Scratch<Real>>(cin * s.cols());
  detail::batch_to_channel_major(x.values().data(), n, cin, h * wd, xmat->data());
  Scratch<Real> col(s.rows() * s.cols());
  MatrixMap<Real>(col.data(), rows, cols).noalias() =
      ConstMatrixMap<Real>(w.values().data(), ci, rows).transpose() *
      ConstMatrixMap<Real>(xmat->data(), ci, cols);
  std::vector<Real> out(n * cout * s.height * s.width, Real(0));
  detail::col2im(col.data(), s, out.data());
  auto xn = x.node();
  auto wn = w.node();
  return detail::emit<Real>(
      "conv_transpose2d", {n, cout, s.height, s.width}, std::move(out), {x, w},
      [xn, wn, xmat, s, ci, rows, cols](std::span<const Real> g, std::span<const Real>) {
        Scratch<Real> gcol(s.rows() * s.cols());
        detail::im2col(g.data(), s, gcol.data());
        ConstMatrixMap<Real> gc(gcol.data(), rows, cols);
        if (auto* gw = detail::grad_buffer(wn)) {
          MatrixMap<Real>(gw->data(), ci, rows).noalias() +=
              ConstMatrixMap<Real>(xmat->data(), ci, cols) * gc.transpose();
        }
        if (auto* gx = detail::grad_buffer(xn)) {
          Scratch<Real> gx_mat(static_cast<std::size_t>(ci) * s.cols());
          MatrixMap<Real>(gx_mat.data(), ci, cols).noalias() =
              ConstMatrixMap<Real>(wn->values->data(), ci, rows) * gc;
          detail::channel_major_to_batch(gx_mat.data(), s.batch, static_cast<std::size_t>(ci),
                                         s.out_h * s.out_w, gx->data(), true);
        }
      });
}

}  // namespace cpgan::ad
