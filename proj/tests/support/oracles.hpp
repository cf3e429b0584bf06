#pragma once

// Direct nested-loop reference computations, independent of the library's
// GEMM-based implementations.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace cpgan::testing {

/// out[n][o][y][x] = sum_{c,i,j} in[n][c][y*s-p+i][x*s-p+j] * k[o][c][i][j]
inline std::vector<double> conv2d_loops(const std::vector<double>& in, std::size_t n,
                                        std::size_t c, std::size_t h, std::size_t w,
                                        const std::vector<double>& k, std::size_t o,
                                        std::size_t kh, std::size_t kw, std::size_t stride,
                                        std::size_t pad, std::size_t& oh, std::size_t& ow) {
  oh = (h + 2 * pad - kh) / stride + 1;
  ow = (w + 2 * pad - kw) / stride + 1;
  std::vector<double> out(n * o * oh * ow, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t oc = 0; oc < o; ++oc)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          double acc = 0.0;
          for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                const long ix = static_cast<long>(x * stride + j) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w))
                  continue;
                acc += in[((b * c + ic) * h + iy) * w + ix] * k[((oc * c + ic) * kh + i) * kw + j];
              }
          out[((b * o + oc) * oh + y) * ow + x] = acc;
        }
  return out;
}

/// Scatter form of the transposed convolution, kernel layout [cin][cout][i][j].
inline std::vector<double> conv_transpose2d_loops(const std::vector<double>& in, std::size_t n,
                                                  std::size_t cin, std::size_t h, std::size_t w,
                                                  const std::vector<double>& k, std::size_t cout,
                                                  std::size_t kh, std::size_t kw,
                                                  std::size_t stride, std::size_t pad,
                                                  std::size_t& oh, std::size_t& ow) {
  oh = (h - 1) * stride + kh - 2 * pad;
  ow = (w - 1) * stride + kw - 2 * pad;
  std::vector<double> out(n * cout * oh * ow, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ic = 0; ic < cin; ++ic)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          for (std::size_t oc = 0; oc < cout; ++oc)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long oy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                const long ox = static_cast<long>(x * stride + j) - static_cast<long>(pad);
                if (oy < 0 || ox < 0 || oy >= static_cast<long>(oh) || ox >= static_cast<long>(ow))
                  continue;
                out[((b * cout + oc) * oh + oy) * ow + ox] +=
                    in[((b * cin + ic) * h + y) * w + x] * k[((ic * cout + oc) * kh + i) * kw + j];
              }
  return out;
}

/// Orthonormal DCT-II entry by the cosine formula.
inline double dct_entry(std::size_t k, std::size_t i, std::size_t j) {
  const double c = i == 0 ? std::sqrt(1.0 / k) : std::sqrt(2.0 / k);
  return c * std::cos(std::numbers::pi * (2.0 * j + 1.0) * i / (2.0 * k));
}

/// Direct 2-D DCT-II sum: Y[u][v] = sum_{x,y} dct(u,x) dct(v,y) X[x][y].
inline std::vector<double> dct2_direct(const std::vector<double>& plane, std::size_t k) {
  std::vector<double> out(k * k, 0.0);
  for (std::size_t u = 0; u < k; ++u)
    for (std::size_t v = 0; v < k; ++v) {
      double acc = 0.0;
      for (std::size_t x = 0; x < k; ++x)
        for (std::size_t y = 0; y < k; ++y)
          acc += dct_entry(k, u, x) * dct_entry(k, v, y) * plane[x * k + y];
      out[u * k + v] = acc;
    }
  return out;
}

/// Scalar Adam, one parameter.
struct ScalarAdam {
  double lr, b1, b2, eps, m = 0, v = 0;
  int t = 0;
  double step(double p, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return p - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace cpgan::testing
