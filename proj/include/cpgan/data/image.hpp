#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "cpgan/autodiff/tensor.hpp"
#include "cpgan/error.hpp"

namespace cpgan::data {

/// Planar C x H x W image with values in [-1, 1]; background renders at -1.
struct Image {
  std::size_t channels = 3;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  static Image filled(std::size_t c, std::size_t h, std::size_t w, float value) {
    return Image{c, h, w, std::vector<float>(c * h * w, value)};
  }

  float& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height + y) * width + x];
  }
  std::size_t plane() const { return height * width; }
  bool operator==(const Image&) const = default;
};

inline constexpr float kLumaR = 0.299f, kLumaG = 0.587f, kLumaB = 0.114f;

/// Per-pixel luminance of an RGB image, in the image's own value range.
inline std::vector<float> luminance(const Image& img) {
  if (img.channels != 3) throw ShapeError("luminance: expected 3 channels");
  std::vector<float> out(img.plane());
  const std::size_t p = img.plane();
  for (std::size_t i = 0; i < p; ++i)
    out[i] = kLumaR * img.pixels[i] + kLumaG * img.pixels[p + i] + kLumaB * img.pixels[2 * p + i];
  return out;
}

/// Stacks same-geometry images into an N x C x H x W tensor.
template <typename Real>
ad::Tensor<Real> to_batch(std::span<const Image* const> images) {
  if (images.empty()) throw ShapeError("to_batch: empty batch");
  const Image& first = *images.front();
  std::vector<Real> values;
  values.reserve(images.size() * first.pixels.size());
  for (const Image* img : images) {
    if (img->channels != first.channels || img->height != first.height || img->width != first.width)
      throw ShapeError("to_batch: mixed image geometry");
    values.insert(values.end(), img->pixels.begin(), img->pixels.end());
  }
  return ad::Tensor<Real>::from({images.size(), first.channels, first.height, first.width},
                                std::move(values));
}

/// Splits an N x C x H x W tensor back into images.
template <typename Real>
std::vector<Image> from_batch(const ad::Tensor<Real>& batch) {
  if (batch.rank() != 4) throw ShapeError("from_batch: expected N x C x H x W, got " + ad::to_string(batch.shape()));
  const std::size_t n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  std::vector<Image> out(n, Image{c, h, w, {}});
  const auto v = batch.values();
  for (std::size_t i = 0; i < n; ++i)
    out[i].pixels.assign(v.begin() + i * c * h * w, v.begin() + (i + 1) * c * h * w);
  return out;
}

}  // namespace cpgan::data
