#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cpgan/data/image.hpp"

namespace cpgan::data {

inline constexpr std::size_t kFeatureGrid = 16;

/// Luma on [0, 1], box-averaged onto a 16 x 16 grid, row-major. Pixel (y, x)
/// belongs to cell (y * 16 / H, x * 16 / W), so any H, W >= 16 works.
inline std::vector<double> grayscale_featurize(const Image& img) {
  if (img.channels != 3) throw ShapeError("grayscale_featurize: expected 3 channels");
  if (img.height < kFeatureGrid || img.width < kFeatureGrid)
    throw ShapeError("grayscale_featurize: image smaller than the feature grid");
  std::vector<double> sums(kFeatureGrid * kFeatureGrid, 0.0), counts(sums.size(), 0.0);
  const std::size_t p = img.plane();
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::size_t i = y * img.width + x;
      const double r = (img.pixels[i] + 1.0) * 0.5, g = (img.pixels[p + i] + 1.0) * 0.5,
                   b = (img.pixels[2 * p + i] + 1.0) * 0.5;
      const std::size_t cell = (y * kFeatureGrid / img.height) * kFeatureGrid + x * kFeatureGrid / img.width;
      sums[cell] += 0.299 * r + 0.587 * g + 0.114 * b;
      counts[cell] += 1.0;
    }
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i] /= counts[i];
  return sums;
}

/// Per-dimension affine standardization fitted on a dataset.
struct Standardizer {
  std::vector<double> mean, stddev;

  /// Population statistics. Dimensions with zero variance map to 0 after transform.
  static Standardizer fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ArgumentError("Standardizer: no rows");
    const std::size_t d = rows.front().size();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows) {
      if (r.size() != d) throw ShapeError("Standardizer: ragged rows");
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
    }
    for (auto& m : s.mean) m /= n;
    for (const auto& r : rows)
      for (std::size_t j = 0; j < d; ++j) s.stddev[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
    for (auto& v : s.stddev) v = std::sqrt(v / n);
    return s;
  }

  bool degenerate(std::size_t j) const { return !(stddev[j] > 1e-12); }

  std::vector<double> transform(const std::vector<double>& x) const {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
      out[j] = degenerate(j) ? 0.0 : (x[j] - mean[j]) / stddev[j];
    return out;
  }
};

/// Featurizes and standardizes a whole image set.
inline std::vector<std::vector<double>> standardized_features(const std::vector<Image>& images) {
  std::vector<std::vector<double>> rows;
  rows.reserve(images.size());
  for (const auto& img : images) rows.push_back(grayscale_featurize(img));
  const auto s = Standardizer::fit(rows);
  for (auto& r : rows) r = s.transform(r);
  return rows;
}

}  // namespace cpgan::data
