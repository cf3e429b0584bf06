#pragma once

// Quality and diversity metrics over batches of generated bottoms.
//
// SEC proxy: an image counts as a valid trouser image when its foreground
// (luma > -0.5 in [-1, 1] pixel space; background renders at -1) overlaps the
// best-matching pose template with IoU >= 0.5. Reported as a percentage.
//
// DC: Shannon entropy (bits) of the joint channel-wise color histogram, i.e.
// three 256-bin channel histograms over all pixels of the batch concatenated
// into one 768-bin distribution. Range [0, log2 768].

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "cpgan/data/image.hpp"
#include "cpgan/data/ppm.hpp"
#include "cpgan/data/synth.hpp"
#include "cpgan/error.hpp"

namespace cpgan::eval {

using data::Image;
using Mask = std::vector<std::uint8_t>;

inline constexpr double kForegroundThreshold = -0.5;
inline constexpr double kSecIouThreshold = 0.5;
inline constexpr std::size_t kHistogramBins = 256;

inline Mask foreground_mask(const Image& img) {
  if (img.channels != 3) throw ShapeError("foreground_mask: expected an RGB image");
  const std::size_t p = img.height * img.width;
  Mask m(p);
  for (std::size_t i = 0; i < p; ++i) {
    const double luma = data::kLumaR * img.pixels[i] + data::kLumaG * img.pixels[p + i] +
                        data::kLumaB * img.pixels[2 * p + i];
    m[i] = luma > kForegroundThreshold;
  }
  return m;
}

/// Intersection over union; 0 when both masks are empty.
inline double iou(const Mask& a, const Mask& b) {
  if (a.size() != b.size()) throw ShapeError("iou: mask sizes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] & b[i];
    uni += a[i] | b[i];
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// One silhouette per pose bin, at the mid leg width.
inline std::vector<Mask> pose_templates(const data::SynthConfig& cfg) {
  std::vector<Mask> out;
  for (std::size_t b = 0; b < cfg.pose_bins; ++b) out.push_back(data::pose_template(b, cfg));
  return out;
}

inline double best_template_iou(const Image& img, const std::vector<Mask>& templates) {
  if (templates.empty()) throw ArgumentError("sec_proxy: no templates");
  const Mask fg = foreground_mask(img);
  double best = 0;
  for (const auto& t : templates) best = std::max(best, iou(fg, t));
  return best;
}

inline double sec_proxy(const std::vector<Image>& images, const std::vector<Mask>& templates) {
  if (images.empty()) throw ArgumentError("sec_proxy: empty batch");
  std::size_t valid = 0;
  for (const auto& img : images) valid += best_template_iou(img, templates) >= kSecIouThreshold;
  return 100.0 * static_cast<double>(valid) / static_cast<double>(images.size());
}

/// 3 * bins probabilities, channel-major. Pixels are binned by their 8-bit PPM
/// quantization, so saved and in-memory images score the same.
inline std::vector<double> color_histogram(const std::vector<Image>& images, std::size_t bins = kHistogramBins) {
  if (images.empty()) throw ArgumentError("color_histogram: empty batch");
  if (bins == 0 || bins > 256) throw ArgumentError("color_histogram: bins must be in [1, 256]");
  std::vector<double> counts(3 * bins, 0.0);
  double total = 0;
  for (const auto& img : images) {
    if (img.channels != 3) throw ShapeError("color_histogram: expected RGB images");
    const std::size_t p = img.height * img.width;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < p; ++i)
        counts[c * bins + data::to_byte(img.pixels[c * p + i]) * bins / 256] += 1;
    total += static_cast<double>(3 * p);
  }
  for (auto& v : counts) v /= total;
  return counts;
}

/// -sum p log2 p with 0 log 0 = 0.
inline double entropy_bits(const std::vector<double>& p) {
  double h = 0;
  for (double v : p)
    if (v > 0) h -= v * std::log2(v);
  return h;
}

inline double dc_score(const std::vector<Image>& images, std::size_t bins = kHistogramBins) {
  return entropy_bits(color_histogram(images, bins));
}

inline std::string histogram_csv(const std::vector<double>& hist) {
  if (hist.size() % 3 != 0) throw ArgumentError("histogram_csv: expected three channel blocks");
  const std::size_t bins = hist.size() / 3;
  std::ostringstream os;
  os << "bin,channel,probability\n";
  os.precision(12);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t b = 0; b < bins; ++b) os << b << ',' << "rgb"[c] << ',' << hist[c * bins + b] << '\n';
  return os.str();
}

struct MetricsReport {
  std::string config_id;
  std::size_t n_samples = 0;
  double sec_percent = 0;
  double dc_bits = 0;
  std::uint64_t seed = 0;

  bool operator==(const MetricsReport&) const = default;
};

inline constexpr const char* kMetricsCsvHeader = "config_id,n_samples,sec_percent,dc_bits,seed";

inline std::string metrics_csv_row(const MetricsReport& r) {
  char buf[64];
  std::ostringstream os;
  os << r.config_id << ',' << r.n_samples << ',';
  std::snprintf(buf, sizeof buf, "%.4f,%.6f,", r.sec_percent, r.dc_bits);
  os << buf << r.seed;
  return os.str();
}

/// Metrics of an arbitrary image batch (generated or ground truth).
inline MetricsReport score_images(const std::vector<Image>& images, const std::vector<Mask>& templates,
                                  std::string config_id, std::uint64_t seed) {
  return {std::move(config_id), images.size(), sec_proxy(images, templates), dc_score(images), seed};
}

}  // namespace cpgan::eval
