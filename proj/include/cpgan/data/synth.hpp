#pragma once

// Procedural top/bottom garment pairs. Bottoms are two-leg trousers whose
// pose angle falls in one of a few discrete bins; tops are torsos whose tilt
// follows the same pose, so the condition carries pose information.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "cpgan/data/image.hpp"
#include "cpgan/error.hpp"
#include "cpgan/util/random.hpp"

namespace cpgan::data {

struct SynthConfig {
  std::size_t image_size = 48;
  std::size_t supersample = 4;  // per-axis subsamples for anti-aliasing

  std::size_t pose_bins = 8;
  double pose_min_deg = -25.0;
  double pose_max_deg = 25.0;
  double pose_jitter_deg = 1.0;
  double leg_spread_deg = 5.0;  // each leg leans this far from the pose axis
  double leg_width_min = 0.65;  // hem width as a fraction of the leg's top width
  double leg_width_max = 0.80;
  double top_tilt_ratio = 0.6;  // torso tilt = -ratio * pose

  double luminance_min = 0.44;  // target luma of garment colors on [0, 1]
  double luminance_max = 0.48;
  double saturation_min = 0.45;
  double saturation_max = 0.70;
  double hue_offset = 0.5;  // bottom hue = top hue + offset + noise (mod 1)
  double hue_noise = 0.05;

  double stripe_probability = 0.3;
  int stripe_freq_min = 3;
  int stripe_freq_max = 6;
  double stripe_depth = 0.10;  // relative darkening on stripe rows/columns

  bool operator==(const SynthConfig&) const = default;
};

struct SampleAttributes {
  double pose_deg = 0.0;
  std::size_t pose_bin = 0;
  double leg_width = 0.0;
  double top_hue = 0.0, top_saturation = 0.0, top_luminance = 0.0;
  double bottom_hue = 0.0, bottom_saturation = 0.0, bottom_luminance = 0.0;
  std::array<double, 3> top_rgb{}, bottom_rgb{};
  int top_stripe_freq = 0;  // 0 = plain
  int stripe_freq = 0;      // bottom stripes, 0 = plain

  bool operator==(const SampleAttributes&) const = default;
};

struct PairedSample {
  Image top;
  Image bottom;
  SampleAttributes attributes;
};

using Point = std::array<double, 2>;  // (x, y) in pixel units, y down
using Polygon = std::vector<Point>;   // convex

inline bool inside_convex(const Polygon& poly, Point p) {
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % poly.size()];
    const double cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    pos |= cross > 0;
    neg |= cross < 0;
    if (pos && neg) return false;
  }
  return true;
}

inline bool inside_any(const std::vector<Polygon>& shapes, Point p) {
  return std::any_of(shapes.begin(), shapes.end(), [&](const Polygon& s) { return inside_convex(s, p); });
}

/// Fraction of each pixel covered by the union of the shapes, ss x ss samples per pixel.
inline std::vector<double> coverage(const std::vector<Polygon>& shapes, std::size_t size,
                                    std::size_t ss) {
  std::vector<double> cov(size * size, 0.0);
  const double step = 1.0 / static_cast<double>(ss);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      int hits = 0;
      for (std::size_t sy = 0; sy < ss; ++sy)
        for (std::size_t sx = 0; sx < ss; ++sx)
          hits += inside_any(shapes, {static_cast<double>(x) + (static_cast<double>(sx) + 0.5) * step,
                                      static_cast<double>(y) + (static_cast<double>(sy) + 0.5) * step});
      cov[y * size + x] = hits * step * step;
    }
  return cov;
}

/// Pixel-center membership in the union of the shapes.
inline std::vector<std::uint8_t> center_mask(const std::vector<Polygon>& shapes, std::size_t size) {
  std::vector<std::uint8_t> mask(size * size, 0);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x)
      mask[y * size + x] =
          inside_any(shapes, {static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5});
  return mask;
}

/// Waistband plus two leg quads. Leg axes lean pose +- spread degrees from vertical.
inline std::vector<Polygon> trouser_polygons(double pose_deg, double leg_width, const SynthConfig& cfg) {
  const double s = static_cast<double>(cfg.image_size);
  const double half = 0.18, waist_top = 0.06, hip = 0.20, length = 0.66;
  std::vector<Polygon> shapes;
  shapes.push_back({{(0.5 - half) * s, waist_top * s},
                    {(0.5 + half) * s, waist_top * s},
                    {(0.5 + half) * s, hip * s},
                    {(0.5 - half) * s, hip * s}});
  for (int side : {-1, 1}) {
    const double lean = (pose_deg + side * cfg.leg_spread_deg) * std::numbers::pi / 180.0;
    const double top_cx = 0.5 + side * half / 2.0;
    const double bot_cx = top_cx + length * std::sin(lean);
    const double bot_y = hip + length * std::cos(lean);
    const double bw = leg_width * half / 2.0;
    shapes.push_back({{(top_cx - half / 2.0) * s, hip * s},
                      {(top_cx + half / 2.0) * s, hip * s},
                      {(bot_cx + bw) * s, bot_y * s},
                      {(bot_cx - bw) * s, bot_y * s}});
  }
  return shapes;
}

inline std::vector<Polygon> top_polygons(double pose_deg, const SynthConfig& cfg) {
  const double s = static_cast<double>(cfg.image_size);
  std::vector<Polygon> unit{
      {{0.25, 0.18}, {0.75, 0.18}, {0.70, 0.88}, {0.30, 0.88}},  // torso
      {{0.25, 0.18}, {0.31, 0.30}, {0.16, 0.55}, {0.07, 0.50}},  // sleeves
      {{0.75, 0.18}, {0.93, 0.50}, {0.84, 0.55}, {0.69, 0.30}},
  };
  const double tilt = -cfg.top_tilt_ratio * pose_deg * std::numbers::pi / 180.0;
  const double c = std::cos(tilt), sn = std::sin(tilt);
  for (auto& poly : unit)
    for (auto& p : poly) {
      const double dx = p[0] - 0.5, dy = p[1] - 0.5;
      p = {(0.5 + c * dx - sn * dy) * s, (0.5 + sn * dx + c * dy) * s};
    }
  return unit;
}

inline double pose_bin_center(std::size_t bin, const SynthConfig& cfg) {
  if (cfg.pose_bins < 2) return 0.5 * (cfg.pose_min_deg + cfg.pose_max_deg);
  return cfg.pose_min_deg + static_cast<double>(bin) * (cfg.pose_max_deg - cfg.pose_min_deg) /
                                static_cast<double>(cfg.pose_bins - 1);
}

/// Silhouette at a bin's nominal pose and the middle leg width.
inline std::vector<std::uint8_t> pose_template(std::size_t bin, const SynthConfig& cfg) {
  const double width = 0.5 * (cfg.leg_width_min + cfg.leg_width_max);
  return center_mask(trouser_polygons(pose_bin_center(bin, cfg), width, cfg), cfg.image_size);
}

/// HSV color with value 1, rescaled so its luma is `luma`, then clipped to [0, 1].
inline std::array<double, 3> color_at_luminance(double hue, double saturation, double luma) {
  const double h6 = (hue - std::floor(hue)) * 6.0;
  const double f = h6 - std::floor(h6);
  const double p = 1.0 - saturation, q = 1.0 - saturation * f, t = 1.0 - saturation * (1.0 - f);
  std::array<double, 3> rgb;
  switch (static_cast<int>(h6) % 6) {
    case 0: rgb = {1.0, t, p}; break;
    case 1: rgb = {q, 1.0, p}; break;
    case 2: rgb = {p, 1.0, t}; break;
    case 3: rgb = {p, q, 1.0}; break;
    case 4: rgb = {t, p, 1.0}; break;
    default: rgb = {1.0, p, q}; break;
  }
  const double current = kLumaR * rgb[0] + kLumaG * rgb[1] + kLumaB * rgb[2];
  for (auto& ch : rgb) ch = std::min(1.0, ch * luma / current);
  return rgb;
}

/// The color-harmony rule: complementary hue plus a bounded perturbation.
inline double harmonized_hue(double top_hue, double noise, const SynthConfig& cfg) {
  const double h = top_hue + cfg.hue_offset + noise;
  return h - std::floor(h);
}

/// Circular hue distance on [0, 1).
inline double hue_distance(double a, double b) {
  const double d = std::abs(a - b);
  const double m = d - std::floor(d);
  return std::min(m, 1.0 - m);
}

namespace detail {

// Composites a flat color (optionally striped) over the -1 background.
inline Image paint(const std::vector<double>& cov, std::size_t size, const std::array<double, 3>& rgb,
                   int stripe_freq, bool vertical_stripes, double depth) {
  Image img = Image::filled(3, size, size, -1.0f);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double c = cov[y * size + x];
      if (c <= 0.0) continue;
      double shade = 1.0;
      if (stripe_freq > 0) {
        const double u = (static_cast<double>(vertical_stripes ? x : y) + 0.5) / static_cast<double>(size);
        if (std::sin(two_pi * stripe_freq * u) > 0.0) shade = 1.0 - depth;
      }
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double fg = 2.0 * rgb[ch] * shade - 1.0;
        img.at(ch, y, x) = static_cast<float>(-1.0 * (1.0 - c) + fg * c);
      }
    }
  return img;
}

}  // namespace detail

/// Draws one pair. All randomness comes from `rng`, in a fixed order.
inline PairedSample synth_sample(util::Rng& rng, const SynthConfig& cfg) {
  SampleAttributes a;
  a.pose_bin = static_cast<std::size_t>(util::uniform_index(rng, cfg.pose_bins));
  a.pose_deg = pose_bin_center(a.pose_bin, cfg) + util::uniform(rng, -cfg.pose_jitter_deg, cfg.pose_jitter_deg);
  a.leg_width = util::uniform(rng, cfg.leg_width_min, cfg.leg_width_max);
  a.top_hue = util::uniform01(rng);
  a.top_saturation = util::uniform(rng, cfg.saturation_min, cfg.saturation_max);
  a.top_luminance = util::uniform(rng, cfg.luminance_min, cfg.luminance_max);
  a.bottom_hue = harmonized_hue(a.top_hue, util::uniform(rng, -cfg.hue_noise, cfg.hue_noise), cfg);
  a.bottom_saturation = util::uniform(rng, cfg.saturation_min, cfg.saturation_max);
  a.bottom_luminance = util::uniform(rng, cfg.luminance_min, cfg.luminance_max);
  const int freq_span = cfg.stripe_freq_max - cfg.stripe_freq_min + 1;
  auto draw_stripes = [&] {
    const bool striped = util::uniform01(rng) < cfg.stripe_probability;
    const int freq = cfg.stripe_freq_min + static_cast<int>(util::uniform_index(rng, static_cast<std::uint64_t>(freq_span)));
    return striped ? freq : 0;
  };
  a.top_stripe_freq = draw_stripes();
  a.stripe_freq = draw_stripes();
  a.top_rgb = color_at_luminance(a.top_hue, a.top_saturation, a.top_luminance);
  a.bottom_rgb = color_at_luminance(a.bottom_hue, a.bottom_saturation, a.bottom_luminance);

  const std::size_t n = cfg.image_size;
  PairedSample s;
  s.top = detail::paint(coverage(top_polygons(a.pose_deg, cfg), n, cfg.supersample), n, a.top_rgb,
                        a.top_stripe_freq, false, cfg.stripe_depth);
  s.bottom = detail::paint(coverage(trouser_polygons(a.pose_deg, a.leg_width, cfg), n, cfg.supersample),
                           n, a.bottom_rgb, a.stripe_freq, true, cfg.stripe_depth);
  s.attributes = a;
  return s;
}

/// Sample `index` of the dataset seeded by `seed`; independent of every other index.
inline PairedSample synth_sample(std::uint64_t seed, std::uint64_t index, const SynthConfig& cfg) {
  if (cfg.pose_bins == 0 || cfg.image_size == 0 || cfg.supersample == 0)
    throw ArgumentError("synth: pose_bins, image_size and supersample must be positive");
  util::Rng rng = util::make_rng(seed, index);
  return synth_sample(rng, cfg);
}

}  // namespace cpgan::data
