#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "cpgan/data/dataset.hpp"
#include "cpgan/eval/metrics.hpp"
#include "cpgan/train/checkpoint.hpp"

namespace cpgan::eval {

struct Evaluation {
  MetricsReport report;
  std::vector<double> histogram;
  std::vector<Image> samples;
  std::vector<std::size_t> top_ids;  // condition of each sample
};

/// n condition tops drawn from the dataset: a seeded permutation, repeated if n exceeds its size.
inline std::vector<std::size_t> pick_tops(std::size_t dataset_size, std::size_t n, util::Rng& rng) {
  std::vector<std::size_t> out;
  while (out.size() < n) {
    std::vector<std::size_t> perm(dataset_size);
    std::iota(perm.begin(), perm.end(), 0);
    util::shuffle(perm, rng);
    const std::size_t take = std::min(n - out.size(), perm.size());
    out.insert(out.end(), perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

/// Generates one bottom per (top, noise) pair with the checkpoint's E and G.
template <typename Real>
std::vector<Image> generate_bottoms(const train::Checkpoint<Real>& ckpt, const std::vector<const Image*>& tops,
                                    util::Rng& rng, std::size_t batch = 64) {
  const auto& cfg = ckpt.config.model;
  const auto encoder = ckpt.params.encoder.detached();
  const auto generator = ckpt.params.generator.detached();
  std::vector<Image> out;
  for (std::size_t start = 0; start < tops.size(); start += batch) {
    const std::size_t n = std::min(batch, tops.size() - start);
    const std::span<const Image* const> chunk(tops.data() + start, n);
    const auto z = models::sample_noise<Real>(n, cfg.z_dim, rng);
    const auto y = models::encode_condition(data::to_batch<Real>(chunk), encoder, cfg);
    auto images = data::from_batch(models::generate(z, y, generator, cfg));
    for (auto& img : images) out.push_back(std::move(img));
  }
  return out;
}

/// Samples n generated bottoms over random dataset tops and scores them.
template <typename Real>
Evaluation evaluate(const train::Checkpoint<Real>& ckpt, const data::Dataset& dataset, std::size_t n,
                    std::uint64_t seed) {
  if (n == 0) throw ArgumentError("evaluate: n_samples must be positive");
  if (dataset.size() == 0) throw ArgumentError("evaluate: empty dataset");
  util::Rng rng = util::make_rng(seed, 0xe7a1);
  Evaluation ev;
  ev.top_ids = pick_tops(dataset.size(), n, rng);
  std::vector<const Image*> tops;
  for (std::size_t id : ev.top_ids) tops.push_back(&dataset.tops[id]);
  ev.samples = generate_bottoms(ckpt, tops, rng);
  ev.histogram = color_histogram(ev.samples);
  ev.report = {ckpt.config.name, n, sec_proxy(ev.samples, pose_templates(dataset.manifest.synthesis)),
               entropy_bits(ev.histogram), seed};
  return ev;
}

}  // namespace cpgan::eval
