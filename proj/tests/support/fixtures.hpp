#pragma once

#include "cpgan/data/dataset.hpp"
#include "cpgan/train/config.hpp"

namespace cpgan::testing {

// 16 x 16 model small enough for multi-epoch tests.
inline train::TrainConfig small_config() {
  train::TrainConfig c;
  c.model.image_size = 16;
  c.model.z_dim = 8;
  c.model.c_dim = 4;
  c.model.seed_size = 2;
  c.model.gen_channels = {8, 6, 4};
  c.model.enc_channels = {4, 4};
  c.model.disc_channels = {4, 4};
  c.model.disc_join_channels = 4;
  c.dct_k = 20;
  c.batch_size = 8;
  c.clusters = 3;
  c.epochs_phase1 = 2;
  c.epochs_phase2 = 2;
  c.adam.learning_rate = 1e-3;
  c.precision = "float64";
  return c;
}

/// Synthetic pairs rendered in memory (no files).
inline data::Dataset memory_dataset(std::size_t n, std::size_t size, std::uint64_t seed) {
  data::SynthConfig sc;
  sc.image_size = size;
  data::Dataset d;
  d.manifest.seed = seed;
  d.manifest.height = d.manifest.width = size;
  d.manifest.synthesis = sc;
  for (std::size_t i = 0; i < n; ++i) {
    auto s = data::synth_sample(seed, i, sc);
    d.tops.push_back(std::move(s.top));
    d.bottoms.push_back(std::move(s.bottom));
  }
  return d;
}

}  // namespace cpgan::testing
