#pragma once

// Two-phase training loop. Phase 1 uses randomly permuted batches and the low
// RLF threshold; phase 2 uses cluster-pure batches (k-means over standardized
// grayscale features of the bottoms) and the high threshold. Each batch runs one
// discriminator step, then one step of generator and encoder on the joint loss.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cpgan/data/batches.hpp"
#include "cpgan/data/dataset.hpp"
#include "cpgan/data/features.hpp"
#include "cpgan/data/kmeans.hpp"
#include "cpgan/train/checkpoint.hpp"
#include "cpgan/train/losses.hpp"
#include "cpgan/util/allocator.hpp"

namespace cpgan::train {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  int phase = 1;
  // d_loss: mean discriminator BCE over batches. g_*: per-sample means.
  double d_loss = 0, g_loss = 0, g_mse = 0, g_percept = 0, g_adv = 0;
  double seconds = 0;
};

inline constexpr const char* kLossCsvHeader = "epoch,phase,d_loss,g_loss,g_mse,g_percept,g_adv";

inline std::string csv_row(const EpochLog& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%d,%.9g,%.9g,%.9g,%.9g,%.9g", e.epoch, e.phase, e.d_loss, e.g_loss, e.g_mse,
                e.g_percept, e.g_adv);
  return buf;
}

struct TrainOptions {
  // When set: losses.csv, checkpoint.bin and periodic checkpoint_eNNN.bin go here.
  std::optional<std::filesystem::path> out_dir;
  // Stop after this many completed epochs (for interrupting and resuming).
  std::optional<std::size_t> stop_after_epoch;
  std::function<void(const EpochLog&)> on_epoch;
};

template <typename Real>
struct TrainResult {
  Checkpoint<Real> checkpoint;
  std::vector<EpochLog> epochs;  // epochs run by this call
};

/// Deep copy: Tensor handles share storage, a checkpoint must not.
template <typename Real>
Checkpoint<Real> clone_checkpoint(const Checkpoint<Real>& c) {
  Checkpoint<Real> out = c;
  detail::visit_tensors(out, [](const std::string&, ad::Tensor<Real>& t) { t = t.clone(false); });
  // Parameters are trained leaves.
  out.params.for_each([](const std::string&, ad::Tensor<Real>& t) { t = t.clone(true); });
  return out;
}

/// Pose clusters used by phase 2.
inline std::vector<std::size_t> fit_batch_clusters(const data::Dataset& dataset, const TrainConfig& config) {
  if (config.clusters > dataset.size())
    throw ConfigError("clusters (" + std::to_string(config.clusters) + ") exceeds the dataset size");
  return data::kmeans_fit(data::standardized_features(dataset.bottoms), config.clusters,
                          util::derive_seed(config.seed, 0xc1a5))
      .assignments;
}

inline std::uint64_t epoch_seed(const TrainConfig& config, std::size_t epoch) {
  return util::derive_seed(config.seed, 0xe90c0000 + epoch);
}

namespace detail {

template <typename Real>
void adam_step(auto& net, ad::OptimizerState<Real>& state) {
  auto params = net.tensors();
  ad::adam_update<Real>(params, state);
  ad::zero_grad<Real>(params);
}

struct StepLosses {
  double d = 0, g = 0, mse = 0, percept = 0, adv = 0;
};

// One D step then one G/E step on batch ids.
template <typename Real>
StepLosses train_step(Checkpoint<Real>& c, const data::Dataset& dataset, const data::Batch& ids, double threshold,
                      util::Rng& noise_rng, util::Rng& beta_rng) {
  const TrainConfig& cfg = c.config;
  std::vector<const data::Image*> tops, bottoms;
  for (std::size_t i : ids) {
    tops.push_back(&dataset.tops[i]);
    bottoms.push_back(&dataset.bottoms[i]);
  }
  const auto top = data::to_batch<Real>(tops), x = data::to_batch<Real>(bottoms);
  const auto z = models::sample_noise<Real>(ids.size(), cfg.model.z_dim, noise_rng);

  // E and G run once; the D step sees their outputs as constants, the G step
  // extends the same tape through the updated D.
  ad::Tape<Real> gen_tape;
  ad::Tensor<Real> y, g;
  {
    ad::TapeScope<Real> scope(gen_tape);
    const auto encoder = cfg.train_encoder ? c.params.encoder : c.params.encoder.detached();
    y = models::encode_condition(top, encoder, cfg.model);
    g = models::generate(z, y, c.params.generator, cfg.model);
  }

  StepLosses out;
  {
    ad::Tape<Real> tape;
    ad::TapeScope<Real> scope(tape);
    const auto loss = cfg.rlf.enabled ? discriminator_loss_rlf(x, g, y, threshold, c.params.discriminator,
                                                               cfg.model, beta_rng)
                                      : discriminator_loss_standard(x, g, y, c.params.discriminator, cfg.model);
    out.d = static_cast<double>(loss.item());
    tape.backward(loss);
  }
  adam_step(c.params.discriminator, c.opt_discriminator);

  {
    ad::TapeScope<Real> scope(gen_tape);
    const auto loss = joint_generator_loss(g, x, y, c.params.discriminator, cfg.model, cfg.weights, cfg.dct_k);
    out.g = static_cast<double>(loss.total.item());
    out.mse = loss.mse;
    out.percept = loss.perceptual;
    out.adv = loss.adversarial;
    gen_tape.backward(loss.total);
  }
  adam_step(c.params.generator, c.opt_generator);
  if (cfg.train_encoder) adam_step(c.params.encoder, c.opt_encoder);
  return out;
}

}  // namespace detail

/// Trains from `start` (a checkpoint from initial_checkpoint or an earlier run)
/// up to config.total_epochs(). Deterministic given the checkpoint.
template <typename Real>
TrainResult<Real> train(const Checkpoint<Real>& start, const data::Dataset& dataset,
                        const TrainOptions& options = {}) {
  util::retain_large_allocations();
  TrainResult<Real> result{clone_checkpoint(start), {}};
  Checkpoint<Real>& c = result.checkpoint;
  const TrainConfig& cfg = c.config;
  cfg.validate();
  if (dataset.size() == 0) throw ArgumentError("train: empty dataset");
  if (dataset.manifest.channels != cfg.model.channels || dataset.manifest.height != cfg.model.image_size ||
      dataset.manifest.width != cfg.model.image_size)
    throw ConfigError("train: dataset geometry does not match the model config");

  const std::size_t total = cfg.total_epochs();
  const std::size_t stop = std::min(total, options.stop_after_epoch.value_or(total));
  if (c.epoch > total) throw ArgumentError("train: checkpoint is past the configured epoch count");

  std::ofstream csv;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    const auto path = *options.out_dir / "losses.csv";
    const bool append = c.epoch > 0 && std::filesystem::exists(path);
    csv.open(path, append ? std::ios::app : std::ios::trunc);
    if (!csv) throw IoError("train: cannot write " + path.string());
    if (!append) csv << kLossCsvHeader << "\n";
  }

  std::vector<std::size_t> clusters;
  if (c.epoch < stop && stop > cfg.epochs_phase1) clusters = fit_batch_clusters(dataset, cfg);

  util::Rng noise_rng, beta_rng;
  util::load_state(noise_rng, c.noise_rng);
  util::load_state(beta_rng, c.beta_rng);

  while (c.epoch < stop) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t e = static_cast<std::size_t>(c.epoch);
    const bool phase1 = e < cfg.epochs_phase1;
    const auto batches =
        data::make_batches(dataset.size(), phase1 ? data::BatchRegime::RandomPermuted : data::BatchRegime::ClusterPure,
                           phase1 ? nullptr : &clusters, cfg.batch_size, epoch_seed(cfg, e));
    const double threshold = phase1 ? cfg.rlf.threshold_phase1 : cfg.rlf.threshold_phase2;
    EpochLog log{e + 1, phase1 ? 1 : 2};
    for (std::size_t b = 0; b < batches.size(); ++b) {
      detail::StepLosses s;
      try {
        s = detail::train_step(c, dataset, batches[b], threshold, noise_rng, beta_rng);
      } catch (const NonFiniteError& err) {
        throw NonFiniteError("training diverged at step " + std::to_string(c.step) + " (epoch " +
                             std::to_string(e + 1) + ", batch " + std::to_string(b) + "): " + err.what());
      }
      ++c.step;
      const double n = static_cast<double>(batches[b].size());
      log.d_loss += s.d * n;
      log.g_loss += s.g;
      log.g_mse += s.mse;
      log.g_percept += s.percept;
      log.g_adv += s.adv;
    }
    const double count = static_cast<double>(dataset.size());
    for (double* v : {&log.d_loss, &log.g_loss, &log.g_mse, &log.g_percept, &log.g_adv}) *v /= count;
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    ++c.epoch;
    c.noise_rng = util::save_state(noise_rng);
    c.beta_rng = util::save_state(beta_rng);
    result.epochs.push_back(log);
    if (csv.is_open()) csv << csv_row(log) << std::endl;
    if (options.on_epoch) options.on_epoch(log);
    if (options.out_dir && cfg.checkpoint_every > 0 && c.epoch % cfg.checkpoint_every == 0 && c.epoch < total) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint_e%03llu.bin", static_cast<unsigned long long>(c.epoch));
      save_checkpoint(c, *options.out_dir / name);
    }
  }
  if (options.out_dir) save_checkpoint(c, *options.out_dir / "checkpoint.bin");
  return result;
}

template <typename Real>
TrainResult<Real> train(const TrainConfig& config, const data::Dataset& dataset, const TrainOptions& options = {}) {
  return train(initial_checkpoint<Real>(config), dataset, options);
}

}  // namespace cpgan::train
