#pragma once

// The `cpgan` command-line tool: synth, train, eval and sample subcommands.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpgan/cli/run_config.hpp"
#include "cpgan/eval/evaluate.hpp"
#include "cpgan/eval/retrieval.hpp"
#include "cpgan/train/trainer.hpp"

namespace cpgan::cli {

inline constexpr int kExitOk = 0, kExitUsage = 1, kExitRuntime = 2;

/// Raised for argument combinations CLI11 cannot express; exits with kExitUsage.
class UsageError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::string hex_hash(std::uint64_t h) { return util::hex64(h); }

inline std::vector<std::string> ablation_names() { return {std::begin(train::kAblations), std::end(train::kAblations)}; }

/// "k=3" or "3".
inline std::size_t parse_baseline(const std::string& text) {
  const std::string digits = text.rfind("k=", 0) == 0 ? text.substr(2) : text;
  std::size_t pos = 0;
  unsigned long long k = 0;
  try {
    k = std::stoull(digits, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (digits.empty() || pos != digits.size() || k == 0) throw UsageError("--baseline expects k=N with N >= 1");
  return static_cast<std::size_t>(k);
}

inline const CLI::Validator kPositive(
    [](std::string& text) -> std::string {
      return text.find_first_not_of("0123456789") == std::string::npos && text.find_first_not_of('0') != std::string::npos
                 ? ""
                 : "must be a positive integer, got '" + text + "'";
    },
    "POSITIVE");

inline void check_geometry(const data::Dataset& d, const models::ModelConfig& m, const std::string& what) {
  if (d.manifest.channels != m.channels || d.manifest.height != m.image_size || d.manifest.width != m.image_size)
    throw ConfigError(what + ": dataset is " + std::to_string(d.manifest.height) + "x" +
                      std::to_string(d.manifest.width) + ", the model expects " + std::to_string(m.image_size));
}

inline std::string format_epoch(const train::EpochLog& e, std::size_t total) {
  char buf[192];
  std::snprintf(buf, sizeof buf, "epoch %zu/%zu phase %d  d %.4f  g %.4f (mse %.4f percept %.4f adv %.4f)  %.1fs",
                e.epoch, total, e.phase, e.d_loss, e.g_loss, e.g_mse, e.g_percept, e.g_adv, e.seconds);
  return buf;
}

}  // namespace detail

struct TrainArgs {
  std::string data_dir;
  std::optional<std::string> ablation, precision, resume;
  std::optional<std::size_t> epochs_phase1, epochs_phase2, checkpoint_every;
};

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string data_dir;
  std::optional<std::size_t> samples;
  bool ground_truth = false;
};

struct SampleArgs {
  std::string checkpoint, top;
  std::size_t count = 1;
  std::optional<std::string> baseline;
  std::string data_dir;
};

inline int cmd_synth(const RunConfig& rc, std::ostream& out) {
  const std::filesystem::path dir = rc.out;
  const auto m = data::synth_generate(rc.count, rc.seed, dir, rc.synthesis);
  out << (dir / data::kManifestName).string() << "\n" << m.count() << " samples\n";
  return kExitOk;
}

template <typename Real>
int run_training(const train::Checkpoint<Real>& start, const data::Dataset& dataset, const std::filesystem::path& dir,
                 std::ostream& out) {
  const std::size_t total = start.config.total_epochs();
  train::TrainOptions options;
  options.out_dir = dir;
  options.on_epoch = [&](const train::EpochLog& e) { out << detail::format_epoch(e, total) << std::endl; };
  train::train(start, dataset, options);
  out << (dir / "checkpoint.bin").string() << "\n";
  return kExitOk;
}

inline int cmd_train(RunConfig rc, const TrainArgs& args, std::ostream& out) {
  const std::filesystem::path dir = rc.out;
  if (args.resume) {
    if (args.ablation || args.precision || args.epochs_phase1 || args.epochs_phase2 || args.checkpoint_every)
      throw UsageError("--resume continues the checkpoint's own config; drop the config overrides");
    const auto dataset = data::load_dataset(args.data_dir);
    if (train::checkpoint_real_bytes(*args.resume) == sizeof(float))
      return run_training(train::load_checkpoint<float>(*args.resume), dataset, dir, out);
    return run_training(train::load_checkpoint<double>(*args.resume), dataset, dir, out);
  }

  train::TrainConfig& c = rc.train;
  if (args.ablation) train::apply_ablation(c, *args.ablation);
  if (args.precision) c.precision = *args.precision;
  if (args.epochs_phase1) c.epochs_phase1 = *args.epochs_phase1;
  if (args.epochs_phase2) c.epochs_phase2 = *args.epochs_phase2;
  if (args.checkpoint_every) c.checkpoint_every = *args.checkpoint_every;
  rc.validate();

  const auto dataset = data::load_dataset(args.data_dir);
  detail::check_geometry(dataset, c.model, "train");
  std::filesystem::create_directories(dir);
  data::write_file(dir / "run_config.json", to_json(rc).dump(2) + "\n");
  out << "config " << c.name << " hash " << detail::hex_hash(train::config_hash(c)) << ", " << dataset.size()
      << " samples, " << c.total_epochs() << " epochs, " << c.precision << "\n";
  if (c.precision == "float32") return run_training(train::initial_checkpoint<float>(c), dataset, dir, out);
  return run_training(train::initial_checkpoint<double>(c), dataset, dir, out);
}

template <typename Real>
eval::Evaluation evaluate_file(const std::filesystem::path& path, const data::Dataset& dataset, std::size_t n,
                               std::uint64_t seed, std::size_t bins, std::uint64_t& hash) {
  const auto ckpt = train::load_checkpoint<Real>(path);
  detail::check_geometry(dataset, ckpt.config.model, path.string());
  hash = ckpt.config_hash();
  auto ev = eval::evaluate(ckpt, dataset, n, seed);
  if (bins != eval::kHistogramBins) {
    ev.histogram = eval::color_histogram(ev.samples, bins);
    ev.report.dc_bits = eval::entropy_bits(ev.histogram);
  }
  return ev;
}

inline int cmd_eval(const RunConfig& rc, const EvalArgs& args, std::ostream& out) {
  if (args.checkpoints.empty() && !args.ground_truth)
    throw UsageError("eval needs at least one checkpoint or --ground-truth");
  const std::filesystem::path dir = rc.out;
  const std::size_t n = args.samples.value_or(rc.eval.n_samples);
  const std::size_t bins = rc.eval.histogram_bins;
  const auto dataset = data::load_dataset(args.data_dir);
  std::filesystem::create_directories(dir);

  std::string csv = std::string(eval::kMetricsCsvHeader) + "\n";
  nlohmann::json rows = nlohmann::json::array();
  auto emit = [&](const eval::MetricsReport& r, const std::vector<double>& hist, const std::string& source,
                  std::optional<std::uint64_t> hash) {
    const std::string row = eval::metrics_csv_row(r);
    csv += row + "\n";
    out << row << std::endl;
    const std::string hist_name = "histogram_" + std::to_string(rows.size()) + "_" + r.config_id + ".csv";
    data::write_file(dir / hist_name, eval::histogram_csv(hist));
    rows.push_back({{"source", source},
                    {"config_id", r.config_id},
                    {"config_hash", hash ? nlohmann::json(detail::hex_hash(*hash)) : nlohmann::json(nullptr)},
                    {"n_samples", r.n_samples},
                    {"sec_percent", r.sec_percent},
                    {"dc_bits", r.dc_bits},
                    {"seed", r.seed},
                    {"histogram", hist_name}});
  };

  out << eval::kMetricsCsvHeader << "\n";
  if (args.ground_truth) {
    const auto hist = eval::color_histogram(dataset.bottoms, bins);
    auto r = eval::score_images(dataset.bottoms, eval::pose_templates(dataset.manifest.synthesis), "ground-truth",
                                rc.seed);
    r.dc_bits = eval::entropy_bits(hist);
    emit(r, hist, args.data_dir, std::nullopt);
  }
  for (const auto& path : args.checkpoints) {
    std::uint64_t hash = 0;
    const auto ev = train::checkpoint_real_bytes(path) == sizeof(float)
                        ? evaluate_file<float>(path, dataset, n, rc.seed, bins, hash)
                        : evaluate_file<double>(path, dataset, n, rc.seed, bins, hash);
    emit(ev.report, ev.histogram, path, hash);
  }
  data::write_file(dir / "metrics.csv", csv);
  data::write_file(dir / "report.json",
                   nlohmann::json{{"run_config_hash", detail::hex_hash(run_config_hash(rc))}, {"rows", rows}}.dump(2) +
                       "\n");
  return kExitOk;
}

template <typename Real>
int run_sample(const RunConfig& rc, const SampleArgs& args, std::ostream& out) {
  const auto ckpt = train::load_checkpoint<Real>(args.checkpoint);
  const auto& model = ckpt.config.model;
  const data::Image top = data::read_ppm(args.top);
  if (top.height != model.image_size || top.width != model.image_size)
    throw ConfigError("sample: the top image must be " + std::to_string(model.image_size) + "x" +
                      std::to_string(model.image_size));
  std::optional<data::Dataset> dataset;
  std::size_t k = 0;
  if (args.baseline) {
    k = detail::parse_baseline(*args.baseline);
    if (args.data_dir.empty()) throw UsageError("--baseline needs --data (the training set to retrieve from)");
    dataset = data::load_dataset(args.data_dir);
    detail::check_geometry(*dataset, model, "sample");
  }

  const std::filesystem::path dir = rc.out;
  std::filesystem::create_directories(dir);
  util::Rng rng = util::make_rng(rc.seed, 0x5a3b);
  const std::vector<const data::Image*> tops(args.count, &top);
  const auto images = eval::generate_bottoms(ckpt, tops, rng);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto path = dir / data::sample_file_name("sample", i);
    data::write_ppm(path, images[i]);
    out << path.string() << "\n";
  }
  if (dataset) {
    const auto index = eval::build_index(*dataset, ckpt.params.encoder, model);
    const auto hits = eval::ir_baseline_retrieve(top, index, ckpt.params.encoder, model, k);
    for (std::size_t r = 0; r < hits.size(); ++r) {
      char name[64];
      std::snprintf(name, sizeof name, "baseline_%zu_id%06zu.ppm", r + 1, hits[r].id);
      data::write_ppm(dir / name, dataset->bottoms[hits[r].id]);
      out << (dir / name).string() << "  cosine " << hits[r].score << "\n";
    }
  }
  return kExitOk;
}

inline int cmd_sample(const RunConfig& rc, const SampleArgs& args, std::ostream& out) {
  if (train::checkpoint_real_bytes(args.checkpoint) == sizeof(float)) return run_sample<float>(rc, args, out);
  return run_sample<double>(rc, args, out);
}

/// Parses and runs one command line.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const RunConfig defaults;
  CLI::App app{"Conditional GAN for paired garment images: dataset synthesis, training, evaluation, sampling"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.footer("--config, --seed and --out may also follow the subcommand.\nExit codes: 0 success, 1 usage error, 2 runtime failure.");

  std::string config_path;
  std::uint64_t seed = defaults.seed;
  std::string out_dir = defaults.out;
  auto* config_opt = app.add_option("--config", config_path, "Run config JSON (keys missing from it keep defaults)")
                         ->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Seed for synthesis, training and evaluation");
  auto* out_opt = app.add_option("--out", out_dir, "Output directory");

  std::size_t count = defaults.count;
  auto* synth = app.add_subcommand("synth", "Render a paired top/bottom dataset (PPM files + manifest.json)");
  auto* count_opt = synth->add_option("--count", count, "Number of samples")->check(detail::kPositive);

  TrainArgs train_args;
  std::string ablation = defaults.train.name, precision = defaults.train.precision;
  std::size_t ep1 = defaults.train.epochs_phase1, ep2 = defaults.train.epochs_phase2,
              every = defaults.train.checkpoint_every;
  std::string resume;
  auto* trn = app.add_subcommand("train", "Train from scratch or resume; writes losses.csv and checkpoint.bin");
  trn->add_option("--data", train_args.data_dir, "Dataset directory from `synth`")->required();
  auto* ablation_opt =
      trn->add_option("--ablation", ablation, "Loss/discriminator preset")->check(CLI::IsMember(detail::ablation_names()));
  auto* precision_opt =
      trn->add_option("--precision", precision, "Floating-point type")->check(CLI::IsMember({"float32", "float64"}));
  auto* ep1_opt = trn->add_option("--epochs-phase1", ep1, "Epochs with random batches and the low RLF threshold");
  auto* ep2_opt = trn->add_option("--epochs-phase2", ep2, "Epochs with cluster-pure batches and the high threshold");
  auto* every_opt = trn->add_option("--checkpoint-every", every, "Also write checkpoint_eNNN.bin every N epochs (0 off)");
  auto* resume_opt = trn->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile);

  EvalArgs eval_args;
  std::size_t samples = defaults.eval.n_samples;
  auto* evl = app.add_subcommand("eval", "Score checkpoints: metrics.csv, per-row histogram CSVs and report.json");
  evl->add_option("checkpoints", eval_args.checkpoints, "Checkpoint files, one CSV row each")
      ->check(CLI::ExistingFile);
  evl->add_option("--data", eval_args.data_dir, "Dataset whose tops condition the samples")->required();
  auto* samples_opt = evl->add_option("--samples", samples, "Generated bottoms per checkpoint")->check(detail::kPositive);
  evl->add_flag("--ground-truth", eval_args.ground_truth, "Add a row scoring the dataset's own bottoms");

  SampleArgs sample_args;
  std::string baseline;
  auto* smp = app.add_subcommand("sample", "Generate bottoms for one top image; optionally the IR baseline's picks");
  smp->add_option("--checkpoint", sample_args.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  smp->add_option("--top", sample_args.top, "Top image (PPM)")->required()->check(CLI::ExistingFile);
  smp->add_option("-n,--count", sample_args.count, "Number of samples")->check(detail::kPositive);
  auto* baseline_opt = smp->add_option("--baseline", baseline, "Also write the k nearest training bottoms, as k=N");
  smp->add_option("--data", sample_args.data_dir, "Training set for --baseline");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig rc = config_opt->count() ? load_run_config(config_path) : RunConfig{};
    if (seed_opt->count()) rc.seed = seed;
    rc.train.seed = rc.seed;
    if (out_opt->count()) rc.out = out_dir;

    if (synth->parsed()) {
      if (count_opt->count()) rc.count = count;
      rc.validate();
      return cmd_synth(rc, out);
    }
    if (trn->parsed()) {
      if (ablation_opt->count()) train_args.ablation = ablation;
      if (precision_opt->count()) train_args.precision = precision;
      if (ep1_opt->count()) train_args.epochs_phase1 = ep1;
      if (ep2_opt->count()) train_args.epochs_phase2 = ep2;
      if (every_opt->count()) train_args.checkpoint_every = every;
      if (resume_opt->count()) train_args.resume = resume;
      return cmd_train(rc, train_args, out);
    }
    if (evl->parsed()) {
      if (samples_opt->count()) eval_args.samples = samples;
      rc.validate();
      return cmd_eval(rc, eval_args, out);
    }
    if (baseline_opt->count()) sample_args.baseline = baseline;
    rc.validate();
    return cmd_sample(rc, sample_args, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n" << "Run with --help for more information.\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace cpgan::cli
