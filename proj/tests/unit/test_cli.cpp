#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

#include "cpgan/cli/app.hpp"
#include "support/fixtures.hpp"
#include "support/tempdir.hpp"

using namespace cpgan;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "cpgan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::pair<std::string, std::string>> read_tree(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back({fs::relative(e.path(), dir).string(), data::read_file(e.path())});
  std::sort(files.begin(), files.end());
  return files;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// 16 x 16 run config written next to the test outputs.
fs::path write_small_config(const fs::path& dir, std::size_t ep1 = 1, std::size_t ep2 = 1) {
  cli::RunConfig rc;
  rc.count = 40;
  rc.synthesis.image_size = 16;
  rc.train = testing::small_config();
  rc.train.epochs_phase1 = ep1;
  rc.train.epochs_phase2 = ep2;
  rc.eval.n_samples = 24;
  const fs::path path = dir / "small.json";
  data::write_file(path, cli::to_json(rc).dump(2));
  return path;
}

}  // namespace

TEST_CASE("cli usage errors and help", "[cli]") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"bogus"}).code == cli::kExitUsage);
  CHECK(run({"synth", "--count", "0"}).code == cli::kExitUsage);
  CHECK(run({"synth", "--count", "-3"}).code == cli::kExitUsage);
  CHECK(run({"train"}).code == cli::kExitUsage);  // --data is required

  const auto bad = run({"train", "--data", "x", "--ablation", "bogus"});
  CHECK(bad.code == cli::kExitUsage);
  for (const char* name : train::kAblations) CHECK(bad.err.find(name) != std::string::npos);

  const auto top = run({"--help"});
  CHECK(top.code == cli::kExitOk);
  for (const char* flag : {"--config", "--seed", "--out", "synth", "train", "eval", "sample"})
    CHECK(top.out.find(flag) != std::string::npos);

  const std::map<std::string, std::vector<std::string>> flags = {
      {"synth", {"--count", "[2000]"}},
      {"train",
       {"--data", "--ablation", "[full]", "--precision", "[float32]", "--epochs-phase1", "[30]", "--epochs-phase2",
        "--checkpoint-every", "--resume"}},
      {"eval", {"checkpoints", "--data", "--samples", "[512]", "--ground-truth"}},
      {"sample", {"--checkpoint", "--top", "--count", "[1]", "--baseline", "--data"}}};
  for (const auto& [sub, names] : flags) {
    const auto help = run({sub, "--help"});
    CHECK(help.code == cli::kExitOk);
    for (const auto& n : names) {
      INFO(sub << " " << n);
      CHECK(help.out.find(n) != std::string::npos);
    }
  }
}

TEST_CASE("cli synth is deterministic", "[cli][synth]") {
  testing::TempDir tmp;
  const auto a = tmp.path() / "a", b = tmp.path() / "b";
  const auto r = run({"synth", "--count", "12", "--seed", "7", "--out", a.string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("12 samples") != std::string::npos);
  CHECK(data::read_manifest(a).count() == 12);
  CHECK(run({"--seed", "7", "--out", b.string(), "synth", "--count", "12"}).code == cli::kExitOk);
  CHECK(read_tree(a) == read_tree(b));
  CHECK(run({"synth", "--count", "12", "--seed", "8", "--out", b.string()}).code == cli::kExitOk);
  CHECK(read_tree(a) != read_tree(b));
}

TEST_CASE("cli run config is strict", "[cli][config]") {
  testing::TempDir tmp;
  auto write = [&](const std::string& text) {
    data::write_file(tmp.path() / "c.json", text);
    return (tmp.path() / "c.json").string();
  };
  const auto out = (tmp.path() / "o").string();
  CHECK(run({"--config", write(R"({"count": 3, "synthesis": {"image_size": 16}, "train": {"model": {"image_size": 16, "seed_size": 2, "gen_channels": [8, 6, 4]}, "dct_k": 16}})"), "--out", out, "synth"}).code == cli::kExitOk);
  CHECK(data::read_manifest(out).count() == 3);
  CHECK(data::read_manifest(out).height == 16);

  for (const char* text : {R"({"cont": 3})", R"({"train": {"seed": 4}})", R"({"train": {"adam": {"lr": 1}}})",
                           R"({"synthesis": {"image_size": 32}})", R"({"count": "many"})", R"([1, 2])", "{"}) {
    INFO(text);
    const auto r = run({"--config", write(text), "--out", out, "synth"});
    CHECK(r.code == cli::kExitRuntime);
    CHECK(!r.err.empty());
  }

  cli::RunConfig rc;
  rc.seed = 9;
  rc.train.seed = 9;
  rc.train.name = "custom";
  const auto back = cli::run_config_from_json(cli::to_json(rc));
  CHECK(cli::to_json(back) == cli::to_json(rc));
  CHECK(back.train.seed == 9);
}

TEST_CASE("cli train, eval and sample end to end", "[cli][e2e]") {
  testing::TempDir tmp;
  const auto root = tmp.path();
  const auto cfg = write_small_config(root);
  const auto data_dir = (root / "data").string();
  REQUIRE(run({"--config", cfg.string(), "--out", data_dir, "synth"}).code == cli::kExitOk);

  SECTION("zero epochs writes the initial checkpoint") {
    const auto out = root / "init";
    const auto r = run({"--config", cfg.string(), "--out", out.string(), "train", "--data", data_dir,
                        "--epochs-phase1", "0", "--epochs-phase2", "0"});
    REQUIRE(r.code == cli::kExitOk);
    auto expected = testing::small_config();
    expected.epochs_phase1 = expected.epochs_phase2 = 0;
    CHECK(data::read_file(out / "checkpoint.bin") ==
          train::encode_checkpoint(train::initial_checkpoint<double>(expected)));
    CHECK(data::read_file(out / "losses.csv") == std::string(train::kLossCsvHeader) + "\n");
  }

  SECTION("ablation presets reach the checkpoint") {
    const auto out = root / "adv";
    REQUIRE(run({"--config", cfg.string(), "--out", out.string(), "train", "--data", data_dir, "--ablation", "adv"})
                .code == cli::kExitOk);
    const auto c = train::load_checkpoint<double>(out / "checkpoint.bin");
    CHECK(c.config.name == "adv");
    CHECK(c.config.weights.mse == 0);
    CHECK(c.config.weights.perceptual == 0);
    CHECK(c.config.weights.adversarial == 1);
    CHECK(!c.config.rlf.enabled);
    CHECK(c.epoch == 2);
    CHECK(count_lines(data::read_file(out / "losses.csv")) == 3);
    CHECK(fs::exists(out / "run_config.json"));
  }

  SECTION("resume through the cli matches an uninterrupted run") {
    const auto full = root / "full", part = root / "part", resumed = root / "resumed";
    const auto cfg2 = write_small_config(root, 2, 2);
    REQUIRE(run({"--config", cfg2.string(), "--out", full.string(), "train", "--data", data_dir}).code == 0);
    REQUIRE(run({"--config", cfg2.string(), "--out", part.string(), "train", "--data", data_dir,
                 "--checkpoint-every", "3"})
                .code == 0);
    const auto ckpt = (part / "checkpoint_e003.bin").string();
    REQUIRE(fs::exists(ckpt));
    CHECK(run({"--out", resumed.string(), "train", "--data", data_dir, "--resume", ckpt, "--ablation", "adv"}).code ==
          cli::kExitUsage);
    REQUIRE(run({"--out", resumed.string(), "train", "--data", data_dir, "--resume", ckpt}).code == 0);
    const auto a = train::load_checkpoint<double>(full / "checkpoint.bin");
    auto b = train::load_checkpoint<double>(resumed / "checkpoint.bin");
    b.config.checkpoint_every = a.config.checkpoint_every;
    CHECK(train::encode_checkpoint(a) == train::encode_checkpoint(b));
  }

  SECTION("eval rows, determinism and the four-row ablation table") {
    std::vector<std::string> ckpts;
    for (const char* name : train::kAblations) {
      const auto out = root / name;
      REQUIRE(run({"--config", cfg.string(), "--out", out.string(), "train", "--data", data_dir, "--ablation", name})
                  .code == cli::kExitOk);
      ckpts.push_back((out / "checkpoint.bin").string());
    }
    auto eval_args = [&](const fs::path& out, std::vector<std::string> which) {
      std::vector<std::string> a = {"--config", cfg.string(), "--seed", "5", "--out", out.string(), "eval", "--data",
                                    data_dir};
      a.insert(a.end(), which.begin(), which.end());
      return a;
    };
    REQUIRE(run(eval_args(root / "e1", ckpts)).code == cli::kExitOk);
    REQUIRE(run(eval_args(root / "e2", ckpts)).code == cli::kExitOk);
    const std::string csv = data::read_file(root / "e1" / "metrics.csv");
    CHECK(csv == data::read_file(root / "e2" / "metrics.csv"));
    CHECK(count_lines(csv) == 5);
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    CHECK(line == eval::kMetricsCsvHeader);
    for (const char* name : train::kAblations) {
      std::getline(lines, line);
      CHECK(line.rfind(std::string(name) + ",24,", 0) == 0);
      CHECK(line.substr(line.rfind(',')) == ",5");
    }
    const auto report = nlohmann::json::parse(data::read_file(root / "e1" / "report.json"));
    REQUIRE(report.at("rows").size() == 4);
    const auto first = train::load_checkpoint<double>(ckpts[0]);
    CHECK(report["rows"][0]["config_hash"] == util::hex64(first.config_hash()));
    for (const auto& row : report["rows"])
      CHECK(count_lines(data::read_file(root / "e1" / row["histogram"].get<std::string>())) == 769);

    const auto one = run(eval_args(root / "e3", {ckpts[0], "--samples", "10", "--ground-truth"}));
    REQUIRE(one.code == cli::kExitOk);
    const std::string csv3 = data::read_file(root / "e3" / "metrics.csv");
    CHECK(count_lines(csv3) == 3);
    CHECK(csv3.find("\nground-truth,40,100.0000,") != std::string::npos);
    CHECK(csv3.find("\nadv,10,") != std::string::npos);

    CHECK(run(eval_args(root / "e4", {})).code == cli::kExitUsage);
    CHECK(run(eval_args(root / "e4", {(root / "missing.bin").string()})).code == cli::kExitUsage);
    data::write_file(root / "junk.bin", "not a checkpoint");
    CHECK(run(eval_args(root / "e4", {(root / "junk.bin").string()})).code == cli::kExitRuntime);
  }

  SECTION("sample files, determinism and the retrieval baseline") {
    const auto ck = root / "ck";
    REQUIRE(run({"--config", cfg.string(), "--out", ck.string(), "train", "--data", data_dir}).code == 0);
    const auto checkpoint = (ck / "checkpoint.bin").string();
    const auto top = (fs::path(data_dir) / data::sample_file_name("top", 6)).string();
    auto sample = [&](const fs::path& out, std::vector<std::string> extra) {
      std::vector<std::string> a = {"--seed", "4", "--out", out.string(), "sample", "--checkpoint", checkpoint,
                                    "--top", top};
      a.insert(a.end(), extra.begin(), extra.end());
      return run(a);
    };
    REQUIRE(sample(root / "s1", {}).code == 0);
    REQUIRE(sample(root / "s2", {}).code == 0);
    CHECK(read_tree(root / "s1") == read_tree(root / "s2"));
    CHECK(read_tree(root / "s1").size() == 1);

    REQUIRE(sample(root / "s8", {"-n", "8"}).code == 0);
    const auto eight = read_tree(root / "s8");
    REQUIRE(eight.size() == 8);
    CHECK(eight[0].second == read_tree(root / "s1")[0].second);
    CHECK(eight[0].second != eight[1].second);

    REQUIRE(sample(root / "sb", {"--baseline", "k=3", "--data", data_dir}).code == 0);
    const auto with_baseline = read_tree(root / "sb");
    REQUIRE(with_baseline.size() == 4);
    CHECK(with_baseline[0].first == "baseline_1_id000006.ppm");
    CHECK(with_baseline[0].second == data::read_file(fs::path(data_dir) / data::sample_file_name("bottom", 6)));

    CHECK(sample(root / "sx", {"--baseline", "k=3"}).code == cli::kExitUsage);
    CHECK(sample(root / "sx", {"--baseline", "k=0", "--data", data_dir}).code == cli::kExitUsage);
    CHECK(sample(root / "sx", {"--baseline", "k=41", "--data", data_dir}).code == cli::kExitRuntime);
    CHECK(sample(root / "sx", {"-n", "0"}).code == cli::kExitUsage);
  }

  // Nothing is written outside the directories named by --out.
  for (const auto& e : fs::directory_iterator(root)) {
    const auto name = e.path().filename().string();
    CHECK((e.is_directory() || name.ends_with(".json") || name == "junk.bin"));
  }
}

#ifdef CPGAN_CLI_PATH
TEST_CASE("cli binary exit codes", "[cli][process]") {
  testing::TempDir tmp;
  auto sh = [&](const std::string& args) {
    const int status = std::system((std::string(CPGAN_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const auto out = (tmp.path() / "d").string();
  CHECK(sh("synth --count 2 --out " + out) == 0);
  CHECK(sh("synth --count 0 --out " + out) == 1);
  CHECK(sh("train --data " + (tmp.path() / "nowhere").string() + " --out " + out) == 2);
  CHECK(sh("sample --help") == 0);
}
#endif
