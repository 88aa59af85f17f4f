// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dronese/cli/cli.h"
#include "dronese/data/manifest.h"
#include "dronese/data/wav.h"
#include "dronese/numerics/errors.h"
#include "json.hpp"

namespace dronese {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name)
      : dir(fs::temp_directory_path() / ("dronese_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& leaf) const { return (dir / leaf).string(); }
};

TEST_CASE("mix writes twelve mixtures for three SNRs at four each") {
  Scratch s("mix");
  const auto r = cli({"mix", "--out", s / "a", "--snrs=-5,-15,-25", "--per-snr=4",
                      "--synth-drone", "--duration", "0.5", "--seed", "3"});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const auto m = read_manifest(s / "a/manifest.txt");
  CHECK(m.entries.size() == 12);
  CHECK(m.split(Split::kTrain).size() == 12);
  std::size_t wavs = 0;
  for (const auto& e : fs::directory_iterator(s / "a/train")) wavs += e.path().extension() == ".wav";
  CHECK(wavs == 24);
  const auto run = nlohmann::json::parse(slurp(s / "a/run_mix.json"));
  for (const char* k : {"command", "args", "config", "inputs", "outputs", "seed", "version",
                        "timestamp"}) {
    CHECK(run.contains(k));
  }

  // Same seed, same bytes.
  REQUIRE(cli({"mix", "--out", s / "b", "--snrs=-5,-15,-25", "--per-snr=4", "--synth-drone",
               "--duration", "0.5", "--seed", "3"})
              .code == kExitOk);
  CHECK(slurp(s / "a/manifest.txt") == slurp(s / "b/manifest.txt"));
  const auto first = m.entries.front().id;
  CHECK(slurp(s / ("a/train/" + first + "_noisy.wav")) ==
        slurp(s / ("b/train/" + first + "_noisy.wav")));
}

TEST_CASE("test split without its own SNRs reuses the training ladder") {
  Scratch s("ladder");
  const auto r = cli({"mix", "--out", s / "a", "--snrs=-5,-15", "--per-snr=1",
                      "--test-per-snr=2", "--synth-drone", "--duration", "0.5", "--no-audio"});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const auto m = read_manifest(s / "a/manifest.txt");
  CHECK(m.split(Split::kTrain).size() == 2);
  CHECK(m.split(Split::kTest).size() == 4);
}

TEST_CASE("mix fails on a missing clean directory before writing") {
  Scratch s("mix_missing");
  const auto r = cli({"mix", "--out", s / "out", "--clean-dir", s / "nope", "--synth-drone",
                      "--per-snr", "1"});
  CHECK(r.code == kExitData);
  CHECK_FALSE(fs::exists(s / "out"));
  const auto r2 = cli({"mix", "--out", s / "out", "--per-snr", "1"});
  CHECK(r2.code == kExitUsage);
  CHECK_FALSE(fs::exists(s / "out"));
}

TEST_CASE("usage errors and help") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"bogus"}).code == kExitUsage);
  CHECK(cli({"analyze", "--no-such-flag"}).code == kExitUsage);
  CHECK(cli({"analyze", "--format", "xml"}).code == kExitUsage);
  CHECK(cli({"analyze", "--config", "tiny", "--set", "nonsense=1"}).code == kExitUsage);
  const auto help = cli({"mix", "--help"});
  CHECK(help.code == kExitOk);
  for (const char* flag : {"--out", "--clean-dir", "--synth-drone", "--snrs", "--per-snr",
                           "--test-snrs", "--duration", "--seed", "--format"}) {
    CHECK_MESSAGE(help.out.find(flag) != std::string::npos, flag);
  }
  CHECK(cli({"--version"}).out.find(kToolVersion) != std::string::npos);
}

TEST_CASE("run config text round trip") {
  Scratch s("config");
  auto a = load_run_config("tiny", {"lr=0.003", "epochs=4", "embed_dim=16", "heads=4", "encoder_channels=4,6,16",
                                    "init_seed=9", "chunk_frames=2"});
  CHECK(a.model.embed_dim == 16);
  CHECK(a.model.fft_size == 64);
  CHECK(a.train.adam.lr == 0.003);
  CHECK(a.init_seed == 9);
  {
    std::ofstream f(s / "run.cfg");
    f << "# comment\n" << a.to_text();
  }
  const auto b = load_run_config(s / "run.cfg", {});
  CHECK(b.to_text() == a.to_text());
  CHECK(b.model == a.model);
  CHECK_THROWS_AS(load_run_config("tiny", {"nope=1"}), ConfigError);
  CHECK_THROWS_AS(load_run_config("tiny", {"chunk_frames=0"}), ConfigError);
  CHECK_THROWS_AS(load_run_config("tiny", {"schema=7"}), ConfigError);
  CHECK_THROWS_AS(load_run_config(s / "missing.cfg", {}), ConfigError);
  CHECK(load_run_config("", {}).model == ModelConfig{});
}

TEST_CASE("train, enhance, stream, eval and replay on a tiny corpus") {
  Scratch s("pipeline");
  REQUIRE(cli({"mix", "--out", s / "data", "--snrs=-5", "--per-snr=2", "--val-snrs=-5",
               "--val-per-snr=1", "--test-snrs=-15", "--test-per-snr=1", "--synth-drone",
               "--duration", "1", "--no-audio"})
              .code == kExitOk);
  const auto m = read_manifest(s / "data/manifest.txt");
  const auto noisy = materialize(m.split(Split::kTest).front(), m).noisy;
  save_wav(s / "in.wav", noisy);

  const auto tr = cli({"train", "--manifest", s / "data/manifest.txt", "--out", s / "run",
                       "--config", "tiny", "--max-steps", "2", "--batch-size", "1", "--lr",
                       "1e-3", "--format", "tsv"});
  REQUIRE_MESSAGE(tr.code == kExitOk, tr.err);
  CHECK(tr.out.rfind(TrainLogRow::tsv_header(), 0) == 0);
  CHECK(tr.err.find("# effective config") != std::string::npos);
  for (const char* f : {"model.ckpt", "last.ckpt", "train_log.tsv", "run_train.json"}) {
    CHECK_MESSAGE(fs::exists(s / ("run/" + std::string(f))), f);
  }

  const auto en = cli({"enhance", s / "in.wav", s / "out.wav", "--ckpt", s / "run/model.ckpt"});
  REQUIRE_MESSAGE(en.code == kExitOk, en.err);
  CHECK(en.out.find("# effective config") != std::string::npos);
  const auto enhanced = load_wav(s / "out.wav");
  CHECK(enhanced.size() == noisy.size());
  CHECK(fs::exists(s / "out.wav.run.json"));

  // Replaying the recorded invocation reproduces the output bytes.
  const auto before = slurp(s / "out.wav");
  fs::remove(s / "out.wav");
  REQUIRE(cli({"replay", s / "out.wav.run.json"}).code == kExitOk);
  CHECK(slurp(s / "out.wav") == before);

  const auto st = cli({"stream", s / "in.wav", s / "st.wav", "--ckpt", s / "run/model.ckpt",
                       "--set", "chunk_frames=3", "--push-size", "77", "--format", "json"});
  REQUIRE_MESSAGE(st.code == kExitOk, st.err);
  const auto report = nlohmann::json::parse(st.out);
  CHECK(report.contains("algorithmic_latency_samples"));
  const auto streamed = load_wav(s / "st.wav");
  REQUIRE(streamed.size() == enhanced.size());
  double dev = 0.0;
  for (std::size_t i = 0; i < streamed.size(); ++i) {
    dev = std::max(dev, std::abs(streamed[i] - enhanced[i]));
  }
  CHECK(dev < 1e-6);  // both went through 32-bit wav files

  const auto ev = cli({"eval", "--manifest", s / "data/manifest.txt", "--ckpt",
                       s / "run/model.ckpt", "--out", s / "eval", "--format", "json"});
  REQUIRE_MESSAGE(ev.code == kExitOk, ev.err);
  const auto ej = nlohmann::json::parse(ev.out);
  CHECK(ej.dump().find("si_sdr") != std::string::npos);
  CHECK(fs::exists(s / "eval/eval_test.tsv"));
  CHECK(fs::exists(s / "eval/run_eval_test.json"));
}

TEST_CASE("data and numeric failures map to their exit codes") {
  Scratch s("errors");
  {
    std::ofstream f(s / "bad.ckpt");
    f << "not a checkpoint";
  }
  save_wav(s / "in.wav", std::vector<double>(400, 0.1));
  CHECK(cli({"enhance", s / "in.wav", s / "o.wav", "--ckpt", s / "bad.ckpt"}).code == kExitData);
  CHECK(cli({"enhance", s / "missing.wav", s / "o.wav", "--ckpt", s / "bad.ckpt"}).code ==
        kExitData);

  // A non-causal checkpoint cannot stream.
  ModelConfig c = ModelConfig::tiny();
  c.causal = false;
  Checkpoint ck;
  ck.model = build_model(c, 1);
  save_checkpoint(s / "nc.ckpt", ck);
  const auto nc = cli({"stream", s / "in.wav", s / "o.wav", "--ckpt", s / "nc.ckpt"});
  CHECK(nc.code == kExitUsage);
  CHECK(nc.err.find("streaming requires causal TCN") != std::string::npos);

  ck.model = build_model(ModelConfig::tiny(), 1);
  save_checkpoint(s / "c.ckpt", ck);
  std::vector<double> bad(400, 0.1);
  bad[123] = std::numeric_limits<double>::infinity();
  save_wav(s / "inf.wav", bad);
  CHECK(cli({"stream", s / "inf.wav", s / "o.wav", "--ckpt", s / "c.ckpt"}).code ==
        kExitNumeric);
}

TEST_CASE("analyze prints the cost table and writes reports") {
  Scratch s("analyze");
  const auto r = cli({"analyze", "--config", "default", "--out", s / "a", "--format", "json"});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.contains("cost"));
  CHECK(j.contains("comparison"));
  CHECK(fs::exists(s / "a/cost.tsv"));
  CHECK(fs::exists(s / "a/run_analyze.json"));
  const auto t = cli({"analyze", "--config", "tiny", "--frames", "8"});
  CHECK(t.code == kExitOk);
  CHECK(t.out.find("total") != std::string::npos);
}

TEST_CASE("synthesis commands write audio") {
  Scratch s("synth");
  REQUIRE(cli({"synth-speech", s / "sp.wav", "--duration", "0.5", "--seed", "2"}).code == kExitOk);
  REQUIRE(cli({"synth-drone", s / "dr.wav", "--duration", "0.5", "--spec", "drone:bp=150"}).code ==
          kExitOk);
  CHECK(load_wav(s / "sp.wav").size() == 8000);
  CHECK(load_wav(s / "dr.wav").size() == 8000);
  CHECK(cli({"synth-drone", s / "x.wav", "--spec", "drone:bogus=1"}).code == kExitUsage);
}

}  // namespace
}  // namespace dronese
