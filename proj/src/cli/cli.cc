// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/cli/cli.h"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "dronese/analysis/cost.h"
#include "dronese/data/manifest.h"
#include "dronese/data/synth.h"
#include "dronese/data/wav.h"
#include "dronese/metrics/evaluate.h"
#include "dronese/numerics/errors.h"
#include "dronese/runtime/stream.h"
#include "json.hpp"

namespace dronese {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct KeyValue {
  std::string key, value;
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

KeyValue split_key_value(const std::string& line, const std::string& where) {
  const auto eq = line.find('=');
  if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
    throw ConfigError(where + ": expected key=value, got '" + line + "'");
  }
  return {trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
}

std::vector<KeyValue> parse_config_text(const std::string& text, const std::string& origin) {
  std::vector<KeyValue> out;
  std::istringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    out.push_back(split_key_value(line, origin + ":" + std::to_string(n)));
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (v.empty() || used != v.size() || v[0] == '-') {
    throw ConfigError("'" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return x;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_text(const fs::path& p, const std::string& text) {
  ensure_parent(p);
  std::ofstream f(p, std::ios::binary);
  f << text;
  if (!f) throw DataError("cannot write " + p.string());
}

// Shared state of one invocation.
struct Session {
  std::vector<std::string> args;
  std::ostream& out;
  std::ostream& err;
  std::string format = "text";

  // Human-readable text goes to stdout only in text mode so that tsv/json
  // output stays machine-parsable.
  std::ostream& info() { return format == "text" ? out : err; }

  void print_config(const std::string& text) {
    info() << "# effective config\n" << text << "\n";
  }

  void write_run_manifest(const fs::path& path, const std::string& command,
                          const std::string& config_text, const json& inputs,
                          const json& outputs, std::uint64_t seed) {
    json j;
    j["command"] = command;
    j["args"] = args;
    j["config"] = config_text;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["seed"] = seed;
    j["version"] = kToolVersion;
    j["timestamp"] = utc_timestamp();
    write_text(path, j.dump(2) + "\n");
    info() << "run manifest: " << path.string() << "\n";
  }
};

std::string checkpoint_config_text(const Checkpoint& ck, const RunConfig& run) {
  return ck.model.config().to_text() + "chunk_frames=" + std::to_string(run.chunk_frames) + "\n";
}

void add_config_options(CLI::App* sub, std::string& config, std::vector<std::string>& sets) {
  sub->add_option("--config", config,
                  "Preset name (default, tiny) or key=value config file");
  sub->add_option("--set", sets, "Override one config key (key=value); repeatable");
}

void add_format_option(CLI::App* sub, Session& s) {
  sub->add_option("--format", s.format, "Table format on stdout")
      ->check(CLI::IsMember({"text", "tsv", "json"}));
}

fs::path run_manifest_beside(const fs::path& file) {
  return fs::path(file.string() + ".run.json");
}

}  // namespace

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << model.to_text() << train.to_text() << "init_seed=" << init_seed << "\n"
     << "chunk_frames=" << chunk_frames << "\n";
  return os.str();
}

RunConfig load_run_config(const std::string& source, const std::vector<std::string>& overrides) {
  std::vector<KeyValue> kvs;
  if (source == "default" || source == "tiny") {
    kvs.push_back({"preset", source});
  } else if (!source.empty()) {
    std::ifstream f(source);
    if (!f) throw ConfigError("cannot read config file " + source);
    std::stringstream ss;
    ss << f.rdbuf();
    kvs = parse_config_text(ss.str(), source);
  }
  for (const auto& o : overrides) kvs.push_back(split_key_value(o, "--set"));

  RunConfig rc;
  ModelConfig base;
  std::string model_lines;
  for (const auto& [key, value] : kvs) {
    if (key == "preset") {
      if (value == "tiny") base = ModelConfig::tiny();
      else if (value == "default") base = ModelConfig{};
      else throw ConfigError("unknown preset '" + value + "'");
    } else if (key == "init_seed") {
      rc.init_seed = parse_u64(key, value);
    } else if (key == "chunk_frames") {
      rc.chunk_frames = parse_u64(key, value);
      if (rc.chunk_frames == 0) throw ConfigError("chunk_frames must be >= 1");
    } else if (!rc.train.set(key, value)) {
      model_lines += key + "=" + value + "\n";
    }
  }
  // Model keys are validated by the model parser, which rejects unknown ones.
  rc.model = ModelConfig::from_text(base.to_text() + model_lines);
  rc.model.validate();
  rc.train.validate();
  return rc;
}

namespace {

// ---- mix -------------------------------------------------------------------

struct MixArgs {
  std::string out, clean_dir, noise_dir;
  std::vector<std::string> noise_files, test_speakers;
  std::size_t synth_speakers = 8;
  bool synth_drone = false, no_audio = false;
  std::vector<double> snrs{-5, -15, -25}, val_snrs, test_snrs;
  std::size_t per_snr = 0, val_per_snr = 0, test_per_snr = 0;
  double duration = 5.0, sample_rate = 16000.0;
  std::size_t noise_stride = 0;
  std::uint64_t seed = 0;
};

int cmd_mix(Session& s, const MixArgs& a) {
  ManifestSpec spec;
  if (!a.clean_dir.empty()) {
    spec.clean_sources = list_wavs(fs::absolute(a.clean_dir));
    if (spec.clean_sources.empty()) throw DataError("no .wav files in " + a.clean_dir);
  } else {
    if (a.synth_speakers == 0) throw ConfigError("--synth-speakers must be >= 1");
    for (std::size_t i = 0; i < a.synth_speakers; ++i) {
      spec.clean_sources.push_back("speech:seed=" + std::to_string(i));
    }
  }
  for (const auto& f : a.noise_files) spec.noise_sources.push_back(fs::absolute(f).string());
  if (!a.noise_dir.empty()) {
    for (auto& w : list_wavs(fs::absolute(a.noise_dir))) spec.noise_sources.push_back(w);
  }
  if (a.synth_drone) spec.noise_sources.push_back("drone");
  if (spec.noise_sources.empty()) {
    throw ConfigError("no noise source: pass --synth-drone, --noise or --noise-dir");
  }
  if (a.per_snr > 0) spec.plans.push_back({Split::kTrain, a.snrs, a.per_snr});
  // Val and test fall back to the training ladder.
  const auto ladder = [&](const std::vector<double>& v) { return v.empty() ? a.snrs : v; };
  if (a.val_per_snr > 0) spec.plans.push_back({Split::kVal, ladder(a.val_snrs), a.val_per_snr});
  if (a.test_per_snr > 0) {
    spec.plans.push_back({Split::kTest, ladder(a.test_snrs), a.test_per_snr});
  }
  if (spec.plans.empty()) throw ConfigError("nothing to mix: set --per-snr or --test-per-snr");
  spec.test_speakers = a.test_speakers;
  spec.duration_s = a.duration;
  spec.sample_rate = a.sample_rate;
  spec.noise_stride = a.noise_stride;
  spec.seed = a.seed;

  // Everything that can fail on the inputs happens before the first write.
  const MixtureManifest m = build_manifest(spec);
  std::vector<MixtureData> audio;
  if (!a.no_audio) {
    for (const auto& e : m.entries) audio.push_back(materialize(e, m));
  }

  const fs::path out(a.out);
  fs::create_directories(out);
  write_manifest(out / "manifest.txt", m);
  json outputs = json::array({(out / "manifest.txt").string()});
  for (std::size_t i = 0; i < audio.size(); ++i) {
    const auto& e = m.entries[i];
    const fs::path dir = out / split_name(e.split);
    const auto rate = static_cast<std::uint32_t>(m.sample_rate);
    save_wav(dir / (e.id + "_noisy.wav"), audio[i].noisy, rate);
    save_wav(dir / (e.id + "_clean.wav"), audio[i].clean, rate);
  }
  if (!audio.empty()) outputs.push_back((out / "{split}/{id}_{noisy,clean}.wav").string());

  std::map<std::pair<int, double>, std::size_t> counts;
  for (const auto& e : m.entries) ++counts[{int(e.split), e.snr_db}];
  if (s.format == "json") {
    json rows = json::array();
    for (const auto& [k, n] : counts) {
      rows.push_back({{"split", split_name(Split(k.first))}, {"snr_db", k.second}, {"count", n}});
    }
    s.out << json{{"mixtures", m.entries.size()}, {"rows", rows}}.dump(2) << "\n";
  } else if (s.format == "tsv") {
    s.out << "split\tsnr_db\tcount\n";
    for (const auto& [k, n] : counts) {
      s.out << split_name(Split(k.first)) << '\t' << k.second << '\t' << n << "\n";
    }
  } else {
    s.out << std::left << std::setw(8) << "split" << std::right << std::setw(8) << "snr_db"
          << std::setw(8) << "count" << "\n";
    for (const auto& [k, n] : counts) {
      s.out << std::left << std::setw(8) << split_name(Split(k.first)) << std::right
            << std::setw(8) << k.second << std::setw(8) << n << "\n";
    }
    s.out << m.entries.size() << " mixtures written to " << out.string() << "\n";
  }
  json inputs = {{"clean", spec.clean_sources}, {"noise", spec.noise_sources}};
  s.write_run_manifest(out / "run_mix.json", "mix", manifest_to_text(m), inputs, outputs, a.seed);
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

int cmd_train(Session& s, const std::string& manifest_path, const std::string& out_dir,
              const std::string& resume_path, const RunConfig& rc_in) {
  RunConfig rc = rc_in;
  const fs::path out(out_dir);
  rc.train.checkpoint_dir = out.string();
  rc.train.log_path = (out / "train_log.tsv").string();
  const MixtureManifest manifest = read_manifest(manifest_path);

  Model<double> model = build_model(rc.model, rc.init_seed);
  std::optional<ResumeState> resume;
  if (!resume_path.empty()) {
    const Checkpoint ck = load_checkpoint(resume_path);
    resume = resume_state(ck);
    model = ck.model;
    rc.model = ck.model.config();
    s.info() << "resuming from " << resume_path << " at step " << resume->cursor.step << "\n";
  }
  s.print_config(rc.to_text());

  const TrainResult r = train(model, manifest, rc.train, resume ? &*resume : nullptr);

  Checkpoint best;
  best.model = r.best_model;
  best.metadata["train_config"] = rc.train.to_text();
  best.metadata["best_step"] = r.cursor.best_step;
  save_checkpoint(out / "model.ckpt", best);

  if (s.format == "json") {
    json rows = json::array();
    for (const auto& row : r.log) {
      json j = {{"step", row.step}, {"epoch", row.epoch}, {"batch", row.batch},
                {"lr", row.lr}, {"total", row.loss.total}, {"grad_norm", row.grad_norm}};
      if (row.val_loss) j["val_loss"] = *row.val_loss;
      if (row.val_si_sdr_db) j["val_si_sdr_db"] = *row.val_si_sdr_db;
      rows.push_back(j);
    }
    s.out << json{{"steps", r.cursor.step}, {"log", rows}}.dump(2) << "\n";
  } else if (s.format == "tsv") {
    s.out << TrainLogRow::tsv_header() << "\n";
    for (const auto& row : r.log) s.out << row.to_tsv() << "\n";
  } else {
    s.out << std::setw(8) << "step" << std::setw(7) << "epoch" << std::setw(12) << "loss"
          << std::setw(12) << "val_loss" << std::setw(12) << "val_sisdr" << "\n";
    for (const auto& row : r.log) {
      if (!row.val_loss && row.step % 50 != 0) continue;
      s.out << std::setw(8) << row.step << std::setw(7) << row.epoch << std::setw(12)
            << std::setprecision(5) << row.loss.total;
      if (row.val_loss) {
        s.out << std::setw(12) << *row.val_loss << std::setw(12) << *row.val_si_sdr_db;
      }
      s.out << "\n";
    }
    s.out << "trained " << r.cursor.step << " steps; model: " << (out / "model.ckpt").string()
          << "\n";
  }
  json outputs = json::array({(out / "model.ckpt").string(), (out / "last.ckpt").string(),
                              rc.train.log_path});
  json inputs = {{"manifest", manifest_path}};
  if (!resume_path.empty()) inputs["resume"] = resume_path;
  s.write_run_manifest(out / "run_train.json", "train", rc.to_text(), inputs, outputs,
                       rc.train.seed);
  return kExitOk;
}

// ---- enhance / stream -------------------------------------------------------

std::vector<double> run_stream(const Model<double>& model, const std::vector<double>& wave,
                               std::size_t chunk_frames, std::size_t push_size,
                               LatencyReport* report) {
  auto state = create_stream(model, chunk_frames);
  std::vector<double> out;
  out.reserve(wave.size());
  for (std::size_t i = 0; i < wave.size(); i += push_size) {
    const std::size_t n = std::min(push_size, wave.size() - i);
    const auto y = state.push(std::span<const double>(wave).subspan(i, n));
    out.insert(out.end(), y.begin(), y.end());
  }
  auto flushed = state.flush();
  out.insert(out.end(), flushed.tail.begin(), flushed.tail.end());
  if (report) *report = flushed.report;
  return out;
}

int cmd_enhance(Session& s, const std::string& in, const std::string& out, const std::string& ckpt,
                bool streaming, const RunConfig& rc) {
  const Checkpoint ck = load_checkpoint(ckpt);
  const auto& cfg = ck.model.config();
  s.print_config(checkpoint_config_text(ck, rc));
  const auto rate = static_cast<std::uint32_t>(cfg.sample_rate);
  const auto wave = load_wav(in, rate);
  if (wave.empty()) throw DataError(in + " has no samples");
  std::vector<double> y;
  if (streaming) {
    y = run_stream(ck.model, wave, rc.chunk_frames, cfg.hop, nullptr);
  } else {
    y = forward<double>(ck.model, wave).first;
  }
  save_wav(out, y, rate);
  s.info() << "enhanced " << wave.size() << " samples -> " << out << "\n";
  s.write_run_manifest(run_manifest_beside(out), "enhance", checkpoint_config_text(ck, rc),
                       {{"input", in}, {"checkpoint", ckpt}}, json::array({out}), 0);
  return kExitOk;
}

int cmd_stream(Session& s, const std::string& in, const std::string& out, const std::string& ckpt,
               std::size_t push_size, const RunConfig& rc) {
  const Checkpoint ck = load_checkpoint(ckpt);
  const auto& cfg = ck.model.config();
  s.print_config(checkpoint_config_text(ck, rc));
  const auto rate = static_cast<std::uint32_t>(cfg.sample_rate);
  const auto wave = load_wav(in, rate);
  if (push_size == 0) push_size = cfg.hop;
  LatencyReport report;
  const auto y = run_stream(ck.model, wave, rc.chunk_frames, push_size, &report);
  save_wav(out, y, rate);
  const std::string report_path = out + ".latency.json";
  write_text(report_path, report.to_json() + "\n");
  if (s.format == "json") {
    s.out << report.to_json() << "\n";
  } else if (s.format == "tsv") {
    auto j = json::parse(report.to_json());
    s.out << "key\tvalue\n";
    for (const auto& [k, v] : j.items()) s.out << k << '\t' << v.dump() << "\n";
  } else {
    s.out << report.to_text();
  }
  s.write_run_manifest(run_manifest_beside(out), "stream", checkpoint_config_text(ck, rc),
                       {{"input", in}, {"checkpoint", ckpt}, {"push_size", push_size}},
                       json::array({out, report_path}), 0);
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

int cmd_eval(Session& s, const std::string& manifest_path, const std::string& ckpt,
             const std::string& split_text, std::string out_dir, bool identity) {
  const MixtureManifest manifest = read_manifest(manifest_path);
  const Split split = parse_split(split_text);
  EvalReport report;
  std::string config_text;
  if (identity) {
    report = evaluate_set(manifest, [](const std::vector<double>& x) { return x; }, split);
    config_text = "enhancer=identity\n";
  } else {
    if (ckpt.empty()) throw ConfigError("eval needs --ckpt (or --identity)");
    const Checkpoint ck = load_checkpoint(ckpt);
    config_text = ck.model.config().to_text();
    s.print_config(config_text);
    report = evaluate_set(manifest, ck.model, split);
  }
  if (out_dir.empty()) {
    out_dir = ckpt.empty() ? fs::path(manifest_path).parent_path().string()
                           : fs::path(ckpt).parent_path().string();
    if (out_dir.empty()) out_dir = ".";
  }
  const fs::path out(out_dir);
  const std::string stem = std::string("eval_") + split_name(split);
  write_text(out / (stem + ".tsv"), report.to_tsv());
  write_text(out / (stem + ".json"), report.to_json() + "\n");
  if (s.format == "json") s.out << report.to_json() << "\n";
  else if (s.format == "tsv") s.out << report.to_tsv();
  else s.out << report.to_table();
  json inputs = {{"manifest", manifest_path}, {"split", split_name(split)}};
  if (!ckpt.empty()) inputs["checkpoint"] = ckpt;
  s.write_run_manifest(out / ("run_" + stem + ".json"), "eval", config_text, inputs,
                       json::array({(out / (stem + ".tsv")).string(),
                                    (out / (stem + ".json")).string()}),
                       0);
  return kExitOk;
}

// ---- analyze ---------------------------------------------------------------

int cmd_analyze(Session& s, const RunConfig& rc, double seconds, std::size_t frames,
                const std::string& out_dir) {
  s.print_config(rc.model.to_text());
  const Model<double> model = build_model(rc.model, rc.init_seed);
  const std::size_t T = frames > 0 ? frames : frames_for_seconds(rc.model, seconds);
  const CostReport report = cost_report(model, T);
  const Comparison cmp = compare_to_reference(report);
  const json j = {{"cost", json::parse(report.to_json())},
                  {"comparison", json::parse(cmp.to_json())}};
  if (s.format == "json") {
    s.out << j.dump(2) << "\n";
  } else if (s.format == "tsv") {
    s.out << report.to_tsv();
  } else {
    s.out << report.to_table() << "\n" << cmp.to_table();
  }
  if (!out_dir.empty()) {
    const fs::path out(out_dir);
    write_text(out / "cost.tsv", report.to_tsv());
    write_text(out / "analysis.json", j.dump(2) + "\n");
    s.write_run_manifest(out / "run_analyze.json", "analyze", rc.model.to_text(),
                         {{"frames", T}},
                         json::array({(out / "cost.tsv").string(),
                                      (out / "analysis.json").string()}),
                         rc.init_seed);
  }
  return kExitOk;
}

// ---- synthesis -------------------------------------------------------------

int cmd_synth(Session& s, const std::string& kind, const std::string& out, double duration,
              double rate, std::uint64_t seed, const std::string& spec_text) {
  std::vector<double> x;
  std::string spec_line;
  if (kind == "speech") {
    SpeechSpec sp = spec_text.empty() ? SpeechSpec{} : SpeechSpec::parse(spec_text);
    sp.seed = seed;
    x = synth_speech(sp, duration, rate);
    spec_line = sp.to_string();
  } else {
    DroneNoiseSpec sp = spec_text.empty() ? DroneNoiseSpec{} : DroneNoiseSpec::parse(spec_text);
    sp.seed = seed;
    x = synth_drone_noise(sp, duration, rate);
    spec_line = sp.to_string();
  }
  save_wav(out, x, static_cast<std::uint32_t>(rate));
  s.info() << spec_line << ": " << x.size() << " samples -> " << out << "\n";
  s.write_run_manifest(run_manifest_beside(out), "synth-" + kind,
                       spec_line + "\nduration=" + std::to_string(duration) + "\n",
                       json::object(), json::array({out}), seed);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Session s{args, out, err};
  CLI::App app{"Drone-noise speech enhancement toolkit", "dronese"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.allow_extras(false);

  std::function<int()> action;

  // mix
  MixArgs mix;
  auto* mix_cmd = app.add_subcommand("mix", "Build a mixture manifest and write the mixtures");
  mix_cmd->add_option("--out", mix.out, "Output directory")->required();
  mix_cmd->add_option("--clean-dir", mix.clean_dir, "Directory of clean .wav files");
  mix_cmd->add_option("--synth-speakers", mix.synth_speakers,
                      "Synthetic speech sources when --clean-dir is absent");
  mix_cmd->add_option("--noise", mix.noise_files, "Noise .wav file; repeatable");
  mix_cmd->add_option("--noise-dir", mix.noise_dir, "Directory of noise .wav files");
  mix_cmd->add_flag("--synth-drone", mix.synth_drone, "Add the synthetic drone noise source");
  mix_cmd->add_option("--snrs", mix.snrs, "Training SNR ladder in dB, comma separated")
      ->delimiter(',')->capture_default_str();
  mix_cmd->add_option("--per-snr", mix.per_snr, "Training mixtures per SNR");
  mix_cmd->add_option("--val-snrs", mix.val_snrs, "Validation SNRs (default: the training ladder)")
      ->delimiter(',');
  mix_cmd->add_option("--val-per-snr", mix.val_per_snr, "Validation mixtures per SNR");
  mix_cmd->add_option("--test-snrs", mix.test_snrs, "Test SNRs (default: the training ladder)")
      ->delimiter(',');
  mix_cmd->add_option("--test-per-snr", mix.test_per_snr, "Test mixtures per SNR");
  mix_cmd->add_option("--test-speakers", mix.test_speakers,
                      "Speakers reserved for the test split; repeatable");
  mix_cmd->add_option("--duration", mix.duration, "Seconds per mixture")->capture_default_str();
  mix_cmd->add_option("--sample-rate", mix.sample_rate, "Hz")->capture_default_str();
  mix_cmd->add_option("--noise-stride", mix.noise_stride,
                      "Segment stride in samples for long noise files");
  mix_cmd->add_option("--seed", mix.seed, "Manifest seed")->capture_default_str();
  mix_cmd->add_flag("--no-audio", mix.no_audio, "Write only the manifest");
  add_format_option(mix_cmd, s);
  mix_cmd->callback([&] { action = [&] { return cmd_mix(s, mix); }; });

  // train
  std::string tr_manifest, tr_out, tr_resume, tr_config;
  std::vector<std::string> tr_sets;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a mixture manifest");
  train_cmd->add_option("--manifest", tr_manifest, "Mixture manifest")->required();
  train_cmd->add_option("--out", tr_out, "Output directory for checkpoints and logs")
      ->required();
  train_cmd->add_option("--resume", tr_resume, "Continue from a last.ckpt");
  add_config_options(train_cmd, tr_config, tr_sets);
  std::map<std::string, std::string> tr_flags;
  for (const char* key : {"lr", "epochs", "batch_size", "seed", "max_steps", "init_seed"}) {
    std::string flag = std::string("--") + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    train_cmd->add_option_function<std::string>(
        flag, [&tr_flags, key](const std::string& v) { tr_flags[key] = v; },
        std::string("Shorthand for --set ") + key + "=...");
  }
  add_format_option(train_cmd, s);
  train_cmd->callback([&] {
    action = [&] {
      auto sets = tr_sets;
      for (const auto& [k, v] : tr_flags) sets.push_back(k + "=" + v);
      return cmd_train(s, tr_manifest, tr_out, tr_resume, load_run_config(tr_config, sets));
    };
  });

  // enhance
  std::string en_in, en_out, en_ckpt, en_config;
  std::vector<std::string> en_sets;
  bool en_stream = false;
  auto* enhance_cmd = app.add_subcommand("enhance", "Enhance one wav file");
  enhance_cmd->add_option("input", en_in, "Noisy wav")->required();
  enhance_cmd->add_option("output", en_out, "Enhanced wav")->required();
  enhance_cmd->add_option("--ckpt", en_ckpt, "Model checkpoint")->required();
  enhance_cmd->add_flag("--stream", en_stream, "Run through the streaming runtime");
  add_config_options(enhance_cmd, en_config, en_sets);
  enhance_cmd->callback([&] {
    action = [&] {
      return cmd_enhance(s, en_in, en_out, en_ckpt, en_stream, load_run_config(en_config, en_sets));
    };
  });

  // stream
  std::string st_in, st_out, st_ckpt, st_config;
  std::vector<std::string> st_sets;
  std::size_t st_push = 0;
  auto* stream_cmd = app.add_subcommand("stream", "Stream a wav file through the causal runtime");
  stream_cmd->add_option("input", st_in, "Noisy wav")->required();
  stream_cmd->add_option("output", st_out, "Enhanced wav")->required();
  stream_cmd->add_option("--ckpt", st_ckpt, "Causal model checkpoint")->required();
  stream_cmd->add_option("--push-size", st_push, "Samples per push (default: one hop)");
  add_config_options(stream_cmd, st_config, st_sets);
  add_format_option(stream_cmd, s);
  stream_cmd->callback([&] {
    action = [&] {
      return cmd_stream(s, st_in, st_out, st_ckpt, st_push, load_run_config(st_config, st_sets));
    };
  });

  // eval
  std::string ev_manifest, ev_ckpt, ev_split = "test", ev_out;
  bool ev_identity = false;
  auto* eval_cmd = app.add_subcommand("eval", "Score a model on a manifest split");
  eval_cmd->add_option("--manifest", ev_manifest, "Mixture manifest")->required();
  eval_cmd->add_option("--ckpt", ev_ckpt, "Model checkpoint");
  eval_cmd->add_flag("--identity", ev_identity, "Score the unprocessed mixtures only");
  eval_cmd->add_option("--split", ev_split, "train, val or test")->capture_default_str();
  eval_cmd->add_option("--out", ev_out, "Directory for the report files");
  add_format_option(eval_cmd, s);
  eval_cmd->callback([&] {
    action = [&] { return cmd_eval(s, ev_manifest, ev_ckpt, ev_split, ev_out, ev_identity); };
  });

  // analyze
  std::string an_config = "default", an_out;
  std::vector<std::string> an_sets;
  double an_seconds = 5.0;
  std::size_t an_frames = 0;
  auto* analyze_cmd = app.add_subcommand("analyze", "Parameter and MAC accounting");
  add_config_options(analyze_cmd, an_config, an_sets);
  analyze_cmd->add_option("--seconds", an_seconds, "Utterance length")->capture_default_str();
  analyze_cmd->add_option("--frames", an_frames, "Frame count; overrides --seconds");
  analyze_cmd->add_option("--out", an_out, "Directory for the report files");
  add_format_option(analyze_cmd, s);
  analyze_cmd->callback([&] {
    action = [&] {
      return cmd_analyze(s, load_run_config(an_config, an_sets), an_seconds, an_frames, an_out);
    };
  });

  // synth-speech / synth-drone
  struct SynthArgs {
    std::string out, spec;
    double duration = 3.0, rate = 16000.0;
    std::uint64_t seed = 0;
  };
  SynthArgs sp, dr;
  for (auto [name, args_ptr, kind] :
       {std::tuple{"synth-speech", &sp, "speech"}, std::tuple{"synth-drone", &dr, "drone"}}) {
    auto* cmd = app.add_subcommand(name, std::string("Write synthetic ") + (std::string(kind) == "speech" ? "speech" : "drone noise") + " to a wav");
    cmd->add_option("output", args_ptr->out, "Output wav")->required();
    cmd->add_option("--duration", args_ptr->duration, "Seconds")->capture_default_str();
    cmd->add_option("--sample-rate", args_ptr->rate, "Hz")->capture_default_str();
    cmd->add_option("--seed", args_ptr->seed, "Generator seed")->capture_default_str();
    cmd->add_option("--spec", args_ptr->spec,
                    std::string("Inline generator spec, e.g. ") +
                        (std::string(kind) == "speech" ? "speech:f0_min=100" : "drone:bp=150,h=8"));
    const std::string k = kind;
    cmd->callback([&s, &action, args_ptr, k] {
      action = [&s, args_ptr, k] {
        return cmd_synth(s, k, args_ptr->out, args_ptr->duration, args_ptr->rate,
                         args_ptr->seed, args_ptr->spec);
      };
    });
  }

  // replay
  std::string rp_path;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a run manifest");
  replay_cmd->add_option("manifest", rp_path, "run_*.json or *.run.json")->required();
  replay_cmd->callback([&] {
    action = [&] {
      std::ifstream f(rp_path);
      if (!f) throw DataError("cannot read " + rp_path);
      json j;
      try {
        j = json::parse(f);
      } catch (const json::exception& e) {
        throw DataError(rp_path + ": " + e.what());
      }
      if (!j.contains("args") || !j["args"].is_array()) {
        throw DataError(rp_path + ": no recorded args");
      }
      const auto replay_args = j["args"].get<std::vector<std::string>>();
      if (!replay_args.empty() && replay_args.front() == "replay") {
        throw DataError(rp_path + ": refusing to replay a replay");
      }
      return run_cli(replay_args, s.out, s.err);
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace dronese
