// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/data/manifest.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "dronese/data/mixing.h"
#include "dronese/data/synth.h"
#include "dronese/data/wav.h"
#include "dronese/numerics/errors.h"

namespace dronese {
namespace {

constexpr int kManifestSchema = 1;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Fisher-Yates on raw engine output so the order does not depend on the
// standard library's distribution implementations.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng() % i]);
  }
}

bool is_inline(const std::string& s, const char* prefix) {
  const std::string p = std::string(prefix) + ":";
  return s == prefix || s.rfind(p, 0) == 0;
}

std::string speaker_of(const std::string& source) {
  const std::string stem = std::filesystem::path(source).stem().string();
  return stem.substr(0, stem.find('_'));
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw DataError("manifest: '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw DataError("manifest: '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split '" + s + "' (expected train, val or test)");
}

std::vector<ManifestEntry> MixtureManifest::split(Split s) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(e);
  }
  return out;
}

std::vector<SplitPlan> full_protocol_plans() {
  return {
      {Split::kTrain, {-5, -10, -15, -20, -25}, 1440},
      {Split::kTest, {-5, -10, -15, -20, -25, -30}, 135},
  };
}

std::vector<std::string> list_wavs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("not a directory: " + dir.string());
  }
  std::vector<std::string> out;
  for (const auto& de : std::filesystem::directory_iterator(dir)) {
    if (de.is_regular_file() && de.path().extension() == ".wav") {
      out.push_back(de.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

MixtureManifest build_manifest(const ManifestSpec& spec) {
  if (spec.clean_sources.empty()) throw DataError("build_manifest: no clean sources");
  if (spec.noise_sources.empty()) throw DataError("build_manifest: no noise sources");
  if (!(spec.duration_s > 0.0)) throw ConfigError("build_manifest: duration must be positive");
  const auto seg_len = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate));
  const std::size_t stride = spec.noise_stride == 0 ? seg_len : spec.noise_stride;

  // Segment counts per noise file, read once.
  std::vector<std::size_t> noise_segments(spec.noise_sources.size(), 0);
  for (std::size_t i = 0; i < spec.noise_sources.size(); ++i) {
    const auto& src = spec.noise_sources[i];
    if (is_inline(src, "drone")) {
      DroneNoiseSpec::parse(src);
      continue;
    }
    const auto info = read_wav_info(resolve(src, spec.base_dir));
    noise_segments[i] = segment_count(info.frames, seg_len, stride);
    if (noise_segments[i] == 0) {
      throw DataError("build_manifest: noise file " + src + " is shorter than " +
                      fmt(spec.duration_s) + " s");
    }
  }

  std::vector<std::string> test_pool, other_pool;
  for (const auto& c : spec.clean_sources) {
    const bool held = !is_inline(c, "speech") &&
                      std::find(spec.test_speakers.begin(), spec.test_speakers.end(),
                                speaker_of(c)) != spec.test_speakers.end();
    (held ? test_pool : other_pool).push_back(c);
  }
  if (spec.test_speakers.empty()) test_pool = other_pool;

  MixtureManifest m;
  m.sample_rate = spec.sample_rate;
  m.base_dir = spec.base_dir;
  std::mt19937_64 rng(spec.seed);
  std::uint64_t serial = 0;
  for (const auto& plan : spec.plans) {
    auto pool = plan.split == Split::kTest ? test_pool : other_pool;
    if (pool.empty()) {
      throw DataError(std::string("build_manifest: no clean sources eligible for split ") +
                      split_name(plan.split));
    }
    shuffle(pool, rng);
    std::vector<ManifestEntry> entries;
    std::size_t cursor = 0;
    for (double snr : plan.snrs) {
      for (std::size_t k = 0; k < plan.per_snr; ++k) {
        ManifestEntry e;
        e.split = plan.split;
        e.snr_db = snr;
        e.duration_s = spec.duration_s;
        e.seed = splitmix64(spec.seed ^ splitmix64(serial++));
        e.clean = pool[cursor++ % pool.size()];
        const std::size_t ni = rng() % spec.noise_sources.size();
        const auto& src = spec.noise_sources[ni];
        if (is_inline(src, "drone")) {
          auto d = DroneNoiseSpec::parse(src);
          d.seed = e.seed;
          e.noise = d.to_string();
        } else {
          e.noise = src;
          e.noise_offset = (rng() % noise_segments[ni]) * stride;
        }
        entries.push_back(std::move(e));
      }
    }
    shuffle(entries, rng);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      std::ostringstream id;
      id << split_name(plan.split) << '_';
      id.width(5);
      id.fill('0');
      id << i;
      entries[i].id = id.str();
      m.entries.push_back(std::move(entries[i]));
    }
  }
  return m;
}

std::string manifest_to_text(const MixtureManifest& m) {
  std::ostringstream os;
  os << "# dronese mixture manifest\n";
  os << "schema=" << kManifestSchema << "\n";
  os << "sample_rate=" << fmt(m.sample_rate) << "\n";
  for (const auto& e : m.entries) {
    for (const auto* s : {&e.id, &e.clean, &e.noise}) {
      if (s->find_first_of("\t\n") != std::string::npos) {
        throw DataError("manifest: field contains a tab or newline: " + *s);
      }
    }
    os << "entry\tid=" << e.id << "\tsplit=" << split_name(e.split)
       << "\tsnr=" << fmt(e.snr_db) << "\tduration=" << fmt(e.duration_s)
       << "\tseed=" << e.seed << "\toffset=" << e.noise_offset << "\tclean=" << e.clean
       << "\tnoise=" << e.noise << "\n";
  }
  return os.str();
}

MixtureManifest manifest_from_text(const std::string& text) {
  MixtureManifest m;
  std::istringstream is(text);
  std::string line;
  bool have_schema = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = "manifest line " + std::to_string(lineno) + ": ";
    if (line.rfind("entry\t", 0) != 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw DataError(where + "expected key=value");
      const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
      if (key == "schema") {
        if (parse_u64(key, val) != kManifestSchema) {
          throw DataError(where + "unsupported schema " + val);
        }
        have_schema = true;
      } else if (key == "sample_rate") {
        m.sample_rate = parse_double(key, val);
      } else {
        throw DataError(where + "unknown header key '" + key + "'");
      }
      continue;
    }
    std::map<std::string, std::string> kv;
    std::istringstream fields(line.substr(6));
    std::string f;
    while (std::getline(fields, f, '\t')) {
      const auto eq = f.find('=');
      if (eq == std::string::npos) throw DataError(where + "malformed field '" + f + "'");
      kv[f.substr(0, eq)] = f.substr(eq + 1);
    }
    for (const char* k : {"id", "split", "snr", "duration", "seed", "offset", "clean", "noise"}) {
      if (!kv.count(k)) throw DataError(where + "missing field '" + k + "'");
    }
    if (kv.size() != 8) throw DataError(where + "unexpected extra fields");
    ManifestEntry e;
    e.id = kv["id"];
    e.split = parse_split(kv["split"]);
    e.snr_db = parse_double("snr", kv["snr"]);
    e.duration_s = parse_double("duration", kv["duration"]);
    e.seed = parse_u64("seed", kv["seed"]);
    e.noise_offset = parse_u64("offset", kv["offset"]);
    e.clean = kv["clean"];
    e.noise = kv["noise"];
    m.entries.push_back(std::move(e));
  }
  if (!have_schema) throw DataError("manifest: missing schema line");
  return m;
}

void write_manifest(const std::filesystem::path& path, const MixtureManifest& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("manifest: cannot write " + path.string());
  out << manifest_to_text(m);
  if (!out) throw DataError("manifest: write failed for " + path.string());
}

MixtureManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  MixtureManifest m = manifest_from_text(ss.str());
  m.base_dir = path.parent_path();
  return m;
}

MixtureData materialize(const ManifestEntry& e, const MixtureManifest& m) {
  const auto rate = static_cast<std::uint32_t>(std::llround(m.sample_rate));
  const auto len = static_cast<std::size_t>(std::llround(e.duration_s * m.sample_rate));
  MixtureData d;
  if (is_inline(e.clean, "speech")) {
    d.clean = synth_speech(SpeechSpec::parse(e.clean), e.duration_s, m.sample_rate);
  } else {
    d.clean = load_wav(resolve(e.clean, m.base_dir), rate);
  }
  d.clean = fit_length(d.clean, len);
  if (is_inline(e.noise, "drone")) {
    d.noise = synth_drone_noise(DroneNoiseSpec::parse(e.noise), e.duration_s, m.sample_rate);
    d.noise = fit_length(d.noise, len);
  } else {
    const auto full = load_wav(resolve(e.noise, m.base_dir), rate);
    if (e.noise_offset + len > full.size()) {
      throw DataError("manifest entry " + e.id + ": noise segment at " +
                      std::to_string(e.noise_offset) + " runs past the end of " + e.noise);
    }
    d.noise.assign(full.begin() + static_cast<std::ptrdiff_t>(e.noise_offset),
                   full.begin() + static_cast<std::ptrdiff_t>(e.noise_offset + len));
  }
  auto mix = mix_at_snr(d.clean, d.noise, e.snr_db);
  d.noisy = std::move(mix.mixture);
  d.gain = mix.gain;
  return d;
}

}  // namespace dronese
