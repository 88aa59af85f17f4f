// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/metrics/evaluate.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "dronese/loss/losses.h"
#include "dronese/metrics/stoi.h"
#include "dronese/numerics/errors.h"
#include "dronese/spectral/stft.h"
#include "json.hpp"

namespace dronese {
namespace {

void accumulate(EvalResult& sum, const EvalResult& r) {
  sum.si_sdr_db += r.si_sdr_db;
  sum.stoi += r.stoi;
  sum.lsd_db += r.lsd_db;
}

EvalResult scaled(EvalResult r, double s) {
  r.si_sdr_db *= s;
  r.stoi *= s;
  r.lsd_db *= s;
  return r;
}

std::string snr_label(const EvalRow& r) {
  if (!r.snr_db) return "mean";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", *r.snr_db);
  return buf;
}

nlohmann::json result_json(const EvalResult& r) {
  return {{"si_sdr_db", r.si_sdr_db}, {"stoi", r.stoi}, {"lsd_db", r.lsd_db}};
}

nlohmann::json row_json(const EvalRow& r) {
  nlohmann::json j;
  j["snr_db"] = r.snr_db ? nlohmann::json(*r.snr_db) : nlohmann::json("mean");
  j["count"] = r.count;
  j["input"] = result_json(r.input);
  j["enhanced"] = result_json(r.enhanced);
  return j;
}

}  // namespace

double si_sdr_metric(std::span<const double> est, std::span<const double> ref) {
  return -loss_time_sisdr<double>(est, ref);
}

double lsd_metric(std::span<const double> est, std::span<const double> ref,
                  double sample_rate) {
  if (est.size() != ref.size()) {
    throw ShapeError("lsd_metric: length mismatch " + std::to_string(est.size()) +
                     " vs " + std::to_string(ref.size()));
  }
  StftConfig cfg;
  cfg.sample_rate = sample_rate;
  return lsd(stft<double>(est, cfg), stft<double>(ref, cfg));
}

EvalResult evaluate_pair(std::span<const double> est, std::span<const double> ref,
                         double sample_rate) {
  EvalResult r;
  r.si_sdr_db = si_sdr_metric(est, ref);
  r.stoi = stoi(est, ref, sample_rate);
  r.lsd_db = lsd_metric(est, ref, sample_rate);
  if (!std::isfinite(r.si_sdr_db) || !std::isfinite(r.stoi) || !std::isfinite(r.lsd_db)) {
    throw NumericError("evaluate_pair: non-finite metric");
  }
  return r;
}

EvalReport aggregate(std::vector<EntryScore> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const EntryScore& a, const EntryScore& b) { return a.id < b.id; });
  EvalReport rep;
  std::map<double, EvalRow> by_snr;
  for (const auto& e : entries) {
    auto& row = by_snr[e.snr_db];
    row.snr_db = e.snr_db;
    ++row.count;
    accumulate(row.input, e.input);
    accumulate(row.enhanced, e.enhanced);
    ++rep.mean.count;
    accumulate(rep.mean.input, e.input);
    accumulate(rep.mean.enhanced, e.enhanced);
  }
  for (auto& [snr, row] : by_snr) {
    row.input = scaled(row.input, 1.0 / double(row.count));
    row.enhanced = scaled(row.enhanced, 1.0 / double(row.count));
    rep.per_snr.push_back(row);
  }
  if (rep.mean.count > 0) {
    rep.mean.input = scaled(rep.mean.input, 1.0 / double(rep.mean.count));
    rep.mean.enhanced = scaled(rep.mean.enhanced, 1.0 / double(rep.mean.count));
  }
  rep.entries = std::move(entries);
  return rep;
}

EvalReport evaluate_set(const MixtureManifest& manifest, const Enhancer& enhance,
                        Split split) {
  std::vector<EntryScore> scores;
  for (const auto& e : manifest.split(split)) {
    const MixtureData d = materialize(e, manifest);
    const auto out = enhance(d.noisy);
    if (out.size() != d.noisy.size()) {
      throw ShapeError("evaluate_set: enhancer changed the length of " + e.id);
    }
    EntryScore s;
    s.id = e.id;
    s.snr_db = e.snr_db;
    s.input = evaluate_pair(d.noisy, d.clean, manifest.sample_rate);
    s.enhanced = evaluate_pair(out, d.clean, manifest.sample_rate);
    scores.push_back(std::move(s));
  }
  if (scores.empty()) {
    throw DataError(std::string("evaluate_set: manifest has no ") + split_name(split) +
                    " entries");
  }
  return aggregate(std::move(scores));
}

EvalReport evaluate_set(const MixtureManifest& manifest, const Model<double>& model,
                        Split split) {
  return evaluate_set(
      manifest,
      [&](const std::vector<double>& noisy) { return forward<double>(model, noisy).first; },
      split);
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-8s %5s | %10s %8s %8s | %10s %8s %8s\n", "snr_db",
                "n", "in_sisdr", "in_stoi", "in_lsd", "enh_sisdr", "enh_stoi", "enh_lsd");
  os << line;
  auto emit = [&](const EvalRow& r) {
    std::snprintf(line, sizeof(line), "%-8s %5zu | %10.3f %8.4f %8.3f | %10.3f %8.4f %8.3f\n",
                  snr_label(r).c_str(), r.count, r.input.si_sdr_db, r.input.stoi,
                  r.input.lsd_db, r.enhanced.si_sdr_db, r.enhanced.stoi, r.enhanced.lsd_db);
    os << line;
  };
  for (const auto& r : per_snr) emit(r);
  emit(mean);
  os << "(PESQ and ESTOI are not computed)\n";
  return os.str();
}

std::string EvalReport::to_tsv() const {
  std::ostringstream os;
  os.precision(17);
  os << "# columns=" << kColumnsVersion << "\n";
  os << "snr_db\tcount\tinput_si_sdr_db\tinput_stoi\tinput_lsd_db\t"
        "enhanced_si_sdr_db\tenhanced_stoi\tenhanced_lsd_db\n";
  auto emit = [&](const EvalRow& r) {
    os << snr_label(r) << '\t' << r.count << '\t' << r.input.si_sdr_db << '\t' << r.input.stoi
       << '\t' << r.input.lsd_db << '\t' << r.enhanced.si_sdr_db << '\t' << r.enhanced.stoi
       << '\t' << r.enhanced.lsd_db << '\n';
  };
  for (const auto& r : per_snr) emit(r);
  emit(mean);
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["columns_version"] = kColumnsVersion;
  j["omitted_metrics"] = {"pesq", "estoi"};
  j["per_snr"] = nlohmann::json::array();
  for (const auto& r : per_snr) j["per_snr"].push_back(row_json(r));
  j["mean"] = row_json(mean);
  j["entries"] = nlohmann::json::array();
  for (const auto& e : entries) {
    j["entries"].push_back({{"id", e.id},
                            {"snr_db", e.snr_db},
                            {"input", result_json(e.input)},
                            {"enhanced", result_json(e.enhanced)}});
  }
  return j.dump(2);
}

}  // namespace dronese
