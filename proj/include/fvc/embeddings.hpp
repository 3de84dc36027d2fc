// Copyright (c) 2026 The fvc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Embedding sets, the built-in baseline embedder and enrollment averaging.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <fftw3.h>

#include "fvc/audio.hpp"
#include "fvc/core_model.hpp"
#include "fvc/error.hpp"
#include "fvc/io.hpp"

namespace fvc {

struct EmbeddingSet {
  std::size_t dim = 0;
  std::vector<EmbeddingRecord> records;
  std::string source_tag;

  const EmbeddingRecord* find(const std::string& sample_id) const {
    if (index_.size() != records.size()) rebuild_index();
    auto it = index_.find(sample_id);
    return it == index_.end() ? nullptr : &records[it->second];
  }

 private:
  void rebuild_index() const {
    index_.clear();
    for (std::size_t i = 0; i < records.size(); ++i) index_.emplace(records[i].sample_id, i);
  }
  mutable std::unordered_map<std::string, std::size_t> index_;
};

// Set-level checks: shared dim, unique ids, finite non-zero vectors, positive durations.
inline void validate_embedding_set(const EmbeddingSet& set) {
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    const auto& r = set.records[i];
    std::string ctx = "record " + std::to_string(i + 1) + " ('" + r.sample_id + "')";
    if (r.dim() != set.dim) throw ValidationError(ctx + ": dim mismatch");
    if (!ids.insert(r.sample_id).second) throw ValidationError(ctx + ": duplicate sample_id");
    double norm2 = 0.0;
    for (double v : r.vector) {
      if (!std::isfinite(v)) throw ValidationError(ctx + ": non-finite vector entry");
      norm2 += v * v;
    }
    if (!(norm2 > 0)) throw ValidationError(ctx + ": zero-norm vector");
    if (!(r.duration_s > 0) || !std::isfinite(r.duration_s))
      throw ValidationError(ctx + ": duration_s must be positive");
  }
}

inline EmbeddingSet make_embedding_set(std::vector<EmbeddingRecord> records,
                                       std::string source_tag = {}) {
  EmbeddingSet set;
  set.dim = records.empty() ? 0 : records.front().dim();
  set.records = std::move(records);
  set.source_tag = std::move(source_tag);
  validate_embedding_set(set);
  return set;
}

inline EmbeddingSet ingest(const std::filesystem::path& jsonl_path) {
  auto records = read_embeddings_jsonl(jsonl_path);
  if (records.empty()) throw ValidationError(jsonl_path.string() + ": no embedding records");
  std::string tag;
  auto meta_path = jsonl_path;
  meta_path.replace_extension(".meta.json");
  if (std::filesystem::exists(meta_path)) {
    auto in = open_input(meta_path);
    try {
      tag = nlohmann::json::parse(in).value("source_tag", "");
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(meta_path.string() + ": " + e.what());
    }
  }
  return make_embedding_set(std::move(records), std::move(tag));
}

inline void write_embedding_set(const EmbeddingSet& set, const std::filesystem::path& path) {
  write_embeddings_jsonl(set.records, path);
  if (!set.source_tag.empty()) {
    auto meta_path = path;
    meta_path.replace_extension(".meta.json");
    nlohmann::ordered_json meta;
    meta["source_tag"] = set.source_tag;
    meta["dim"] = set.dim;
    open_output(meta_path) << meta.dump(2) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Baseline embedder: 24 HTK-mel log band energies over 25 ms / 10 ms Hamming
// frames; per-band mean then per-band standard deviation, L2-normalized.

inline constexpr std::size_t kMelBands = 24;
inline constexpr std::size_t kBaselineDim = 2 * kMelBands;
inline constexpr double kMinEmbedSeconds = 0.5;

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Row-major [band][bin] triangular weights over bins 0..nfft/2.
inline std::vector<std::vector<double>> mel_filterbank(std::size_t n_bands, std::size_t nfft,
                                                       int sample_rate_hz) {
  const double nyquist = sample_rate_hz / 2.0;
  const double top = hz_to_mel(nyquist);
  std::vector<double> edges(n_bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_bands + 1));
  const std::size_t n_bins = nfft / 2 + 1;
  std::vector<std::vector<double>> fb(n_bands, std::vector<double>(n_bins, 0.0));
  for (std::size_t m = 0; m < n_bands; ++m) {
    double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      double f = static_cast<double>(k) * sample_rate_hz / static_cast<double>(nfft);
      if (f > lo && f <= mid)
        fb[m][k] = (f - lo) / (mid - lo);
      else if (f > mid && f < hi)
        fb[m][k] = (hi - f) / (hi - mid);
    }
  }
  return fb;
}

// Per-frame log mel band energies, [frame][band].
inline std::vector<std::vector<double>> log_mel_energies(const AudioSignal& signal) {
  auto layout = frame_layout(signal.samples.size(), signal.sample_rate_hz, 25.0, 10.0);
  std::size_t nfft = 1;
  while (nfft < layout.frame_len) nfft <<= 1;
  const std::size_t n_bins = nfft / 2 + 1;
  auto fb = mel_filterbank(kMelBands, nfft, signal.sample_rate_hz);

  // Non-zero bin range of each filter.
  std::vector<std::pair<std::size_t, std::size_t>> support(kMelBands, {0, 0});
  for (std::size_t m = 0; m < kMelBands; ++m) {
    std::size_t first = n_bins, last = 0;
    for (std::size_t k = 0; k < n_bins; ++k)
      if (fb[m][k] != 0.0) {
        first = std::min(first, k);
        last = k + 1;
      }
    if (first < last) support[m] = {first, last};
  }

  std::vector<double> window(layout.frame_len);
  for (std::size_t i = 0; i < window.size(); ++i)
    window[i] = window.size() == 1
                    ? 1.0
                    : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                             static_cast<double>(window.size() - 1));

  std::unique_ptr<double, decltype(&fftw_free)> in(
      static_cast<double*>(fftw_malloc(sizeof(double) * nfft)), &fftw_free);
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> spectrum(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_bins)), &fftw_free);
  std::unique_ptr<fftw_plan_s, decltype(&fftw_destroy_plan)> plan(
      fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in.get(), spectrum.get(), FFTW_ESTIMATE),
      &fftw_destroy_plan);

  std::vector<std::vector<double>> out(layout.count, std::vector<double>(kMelBands));
  std::vector<double> power(n_bins);
  const auto n = signal.samples.size();
  for (std::size_t t = 0; t < layout.count; ++t) {
    std::size_t b = t * layout.hop;
    for (std::size_t i = 0; i < nfft; ++i) {
      std::size_t s = b + i;
      in.get()[i] = (i < layout.frame_len && s < n) ? signal.samples[s] * window[i] : 0.0;
    }
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < n_bins; ++k)
      power[k] = spectrum.get()[k][0] * spectrum.get()[k][0] + spectrum.get()[k][1] * spectrum.get()[k][1];
    for (std::size_t m = 0; m < kMelBands; ++m) {
      double e = 0.0;
      for (std::size_t k = support[m].first; k < support[m].second; ++k) e += fb[m][k] * power[k];
      out[t][m] = std::log(e + 1e-10);
    }
  }
  return out;
}

inline std::vector<double> baseline_embed(const AudioSignal& chunk) {
  if (chunk.duration_s() < kMinEmbedSeconds)
    throw InvalidArgument("baseline_embed: input shorter than 0.5 s");
  auto feats = log_mel_energies(chunk);
  const auto frames = static_cast<double>(feats.size());
  std::vector<double> v(kBaselineDim, 0.0);
  for (const auto& f : feats)
    for (std::size_t m = 0; m < kMelBands; ++m) v[m] += f[m];
  for (std::size_t m = 0; m < kMelBands; ++m) v[m] /= frames;
  for (const auto& f : feats)
    for (std::size_t m = 0; m < kMelBands; ++m) {
      double d = f[m] - v[m];
      v[kMelBands + m] += d * d;
    }
  for (std::size_t m = 0; m < kMelBands; ++m) v[kMelBands + m] = std::sqrt(v[kMelBands + m] / frames);
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (!(norm > 0)) throw NumericError("baseline_embed: zero feature vector");
  for (double& x : v) x /= norm;
  return v;
}

// ---------------------------------------------------------------------------
// Enrollment

struct EnrollmentVector {
  std::string speaker_id;
  std::vector<double> vector;
  int n_samples = 0;
  double total_duration_s = 0.0;
};

using RecordFilter = std::function<bool(const EmbeddingRecord&)>;

inline RecordFilter session_filter(int session) {
  return [session](const EmbeddingRecord& r) { return r.session == session; };
}

// Element-wise mean of the speaker's passing vectors; not re-normalized.
inline EnrollmentVector enroll(const EmbeddingSet& set, const std::string& speaker_id,
                               const RecordFilter& filter = session_filter(1)) {
  EnrollmentVector ev;
  ev.speaker_id = speaker_id;
  ev.vector.assign(set.dim, 0.0);
  for (const auto& r : set.records) {
    if (r.speaker_id != speaker_id || !filter(r)) continue;
    for (std::size_t i = 0; i < set.dim; ++i) ev.vector[i] += r.vector[i];
    ++ev.n_samples;
    ev.total_duration_s += r.duration_s;
  }
  if (ev.n_samples == 0)
    throw ValidationError("enroll: speaker '" + speaker_id + "' has no records passing the filter");
  for (double& x : ev.vector) x /= ev.n_samples;
  return ev;
}

// Enrolls every speaker with at least one passing record, in first-seen order.
inline std::vector<EnrollmentVector> enroll_all(const EmbeddingSet& set,
                                                const RecordFilter& filter = session_filter(1)) {
  std::vector<std::string> speakers;
  std::unordered_set<std::string> seen;
  for (const auto& r : set.records)
    if (filter(r) && seen.insert(r.speaker_id).second) speakers.push_back(r.speaker_id);
  std::vector<EnrollmentVector> out;
  out.reserve(speakers.size());
  for (const auto& s : speakers) out.push_back(enroll(set, s, filter));
  return out;
}

// Interchange form: sample_id "enroll:<speaker>", session 1, task 0.
inline EmbeddingRecord to_record(const EnrollmentVector& ev) {
  return {enrollment_ref(ev.speaker_id), ev.speaker_id, 1, 0, ev.total_duration_s, ev.vector};
}

inline EnrollmentVector from_record(const EmbeddingRecord& r) {
  if (!is_enrollment_ref(r.sample_id))
    throw ValidationError("record '" + r.sample_id + "' is not an enrollment vector");
  return {r.speaker_id, r.vector, 0, r.duration_s};
}

}  // namespace fvc
