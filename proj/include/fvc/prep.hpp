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

// Corpus preparation: load -> silence removal -> duration plan -> chunks
// (-> augmented variants), and the chunk manifest that describes them.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fvc/audio.hpp"
#include "fvc/core_model.hpp"
#include "fvc/embeddings.hpp"
#include "fvc/error.hpp"
#include "fvc/io.hpp"

namespace fvc {

struct PrepOptions {
  VadParams vad;
  bool augment = false;
  std::vector<double> time_scales = {0.95, 1.05};
  double snr_db = 15.0;
  int noise_variants = 1;
  std::uint64_t seed = 0;
  bool strict = false;
};

struct PreparedChunk {
  RecordingMeta meta;  // chunk-level: recording_id is the chunk id, duration_s set
  AudioSignal audio;
  bool augmented = false;
};

// FNV-1a, used to derive per-chunk noise seeds from chunk ids.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string factor_tag(double f) { return format_double(f); }

inline std::vector<PreparedChunk> prepare_recording(const RecordingMeta& rec,
                                                    const AudioSignal& audio,
                                                    const PrepOptions& opts = {}) {
  auto voiced = remove_silence(audio, opts.vad);
  auto plan = plan_durations(voiced.duration_s());
  auto chunks = split_chunks(voiced, plan, rec.recording_id);
  std::vector<PreparedChunk> out;
  auto make = [&](const std::string& id, AudioSignal a, double dur, bool aug) {
    RecordingMeta m = rec;
    m.recording_id = id;
    m.path = "chunks/" + id + ".wav";
    m.sample_rate_hz = a.sample_rate_hz;
    m.duration_s = dur;
    out.push_back({std::move(m), std::move(a), aug});
  };
  for (auto& c : chunks) {
    auto id = chunk_id(rec.recording_id, c.start_s, c.duration_s);
    if (opts.augment) {
      for (double f : opts.time_scales) {
        auto scaled = augment_time_scale(c.samples, f);
        double dur = scaled.duration_s();
        make(id + "_ts" + factor_tag(f), std::move(scaled), dur, true);
      }
      for (int k = 0; k < opts.noise_variants; ++k) {
        std::string nid = id + "_snr" + factor_tag(opts.snr_db);
        if (opts.noise_variants > 1) nid += "_n" + std::to_string(k);
        make(nid, augment_add_noise(c.samples, opts.snr_db, fnv1a(nid, opts.seed ^ 0x9e3779b97f4a7c15ull)),
             c.duration_s, true);
      }
    }
    make(id, std::move(c.samples), c.duration_s, false);
  }
  return out;
}

struct PrepResult {
  Manifest chunks;            // original chunks, role inherited from the input
  Manifest augmented;         // augmented variants, role embed-train
  std::vector<std::pair<std::string, std::size_t>> counts;  // per recording
  std::vector<std::string> failures;
};

inline std::filesystem::path resolve_path(const std::filesystem::path& base,
                                          const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

// Writes <out_dir>/chunks/*.wav, chunks.csv (+ .meta.json) and, with
// augmentation, augmented.csv. Outputs are staged and moved into place only
// after every recording has been processed. In strict mode any recording
// failure aborts the run with no outputs; otherwise it is skipped.
inline PrepResult prep_corpus(const Manifest& manifest, const std::filesystem::path& manifest_dir,
                              const std::filesystem::path& out_dir, const PrepOptions& opts = {}) {
  namespace fs = std::filesystem;
  if (opts.strict)
    for (const auto& r : manifest.recordings) {
      auto p = resolve_path(manifest_dir, r.path);
      if (!fs::exists(p)) throw IoError("recording '" + r.recording_id + "': missing file " + p.string());
    }

  PrepResult res;
  res.chunks.dataset_name = manifest.dataset_name + "-chunks";
  res.chunks.role = manifest.role;
  res.augmented.dataset_name = manifest.dataset_name + "-augmented";
  res.augmented.role = Role::kEmbedTrain;

  const fs::path staging = out_dir / ".staging";
  fs::remove_all(staging);
  fs::create_directories(staging / "chunks");
  std::vector<std::string> staged;
  try {
    for (const auto& r : manifest.recordings) {
      std::vector<PreparedChunk> chunks;
      try {
        auto audio = load_wav(resolve_path(manifest_dir, r.path));
        if (audio.sample_rate_hz != r.sample_rate_hz)
          throw ValidationError("sample rate " + std::to_string(audio.sample_rate_hz) +
                                " differs from manifest value " + std::to_string(r.sample_rate_hz));
        chunks = prepare_recording(r, audio, opts);
      } catch (const Error& e) {
        if (opts.strict) throw;
        res.failures.push_back(r.recording_id + ": " + e.what());
        continue;
      }
      res.counts.emplace_back(r.recording_id, chunks.size());
      for (auto& c : chunks) {
        write_wav(c.audio, staging / c.meta.path);
        staged.push_back(c.meta.path);
        (c.augmented ? res.augmented : res.chunks).recordings.push_back(std::move(c.meta));
      }
    }
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }

  fs::create_directories(out_dir / "chunks");
  for (const auto& rel : staged) fs::rename(staging / rel, out_dir / rel);
  fs::remove_all(staging);
  write_manifest(res.chunks, out_dir / "chunks.csv");
  if (opts.augment) write_manifest(res.augmented, out_dir / "augmented.csv");
  return res;
}

// Baseline-embeds every manifest row. duration_s comes from the manifest
// when present, otherwise from the decoded audio.
inline EmbeddingSet embed_manifest(const Manifest& manifest,
                                   const std::filesystem::path& manifest_dir) {
  std::vector<EmbeddingRecord> records;
  records.reserve(manifest.recordings.size());
  for (const auto& r : manifest.recordings) {
    auto audio = load_wav(resolve_path(manifest_dir, r.path));
    records.push_back({r.recording_id, r.speaker_id, r.session, r.task,
                       r.duration_s.value_or(audio.duration_s()), baseline_embed(audio)});
  }
  return make_embedding_set(std::move(records), "baseline-48");
}

}  // namespace fvc
