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

// Seeded synthetic speech corpus for hermetic end-to-end runs. Each speaker
// is a pulse-train source with a speaker-specific pitch, vowel formant set
// and spectral tilt; sessions perturb these slightly and tasks differ in
// background noise (tasks 1 and 2 share a noisier source, task 3 is cleaner).

#include <array>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "fvc/audio.hpp"
#include "fvc/core_model.hpp"
#include "fvc/io.hpp"
#include "fvc/prep.hpp"

namespace fvc::synth {

// Portable generator: splitmix64 with Box-Muller normals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    double u1 = uniform(), u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

struct Speaker {
  std::string id;
  double f0 = 120.0;
  std::array<std::array<double, 3>, 4> vowels{};  // formant triples, Hz
  double extra_formant = 4500.0;  // fixed high resonance
  double tilt = 0.5;
};

struct CorpusOptions {
  int n_speakers = 20;
  int n_calibration = 8;  // the first n_calibration speakers form the calibration split
  double seconds = 56.0;
  int sample_rate_hz = 16000;
  std::uint64_t seed = 1;
};

// Reference vowel formants scaled by a per-speaker vocal-tract factor.
inline constexpr std::array<std::array<double, 3>, 4> kReferenceVowels{{
    {730.0, 1090.0, 2440.0},
    {270.0, 2290.0, 3010.0},
    {300.0, 870.0, 2240.0},
    {530.0, 1840.0, 2480.0},
}};

inline Speaker make_speaker(int index, std::uint64_t seed) {
  Rng rng(seed * 1000003ull + static_cast<std::uint64_t>(index) * 7919ull + 17);
  Speaker s;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "spk%02d", index + 1);
  s.id = buf;
  s.f0 = rng.uniform(85.0, 250.0);
  const double tract = rng.uniform(0.8, 1.25);
  for (std::size_t v = 0; v < s.vowels.size(); ++v)
    for (std::size_t k = 0; k < 3; ++k)
      s.vowels[v][k] = kReferenceVowels[v][k] * tract * (1.0 + 0.06 * rng.normal());
  s.extra_formant = rng.uniform(1200.0, 4500.0);
  s.tilt = rng.uniform(0.2, 0.85);
  return s;
}

namespace detail {

struct Resonator {
  double a1 = 0, a2 = 0, y1 = 0, y2 = 0;
  void tune(double freq, double bw, int sr) {
    double r = std::exp(-std::numbers::pi * bw / sr);
    a1 = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / sr);
    a2 = -r * r;
  }
  double step(double x) {
    double y = x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace detail

inline AudioSignal synthesize(const Speaker& spk, int session, int task, double seconds,
                              int sr, std::uint64_t seed) {
  Rng rng(seed);
  Rng session_rng(fnv1a(spk.id, seed ^ static_cast<std::uint64_t>(session) * 0x51ed27ull));
  const double fscale = 1.0 + 0.015 * session_rng.normal();
  const double f0scale = 1.0 + 0.04 * session_rng.normal();
  const double channel = 0.08 * session_rng.normal();

  const auto n = static_cast<std::size_t>(seconds * sr);
  std::vector<double> speech(n, 0.0);
  std::array<detail::Resonator, 4> res;
  res[3].tune(spk.extra_formant * fscale, 200.0, sr);
  double phase = 0.0, tilt_state = 0.0, chan_state = 0.0;
  const double vib = rng.uniform(0.0, 2.0 * std::numbers::pi);

  std::size_t i = 0, vowel = 0;
  while (i < n) {
    int syllables = 8 + static_cast<int>(rng.uniform() * 7);
    for (int s = 0; s < syllables && i < n; ++s) {
      const auto& v = spk.vowels[vowel++ % spk.vowels.size()];
      for (std::size_t k = 0; k < 3; ++k) {
        double f = v[k] * fscale * (1.0 + 0.03 * rng.normal());
        res[k].tune(f, 60.0 + 0.06 * f, sr);
      }
      const auto len = static_cast<std::size_t>(rng.uniform(0.18, 0.32) * sr);
      const double loud = rng.uniform(0.85, 1.0);
      for (std::size_t j = 0; j < len && i < n; ++j, ++i) {
        double t = static_cast<double>(i) / sr;
        double f0 = spk.f0 * f0scale * (1.0 + 0.06 * std::sin(2.0 * std::numbers::pi * 0.7 * t + vib));
        phase += f0 / sr;
        double x = 0.02 * (rng.uniform() - 0.5);
        if (phase >= 1.0) {
          phase -= 1.0;
          x += 1.0;
        }
        for (auto& r : res) x = r.step(x);
        tilt_state = x + spk.tilt * tilt_state;
        chan_state = tilt_state + channel * chan_state;
        double env = 0.3 + 0.7 * std::sin(std::numbers::pi * (static_cast<double>(j) + 0.5) / len);
        speech[i] = loud * env * chan_state;
      }
    }
    // pause between phrases
    const auto pause = static_cast<std::size_t>(rng.uniform(0.15, 0.35) * sr);
    for (std::size_t j = 0; j < pause && i < n; ++j, ++i) {
      speech[i] = 0.0;
      for (auto& r : res) r.step(0.0);
    }
  }

  double p = 0.0;
  std::size_t voiced = 0;
  for (double x : speech)
    if (x != 0.0) {
      p += x * x;
      ++voiced;
    }
  const double gain = voiced ? 0.1 / std::sqrt(p / static_cast<double>(voiced)) : 0.0;

  // Tasks 1 and 2: lowpass-colored background at ~26 dB SNR; task 3: 35 dB white.
  const double snr_db = task == 3 ? 35.0 : rng.uniform(24.0, 28.0);
  const double noise_rms = 0.1 / std::pow(10.0, snr_db / 20.0);
  AudioSignal out;
  out.sample_rate_hz = sr;
  out.samples.resize(n);
  std::vector<double> noise(n);
  double ns = 0.0, np = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double w = rng.uniform() - 0.5;
    ns = task == 3 ? w : w + 0.9 * ns;
    noise[k] = ns;
    np += ns * ns;
  }
  const double ngain = noise_rms / std::sqrt(np / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k)
    out.samples[k] = std::clamp(gain * speech[k] + ngain * noise[k], -0.99, 0.99);
  return out;
}

// Manifests of the corpus: one recording per speaker x session (1, 2) x task (1..3).
inline std::pair<Manifest, Manifest> corpus_manifests(const CorpusOptions& opts) {
  Manifest cal{"synthetic", Role::kCalibration, {}};
  Manifest eval{"synthetic", Role::kEvaluation, {}};
  for (int s = 0; s < opts.n_speakers; ++s) {
    auto spk = make_speaker(s, opts.seed);
    for (int session = 1; session <= 2; ++session)
      for (int task = 1; task <= 3; ++task) {
        RecordingMeta r;
        r.recording_id = spk.id + "_s" + std::to_string(session) + "_t" + std::to_string(task);
        r.speaker_id = spk.id;
        r.session = session;
        r.task = task;
        r.path = "wav/" + r.recording_id + ".wav";
        r.sample_rate_hz = opts.sample_rate_hz;
        (s < opts.n_calibration ? cal : eval).recordings.push_back(std::move(r));
      }
  }
  return {std::move(cal), std::move(eval)};
}

inline int speaker_index(const std::string& speaker_id) {
  return std::stoi(speaker_id.substr(3)) - 1;
}

inline AudioSignal synthesize_recording(const RecordingMeta& r, const CorpusOptions& opts) {
  auto spk = make_speaker(speaker_index(r.speaker_id), opts.seed);
  return synthesize(spk, r.session, r.task, opts.seconds, opts.sample_rate_hz,
                    fnv1a(r.recording_id, opts.seed));
}

// Writes wav/*.wav plus calibration.csv and evaluation.csv under out_dir.
inline std::pair<Manifest, Manifest> write_corpus(const std::filesystem::path& out_dir,
                                                  const CorpusOptions& opts) {
  auto manifests = corpus_manifests(opts);
  for (const auto* m : {&manifests.first, &manifests.second})
    for (const auto& r : m->recordings) write_wav(synthesize_recording(r, opts), out_dir / r.path);
  write_manifest(manifests.first, out_dir / "calibration.csv");
  write_manifest(manifests.second, out_dir / "evaluation.csv");
  return manifests;
}

}  // namespace fvc::synth
