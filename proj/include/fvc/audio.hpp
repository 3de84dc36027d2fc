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

// Audio preparation: 16-bit PCM WAV I/O, energy-based silence removal,
// duration planning, overlapped chunking and augmentation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fvc/error.hpp"

namespace fvc {

struct AudioSignal {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

struct VadParams {
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  // Relative to the loudest frame of the recording.
  double threshold_db = -35.0;
};

struct Chunk {
  std::string source_recording_id;
  double start_s = 0.0;
  double duration_s = 0.0;
  AudioSignal samples;
};

inline constexpr double kChunkOverlap = 0.1;
inline constexpr int kMinChunkSeconds = 2;
inline constexpr int kMaxChunkSeconds = 10;

// ---------------------------------------------------------------------------
// WAV

namespace wav_detail {

inline std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
inline void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace wav_detail

// Decodes 16-bit PCM (plain or WAVE_FORMAT_EXTENSIBLE). Channels are averaged.
inline AudioSignal decode_wav(std::span<const unsigned char> bytes) {
  using namespace wav_detail;
  if (bytes.size() < 12) throw FormatError("RIFF", "file shorter than RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0) throw FormatError("RIFF", "missing RIFF tag");
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) throw FormatError("WAVE", "missing WAVE tag");

  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    std::uint32_t size = le32(hdr + 4);
    std::size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size())
        throw FormatError("fmt", "truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      std::uint16_t format = le16(f);
      channels = le16(f + 2);
      rate = le32(f + 4);
      bits = le16(f + 14);
      if (format == 0xFFFE) {
        if (size < 40) throw FormatError("fmt", "truncated extensible fmt chunk");
        format = le16(f + 24);  // first two bytes of the sub-format GUID
      }
      if (format != 1)
        throw FormatError("audio_format", "not PCM (format tag " + std::to_string(format) + ")");
      if (bits != 16)
        throw FormatError("bits_per_sample",
                          "unsupported sample width " + std::to_string(bits) + " bits");
      if (channels == 0) throw FormatError("num_channels", "zero channels");
      if (rate == 0) throw FormatError("sample_rate", "zero sample rate");
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("fmt", "data chunk precedes fmt chunk");
      if (body + size > bytes.size())
        throw FormatError("data_size", "data chunk truncated (declared " + std::to_string(size) +
                                           " bytes, " + std::to_string(bytes.size() - body) +
                                           " available)");
      std::size_t frame_bytes = std::size_t(2) * channels;
      std::size_t frames = size / frame_bytes;
      if (frames == 0) throw FormatError("data_size", "no samples");
      AudioSignal sig;
      sig.sample_rate_hz = static_cast<int>(rate);
      sig.samples.resize(frames);
      const unsigned char* d = bytes.data() + body;
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          auto v = static_cast<std::int16_t>(le16(d + i * frame_bytes + 2 * c));
          acc += v / 32768.0;
        }
        sig.samples[i] = acc / channels;
      }
      return sig;
    }
    pos = body + size + (size & 1u);
  }
  throw FormatError(have_fmt ? "data" : "fmt", have_fmt ? "missing data chunk" : "missing fmt chunk");
}

inline AudioSignal load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(e.field(), path.string() + ": " + e.what());
  }
}

inline std::int16_t quantize_pcm16(double x) {
  double v = std::round(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
}

inline std::string encode_wav(const AudioSignal& sig, int channels = 1) {
  using namespace wav_detail;
  auto data_bytes = static_cast<std::uint32_t>(sig.samples.size() * 2 * channels);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, static_cast<std::uint16_t>(channels));
  put32(out, static_cast<std::uint32_t>(sig.sample_rate_hz));
  put32(out, static_cast<std::uint32_t>(sig.sample_rate_hz * 2 * channels));
  put16(out, static_cast<std::uint16_t>(2 * channels));
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (double x : sig.samples) {
    auto q = static_cast<std::uint16_t>(quantize_pcm16(x));
    for (int c = 0; c < channels; ++c) put16(out, q);
  }
  return out;
}

inline void write_wav(const AudioSignal& sig, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  auto bytes = encode_wav(sig);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Silence removal

struct FrameLayout {
  std::size_t frame_len = 0;
  std::size_t hop = 0;
  std::size_t count = 0;
};

inline FrameLayout frame_layout(std::size_t n_samples, int sample_rate_hz, double frame_ms,
                                double hop_ms) {
  if (!(hop_ms > 0) || frame_ms < hop_ms)
    throw InvalidArgument("frame parameters require frame_ms >= hop_ms > 0");
  FrameLayout f;
  f.frame_len = std::max<std::size_t>(1, std::lround(frame_ms * sample_rate_hz / 1000.0));
  f.hop = std::max<std::size_t>(1, std::lround(hop_ms * sample_rate_hz / 1000.0));
  f.count = n_samples <= f.frame_len ? 1 : 1 + (n_samples - f.frame_len) / f.hop;
  return f;
}

// Frame energies in dB (10 log10 of mean square), one per frame.
inline std::vector<double> frame_energies_db(const AudioSignal& signal, const FrameLayout& f) {
  std::vector<double> db(f.count);
  const auto n = signal.samples.size();
  for (std::size_t k = 0; k < f.count; ++k) {
    std::size_t b = k * f.hop, e = std::min(n, b + f.frame_len);
    double acc = 0.0;
    for (std::size_t i = b; i < e; ++i) acc += signal.samples[i] * signal.samples[i];
    double ms = acc / static_cast<double>(e - b);
    db[k] = ms > 0 ? 10.0 * std::log10(ms) : -std::numeric_limits<double>::infinity();
  }
  return db;
}

// Keeps, in order, the hop-length segment of every frame whose energy exceeds
// (peak frame energy + threshold_db). The final frame contributes its whole
// span, so an all-voiced input loses at most a partial trailing frame.
inline AudioSignal remove_silence(const AudioSignal& signal, const VadParams& params = {}) {
  if (signal.samples.empty()) throw InvalidArgument("remove_silence: empty signal");
  auto f = frame_layout(signal.samples.size(), signal.sample_rate_hz, params.frame_ms,
                        params.hop_ms);
  auto db = frame_energies_db(signal, f);
  double peak = *std::max_element(db.begin(), db.end());
  if (!std::isfinite(peak)) throw EmptyVoicedError("remove_silence: signal is digital silence");
  double threshold = peak + params.threshold_db;

  AudioSignal out;
  out.sample_rate_hz = signal.sample_rate_hz;
  const auto n = signal.samples.size();
  for (std::size_t k = 0; k < f.count; ++k) {
    if (!(db[k] > threshold)) continue;
    std::size_t b = k * f.hop;
    std::size_t e = (k + 1 == f.count) ? std::min(n, b + f.frame_len) : std::min(n, b + f.hop);
    out.samples.insert(out.samples.end(), signal.samples.begin() + b, signal.samples.begin() + e);
  }
  if (out.samples.empty()) throw EmptyVoicedError("remove_silence: no frame above threshold");
  return out;
}

// ---------------------------------------------------------------------------
// Chunking

// Cycles 2, 3, ..., 10, 2, ... and stops before the first chunk whose end
// (each start advancing by 90% of the previous duration) passes the end.
inline std::vector<double> plan_durations(double total_voiced_s) {
  if (!(total_voiced_s >= kMinChunkSeconds))
    throw InvalidArgument("plan_durations: voiced length " + std::to_string(total_voiced_s) +
                          " s is shorter than " + std::to_string(kMinChunkSeconds) + " s");
  constexpr double eps = 1e-9;
  std::vector<double> plan;
  double start = 0.0;
  int next = kMinChunkSeconds;
  while (true) {
    double d = next;
    if (start + d > total_voiced_s + eps) break;
    plan.push_back(d);
    start += (1.0 - kChunkOverlap) * d;
    next = next == kMaxChunkSeconds ? kMinChunkSeconds : next + 1;
  }
  return plan;
}

inline std::vector<Chunk> split_chunks(const AudioSignal& signal, std::span<const double> plan,
                                       const std::string& recording_id = {}) {
  if (plan.empty()) throw InvalidArgument("split_chunks: empty plan");
  std::vector<Chunk> out;
  const auto sr = static_cast<double>(signal.sample_rate_hz);
  double start = 0.0;
  for (double d : plan) {
    auto b = static_cast<std::size_t>(std::llround(start * sr));
    auto len = static_cast<std::size_t>(std::llround(d * sr));
    if (b + len > signal.samples.size()) break;
    Chunk c;
    c.source_recording_id = recording_id;
    c.start_s = start;
    c.duration_s = d;
    c.samples.sample_rate_hz = signal.sample_rate_hz;
    c.samples.samples.assign(signal.samples.begin() + b, signal.samples.begin() + b + len);
    out.push_back(std::move(c));
    start += (1.0 - kChunkOverlap) * d;
  }
  return out;
}

// `<recording_id>_<start_ms>_<dur_ms>`
inline std::string chunk_id(const std::string& recording_id, double start_s, double duration_s) {
  return recording_id + "_" + std::to_string(std::llround(start_s * 1000.0)) + "_" +
         std::to_string(std::llround(duration_s * 1000.0));
}

// ---------------------------------------------------------------------------
// Augmentation

// Output holds floor(factor * N) samples (with a 1e-9 guard against binary
// representation error); resampled by linear interpolation, so pitch shifts.
inline AudioSignal augment_time_scale(const AudioSignal& signal, double factor) {
  if (!(factor > 0) || !std::isfinite(factor))
    throw InvalidArgument("augment_time_scale: factor must be positive");
  const auto n = signal.samples.size();
  auto m = static_cast<std::size_t>(std::floor(factor * static_cast<double>(n) + 1e-9));
  AudioSignal out;
  out.sample_rate_hz = signal.sample_rate_hz;
  out.samples.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    double x = static_cast<double>(j) / factor;
    auto i = static_cast<std::size_t>(x);
    if (i + 1 >= n) {
      out.samples[j] = signal.samples[n - 1];
      continue;
    }
    double frac = x - static_cast<double>(i);
    out.samples[j] = signal.samples[i] + frac * (signal.samples[i + 1] - signal.samples[i]);
  }
  return out;
}

inline double signal_power(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}

// Zero-mean uniform white noise scaled to exactly the requested SNR before
// clipping to [-1, 1]. The draw depends only on the seed.
inline AudioSignal augment_add_noise(const AudioSignal& signal, double snr_db,
                                     std::uint64_t seed) {
  double ps = signal_power(signal.samples);
  if (!(ps > 0)) throw InvalidArgument("augment_add_noise: zero-power signal, SNR undefined");
  std::mt19937_64 rng(seed);
  std::vector<double> noise(signal.samples.size());
  double mean = 0.0;
  for (auto& v : noise) {
    // 53-bit mantissa mapping; portable unlike uniform_real_distribution.
    v = 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
    mean += v;
  }
  mean /= static_cast<double>(noise.size());
  for (auto& v : noise) v -= mean;
  double pn = signal_power(noise);
  double target = ps / std::pow(10.0, snr_db / 10.0);
  double gain = pn > 0 ? std::sqrt(target / pn) : 0.0;
  AudioSignal out = signal;
  for (std::size_t i = 0; i < noise.size(); ++i)
    out.samples[i] = std::clamp(out.samples[i] + gain * noise[i], -1.0, 1.0);
  return out;
}

}  // namespace fvc
