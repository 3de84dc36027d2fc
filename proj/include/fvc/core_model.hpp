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

// Corpus and trial data model shared by every stage of the pipeline.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fvc/error.hpp"

namespace fvc {

enum class Role { kEmbedTrain, kCalibration, kEvaluation };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::kEmbedTrain: return "embed-train";
    case Role::kCalibration: return "calibration";
    case Role::kEvaluation: return "evaluation";
  }
  return "";
}

inline Role parse_role(std::string_view s) {
  if (s == "embed-train") return Role::kEmbedTrain;
  if (s == "calibration") return Role::kCalibration;
  if (s == "evaluation") return Role::kEvaluation;
  throw ValidationError("unknown manifest role '" + std::string(s) + "'");
}

enum class Label { kSameOrigin, kDifferentOrigin };

inline std::string_view to_string(Label l) {
  return l == Label::kSameOrigin ? "same-origin" : "different-origin";
}

inline Label parse_label(std::string_view s) {
  if (s == "same-origin") return Label::kSameOrigin;
  if (s == "different-origin") return Label::kDifferentOrigin;
  throw ValidationError("unknown trial label '" + std::string(s) + "'");
}

struct RecordingMeta {
  std::string recording_id;
  std::string speaker_id;
  int session = 1;  // 1, 2 or 3
  int task = 1;     // 1 free dialogue, 2 information exchange, 3 monologue
  std::string path;
  int sample_rate_hz = 16000;
  // Present on chunk-level manifests only.
  std::optional<double> duration_s;

  bool operator==(const RecordingMeta&) const = default;
};

struct Manifest {
  std::string dataset_name;
  Role role = Role::kEvaluation;
  std::vector<RecordingMeta> recordings;

  bool operator==(const Manifest&) const = default;
};

struct EmbeddingRecord {
  std::string sample_id;
  std::string speaker_id;
  int session = 1;
  int task = 1;
  double duration_s = 0.0;
  std::vector<double> vector;

  std::size_t dim() const { return vector.size(); }
  bool operator==(const EmbeddingRecord&) const = default;
};

// known_ref is a sample id, or an enrollment reference ("enroll:<speaker>").
struct Trial {
  std::string known_ref;
  std::string unknown_ref;
  Label label = Label::kDifferentOrigin;

  bool operator==(const Trial&) const = default;
};

struct ScoredTrial {
  Trial trial;
  double score = 0.0;

  bool operator==(const ScoredTrial&) const = default;
};

inline constexpr double kScoreTolerance = 1e-9;

struct Violation {
  std::string recording_id;
  std::string reason;
};

inline std::vector<Violation> validate_manifest(const Manifest& manifest) {
  std::vector<Violation> out;
  std::unordered_map<std::string, int> seen;
  for (const auto& r : manifest.recordings) {
    if (r.recording_id.empty()) out.push_back({r.recording_id, "empty recording_id"});
    if (++seen[r.recording_id] == 2)
      out.push_back({r.recording_id, "duplicate recording_id"});
    if (r.speaker_id.empty()) out.push_back({r.recording_id, "empty speaker_id"});
    if (r.session < 1 || r.session > 3)
      out.push_back({r.recording_id, "session out of range"});
    if (r.task < 1 || r.task > 3) out.push_back({r.recording_id, "task out of range"});
    if (r.sample_rate_hz <= 0)
      out.push_back({r.recording_id, "sample_rate_hz must be positive"});
    if (r.duration_s && !(std::isfinite(*r.duration_s) && *r.duration_s > 0))
      out.push_back({r.recording_id, "duration_s must be positive"});
  }
  return out;
}

// Speaker ids compare as exact, case-sensitive strings.
inline Label label_trial(std::string_view known_speaker, std::string_view unknown_speaker) {
  if (known_speaker.empty() || unknown_speaker.empty())
    throw InvalidArgument("label_trial: empty speaker id");
  return known_speaker == unknown_speaker ? Label::kSameOrigin : Label::kDifferentOrigin;
}

inline constexpr std::string_view kEnrollPrefix = "enroll:";

inline std::string enrollment_ref(std::string_view speaker_id) {
  return std::string(kEnrollPrefix) + std::string(speaker_id);
}

inline bool is_enrollment_ref(std::string_view ref) { return ref.starts_with(kEnrollPrefix); }

}  // namespace fvc
