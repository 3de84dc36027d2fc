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

// Interchange formats: manifest CSV + sidecar JSON, embeddings JSONL,
// trials/scores CSV. All text is UTF-8 with LF line endings.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fvc/core_model.hpp"
#include "fvc/error.hpp"

namespace fvc {

namespace io_detail {

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace io_detail

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::string_view context) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ValidationError(std::string(context) + ": not a number '" + std::string(s) + "'");
  return v;
}

inline int parse_int(std::string_view s, std::string_view context) {
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ValidationError(std::string(context) + ": not an integer '" + std::string(s) + "'");
  return v;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

inline void check_csv_field(std::string_view field, std::string_view what) {
  if (field.find_first_of(",\n\r\"") != std::string_view::npos)
    throw ValidationError(std::string(what) + " '" + std::string(field) +
                          "' contains a character not allowed in CSV fields");
}

// Reads a header-checked CSV. Returns data rows (header excluded); each row is
// checked for the header's column count. `line_no` for row i is i + 2.
inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                                      std::string_view expected_header,
                                                      std::string_view optional_extra = {}) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": missing header");
  line = io_detail::strip_cr(line);
  std::size_t ncols = io_detail::split(expected_header).size();
  if (line != expected_header) {
    if (optional_extra.empty() ||
        line != std::string(expected_header) + "," + std::string(optional_extra))
      throw ValidationError(path.string() + ": unexpected header '" + line + "'");
    ++ncols;
  }
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = io_detail::strip_cr(line);
    if (line.empty()) continue;
    auto fields = io_detail::split(line);
    if (fields.size() != ncols)
      throw ValidationError(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                            std::to_string(ncols) + " fields, got " +
                            std::to_string(fields.size()));
    rows.emplace_back(fields.begin(), fields.end());
  }
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return rows;
}

// ---------------------------------------------------------------------------
// Manifest

inline constexpr std::string_view kManifestHeader =
    "recording_id,speaker_id,session,task,path,sample_rate_hz";

inline std::filesystem::path manifest_meta_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

// Session/task range problems are not rejected here; validate_manifest reports them.
inline Manifest read_manifest(const std::filesystem::path& csv_path) {
  Manifest m;
  {
    auto in = open_input(manifest_meta_path(csv_path));
    nlohmann::json meta;
    try {
      in >> meta;
      m.dataset_name = meta.at("dataset_name").get<std::string>();
      m.role = parse_role(meta.at("role").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(manifest_meta_path(csv_path).string() + ": " + e.what());
    }
  }
  auto rows = read_csv(csv_path, kManifestHeader, "duration_s");
  std::size_t line_no = 1;
  for (const auto& f : rows) {
    ++line_no;
    std::string ctx = csv_path.string() + ": line " + std::to_string(line_no);
    RecordingMeta r;
    r.recording_id = f[0];
    r.speaker_id = f[1];
    r.session = parse_int(f[2], ctx);
    r.task = parse_int(f[3], ctx);
    r.path = f[4];
    r.sample_rate_hz = parse_int(f[5], ctx);
    if (f.size() > 6) r.duration_s = parse_double(f[6], ctx);
    m.recordings.push_back(std::move(r));
  }
  return m;
}

inline void write_manifest(const Manifest& m, const std::filesystem::path& csv_path) {
  bool with_duration = !m.recordings.empty();
  for (const auto& r : m.recordings) with_duration = with_duration && r.duration_s.has_value();
  std::ostringstream os;
  os << kManifestHeader << (with_duration ? ",duration_s" : "") << '\n';
  for (const auto& r : m.recordings) {
    check_csv_field(r.recording_id, "recording_id");
    check_csv_field(r.speaker_id, "speaker_id");
    check_csv_field(r.path, "path");
    os << r.recording_id << ',' << r.speaker_id << ',' << r.session << ',' << r.task << ','
       << r.path << ',' << r.sample_rate_hz;
    if (with_duration) os << ',' << format_double(*r.duration_s);
    os << '\n';
  }
  open_output(csv_path) << os.str();
  nlohmann::ordered_json meta;
  meta["dataset_name"] = m.dataset_name;
  meta["role"] = std::string(to_string(m.role));
  open_output(manifest_meta_path(csv_path)) << meta.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Embeddings JSONL

inline nlohmann::ordered_json to_json(const EmbeddingRecord& r) {
  nlohmann::ordered_json j;
  j["sample_id"] = r.sample_id;
  j["speaker_id"] = r.speaker_id;
  j["session"] = r.session;
  j["task"] = r.task;
  j["duration_s"] = r.duration_s;
  j["dim"] = r.vector.size();
  j["vector"] = r.vector;
  return j;
}

inline EmbeddingRecord parse_embedding_line(std::string_view line, std::size_t line_no) {
  std::string ctx = "line " + std::to_string(line_no);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(ctx + ": parse error: " + e.what());
  }
  EmbeddingRecord r;
  try {
    r.sample_id = j.at("sample_id").get<std::string>();
    r.speaker_id = j.at("speaker_id").get<std::string>();
    r.session = j.at("session").get<int>();
    r.task = j.at("task").get<int>();
    r.duration_s = j.at("duration_s").get<double>();
    auto dim = j.at("dim").get<long long>();
    const auto& vec = j.at("vector");
    if (!vec.is_array()) throw ValidationError(ctx + ": vector is not an array");
    r.vector.reserve(vec.size());
    for (const auto& v : vec) {
      if (!v.is_number()) throw ValidationError(ctx + ": non-numeric vector entry");
      r.vector.push_back(v.get<double>());
    }
    if (dim <= 0 || static_cast<std::size_t>(dim) != r.vector.size())
      throw ValidationError(ctx + ": dim field does not match vector length");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(ctx + ": " + e.what());
  }
  return r;
}

// Line-level parsing only; the dim of the first record is enforced on the rest.
inline std::vector<EmbeddingRecord> read_embeddings_jsonl(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<EmbeddingRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = io_detail::strip_cr(line);
    if (line.empty()) continue;
    auto r = parse_embedding_line(line, line_no);
    if (!out.empty() && r.dim() != out.front().dim())
      throw ValidationError("line " + std::to_string(line_no) + ": dim mismatch (expected " +
                            std::to_string(out.front().dim()) + ", got " +
                            std::to_string(r.dim()) + ")");
    out.push_back(std::move(r));
  }
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return out;
}

inline void write_embeddings_jsonl(const std::vector<EmbeddingRecord>& records,
                                   const std::filesystem::path& path) {
  std::ostringstream os;
  for (const auto& r : records) os << to_json(r).dump() << '\n';
  open_output(path) << os.str();
}

// ---------------------------------------------------------------------------
// Trials and scores

inline constexpr std::string_view kTrialsHeader = "known_ref,unknown_ref,label";
inline constexpr std::string_view kScoresHeader = "known_ref,unknown_ref,label,score";

inline std::vector<Trial> read_trials(const std::filesystem::path& path) {
  std::vector<Trial> out;
  std::size_t line_no = 1;
  for (const auto& f : read_csv(path, kTrialsHeader)) {
    ++line_no;
    try {
      out.push_back({f[0], f[1], parse_label(f[2])});
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ": line " + std::to_string(line_no) + ": " +
                            e.what());
    }
  }
  return out;
}

inline void write_trials(const std::vector<Trial>& trials, const std::filesystem::path& path) {
  std::ostringstream os;
  os << kTrialsHeader << '\n';
  for (const auto& t : trials) {
    check_csv_field(t.known_ref, "known_ref");
    check_csv_field(t.unknown_ref, "unknown_ref");
    os << t.known_ref << ',' << t.unknown_ref << ',' << to_string(t.label) << '\n';
  }
  open_output(path) << os.str();
}

inline std::vector<ScoredTrial> read_scores(const std::filesystem::path& path) {
  std::vector<ScoredTrial> out;
  std::size_t line_no = 1;
  for (const auto& f : read_csv(path, kScoresHeader)) {
    ++line_no;
    std::string ctx = path.string() + ": line " + std::to_string(line_no);
    ScoredTrial s;
    try {
      s.trial = {f[0], f[1], parse_label(f[2])};
    } catch (const ValidationError& e) {
      throw ValidationError(ctx + ": " + e.what());
    }
    s.score = parse_double(f[3], ctx);
    if (!std::isfinite(s.score) || std::abs(s.score) > 1.0 + kScoreTolerance)
      throw ValidationError(ctx + ": score outside [-1, 1]");
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_scores(const std::vector<ScoredTrial>& scored,
                         const std::filesystem::path& path) {
  std::ostringstream os;
  os << kScoresHeader << '\n';
  for (const auto& s : scored) {
    check_csv_field(s.trial.known_ref, "known_ref");
    check_csv_field(s.trial.unknown_ref, "unknown_ref");
    os << s.trial.known_ref << ',' << s.trial.unknown_ref << ',' << to_string(s.trial.label)
       << ',' << format_double(s.score) << '\n';
  }
  open_output(path) << os.str();
}

}  // namespace fvc
