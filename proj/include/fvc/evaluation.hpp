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

// Scenario orchestration: trial generation (pairwise or enrollment),
// calibration/evaluation split discipline, global metrics and breakdown
// matrices by sample duration and speech task.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "fvc/audio.hpp"
#include "fvc/core_model.hpp"
#include "fvc/embeddings.hpp"
#include "fvc/error.hpp"
#include "fvc/io.hpp"
#include "fvc/metrics.hpp"
#include "fvc/scoring.hpp"

namespace fvc {

enum class TrialMode { kPairwise, kEnrollment };
// Cross-session: known side from session 1, unknown side from session 2.
// All-session: every ordered pair of distinct samples, any session.
enum class PairScope { kCrossSession, kAllSession };
enum class Axis { kDuration, kTask };

inline std::string_view to_string(TrialMode m) {
  return m == TrialMode::kPairwise ? "pairwise" : "enrollment";
}
inline TrialMode parse_trial_mode(std::string_view s) {
  if (s == "pairwise") return TrialMode::kPairwise;
  if (s == "enrollment") return TrialMode::kEnrollment;
  throw ValidationError("unknown mode '" + std::string(s) + "'");
}
inline std::string_view to_string(PairScope p) {
  return p == PairScope::kCrossSession ? "cross-session" : "all-session";
}
inline PairScope parse_pair_scope(std::string_view s) {
  if (s == "cross-session") return PairScope::kCrossSession;
  if (s == "all-session") return PairScope::kAllSession;
  throw ValidationError("unknown pair scope '" + std::string(s) + "'");
}
inline std::string_view to_string(Axis a) { return a == Axis::kDuration ? "duration" : "task"; }
inline Axis parse_axis(std::string_view s) {
  if (s == "duration") return Axis::kDuration;
  if (s == "task") return Axis::kTask;
  throw InvalidArgument("unknown breakdown axis '" + std::string(s) + "'");
}

struct TrialSet {
  std::vector<Trial> trials;
  std::vector<EnrollmentVector> enrollments;
  std::vector<std::string> exclusions;
};

namespace eval_detail {

// Manifest samples resolved to their embedding records, in manifest order.
inline std::vector<const EmbeddingRecord*> resolve_samples(const Manifest& manifest,
                                                           const EmbeddingSet& embeddings) {
  std::vector<const EmbeddingRecord*> out;
  std::vector<std::string> missing;
  for (const auto& r : manifest.recordings) {
    const auto* rec = embeddings.find(r.recording_id);
    if (!rec) {
      missing.push_back(r.recording_id);
      continue;
    }
    if (rec->speaker_id != r.speaker_id || rec->session != r.session)
      throw ValidationError("sample '" + r.recording_id +
                            "': manifest and embedding metadata disagree");
    out.push_back(rec);
  }
  if (!missing.empty()) {
    std::string msg = "missing embeddings for " + std::to_string(missing.size()) + " samples:";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg);
  }
  return out;
}

}  // namespace eval_detail

// Pairwise mode pairs samples directly; enrollment mode averages each
// speaker's session-1 samples and compares the average with every session-2
// sample. Session-3 samples only take part in all-session pairwise trials.
inline TrialSet generate_trials(const Manifest& manifest, const EmbeddingSet& embeddings,
                                TrialMode mode, PairScope scope = PairScope::kCrossSession) {
  auto samples = eval_detail::resolve_samples(manifest, embeddings);
  TrialSet out;

  if (mode == TrialMode::kPairwise && scope == PairScope::kAllSession) {
    for (const auto* a : samples)
      for (const auto* b : samples)
        if (a != b)
          out.trials.push_back(
              {a->sample_id, b->sample_id, label_trial(a->speaker_id, b->speaker_id)});
    return out;
  }

  std::vector<std::string> speakers;
  std::unordered_map<std::string, std::pair<int, int>> per_session;
  for (const auto* s : samples) {
    auto [it, fresh] = per_session.try_emplace(s->speaker_id, 0, 0);
    if (fresh) speakers.push_back(s->speaker_id);
    if (s->session == 1) ++it->second.first;
    if (s->session == 2) ++it->second.second;
  }
  std::unordered_set<std::string> excluded;
  for (const auto& spk : speakers) {
    auto [s1, s2] = per_session[spk];
    if (s1 == 0 || s2 == 0) {
      excluded.insert(spk);
      out.exclusions.push_back("speaker " + spk + ": no session-" + (s1 == 0 ? "1" : "2") +
                               " samples");
    }
  }
  std::vector<const EmbeddingRecord*> known, unknown;
  for (const auto* s : samples) {
    if (excluded.contains(s->speaker_id)) continue;
    if (s->session == 1) known.push_back(s);
    if (s->session == 2) unknown.push_back(s);
  }

  if (mode == TrialMode::kPairwise) {
    out.trials.reserve(known.size() * unknown.size());
    for (const auto* k : known)
      for (const auto* u : unknown)
        out.trials.push_back({k->sample_id, u->sample_id, label_trial(k->speaker_id, u->speaker_id)});
    return out;
  }

  std::vector<EmbeddingRecord> known_records;
  for (const auto* k : known) known_records.push_back(*k);
  EmbeddingSet known_set;
  known_set.dim = embeddings.dim;
  known_set.records = std::move(known_records);
  out.enrollments = enroll_all(known_set, session_filter(1));
  for (const auto& e : out.enrollments)
    for (const auto* u : unknown)
      out.trials.push_back(
          {enrollment_ref(e.speaker_id), u->sample_id, label_trial(e.speaker_id, u->speaker_id)});
  return out;
}

// ---------------------------------------------------------------------------
// Breakdown matrices

struct CellMetrics {
  int n_so = 0;
  int n_do = 0;
  // Absent when the cell holds fewer trials than the configured minimums.
  std::optional<double> cllr_min;
  std::optional<double> eer;

  bool populated() const { return cllr_min.has_value(); }
};

struct BreakdownMatrix {
  Axis axis = Axis::kDuration;
  std::vector<std::string> row_keys;
  std::vector<std::string> col_keys;
  std::vector<std::vector<CellMetrics>> cells;  // [row][col]
  int trials_without_metadata = 0;
};

struct CellMinimums {
  int same = 5;
  int different = 20;
};

struct SampleKeys {
  int duration = 0;  // rounded chunk duration in seconds
  int task = 0;
};

// Metadata lookup for breakdowns: sample id -> keys. Enrollment references
// carry no single duration/task and always map to the "enrolled" row.
using MetadataIndex = std::unordered_map<std::string, SampleKeys>;

inline MetadataIndex metadata_index(const EmbeddingSet& set) {
  MetadataIndex idx;
  for (const auto& r : set.records)
    idx.emplace(r.sample_id, SampleKeys{static_cast<int>(std::lround(r.duration_s)), r.task});
  return idx;
}

inline BreakdownMatrix breakdown(std::span<const ScoredTrial> scored, const MetadataIndex& meta,
                                 Axis axis, TrialMode mode, CellMinimums mins = {}) {
  const int lo = axis == Axis::kDuration ? kMinChunkSeconds : 1;
  const int hi = axis == Axis::kDuration ? kMaxChunkSeconds : 3;
  const auto width = static_cast<std::size_t>(hi - lo + 1);
  BreakdownMatrix m;
  m.axis = axis;
  for (int k = lo; k <= hi; ++k) m.col_keys.push_back(std::to_string(k));
  if (mode == TrialMode::kEnrollment)
    m.row_keys = {"enrolled"};
  else
    m.row_keys = m.col_keys;

  auto key_of = [&](const std::string& ref) -> std::optional<std::size_t> {
    auto it = meta.find(ref);
    if (it == meta.end()) return std::nullopt;
    int k = axis == Axis::kDuration ? it->second.duration : it->second.task;
    if (k < lo || k > hi) return std::nullopt;
    return static_cast<std::size_t>(k - lo);
  };

  std::vector<std::vector<std::vector<std::size_t>>> members(
      m.row_keys.size(), std::vector<std::vector<std::size_t>>(width));
  for (std::size_t i = 0; i < scored.size(); ++i) {
    const auto& t = scored[i].trial;
    std::optional<std::size_t> r;
    if (mode == TrialMode::kEnrollment)
      r = is_enrollment_ref(t.known_ref) ? std::optional<std::size_t>(0) : std::nullopt;
    else
      r = key_of(t.known_ref);
    auto c = key_of(t.unknown_ref);
    if (!r || !c) {
      ++m.trials_without_metadata;
      continue;
    }
    members[*r][*c].push_back(i);
  }

  m.cells.assign(m.row_keys.size(), std::vector<CellMetrics>(width));
  for (std::size_t r = 0; r < m.row_keys.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) {
      auto& cell = m.cells[r][c];
      std::vector<double> s;
      std::vector<Label> l;
      for (auto i : members[r][c]) {
        s.push_back(scored[i].score);
        l.push_back(scored[i].trial.label);
        (scored[i].trial.label == Label::kSameOrigin ? cell.n_so : cell.n_do)++;
      }
      if (cell.n_so >= std::max(1, mins.same) && cell.n_do >= std::max(1, mins.different)) {
        cell.cllr_min = cllr_min(s, l);
        cell.eer = eer(s, l);
      }
    }
  return m;
}

inline nlohmann::ordered_json to_json(const BreakdownMatrix& m) {
  nlohmann::ordered_json j;
  j["axis"] = std::string(to_string(m.axis));
  j["rows"] = m.row_keys;
  j["cols"] = m.col_keys;
  auto cells = nlohmann::ordered_json::array();
  for (const auto& row : m.cells) {
    auto jr = nlohmann::ordered_json::array();
    for (const auto& c : row) {
      nlohmann::ordered_json jc;
      jc["n_so"] = c.n_so;
      jc["n_do"] = c.n_do;
      jc["cllr_min"] = c.cllr_min ? nlohmann::ordered_json(*c.cllr_min) : nlohmann::ordered_json(nullptr);
      jc["eer"] = c.eer ? nlohmann::ordered_json(*c.eer) : nlohmann::ordered_json(nullptr);
      jr.push_back(std::move(jc));
    }
    cells.push_back(std::move(jr));
  }
  j["cells"] = std::move(cells);
  j["trials_without_metadata"] = m.trials_without_metadata;
  return j;
}

// One CSV per metric; absent cells are left empty.
inline void write_matrix_csv(const BreakdownMatrix& m, bool eer_metric,
                             const std::filesystem::path& path) {
  std::ostringstream os;
  os << "known\\unknown";
  for (const auto& c : m.col_keys) os << ',' << c;
  os << '\n';
  for (std::size_t r = 0; r < m.row_keys.size(); ++r) {
    os << m.row_keys[r];
    for (const auto& cell : m.cells[r]) {
      os << ',';
      const auto& v = eer_metric ? cell.eer : cell.cllr_min;
      if (v) os << format_double(*v);
    }
    os << '\n';
  }
  open_output(path) << os.str();
}

// ---------------------------------------------------------------------------
// Pipeline

struct ScenarioConfig {
  TrialMode mode = TrialMode::kPairwise;
  std::filesystem::path calibration_manifest;
  std::filesystem::path evaluation_manifest;
  std::vector<std::filesystem::path> embeddings;
  std::set<Axis> breakdowns = {Axis::kDuration, Axis::kTask};
  CellMinimums min_cell;
  CalibrationConfig calibration;
  // Pairwise calibration trials; enrollment mode always calibrates on
  // enrollment-vs-session-2 trials of the calibration split.
  PairScope calibration_scope = PairScope::kAllSession;
  double tippet_step = 0.01;
  std::filesystem::path output_dir = "out";
};

struct GlobalMetrics {
  double cllr = 0.0;
  double cllr_min = 0.0;
  double cllr_cal = 0.0;
  double eer = 0.0;
  int n_so = 0;
  int n_do = 0;
};

struct EvaluationReport {
  TrialMode mode = TrialMode::kPairwise;
  GlobalMetrics global;
  CalibrationModel calibration;
  std::size_t calibration_trials = 0;
  TippetCurve tippet;
  std::vector<BreakdownMatrix> matrices;
  std::vector<std::string> exclusions;
  std::vector<std::string> warnings;
  std::vector<ScoredTrial> scores;
};

inline LabeledLogLRs calibrated_log_lrs(std::span<const ScoredTrial> scored,
                                        const CalibrationModel& model, double clip) {
  LabeledLogLRs lrs;
  for (const auto& t : scored)
    (t.trial.label == Label::kSameOrigin ? lrs.same : lrs.different)
        .push_back(calibrated_log10_lr(model, t.score, clip));
  return lrs;
}

// Global metrics of calibrated scores: Cllr on calibrated LRs, Cllr_min by
// PAV on raw scores, Cllr_cal = Cllr - Cllr_min, EER on raw scores.
inline GlobalMetrics global_metrics(std::span<const ScoredTrial> scored,
                                    const CalibrationModel& model, double clip) {
  GlobalMetrics g;
  auto lrs = calibrated_log_lrs(scored, model, clip);
  g.n_so = static_cast<int>(lrs.same.size());
  g.n_do = static_cast<int>(lrs.different.size());
  g.cllr = cllr(lrs);
  g.cllr_min = cllr_min(scored);
  g.cllr_cal = g.cllr - g.cllr_min;
  g.eer = eer(scored);
  return g;
}

inline std::set<std::string> speakers_of(const Manifest& m) {
  std::set<std::string> s;
  for (const auto& r : m.recordings) s.insert(r.speaker_id);
  return s;
}

inline void require_valid(const Manifest& m, const std::string& name) {
  auto v = validate_manifest(m);
  if (v.empty()) return;
  std::string msg = name + ": " + std::to_string(v.size()) + " manifest violation(s):";
  for (const auto& x : v) msg += " [" + x.recording_id + ": " + x.reason + "]";
  throw ValidationError(msg);
}

inline EmbeddingSet load_embeddings(std::span<const std::filesystem::path> paths) {
  if (paths.empty()) throw ValidationError("no embedding files given");
  std::vector<EmbeddingRecord> all;
  std::string tag;
  for (const auto& p : paths) {
    auto set = ingest(p);
    if (!all.empty() && set.dim != all.front().dim())
      throw ValidationError(p.string() + ": dim " + std::to_string(set.dim) +
                            " differs from earlier embedding files");
    if (!set.source_tag.empty()) tag = tag.empty() ? set.source_tag : tag + "+" + set.source_tag;
    for (auto& r : set.records) all.push_back(std::move(r));
  }
  return make_embedding_set(std::move(all), tag);
}

inline nlohmann::ordered_json to_json(const GlobalMetrics& g) {
  nlohmann::ordered_json j;
  j["cllr"] = g.cllr;
  j["cllr_min"] = g.cllr_min;
  j["cllr_cal"] = g.cllr_cal;
  j["eer"] = g.eer;
  j["n_so"] = g.n_so;
  j["n_do"] = g.n_do;
  return j;
}

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Writes calibration.json, trials.csv, scores.csv, tippet.csv,
// matrix_<axis>_{cllr_min,eer}.csv and report.json into config.output_dir.
// Only report.json's meta.timestamp varies between identical runs.
inline EvaluationReport run_pipeline(const ScenarioConfig& config) {
  auto cal_manifest = read_manifest(config.calibration_manifest);
  auto eval_manifest = read_manifest(config.evaluation_manifest);
  require_valid(cal_manifest, config.calibration_manifest.string());
  require_valid(eval_manifest, config.evaluation_manifest.string());
  if (cal_manifest.role != Role::kCalibration)
    throw ValidationError(config.calibration_manifest.string() + ": role is " +
                          std::string(to_string(cal_manifest.role)) + ", expected calibration");
  if (eval_manifest.role != Role::kEvaluation)
    throw ValidationError(config.evaluation_manifest.string() + ": role is " +
                          std::string(to_string(eval_manifest.role)) + ", expected evaluation");
  {
    auto a = speakers_of(cal_manifest), b = speakers_of(eval_manifest);
    std::vector<std::string> overlap;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(overlap));
    if (!overlap.empty()) {
      std::string msg = "calibration and evaluation splits share speakers:";
      for (const auto& s : overlap) msg += " " + s;
      throw ValidationError(msg);
    }
  }
  auto embeddings = load_embeddings(config.embeddings);

  EvaluationReport rep;
  rep.mode = config.mode;

  auto cal_trials = generate_trials(cal_manifest, embeddings, config.mode,
                                    config.mode == TrialMode::kPairwise
                                        ? config.calibration_scope
                                        : PairScope::kCrossSession);
  auto cal_scored = score_trials(cal_trials.trials, embeddings, cal_trials.enrollments);
  rep.calibration_trials = cal_scored.size();
  for (const auto& e : cal_trials.exclusions) rep.exclusions.push_back("calibration: " + e);
  rep.calibration = fit_calibration(cal_scored, config.calibration);
  if (!(rep.calibration.weight > 0))
    rep.warnings.push_back("calibration weight is not positive; scores may be inverted");

  auto eval_trials = generate_trials(eval_manifest, embeddings, config.mode);
  for (const auto& e : eval_trials.exclusions) rep.exclusions.push_back("evaluation: " + e);
  if (eval_trials.trials.empty()) throw ValidationError("evaluation split yields no trials");
  rep.scores = score_trials(eval_trials.trials, embeddings, eval_trials.enrollments);

  const double clip = config.calibration.clip;
  rep.global = global_metrics(rep.scores, rep.calibration, clip);
  if (rep.global.eer > 0.5)
    rep.warnings.push_back("EER above 0.5: same-origin trials score lower than different-origin");
  rep.tippet = tippet(calibrated_log_lrs(rep.scores, rep.calibration, clip), config.tippet_step);

  auto meta = metadata_index(embeddings);
  for (auto axis : config.breakdowns)
    rep.matrices.push_back(breakdown(rep.scores, meta, axis, config.mode, config.min_cell));

  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  write_calibration(rep.calibration, dir / "calibration.json");
  write_trials(eval_trials.trials, dir / "trials.csv");
  write_scores(rep.scores, dir / "scores.csv");
  write_tippet_csv(rep.tippet, dir / "tippet.csv");
  if (config.mode == TrialMode::kEnrollment) {
    std::vector<EmbeddingRecord> er;
    for (const auto& e : eval_trials.enrollments) er.push_back(to_record(e));
    write_embeddings_jsonl(er, dir / "enrollments.jsonl");
  }

  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(config.mode));
  j["global"] = to_json(rep.global);
  auto jc = to_json(rep.calibration);
  jc["clip"] = clip;
  jc["trials"] = rep.calibration_trials;
  jc["iterations"] = rep.calibration.iterations;
  j["calibration"] = std::move(jc);
  j["scores_csv"] = "scores.csv";
  j["tippet_csv"] = "tippet.csv";
  nlohmann::ordered_json mats = nlohmann::ordered_json::object();
  for (const auto& m : rep.matrices) {
    std::string axis(to_string(m.axis));
    mats[axis] = to_json(m);
    write_matrix_csv(m, false, dir / ("matrix_" + axis + "_cllr_min.csv"));
    write_matrix_csv(m, true, dir / ("matrix_" + axis + "_eer.csv"));
  }
  j["matrices"] = std::move(mats);
  j["exclusions"] = rep.exclusions;
  j["warnings"] = rep.warnings;
  nlohmann::ordered_json jm;
  jm["embedding_source"] = embeddings.source_tag;
  jm["embedding_dim"] = embeddings.dim;
  jm["calibration_manifest"] = config.calibration_manifest.string();
  jm["evaluation_manifest"] = config.evaluation_manifest.string();
  jm["timestamp"] = utc_timestamp();
  j["meta"] = std::move(jm);
  open_output(dir / "report.json") << j.dump(2) << '\n';
  return rep;
}

}  // namespace fvc
