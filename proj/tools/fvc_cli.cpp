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

// fvc: forensic voice comparison pipeline.
//
//   fvc synth     generate the synthetic test corpus
//   fvc prep      silence removal, chunking, augmentation
//   fvc embed     baseline embeddings for a chunk manifest
//   fvc enroll    per-speaker enrollment vectors
//   fvc trials    trial list for a manifest
//   fvc score     cosine scores for a trial list
//   fvc calibrate logistic-regression calibration model
//   fvc evaluate  full scenario run (report.json + CSVs)
//   fvc report    metrics recomputed from scores.csv + calibration.json
//
// Exit codes: 0 ok, 1 I/O, 2 validation, 3 numeric/degenerate data.
// Every option may also come from an INI file (--config) with one section
// per command; command-line values take precedence.

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fvc/fvc.hpp"

namespace fs = std::filesystem;

namespace {

// Advisory lock on an output directory; concurrent writers are refused.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".fvc.lock") {
    fs::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw fvc::IoError("output directory '" + dir.string() +
                         "' is locked by another run (remove " + path_.string() +
                         " if stale)");
  }
  ~DirLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

// Printed before a command runs; saved next to its outputs once it succeeds.
std::string echo_config(const CLI::App& app) {
  const std::string prefix = app.get_subcommands().front()->get_name() + ".";
  std::istringstream all(app.config_to_str(true, false));
  std::string cfg, line;
  while (std::getline(all, line))
    if (line.starts_with(prefix)) cfg += line + '\n';
  std::cout << "# effective config\n" << cfg;
  return cfg;
}

fs::path sidecar_config(const fs::path& out_file) {
  auto p = out_file;
  p.replace_extension(".config.ini");
  return p;
}

void require_exists(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw fvc::IoError(what + " '" + p.string() + "' does not exist");
}

fvc::Manifest load_valid_manifest(const fs::path& p) {
  require_exists(p, "manifest");
  auto m = fvc::read_manifest(p);
  auto v = fvc::validate_manifest(m);
  if (!v.empty()) {
    for (const auto& x : v) std::cerr << "violation: " << x.recording_id << ": " << x.reason << '\n';
    throw fvc::ValidationError(p.string() + ": " + std::to_string(v.size()) +
                               " manifest violation(s)");
  }
  return m;
}

struct CalibrationFlags {
  std::string weighting = "equal-prior";
  double l2 = 0.0;
  bool compat = false;
  double clip = 1e-15;

  void add(CLI::App* cmd) {
    cmd->add_option("--weighting", weighting, "Class weighting: equal-prior | unweighted")
        ->check(CLI::IsMember({"equal-prior", "unweighted"}))
        ->capture_default_str();
    cmd->add_option("--l2", l2, "L2 penalty on the calibration weight")->capture_default_str();
    cmd->add_flag("--compat", compat,
                  "Unweighted fit with unit L2 penalty (overrides --weighting/--l2)");
    cmd->add_option("--clip", clip, "Posterior clip bound")->capture_default_str();
  }

  fvc::CalibrationConfig config() const {
    fvc::CalibrationConfig c;
    if (compat) {
      c = fvc::CalibrationConfig::compat();
    } else {
      c.weighting = fvc::parse_weighting(weighting);
      c.l2 = l2;
    }
    c.clip = clip;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forensic voice comparison: scoring, calibration and evaluation"};
  app.set_config("--config", "", "INI file with one section per command");
  app.require_subcommand(1);

  // synth ------------------------------------------------------------------
  fvc::synth::CorpusOptions synth_opts;
  fs::path synth_out;
  auto* synth = app.add_subcommand("synth", "Generate the seeded synthetic corpus");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--speakers", synth_opts.n_speakers, "Number of speakers")->capture_default_str();
  synth->add_option("--calibration-speakers", synth_opts.n_calibration,
                    "Speakers assigned to the calibration split")
      ->capture_default_str();
  synth->add_option("--seconds", synth_opts.seconds, "Recording length")->capture_default_str();
  synth->add_option("--sample-rate", synth_opts.sample_rate_hz, "Sample rate (Hz)")
      ->capture_default_str();
  synth->add_option("--seed", synth_opts.seed, "Random seed")->capture_default_str();

  // prep -------------------------------------------------------------------
  fvc::PrepOptions prep_opts;
  fs::path prep_manifest, prep_out;
  auto* prep = app.add_subcommand("prep", "Remove silence, chunk and optionally augment recordings");
  prep->add_option("--manifest", prep_manifest, "Recording manifest CSV")->required();
  prep->add_option("--out", prep_out, "Output directory")->required();
  prep->add_flag("--strict", prep_opts.strict, "Abort (no outputs) on any recording failure");
  prep->add_flag("--augment", prep_opts.augment, "Emit time-scaled and noisy variants");
  prep->add_option("--seed", prep_opts.seed, "Noise seed")->capture_default_str();
  prep->add_option("--frame-ms", prep_opts.vad.frame_ms, "VAD frame length")->capture_default_str();
  prep->add_option("--hop-ms", prep_opts.vad.hop_ms, "VAD hop")->capture_default_str();
  prep->add_option("--threshold-db", prep_opts.vad.threshold_db,
                   "VAD threshold relative to the loudest frame")
      ->capture_default_str();
  prep->add_option("--time-scales", prep_opts.time_scales, "Time-scale factors")
      ->delimiter(',')
      ->capture_default_str();
  prep->add_option("--snr-db", prep_opts.snr_db, "SNR of the noise variants")->capture_default_str();
  prep->add_option("--noise-variants", prep_opts.noise_variants, "Noise variants per chunk")
      ->capture_default_str();

  // embed ------------------------------------------------------------------
  fs::path embed_manifest, embed_out;
  auto* embed = app.add_subcommand("embed", "Baseline (48-dim) embeddings for a chunk manifest");
  embed->add_option("--manifest", embed_manifest, "Chunk manifest CSV")->required();
  embed->add_option("--out", embed_out, "Output embeddings.jsonl")->required();

  // enroll -----------------------------------------------------------------
  fs::path enroll_emb, enroll_out, enroll_manifest;
  int enroll_session = 1;
  auto* enroll = app.add_subcommand("enroll", "Average each speaker's embeddings of one session");
  enroll->add_option("--embeddings", enroll_emb, "Embeddings JSONL")->required();
  enroll->add_option("--out", enroll_out, "Output enrollment JSONL")->required();
  enroll->add_option("--manifest", enroll_manifest, "Restrict to the samples of this manifest");
  enroll->add_option("--session", enroll_session, "Session to average")->capture_default_str();

  // trials -----------------------------------------------------------------
  fs::path trials_manifest, trials_out;
  std::vector<fs::path> trials_emb;
  std::string trials_mode = "pairwise", trials_scope = "cross-session";
  auto* trials = app.add_subcommand("trials", "Generate the trial list of a manifest");
  trials->add_option("--manifest", trials_manifest, "Chunk manifest CSV")->required();
  trials->add_option("--embeddings", trials_emb, "Embeddings JSONL (repeatable)")->required();
  trials->add_option("--mode", trials_mode, "pairwise | enrollment")
      ->check(CLI::IsMember({"pairwise", "enrollment"}))
      ->capture_default_str();
  trials->add_option("--scope", trials_scope, "Pairwise scope: cross-session | all-session")
      ->check(CLI::IsMember({"cross-session", "all-session"}))
      ->capture_default_str();
  trials->add_option("--out", trials_out, "Output trials.csv")->required();

  // score ------------------------------------------------------------------
  fs::path score_trials_path, score_out;
  std::vector<fs::path> score_emb, score_enroll;
  auto* score = app.add_subcommand("score", "Cosine-score a trial list");
  score->add_option("--trials", score_trials_path, "trials.csv")->required();
  score->add_option("--embeddings", score_emb, "Embeddings JSONL (repeatable)")->required();
  score->add_option("--enrollments", score_enroll, "Enrollment JSONL (repeatable)");
  score->add_option("--out", score_out, "Output scores.csv")->required();

  // calibrate --------------------------------------------------------------
  fs::path cal_scores, cal_out;
  CalibrationFlags cal_flags;
  auto* calibrate = app.add_subcommand("calibrate", "Fit the score-to-LR calibration model");
  calibrate->add_option("--scores", cal_scores, "scores.csv")->required();
  calibrate->add_option("--out", cal_out, "Output calibration.json")->required();
  cal_flags.add(calibrate);

  // evaluate ---------------------------------------------------------------
  fvc::ScenarioConfig scenario;
  std::string ev_mode = "pairwise", ev_scope = "all-session";
  std::vector<std::string> ev_breakdowns = {"duration", "task"};
  CalibrationFlags ev_flags;
  auto* evaluate = app.add_subcommand("evaluate", "Run a full calibration/evaluation scenario");
  evaluate->add_option("--calibration-manifest", scenario.calibration_manifest,
                       "Calibration-split chunk manifest")
      ->required();
  evaluate->add_option("--evaluation-manifest", scenario.evaluation_manifest,
                       "Evaluation-split chunk manifest")
      ->required();
  evaluate->add_option("--embeddings", scenario.embeddings, "Embeddings JSONL (repeatable)")
      ->required();
  evaluate->add_option("--mode", ev_mode, "pairwise | enrollment")
      ->check(CLI::IsMember({"pairwise", "enrollment"}))
      ->capture_default_str();
  evaluate->add_option("--calibration-scope", ev_scope,
                       "Pairwise calibration trials: all-session | cross-session")
      ->check(CLI::IsMember({"cross-session", "all-session"}))
      ->capture_default_str();
  evaluate->add_option("--breakdowns", ev_breakdowns, "Breakdown axes (duration, task)")
      ->delimiter(',')
      ->check(CLI::IsMember({"duration", "task"}))
      ->capture_default_str();
  evaluate->add_option("--min-cell-so", scenario.min_cell.same,
                       "Minimum same-origin trials per breakdown cell")
      ->capture_default_str();
  evaluate->add_option("--min-cell-do", scenario.min_cell.different,
                       "Minimum different-origin trials per breakdown cell")
      ->capture_default_str();
  evaluate->add_option("--tippet-step", scenario.tippet_step, "Tippet grid step (log10 units)")
      ->capture_default_str();
  evaluate->add_option("--out", scenario.output_dir, "Output directory")->required();
  ev_flags.add(evaluate);

  // report -----------------------------------------------------------------
  fs::path rep_scores, rep_model, rep_out;
  double rep_step = 0.01, rep_clip = 1e-15;
  auto* report = app.add_subcommand("report", "Recompute global metrics from scores and a model");
  report->add_option("--scores", rep_scores, "scores.csv")->required();
  report->add_option("--model", rep_model, "calibration.json")->required();
  report->add_option("--out", rep_out, "Output directory")->required();
  report->add_option("--tippet-step", rep_step, "Tippet grid step")->capture_default_str();
  report->add_option("--clip", rep_clip, "Posterior clip bound")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const std::string effective = echo_config(app);
    fs::path config_dest;
    if (*synth) {
      DirLock lock(synth_out);
      config_dest = synth_out / "effective_config.ini";
      auto [cal, eval] = fvc::synth::write_corpus(synth_out, synth_opts);
      std::cout << "wrote " << cal.recordings.size() << " calibration and "
                << eval.recordings.size() << " evaluation recordings\n";
    } else if (*prep) {
      require_exists(prep_manifest, "manifest");
      auto m = load_valid_manifest(prep_manifest);
      DirLock lock(prep_out);
      config_dest = prep_out / "effective_config.ini";
      auto res = fvc::prep_corpus(m, prep_manifest.parent_path(), prep_out, prep_opts);
      for (const auto& [id, n] : res.counts) std::cout << id << '\t' << n << " chunks\n";
      for (const auto& f : res.failures) std::cerr << "skipped " << f << '\n';
      std::cout << res.chunks.recordings.size() << " chunks, " << res.augmented.recordings.size()
                << " augmented variants\n";
    } else if (*embed) {
      auto m = load_valid_manifest(embed_manifest);
      config_dest = sidecar_config(embed_out);
      auto set = fvc::embed_manifest(m, embed_manifest.parent_path());
      fvc::write_embedding_set(set, embed_out);
      std::cout << set.records.size() << " embeddings (dim " << set.dim << ")\n";
    } else if (*enroll) {
      config_dest = sidecar_config(enroll_out);
      auto set = fvc::ingest(enroll_emb);
      fvc::RecordFilter filter = fvc::session_filter(enroll_session);
      if (!enroll_manifest.empty()) {
        auto m = load_valid_manifest(enroll_manifest);
        auto ids = std::make_shared<std::unordered_set<std::string>>();
        for (const auto& r : m.recordings) ids->insert(r.recording_id);
        filter = [ids, enroll_session](const fvc::EmbeddingRecord& r) {
          return r.session == enroll_session && ids->contains(r.sample_id);
        };
      }
      std::vector<fvc::EmbeddingRecord> out;
      for (const auto& e : fvc::enroll_all(set, filter)) out.push_back(fvc::to_record(e));
      if (out.empty()) throw fvc::ValidationError("no records pass the enrollment filter");
      fvc::write_embeddings_jsonl(out, enroll_out);
      std::cout << out.size() << " enrollment vectors\n";
    } else if (*trials) {
      config_dest = sidecar_config(trials_out);
      auto m = load_valid_manifest(trials_manifest);
      auto set = fvc::load_embeddings(trials_emb);
      auto ts = fvc::generate_trials(m, set, fvc::parse_trial_mode(trials_mode),
                                     fvc::parse_pair_scope(trials_scope));
      for (const auto& e : ts.exclusions) std::cerr << "excluded " << e << '\n';
      fvc::write_trials(ts.trials, trials_out);
      std::cout << ts.trials.size() << " trials\n";
    } else if (*score) {
      config_dest = sidecar_config(score_out);
      require_exists(score_trials_path, "trials");
      auto ts = fvc::read_trials(score_trials_path);
      if (ts.empty()) throw fvc::ValidationError("empty trial set");
      auto set = fvc::load_embeddings(score_emb);
      std::vector<fvc::EnrollmentVector> enr;
      for (const auto& p : score_enroll)
        for (const auto& r : fvc::read_embeddings_jsonl(p)) enr.push_back(fvc::from_record(r));
      auto scored = fvc::score_trials(ts, set, enr);
      fvc::write_scores(scored, score_out);
      std::cout << scored.size() << " scored trials\n";
    } else if (*calibrate) {
      config_dest = sidecar_config(cal_out);
      auto scored = fvc::read_scores(cal_scores);
      auto model = fvc::fit_calibration(scored, cal_flags.config());
      fvc::write_calibration(model, cal_out);
      std::cout << "weight " << model.weight << " bias " << model.bias << " ("
                << model.iterations << " iterations)\n";
    } else if (*evaluate) {
      scenario.mode = fvc::parse_trial_mode(ev_mode);
      scenario.calibration_scope = fvc::parse_pair_scope(ev_scope);
      scenario.breakdowns.clear();
      for (const auto& b : ev_breakdowns) scenario.breakdowns.insert(fvc::parse_axis(b));
      scenario.calibration = ev_flags.config();
      require_exists(scenario.calibration_manifest, "calibration manifest");
      require_exists(scenario.evaluation_manifest, "evaluation manifest");
      for (const auto& p : scenario.embeddings) require_exists(p, "embeddings");
      DirLock lock(scenario.output_dir);
      config_dest = scenario.output_dir / "effective_config.ini";
      auto rep = fvc::run_pipeline(scenario);
      for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "cllr " << rep.global.cllr << " cllr_min " << rep.global.cllr_min
                << " cllr_cal " << rep.global.cllr_cal << " eer " << rep.global.eer << '\n';
    } else if (*report) {
      DirLock lock(rep_out);
      config_dest = rep_out / "effective_config.ini";
      auto scored = fvc::read_scores(rep_scores);
      auto model = fvc::read_calibration(rep_model);
      auto g = fvc::global_metrics(scored, model, rep_clip);
      auto tc = fvc::tippet(fvc::calibrated_log_lrs(scored, model, rep_clip), rep_step);
      fvc::write_tippet_csv(tc, rep_out / "tippet.csv");
      nlohmann::ordered_json j;
      j["global"] = fvc::to_json(g);
      j["tippet_csv"] = "tippet.csv";
      fvc::open_output(rep_out / "report.json") << j.dump(2) << '\n';
      std::cout << "cllr " << g.cllr << " cllr_min " << g.cllr_min << " cllr_cal " << g.cllr_cal
                << " eer " << g.eer << '\n';
    }
    fvc::open_output(config_dest) << effective;
  } catch (const fvc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fvc::exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
