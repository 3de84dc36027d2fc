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

#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fvc/fvc.hpp"
#include "test_support.hpp"

using namespace fvc;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  std::string cmd = std::string(FVC_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), p)) > 0) r.out.append(buf, n);
  int st = ::pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool empty_or_absent(const std::filesystem::path& dir) {
  return !std::filesystem::exists(dir) || std::filesystem::is_empty(dir);
}

// Two 30 s recordings of one speaker.
std::filesystem::path tiny_corpus(const std::filesystem::path& dir) {
  Manifest m{"tiny", Role::kEvaluation, {}};
  for (int s = 1; s <= 2; ++s) {
    std::string id = "r" + std::to_string(s);
    write_wav({testing::sine(200.0 + 50 * s, 30.0, 16000, 0.4), 16000}, dir / "wav" / (id + ".wav"));
    m.recordings.push_back({id, "spk1", s, 1, "wav/" + id + ".wav", 16000, std::nullopt});
  }
  write_manifest(m, dir / "m.csv");
  return dir / "m.csv";
}

}  // namespace

TEST_CASE("help lists commands and flags") {
  auto r = run("--help");
  CHECK(r.status == 0);
  for (auto c : {"prep", "embed", "enroll", "trials", "score", "calibrate", "evaluate", "report"})
    CHECK(r.out.find(c) != std::string::npos);
  auto e = run("evaluate --help");
  CHECK(e.status == 0);
  for (auto f : {"--calibration-manifest", "--evaluation-manifest", "--mode", "--compat", "--min-cell-so"})
    CHECK(e.out.find(f) != std::string::npos);
  CHECK(run("").status == 2);
  CHECK(run("prep --bogus").status == 2);
}

TEST_CASE("prep writes chunks and echoes its configuration") {
  auto dir = testing::temp_dir("cli_prep");
  auto m = tiny_corpus(dir);
  auto r = run("prep --manifest " + q(m) + " --out " + q(dir / "out"));
  INFO(r.out);
  REQUIRE(r.status == 0);
  CHECK(r.out.find("# effective config") != std::string::npos);
  auto chunks = read_manifest(dir / "out" / "chunks.csv");
  CHECK(!chunks.recordings.empty());
  CHECK(std::filesystem::exists(dir / "out" / "effective_config.ini"));
  CHECK(!std::filesystem::exists(dir / "out" / ".fvc.lock"));

  auto aug = run("prep --augment --manifest " + q(m) + " --out " + q(dir / "aug"));
  REQUIRE(aug.status == 0);
  auto it = std::filesystem::directory_iterator(dir / "aug" / "chunks");
  auto wavs = static_cast<std::size_t>(std::distance(begin(it), end(it)));
  CHECK(wavs == 4 * chunks.recordings.size());
}

TEST_CASE("prep strict mode fails with no outputs") {
  auto dir = testing::temp_dir("cli_strict");
  auto m = read_manifest(tiny_corpus(dir));
  m.recordings.push_back({"r3", "spk2", 1, 1, "wav/absent.wav", 16000, std::nullopt});
  write_manifest(m, dir / "m.csv");
  auto r = run("prep --strict --manifest " + q(dir / "m.csv") + " --out " + q(dir / "out"));
  CHECK(r.status == 1);
  CHECK(empty_or_absent(dir / "out"));
  auto lenient = run("prep --manifest " + q(dir / "m.csv") + " --out " + q(dir / "out2"));
  CHECK(lenient.status == 0);
  CHECK(lenient.out.find("skipped r3") != std::string::npos);
}

TEST_CASE("exit codes follow the error family") {
  auto dir = testing::temp_dir("cli_codes");
  CHECK(run("prep --manifest " + q(dir / "none.csv") + " --out " + q(dir / "o")).status == 1);

  {
    std::ofstream bad(dir / "bad.csv");
    bad << "recording_id,speaker_id,session,task,path,sample_rate_hz\nr1,s,1,9,a.wav,16000\n";
    std::ofstream meta(dir / "bad.meta.json");
    meta << R"({"dataset_name": "bad", "role": "evaluation"})";
  }
  CHECK(run("prep --manifest " + q(dir / "bad.csv") + " --out " + q(dir / "o2")).status == 2);

  write_trials({}, dir / "empty_trials.csv");
  write_embeddings_jsonl({{"a", "s", 1, 1, 2.0, {1.0, 0.0}}}, dir / "e.jsonl");
  CHECK(run("score --trials " + q(dir / "empty_trials.csv") + " --embeddings " + q(dir / "e.jsonl") +
            " --out " + q(dir / "s.csv"))
            .status == 2);

  write_scores({{{"a", "b", Label::kSameOrigin}, 0.5}, {{"a", "c", Label::kSameOrigin}, 0.7}},
               dir / "one_class.csv");
  auto r = run("calibrate --scores " + q(dir / "one_class.csv") + " --out " + q(dir / "c.json"));
  CHECK(r.status == 3);
  CHECK(!std::filesystem::exists(dir / "c.json"));
}

TEST_CASE("locked output directories are refused") {
  auto dir = testing::temp_dir("cli_lock");
  auto m = tiny_corpus(dir);
  std::filesystem::create_directories(dir / "out");
  std::ofstream(dir / "out" / ".fvc.lock") << "";
  auto r = run("prep --manifest " + q(m) + " --out " + q(dir / "out"));
  CHECK(r.status == 1);
  CHECK(r.out.find("locked") != std::string::npos);
}

TEST_CASE("synth, prep, embed, trials, score, calibrate, report and evaluate chain") {
  auto dir = testing::temp_dir("cli_chain");
  auto corpus = dir / "corpus";
  auto s = run("synth --out " + q(corpus) + " --speakers 6 --calibration-speakers 2 --seconds 24");
  INFO(s.out);
  REQUIRE(s.status == 0);
  for (auto split : {"calibration", "evaluation"}) {
    auto p = run(std::string("prep --manifest ") + q(corpus / (std::string(split) + ".csv")) +
                 " --out " + q(dir / split));
    INFO(p.out);
    REQUIRE(p.status == 0);
    auto e = run(std::string("embed --manifest ") + q(dir / split / "chunks.csv") + " --out " +
                 q(dir / split / "emb.jsonl"));
    INFO(e.out);
    REQUIRE(e.status == 0);
    CHECK(ingest(dir / split / "emb.jsonl").source_tag == "baseline-48");
  }
  auto emb = " --embeddings " + q(dir / "calibration" / "emb.jsonl") + " --embeddings " +
             q(dir / "evaluation" / "emb.jsonl");

  // step by step
  REQUIRE(run("trials --manifest " + q(dir / "calibration" / "chunks.csv") + emb +
              " --scope all-session --out " + q(dir / "cal_trials.csv"))
              .status == 0);
  REQUIRE(run("score --trials " + q(dir / "cal_trials.csv") + emb + " --out " + q(dir / "cal_scores.csv"))
              .status == 0);
  REQUIRE(run("calibrate --scores " + q(dir / "cal_scores.csv") + " --out " + q(dir / "model.json"))
              .status == 0);
  REQUIRE(run("trials --manifest " + q(dir / "evaluation" / "chunks.csv") + emb + " --out " +
              q(dir / "ev_trials.csv"))
              .status == 0);
  REQUIRE(run("score --trials " + q(dir / "ev_trials.csv") + emb + " --out " + q(dir / "ev_scores.csv"))
              .status == 0);
  REQUIRE(run("report --scores " + q(dir / "ev_scores.csv") + " --model " + q(dir / "model.json") +
              " --out " + q(dir / "rep"))
              .status == 0);

  // one shot
  auto ev = run("evaluate --calibration-manifest " + q(dir / "calibration" / "chunks.csv") +
                " --evaluation-manifest " + q(dir / "evaluation" / "chunks.csv") + emb +
                " --out " + q(dir / "eval"));
  INFO(ev.out);
  REQUIRE(ev.status == 0);
  auto step = nlohmann::json::parse(slurp(dir / "rep" / "report.json"));
  auto full = nlohmann::json::parse(slurp(dir / "eval" / "report.json"));
  CHECK(step["global"] == full["global"]);
  CHECK(slurp(dir / "ev_scores.csv") == slurp(dir / "eval" / "scores.csv"));
  CHECK(slurp(dir / "model.json") == slurp(dir / "eval" / "calibration.json"));

  // enrollment path through the individual commands
  REQUIRE(run("enroll --embeddings " + q(dir / "evaluation" / "emb.jsonl") + " --out " +
              q(dir / "enr.jsonl"))
              .status == 0);
  REQUIRE(run("trials --mode enrollment --manifest " + q(dir / "evaluation" / "chunks.csv") + emb +
              " --out " + q(dir / "enr_trials.csv"))
              .status == 0);
  REQUIRE(run("score --trials " + q(dir / "enr_trials.csv") + emb + " --enrollments " +
              q(dir / "enr.jsonl") + " --out " + q(dir / "enr_scores.csv"))
              .status == 0);
  auto enr_eval = run("evaluate --mode enrollment --calibration-manifest " +
                      q(dir / "calibration" / "chunks.csv") + " --evaluation-manifest " +
                      q(dir / "evaluation" / "chunks.csv") + emb + " --out " + q(dir / "eval_enr"));
  REQUIRE(enr_eval.status == 0);
  CHECK(slurp(dir / "enr_scores.csv") == slurp(dir / "eval_enr" / "scores.csv"));

  // an INI config reproduces the run; reruns are idempotent
  {
    std::ofstream ini(dir / "run.ini");
    ini << "[evaluate]\ncalibration-manifest=" << (dir / "calibration" / "chunks.csv").string()
        << "\nevaluation-manifest=" << (dir / "evaluation" / "chunks.csv").string()
        << "\nembeddings=[\"" << (dir / "calibration" / "emb.jsonl").string() << "\",\""
        << (dir / "evaluation" / "emb.jsonl").string() << "\"]\nout=" << (dir / "eval_ini").string()
        << "\n";
  }
  auto ini = run("--config " + q(dir / "run.ini") + " evaluate");
  INFO(ini.out);
  REQUIRE(ini.status == 0);
  CHECK(slurp(dir / "eval_ini" / "scores.csv") == slurp(dir / "eval" / "scores.csv"));
  auto again = run("--config " + q(dir / "run.ini") + " evaluate");
  REQUIRE(again.status == 0);
  CHECK(slurp(dir / "eval_ini" / "scores.csv") == slurp(dir / "eval" / "scores.csv"));
}
