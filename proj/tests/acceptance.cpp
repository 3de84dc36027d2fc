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

// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "fvc/fvc.hpp"
#include "test_support.hpp"

using namespace fvc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

std::vector<Label> labels_for(std::size_t n_same, std::size_t n_diff) {
  std::vector<Label> l(n_same, Label::kSameOrigin);
  l.insert(l.end(), n_diff, Label::kDifferentOrigin);
  return l;
}

Outcome cllr_identity() {
  double ones = cllr({{0, 0, 0, 0}, {0, 0, 0}});
  double four = cllr({{std::log10(4.0), std::log10(4.0)}, {std::log10(0.25), std::log10(0.25)}});
  double expect = std::log(1.25) / std::log(2.0);
  bool ok = std::abs(ones - 1.0) <= 1e-12 && std::abs(four - expect) <= 1e-12;
  return {ok, fmt("all-LR=1 -> %.15g, LR 4/0.25 -> %.15g (expect %.15g)", ones, four, expect)};
}

Outcome cllr_decomposition() {
  double t3 = 0.632 - 0.601, t4 = 0.517 - 0.411;
  bool ok = std::abs(t3 - 0.031) <= 0.001 && std::abs(t4 - 0.105) <= 0.002;
  return {ok, fmt("cllr_cal rows: %.3f (0.031 +-0.001), %.3f (0.105 +-0.002)", t3, t4)};
}

Outcome pav_oracle() {
  std::mt19937_64 rng(20260101);
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    std::size_t n = 2 + rng() % 11;
    int distinct = inst % 3 == 0 ? 4 : 1000;
    std::vector<double> s(n);
    std::vector<Label> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % distinct) / distinct;
      l[i] = rng() % 2 ? Label::kSameOrigin : Label::kDifferentOrigin;
    }
    l[0] = Label::kSameOrigin;
    l[1] = Label::kDifferentOrigin;
    auto p = pav(s, l);
    auto o = testing::isotonic_oracle(s, l);
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(p[i] - o[i]));
  }
  return {worst <= 1e-9, fmt("200 instances n<=12, max |pav - oracle| = %.3g", worst)};
}

Outcome eer_oracle() {
  std::mt19937_64 rng(20260102);
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    std::size_t n = 2 + rng() % 49;
    int distinct = inst % 2 ? 10 : 1000000;
    std::vector<double> s(n);
    std::vector<Label> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % distinct) / distinct;
      l[i] = rng() % 2 ? Label::kSameOrigin : Label::kDifferentOrigin;
    }
    l[0] = Label::kSameOrigin;
    l[1] = Label::kDifferentOrigin;
    worst = std::max(worst, std::abs(eer(s, l) - testing::eer_oracle(s, l)));
  }
  std::vector<double> ex{0.9, 0.8, 0.3, 0.7, 0.2, 0.1};
  double third = eer(ex, labels_for(3, 3));
  bool ok = worst <= 1e-9 && third == 1.0 / 3.0;
  return {ok, fmt("200 instances n<=50, max diff %.3g; example -> %.17g", worst, third)};
}

Outcome rank_invariance() {
  std::mt19937_64 rng(20260103);
  std::normal_distribution<double> nd;
  std::vector<double> s;
  for (int i = 0; i < 500; ++i) s.push_back(nd(rng) + (i < 150 ? 1.0 : 0.0));
  auto l = labels_for(150, 350);
  double c0 = cllr_min(s, l), e0 = eer(s, l);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    double a = u(rng), b = u(rng) - 1.5;
    auto t = s;
    for (auto& x : t) {
      switch (k % 4) {
        case 0: x = a * x + b; break;
        case 1: x = std::exp(a * x); break;
        case 2: x = std::atan(x) + b; break;
        default: x = x * x * x + a * x; break;
      }
    }
    worst = std::max({worst, std::abs(cllr_min(t, l) - c0), std::abs(eer(t, l) - e0)});
  }
  return {worst <= 1e-10, fmt("20 transforms on 500 trials, max change %.3g", worst)};
}

Outcome gaussian() {
  std::mt19937_64 rng(20260104);
  std::normal_distribution<double> same(1.0, 1.0), diff(-1.0, 1.0);
  std::vector<double> s;
  for (int i = 0; i < 10000; ++i) s.push_back(same(rng));
  for (int i = 0; i < 10000; ++i) s.push_back(diff(rng));
  auto l = labels_for(10000, 10000);
  double e = eer(s, l);
  double c = cllr_min(s, l), o = testing::cllr_min_oracle(s, l);
  bool ok = std::abs(e - 0.1587) <= 0.01 && std::abs(c - o) <= 0.02;
  return {ok, fmt("EER %.4f (0.1587 +-0.01); cllr_min %.6f vs oracle %.6f (+-0.02)", e, c, o)};
}

Outcome end_to_end() {
  namespace fs = std::filesystem;
  auto dir = testing::temp_dir("acceptance_e2e");
  synth::CorpusOptions opts;
  auto [cal, ev] = synth::write_corpus(dir / "corpus", opts);
  std::vector<fs::path> emb;
  for (auto [name, m] : {std::pair{"calibration", &cal}, std::pair{"evaluation", &ev}}) {
    auto res = prep_corpus(*m, dir / "corpus", dir / name);
    if (!res.failures.empty()) return {false, "prep failure: " + res.failures.front()};
    auto set = embed_manifest(res.chunks, dir / name);
    emb.push_back(dir / name / "emb.jsonl");
    write_embedding_set(set, emb.back());
  }
  ScenarioConfig cfg;
  cfg.calibration_manifest = dir / "calibration" / "chunks.csv";
  cfg.evaluation_manifest = dir / "evaluation" / "chunks.csv";
  cfg.embeddings = emb;
  cfg.output_dir = dir / "pairwise";
  auto pw = run_pipeline(cfg);
  cfg.mode = TrialMode::kEnrollment;
  cfg.output_dir = dir / "enrollment";
  auto en = run_pipeline(cfg);

  const BreakdownMatrix* dur = nullptr;
  for (const auto& m : pw.matrices)
    if (m.axis == Axis::kDuration) dur = &m;
  bool full = dur && dur->row_keys.size() == 9 && dur->col_keys.size() == 9 &&
              dur->trials_without_metadata == 0;
  long cells = 0, populated = 0;
  if (dur)
    for (const auto& row : dur->cells)
      for (const auto& c : row) {
        cells += c.n_so + c.n_do;
        populated += c.populated();
      }
  bool partition = cells == static_cast<long>(pw.scores.size());
  bool ok = pw.global.eer < 0.02 && pw.global.cllr_min < 0.1 && en.global.eer <= pw.global.eer &&
            full && populated == 81 && partition;
  std::ostringstream os;
  os << "pairwise EER " << pw.global.eer << " cllr_min " << pw.global.cllr_min << "; enrollment EER "
     << en.global.eer << "; duration cells populated " << populated << "/81, cell trials " << cells
     << " of " << pw.scores.size();
  return {ok, os.str()};
}

Outcome chunking() {
  const int sr = 16000;
  std::vector<double> ramp(60 * sr);
  std::iota(ramp.begin(), ramp.end(), 0.0);
  AudioSignal sig{ramp, sr};
  auto plan = plan_durations(sig.duration_s());
  auto chunks = split_chunks(sig, plan);
  bool ok = !chunks.empty() && chunks.size() == plan.size();
  double worst_overlap = 0.0;
  std::array<int, 11> counts{};
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    double d = chunks[k].duration_s;
    ok = ok && d >= 2 && d <= 10 && d == std::round(d);
    counts[static_cast<std::size_t>(d)]++;
    if (k + 1 < chunks.size()) {
      double end = chunks[k].samples.samples.back() + 1;
      double next = chunks[k + 1].samples.samples.front();
      worst_overlap = std::max(worst_overlap, std::abs((end - next) - 0.1 * d * sr));
    }
  }
  auto [lo, hi] = std::minmax_element(counts.begin() + 2, counts.end());
  ok = ok && worst_overlap <= 1.0 && *hi - *lo <= 1;
  return {ok, fmt("%.0f chunks, worst overlap error %.3g samples, count spread %.0f", static_cast<double>(chunks.size()),
                  worst_overlap, static_cast<double>(*hi - *lo))};
}

Outcome augmentation() {
  AudioSignal sig{testing::sine(440.0, 1.0, 16000, 0.5), 16000};
  const auto n = sig.samples.size();
  auto noisy = augment_add_noise(sig, 15.0, 12345);
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = noisy.samples[i] - sig.samples[i];
  double ratio = signal_power(residual) / signal_power(sig.samples);
  double target = std::pow(10.0, -1.5);
  double rel = std::abs(ratio - target) / target;
  auto slow = augment_time_scale(sig, 0.95), fast = augment_time_scale(sig, 1.05);
  auto expect_slow = static_cast<std::size_t>(std::floor(0.95 * static_cast<double>(n) + 1e-9));
  auto expect_fast = static_cast<std::size_t>(std::floor(1.05 * static_cast<double>(n) + 1e-9));
  bool ok = rel <= 0.05 && slow.samples.size() == expect_slow && fast.samples.size() == expect_fast;
  return {ok, fmt("noise power ratio error %.3g (<=5%%); lengths %.0f/%.0f", rel,
                  static_cast<double>(slow.samples.size()), static_cast<double>(fast.samples.size()))};
}

}  // namespace

int main() {
  std::vector<Criterion> criteria{
      {"cllr-identity", 1.0, cllr_identity},
      {"cllr-decomposition", 0.0, cllr_decomposition},
      {"pav-oracle", 10.0, pav_oracle},
      {"eer-oracle", 0.0, eer_oracle},
      {"rank-invariance", 0.0, rank_invariance},
      {"gaussian-separability", 30.0, gaussian},
      {"end-to-end", 300.0, end_to_end},
      {"chunking", 0.0, chunking},
      {"augmentation", 0.0, augmentation},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool in_time = c.budget_s == 0.0 || secs < c.budget_s;
    bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " ["
              << fmt("%.2f s", secs) << (c.budget_s > 0 ? fmt(" of %.0f s", c.budget_s) : "") << "]"
              << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed\n";
  return failures == 0 ? 0 : 1;
}
