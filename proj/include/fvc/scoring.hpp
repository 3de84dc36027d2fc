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

// Cosine scoring of trials and logistic-regression calibration of scores
// into likelihood ratios.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "fvc/core_model.hpp"
#include "fvc/embeddings.hpp"
#include "fvc/error.hpp"
#include "fvc/io.hpp"

namespace fvc {

inline double cosine_score(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw InvalidArgument("cosine_score: dim mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0) || !(nb > 0)) throw InvalidArgument("cosine_score: zero-norm input");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

struct ResolvedRef {
  const std::vector<double>* vector = nullptr;
  const std::string* speaker_id = nullptr;
};

// Resolves trial references against samples and enrollments. A known_ref may
// name an enrollment either as "enroll:<speaker>" or as the bare speaker id.
class RefResolver {
 public:
  RefResolver(const EmbeddingSet& set, std::span<const EnrollmentVector> enrollments)
      : set_(set) {
    for (const auto& e : enrollments) enrollments_.emplace(enrollment_ref(e.speaker_id), &e);
  }

  ResolvedRef known(const std::string& ref) const {
    if (auto it = enrollments_.find(ref); it != enrollments_.end())
      return {&it->second->vector, &it->second->speaker_id};
    if (auto* r = set_.find(ref)) return {&r->vector, &r->speaker_id};
    if (auto it = enrollments_.find(enrollment_ref(ref)); it != enrollments_.end())
      return {&it->second->vector, &it->second->speaker_id};
    return {};
  }

  ResolvedRef unknown(const std::string& ref) const {
    if (auto* r = set_.find(ref)) return {&r->vector, &r->speaker_id};
    return {};
  }

 private:
  const EmbeddingSet& set_;
  std::unordered_map<std::string, const EnrollmentVector*> enrollments_;
};

inline std::vector<ScoredTrial> score_trials(std::span<const Trial> trials,
                                             const EmbeddingSet& embeddings,
                                             std::span<const EnrollmentVector> enrollments = {}) {
  RefResolver resolver(embeddings, enrollments);
  std::vector<std::string> missing;
  std::vector<ScoredTrial> out;
  out.reserve(trials.size());
  for (const auto& t : trials) {
    auto k = resolver.known(t.known_ref);
    auto u = resolver.unknown(t.unknown_ref);
    if (!k.vector) missing.push_back(t.known_ref);
    if (!u.vector) missing.push_back(t.unknown_ref);
    if (!k.vector || !u.vector) continue;
    if (label_trial(*k.speaker_id, *u.speaker_id) != t.label)
      throw ValidationError("trial (" + t.known_ref + ", " + t.unknown_ref +
                            "): label disagrees with speaker ids");
    out.push_back({t, cosine_score(*k.vector, *u.vector)});
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::string msg = "unresolvable trial references (" + std::to_string(missing.size()) + "):";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Calibration

enum class Weighting { kEqualPrior, kUnweighted };

inline std::string_view to_string(Weighting w) {
  return w == Weighting::kEqualPrior ? "equal-prior" : "unweighted";
}

inline Weighting parse_weighting(std::string_view s) {
  if (s == "equal-prior") return Weighting::kEqualPrior;
  if (s == "unweighted") return Weighting::kUnweighted;
  throw ValidationError("unknown calibration weighting '" + std::string(s) + "'");
}

struct CalibrationConfig {
  Weighting weighting = Weighting::kEqualPrior;
  // Penalty strength on the weight (not the bias): objective += l2/2 * w^2.
  double l2 = 0.0;
  double clip = 1e-15;
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;

  // Unweighted samples with unit penalty, the usual statistics-package default.
  static CalibrationConfig compat() {
    CalibrationConfig c;
    c.weighting = Weighting::kUnweighted;
    c.l2 = 1.0;
    return c;
  }
};

struct CalibrationModel {
  double weight = 0.0;
  double bias = 0.0;
  int n_same = 0;
  int n_diff = 0;
  Weighting weighting = Weighting::kEqualPrior;
  double l2 = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
};

namespace calib_detail {

inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

struct Problem {
  std::vector<double> s, y, c;
  double l2 = 0.0;

  double objective(double w, double b) const {
    double f = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      double z = w * s[i] + b;
      f += c[i] * (softplus(z) - y[i] * z);
    }
    return f + 0.5 * l2 * w * w;
  }

  // gradient (gw, gb) and Hessian (hww, hwb, hbb)
  void derivatives(double w, double b, std::array<double, 2>& g, std::array<double, 3>& h) const {
    g = {l2 * w, 0.0};
    h = {l2, 0.0, 0.0};
    for (std::size_t i = 0; i < s.size(); ++i) {
      double p = sigmoid(w * s[i] + b);
      double r = c[i] * (p - y[i]);
      double v = c[i] * p * (1.0 - p);
      g[0] += r * s[i];
      g[1] += r;
      h[0] += v * s[i] * s[i];
      h[1] += v * s[i];
      h[2] += v;
    }
  }
};

inline Problem make_problem(std::span<const ScoredTrial> scored, const CalibrationConfig& cfg,
                            int& n_same, int& n_diff) {
  n_same = n_diff = 0;
  for (const auto& t : scored) (t.trial.label == Label::kSameOrigin ? n_same : n_diff)++;
  if (n_same == 0 || n_diff == 0)
    throw DegenerateDataError("fit_calibration: need at least one trial of each label (got " +
                              std::to_string(n_same) + " same-origin, " +
                              std::to_string(n_diff) + " different-origin)");
  Problem p;
  p.l2 = cfg.l2;
  p.s.reserve(scored.size());
  bool all_equal = true;
  for (const auto& t : scored) {
    if (!std::isfinite(t.score)) throw NumericError("fit_calibration: non-finite score");
    bool same = t.trial.label == Label::kSameOrigin;
    p.s.push_back(t.score);
    p.y.push_back(same ? 1.0 : 0.0);
    p.c.push_back(cfg.weighting == Weighting::kUnweighted ? 1.0 : 0.5 / (same ? n_same : n_diff));
    all_equal = all_equal && t.score == scored.front().score;
  }
  if (all_equal) throw DegenerateDataError("fit_calibration: all scores identical");
  return p;
}

}  // namespace calib_detail

// Minimizes the (optionally class-weighted, optionally L2-penalized) binary
// cross-entropy of labels against posterior(score) by damped Newton steps
// with backtracking. Starts from w = 0, b = weighted prior log-odds.
inline CalibrationModel fit_calibration(std::span<const ScoredTrial> scored,
                                        const CalibrationConfig& cfg = {}) {
  using namespace calib_detail;
  if (!(cfg.l2 >= 0)) throw InvalidArgument("fit_calibration: l2 must be >= 0");
  CalibrationModel m;
  m.weighting = cfg.weighting;
  m.l2 = cfg.l2;
  auto prob = make_problem(scored, cfg, m.n_same, m.n_diff);

  double cs = 0.0, cd = 0.0;
  for (std::size_t i = 0; i < prob.c.size(); ++i) (prob.y[i] > 0 ? cs : cd) += prob.c[i];
  double w = 0.0, b = std::log(cs / cd);
  double f = prob.objective(w, b);
  std::array<double, 2> g{};
  std::array<double, 3> h{};
  double gnorm = 0.0;
  for (int it = 0; it <= cfg.max_iterations; ++it) {
    prob.derivatives(w, b, g, h);
    gnorm = std::hypot(g[0], g[1]);
    m.iterations = it;
    if (gnorm < cfg.gradient_tolerance) {
      m.weight = w;
      m.bias = b;
      m.gradient_norm = gnorm;
      return m;
    }
    if (it == cfg.max_iterations) break;

    // Levenberg damping keeps the 2x2 system positive definite.
    double mu = 0.0;
    double dw = 0.0, db = 0.0;
    for (int tries = 0; tries < 60; ++tries) {
      double a = h[0] + mu, c = h[2] + mu, det = a * c - h[1] * h[1];
      if (det > 1e-300 * std::max(1.0, a * c) && a > 0) {
        dw = -(c * g[0] - h[1] * g[1]) / det;
        db = -(a * g[1] - h[1] * g[0]) / det;
        break;
      }
      mu = mu == 0.0 ? 1e-12 * std::max(1.0, h[0] + h[2]) : mu * 10.0;
    }

    double step = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 60; ++ls) {
      double nw = w + step * dw, nb = b + step * db;
      double nf = prob.objective(nw, nb);
      if (nf <= f + 1e-4 * step * (g[0] * dw + g[1] * db)) {
        w = nw;
        b = nb;
        f = nf;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  throw ConvergenceError("fit_calibration: no convergence, final gradient norm " +
                             std::to_string(gnorm),
                         gnorm);
}

inline double posterior(const CalibrationModel& model, double score, double clip = 1e-15) {
  double p = calib_detail::sigmoid(model.weight * score + model.bias);
  return std::clamp(p, clip, 1.0 - clip);
}

struct LikelihoodRatio {
  double lr = 1.0;
  double log10_lr = 0.0;
};

// Posterior odds; equal to the likelihood ratio under even priors.
inline LikelihoodRatio to_lr(double p_same) {
  if (!(p_same > 0.0 && p_same < 1.0))
    throw InvalidArgument("to_lr: probability must lie strictly inside (0, 1)");
  double lr = p_same / (1.0 - p_same);
  return {lr, std::log10(lr)};
}

inline double calibrated_log10_lr(const CalibrationModel& model, double score,
                                  double clip = 1e-15) {
  return to_lr(posterior(model, score, clip)).log10_lr;
}

inline nlohmann::ordered_json to_json(const CalibrationModel& m) {
  nlohmann::ordered_json j;
  j["weight"] = m.weight;
  j["bias"] = m.bias;
  j["n_same"] = m.n_same;
  j["n_diff"] = m.n_diff;
  j["weighting"] = std::string(to_string(m.weighting));
  j["l2"] = m.l2;
  return j;
}

inline CalibrationModel calibration_from_json(const nlohmann::json& j) {
  CalibrationModel m;
  try {
    m.weight = j.at("weight").get<double>();
    m.bias = j.at("bias").get<double>();
    m.n_same = j.at("n_same").get<int>();
    m.n_diff = j.at("n_diff").get<int>();
    m.weighting = parse_weighting(j.at("weighting").get<std::string>());
    m.l2 = j.at("l2").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("calibration model: ") + e.what());
  }
  if (!std::isfinite(m.weight) || !std::isfinite(m.bias))
    throw ValidationError("calibration model: non-finite parameters");
  return m;
}

inline void write_calibration(const CalibrationModel& m, const std::filesystem::path& path) {
  open_output(path) << to_json(m).dump(2) << '\n';
}

inline CalibrationModel read_calibration(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return calibration_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace fvc
