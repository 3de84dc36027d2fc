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

// Evaluation metrics over scored trials and log10 likelihood ratios:
// Cllr, minimum Cllr via pool-adjacent-violators, EER and tippet curves.
//
// Cllr uses the base-2 logarithmic cost
//   1/2 [ mean_so log2(1 + 1/LR) + mean_do log2(1 + LR) ],
// so uninformative LR = 1 output costs exactly 1.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "fvc/core_model.hpp"
#include "fvc/error.hpp"
#include "fvc/io.hpp"

namespace fvc {

struct LabeledLogLRs {
  std::vector<double> same;       // log10 LR of same-origin trials
  std::vector<double> different;  // log10 LR of different-origin trials
};

namespace metrics_detail {

// log2(1 + 10^x), stable for large |x|.
inline double log2_1p_pow10(double x) {
  double z = x * std::numbers::ln10;
  double sp = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
  return sp / std::numbers::ln2;
}

inline void require_both(std::size_t n_same, std::size_t n_diff, const char* who) {
  if (n_same == 0 || n_diff == 0)
    throw InvalidArgument(std::string(who) + ": need at least one trial of each label");
}

}  // namespace metrics_detail

inline double cllr(const LabeledLogLRs& lrs) {
  using namespace metrics_detail;
  require_both(lrs.same.size(), lrs.different.size(), "cllr");
  double a = 0.0, b = 0.0;
  for (double l : lrs.same) {
    if (!std::isfinite(l)) throw InvalidArgument("cllr: non-finite log LR");
    a += log2_1p_pow10(-l);
  }
  for (double l : lrs.different) {
    if (!std::isfinite(l)) throw InvalidArgument("cllr: non-finite log LR");
    b += log2_1p_pow10(l);
  }
  return 0.5 * (a / static_cast<double>(lrs.same.size()) +
                b / static_cast<double>(lrs.different.size()));
}

// Isotonic (non-decreasing in score) least-squares fit of the 0/1 labels.
// Equal scores are pooled into one block first. Output follows input order.
inline std::vector<double> pav(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("pav: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  struct Block {
    double sum;       // number of same-origin members
    double count;
    std::size_t end;  // one past the last position in `order`
  };
  std::vector<Block> stack;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      sum += labels[order[j]] == Label::kSameOrigin ? 1.0 : 0.0;
      ++j;
    }
    stack.push_back({sum, static_cast<double>(j - i), j});
    while (stack.size() >= 2) {
      auto& prev = stack[stack.size() - 2];
      auto& last = stack.back();
      if (prev.sum * last.count <= last.sum * prev.count) break;
      prev.sum += last.sum;
      prev.count += last.count;
      prev.end = last.end;
      stack.pop_back();
    }
    i = j;
  }

  std::vector<double> out(n);
  std::size_t pos = 0;
  for (const auto& blk : stack) {
    double v = blk.sum / blk.count;
    for (; pos < blk.end; ++pos) out[order[pos]] = v;
  }
  return out;
}

inline std::vector<double> scores_of(std::span<const ScoredTrial> scored) {
  std::vector<double> s;
  s.reserve(scored.size());
  for (const auto& t : scored) s.push_back(t.score);
  return s;
}

inline std::vector<Label> labels_of(std::span<const ScoredTrial> scored) {
  std::vector<Label> l;
  l.reserve(scored.size());
  for (const auto& t : scored) l.push_back(t.trial.label);
  return l;
}

// PAV posteriors converted to LRs with the empirical prior odds divided out.
// Pure blocks (posterior 0 or 1) contribute their exact zero-cost limits.
inline double cllr_min(std::span<const double> scores, std::span<const Label> labels) {
  std::size_t n_same = 0;
  for (auto l : labels) n_same += l == Label::kSameOrigin;
  const std::size_t n_diff = labels.size() - n_same;
  metrics_detail::require_both(n_same, n_diff, "cllr_min");
  auto post = pav(scores, labels);
  const double prior_odds = static_cast<double>(n_same) / static_cast<double>(n_diff);
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < post.size(); ++i) {
    double p = post[i];
    if (labels[i] == Label::kSameOrigin) {
      if (p < 1.0) a += std::log2(1.0 + prior_odds * (1.0 - p) / p);
    } else {
      if (p > 0.0) b += std::log2(1.0 + p / ((1.0 - p) * prior_odds));
    }
  }
  return 0.5 * (a / static_cast<double>(n_same) + b / static_cast<double>(n_diff));
}

inline double cllr_min(std::span<const ScoredTrial> scored) {
  return cllr_min(scores_of(scored), labels_of(scored));
}

// Accept iff score >= t, for t over every distinct score plus +infinity.
// Returns the FAR = FRR crossing, linearly interpolated between the two
// adjacent operating points that bracket it.
inline double eer(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("eer: size mismatch");
  std::vector<double> same, diff;
  for (std::size_t i = 0; i < scores.size(); ++i)
    (labels[i] == Label::kSameOrigin ? same : diff).push_back(scores[i]);
  metrics_detail::require_both(same.size(), diff.size(), "eer");
  std::sort(same.begin(), same.end());
  std::sort(diff.begin(), diff.end());
  std::vector<double> thresholds(scores.begin(), scores.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const auto ns = static_cast<double>(same.size());
  const auto nd = static_cast<double>(diff.size());
  double prev_far = 1.0, prev_frr = 0.0;
  for (std::size_t k = 0; k <= thresholds.size(); ++k) {
    double far = 0.0, frr = 1.0;
    if (k < thresholds.size()) {
      double t = thresholds[k];
      frr = static_cast<double>(std::lower_bound(same.begin(), same.end(), t) - same.begin()) / ns;
      far = static_cast<double>(diff.end() - std::lower_bound(diff.begin(), diff.end(), t)) / nd;
    }
    double d = frr - far;
    if (d >= 0.0) {
      if (d == 0.0 || k == 0) return far;
      double d_prev = prev_frr - prev_far;  // < 0
      double alpha = -d_prev / (d - d_prev);
      return prev_far + alpha * (far - prev_far);
    }
    prev_far = far;
    prev_frr = frr;
  }
  return prev_far;  // unreachable: the +infinity point has d = 1
}

inline double eer(std::span<const ScoredTrial> scored) {
  return eer(scores_of(scored), labels_of(scored));
}

// ---------------------------------------------------------------------------
// Tippet

struct TippetCurve {
  std::vector<double> thresholds;
  std::vector<double> p_so_ge;
  std::vector<double> p_do_ge;
};

// Survival fractions per label on a grid from min-0.5 to max+0.5 log10 units.
inline TippetCurve tippet(const LabeledLogLRs& lrs, double step = 0.01) {
  if (!(step > 0)) throw InvalidArgument("tippet: step must be positive");
  metrics_detail::require_both(lrs.same.size(), lrs.different.size(), "tippet");
  auto so = lrs.same, dd = lrs.different;
  std::sort(so.begin(), so.end());
  std::sort(dd.begin(), dd.end());
  for (double v : so)
    if (!std::isfinite(v)) throw InvalidArgument("tippet: non-finite log LR");
  for (double v : dd)
    if (!std::isfinite(v)) throw InvalidArgument("tippet: non-finite log LR");
  double lo = std::min(so.front(), dd.front()) - 0.5;
  double hi = std::max(so.back(), dd.back()) + 0.5;
  auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  TippetCurve tc;
  tc.thresholds.reserve(count);
  auto frac_ge = [](const std::vector<double>& v, double t) {
    auto it = std::lower_bound(v.begin(), v.end(), t);
    return static_cast<double>(v.end() - it) / static_cast<double>(v.size());
  };
  for (std::size_t i = 0; i < count; ++i) {
    double t = lo + static_cast<double>(i) * step;
    tc.thresholds.push_back(t);
    tc.p_so_ge.push_back(frac_ge(so, t));
    tc.p_do_ge.push_back(frac_ge(dd, t));
  }
  return tc;
}

inline void write_tippet_csv(const TippetCurve& tc, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "threshold_log10lr,p_so_ge,p_do_ge\n";
  for (std::size_t i = 0; i < tc.thresholds.size(); ++i)
    os << format_double(tc.thresholds[i]) << ',' << format_double(tc.p_so_ge[i]) << ','
       << format_double(tc.p_do_ge[i]) << '\n';
  open_output(path) << os.str();
}

}  // namespace fvc
