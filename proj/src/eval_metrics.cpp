// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#include "adode/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "adode/error.hpp"

namespace adode {

std::size_t LabeledScores::positives() const {
  return static_cast<std::size_t>(std::count(label.begin(), label.end(), 1));
}

void LabeledScores::validate() const {
  if (score.size() != label.size()) throw ConfigError("metrics: score/label length mismatch");
  if (score.empty()) throw ConfigError("metrics: no samples");
  for (int l : label) {
    if (l != 0 && l != 1) throw ConfigError("metrics: labels must be 0 or 1");
  }
  for (double s : score) {
    if (std::isnan(s)) throw ConfigError("metrics: NaN score");
  }
}

namespace {

void require_both_classes(const LabeledScores& data, const char* what) {
  data.validate();
  const std::size_t pos = data.positives();
  if (pos == 0 || pos == data.size()) {
    throw ConfigError(std::string(what) + ": both normal and abnormal samples are required");
  }
}

std::vector<std::size_t> order_by_score(const LabeledScores& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return data.score[a] < data.score[b]; });
  return idx;
}

}  // namespace

double auroc(const LabeledScores& data) {
  require_both_classes(data, "auroc");
  const auto idx = order_by_score(data);
  const std::size_t n = idx.size();
  double rank_sum = 0.0;  // sum of 1-based average ranks of the positives
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && data.score[idx[j]] == data.score[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (data.label[idx[k]] == 1) rank_sum += avg_rank;
    }
    i = j;
  }
  const auto pos = static_cast<double>(data.positives());
  const double neg = static_cast<double>(n) - pos;
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

F1Result best_f1(const LabeledScores& data) {
  require_both_classes(data, "best_f1");
  std::vector<double> s = data.score;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());

  const std::size_t pos = data.positives();
  const auto idx = order_by_score(data);
  // Walk thresholds in ascending order; `below` counts samples with
  // score < threshold, split by class.
  std::size_t below_pos = 0, below_neg = 0, cursor = 0;
  const double inf = std::numeric_limits<double>::infinity();
  F1Result best{-1.0, 0.0};
  auto consider = [&](double thr) {
    while (cursor < idx.size() && data.score[idx[cursor]] < thr) {
      (data.label[idx[cursor]] == 1 ? below_pos : below_neg) += 1;
      ++cursor;
    }
    const std::size_t tp = pos - below_pos;
    const std::size_t fp = (data.size() - pos) - below_neg;
    const std::size_t fn = below_pos;
    const double f1 = f1_score(tp, fp, fn);
    if (f1 > best.f1) best = {f1, thr};
  };
  consider(-inf);
  for (std::size_t i = 0; i + 1 < s.size(); ++i) consider(0.5 * (s[i] + s[i + 1]));
  consider(inf);
  return best;
}

double accuracy_at(const LabeledScores& data, double threshold) {
  data.validate();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if ((data.score[i] >= threshold) == (data.label[i] == 1)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<RocPoint> roc_curve(const LabeledScores& data) {
  require_both_classes(data, "roc_curve");
  const auto pos = static_cast<double>(data.positives());
  const double neg = static_cast<double>(data.size()) - pos;
  auto idx = order_by_score(data);
  std::reverse(idx.begin(), idx.end());
  std::vector<RocPoint> out{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double thr = data.score[idx[i]];
    while (i < idx.size() && data.score[idx[i]] == thr) {
      (data.label[idx[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    out.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos, thr});
  }
  return out;
}

ScoreHistogram score_histogram(const LabeledScores& data, std::size_t bins) {
  data.validate();
  if (bins == 0) throw ConfigError("histogram: bins must be >= 1");
  const auto [mn, mx] = std::minmax_element(data.score.begin(), data.score.end());
  ScoreHistogram h{*mn, *mx, std::vector<std::size_t>(bins, 0), std::vector<std::size_t>(bins, 0)};
  const double width = (h.hi - h.lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::size_t b = 0;
    if (width > 0.0) {
      b = static_cast<std::size_t>((data.score[i] - h.lo) / width);
      b = std::min(b, bins - 1);
    }
    (data.label[i] == 1 ? h.abnormal : h.normal)[b] += 1;
  }
  return h;
}

MetricSummary summarize(const LabeledScores& data) {
  MetricSummary m;
  m.auroc = auroc(data);
  const F1Result f = best_f1(data);
  m.f1 = f.f1;
  m.threshold = f.threshold;
  m.accuracy = accuracy_at(data, f.threshold);
  m.n_abnormal = data.positives();
  m.n_normal = data.size() - m.n_abnormal;
  return m;
}

void export_roc_hist(const LabeledScores& data, const std::filesystem::path& stem) {
  const auto roc = roc_curve(data);
  const auto hist = score_histogram(data);
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream r(stem.string() + "_roc.csv");
  std::ofstream h(stem.string() + "_hist.csv");
  if (!r || !h) throw ConfigError("cannot write ROC/histogram files under " + stem.string());
  r << std::setprecision(17) << "fpr,tpr,threshold\n";
  for (const auto& p : roc) r << p.fpr << ',' << p.tpr << ',' << p.threshold << '\n';
  h << std::setprecision(17) << "bin_lo,bin_hi,normal,abnormal\n";
  const double width = (hist.hi - hist.lo) / static_cast<double>(hist.normal.size());
  for (std::size_t b = 0; b < hist.normal.size(); ++b) {
    h << hist.lo + width * static_cast<double>(b) << ',' << hist.lo + width * static_cast<double>(b + 1)
      << ',' << hist.normal[b] << ',' << hist.abnormal[b] << '\n';
  }
}

}  // namespace adode
