// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace adode {

// Scores with binary labels: 1 = abnormal (positive class), 0 = normal.
// Higher scores are more anomalous.
struct LabeledScores {
  std::vector<double> score;
  std::vector<int> label;

  std::size_t size() const noexcept { return score.size(); }
  std::size_t positives() const;
  // Throws ConfigError on length mismatch, empty input or labels outside {0, 1}.
  void validate() const;
};

// Mann-Whitney statistic P(s_abnormal > s_normal) + 1/2 P(equal) via
// average ranks. Throws ConfigError unless both classes are present.
double auroc(const LabeledScores& data);

struct F1Result {
  double f1 = 0.0;
  double threshold = 0.0;
};

// Exhaustive sweep over -inf, the midpoints between consecutive distinct
// scores and +inf, predicting abnormal when score >= threshold. Returns the
// best F1 and the smallest threshold that reaches it.
F1Result best_f1(const LabeledScores& data);

// F1 from confusion counts, 0 when there are no true positives.
double f1_score(std::size_t tp, std::size_t fp, std::size_t fn);

// Fraction of samples with (score >= threshold) == (label == 1).
double accuracy_at(const LabeledScores& data, double threshold);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

// One point per candidate threshold, from +inf (0, 0) down to the smallest score (1, 1).
std::vector<RocPoint> roc_curve(const LabeledScores& data);

struct ScoreHistogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> normal;
  std::vector<std::size_t> abnormal;
};

inline constexpr std::size_t kHistogramBins = 50;

// Per-class counts over kHistogramBins equal bins spanning the pooled range.
ScoreHistogram score_histogram(const LabeledScores& data, std::size_t bins = kHistogramBins);

struct MetricSummary {
  double auroc = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
  double accuracy = 0.0;
  std::size_t n_normal = 0;
  std::size_t n_abnormal = 0;
};

MetricSummary summarize(const LabeledScores& data);

// Writes `<stem>_roc.csv` (fpr,tpr,threshold) and `<stem>_hist.csv`
// (bin_lo,bin_hi,normal,abnormal) next to each other.
void export_roc_hist(const LabeledScores& data, const std::filesystem::path& stem);

}  // namespace adode
