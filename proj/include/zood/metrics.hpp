#pragma once

#include <vector>

#include "zood/data.hpp"

namespace zood {

// Mann-Whitney form: (#concordant pairs + 0.5 #ties) / (P * N).
// Requires both classes present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Non-interpolated area under the precision-recall curve; descending unique
// score thresholds, ties processed as one block. Requires positives.
double aupr(const std::vector<double>& scores, const std::vector<int>& labels);

// F1 when exactly the top-k scores are flagged, k = true outlier count; ties
// at the cut go to the lower index. Precision = recall = F1 at this k.
double f1_at_true_count(const std::vector<double>& scores, const std::vector<int>& labels);

// One-sided paired Wilcoxon signed-rank p-value for H1: median(a - b) > 0.
// Zero differences dropped; exact enumeration for n <= 20 after drops, else
// normal approximation with tie-corrected variance and continuity correction.
double wilcoxon_one_sided(const std::vector<double>& a, const std::vector<double>& b);

// Per-dataset ranks (1 = best, ties averaged), then the mean across datasets.
// metric_table is methods x datasets.
std::vector<double> average_ranks(const MatrixRM& metric_table, bool higher_is_better);

struct ProfilePoint {
  double tau = 1.0;
  double cdf = 0.0;
};

struct PerformanceProfile {
  std::vector<std::vector<ProfilePoint>> series;  // per method, tau ascending
  std::vector<double> area;  // area under each CDF over the observed tau range
};

// Suboptimality ratios tau >= 1 relative to the per-dataset best method and
// their empirical CDFs.
PerformanceProfile performance_profile(const MatrixRM& metric_table, bool higher_is_better);

}  // namespace zood
