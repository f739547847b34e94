#pragma once

// Independent brute-force oracles used to pin expected values. Everything in
// here recomputes from first principles and must stay decoupled from the
// library implementations it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace oracle {

// AUROC by scanning every (positive, negative) pair.
inline double auroc_pairwise(const std::vector<double>& scores, const std::vector<int>& labels) {
  double num = 0.0;
  long long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        num += 1.0;
      else if (scores[i] == scores[j])
        num += 0.5;
    }
  }
  return num / static_cast<double>(pairs);
}

// AUPR by enumerating every unique threshold and recounting from scratch.
inline double aupr_threshold_enum(const std::vector<double>& scores,
                                  const std::vector<int>& labels) {
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  const long long pos = std::count(labels.begin(), labels.end(), 1);
  double area = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    long long tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) (labels[i] == 1 ? tp : fp) += 1;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

// One-sided Wilcoxon p-value by enumerating all 2^n sign patterns.
inline double wilcoxon_enumerate(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) diffs.push_back(a[i] - b[i]);
  const int n = static_cast<int>(diffs.size());
  if (n == 0) return 1.0;

  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int x, int y) {
    return std::fabs(diffs[static_cast<std::size_t>(x)]) <
           std::fabs(diffs[static_cast<std::size_t>(y)]);
  });
  std::vector<double> rank(static_cast<std::size_t>(n));
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n &&
           std::fabs(diffs[static_cast<std::size_t>(idx[static_cast<std::size_t>(j + 1)])]) ==
               std::fabs(diffs[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]))
      ++j;
    const double avg = 0.5 * ((i + 1) + (j + 1));
    for (int k = i; k <= j; ++k) rank[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = avg;
    i = j + 1;
  }
  double w_obs = 0.0;
  for (int k = 0; k < n; ++k)
    if (diffs[static_cast<std::size_t>(k)] > 0.0) w_obs += rank[static_cast<std::size_t>(k)];

  long long ge = 0;
  const std::uint64_t patterns = 1ull << n;
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    double w = 0.0;
    for (int k = 0; k < n; ++k)
      if (mask & (1ull << k)) w += rank[static_cast<std::size_t>(k)];
    if (w >= w_obs) ++ge;
  }
  return static_cast<double>(ge) / static_cast<double>(patterns);
}

// Ranks per column via plain sort, ties averaged; independent of the library.
inline std::vector<double> average_ranks_sort(const std::vector<std::vector<double>>& table,
                                              bool higher_is_better) {
  const std::size_t methods = table.size();
  const std::size_t datasets = table[0].size();
  std::vector<double> sums(methods, 0.0);
  for (std::size_t d = 0; d < datasets; ++d) {
    std::vector<std::pair<double, std::size_t>> column;
    for (std::size_t m = 0; m < methods; ++m)
      column.emplace_back(higher_is_better ? -table[m][d] : table[m][d], m);
    std::sort(column.begin(), column.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    std::size_t i = 0;
    while (i < methods) {
      std::size_t j = i;
      while (j + 1 < methods && column[j + 1].first == column[i].first) ++j;
      const double avg = 0.5 * ((i + 1) + (j + 1));
      for (std::size_t k = i; k <= j; ++k) sums[column[k].second] += avg;
      i = j + 1;
    }
  }
  for (auto& s : sums) s /= static_cast<double>(datasets);
  return sums;
}

}  // namespace oracle
