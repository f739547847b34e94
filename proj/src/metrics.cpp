#include "zood/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "zood/stats.hpp"

namespace zood {

namespace {

void check_scores_labels(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("metrics: scores/labels length mismatch");
  if (scores.empty()) throw std::invalid_argument("metrics: empty input");
  for (int y : labels)
    if (y != 0 && y != 1) throw std::invalid_argument("metrics: labels must be 0/1");
}

// Indices sorted by score descending, ties kept in index order.
std::vector<std::size_t> order_desc(const std::vector<double>& scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_scores_labels(scores, labels);
  const long long pos = std::count(labels.begin(), labels.end(), 1);
  const long long neg = static_cast<long long>(labels.size()) - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("auroc: needs both classes");

  // Average ranks (ascending) of the positive scores; ties share a rank, so
  // the numerator counts concordant pairs plus half the tied ones.
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (labels[idx[k]] == 1) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double aupr(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_scores_labels(scores, labels);
  const long long pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0) throw std::invalid_argument("aupr: needs at least one positive");

  const std::vector<std::size_t> idx = order_desc(scores);
  double area = 0.0;
  double prev_recall = 0.0;
  long long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) (labels[idx[k]] == 1 ? tp : fp) += 1;
    const double recall = static_cast<double>(tp) / static_cast<double>(pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j + 1;
  }
  return area;
}

double f1_at_true_count(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_scores_labels(scores, labels);
  const long long pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0) throw std::invalid_argument("f1_at_true_count: needs at least one positive");

  const std::vector<std::size_t> idx = order_desc(scores);
  long long tp = 0;
  for (long long k = 0; k < pos; ++k)
    if (labels[idx[static_cast<std::size_t>(k)]] == 1) ++tp;
  // Flagging exactly pos points makes precision = recall = tp / pos.
  return static_cast<double>(tp) / static_cast<double>(pos);
}

double wilcoxon_one_sided(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: length mismatch");

  std::vector<double> diffs;
  diffs.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  const int n = static_cast<int>(diffs.size());
  if (n == 0) return 1.0;  // no evidence either way

  // Rank |d| ascending; doubled ranks stay integral under tie averaging.
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int x, int y) {
    return std::fabs(diffs[static_cast<std::size_t>(x)]) <
           std::fabs(diffs[static_cast<std::size_t>(y)]);
  });
  std::vector<long long> rank2(static_cast<std::size_t>(n));  // 2 * rank
  std::vector<long long> tie_sizes;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && std::fabs(diffs[static_cast<std::size_t>(idx[static_cast<std::size_t>(j + 1)])]) ==
                            std::fabs(diffs[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]))
      ++j;
    const long long doubled = (i + 1) + (j + 1);  // twice the average rank
    for (int k = i; k <= j; ++k) rank2[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = doubled;
    tie_sizes.push_back(j - i + 1);
    i = j + 1;
  }

  long long w2 = 0;  // 2 * W+
  for (int k = 0; k < n; ++k)
    if (diffs[static_cast<std::size_t>(k)] > 0.0) w2 += rank2[static_cast<std::size_t>(k)];

  if (n <= 20) {
    // Exact tail of the permutation null: distribution of sum of doubled
    // ranks over all 2^n sign patterns, counted by dynamic programming.
    long long max2 = 0;
    for (int k = 0; k < n; ++k) max2 += rank2[static_cast<std::size_t>(k)];
    std::vector<double> count(static_cast<std::size_t>(max2 + 1), 0.0);
    count[0] = 1.0;
    long long reach = 0;
    for (int k = 0; k < n; ++k) {
      const long long r = rank2[static_cast<std::size_t>(k)];
      for (long long s = reach; s >= 0; --s)
        if (count[static_cast<std::size_t>(s)] > 0.0)
          count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
      reach += r;
    }
    double ge = 0.0;
    for (long long s = w2; s <= max2; ++s) ge += count[static_cast<std::size_t>(s)];
    return ge / std::pow(2.0, n);
  }

  // Normal approximation with tie-corrected variance, continuity-corrected.
  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
  for (long long t : tie_sizes) {
    const double td = static_cast<double>(t);
    var -= (td * td * td - td) / 48.0;
  }
  const double w = 0.5 * static_cast<double>(w2);
  const double z = (w - mean - 0.5) / std::sqrt(var);
  return 1.0 - normal_cdf(z);
}

std::vector<double> average_ranks(const MatrixRM& metric_table, bool higher_is_better) {
  const int methods = static_cast<int>(metric_table.rows());
  const int datasets = static_cast<int>(metric_table.cols());
  if (methods == 0 || datasets == 0) throw std::invalid_argument("average_ranks: empty table");

  std::vector<double> sums(static_cast<std::size_t>(methods), 0.0);
  std::vector<int> idx(static_cast<std::size_t>(methods));
  for (int d = 0; d < datasets; ++d) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int x, int y) {
      return higher_is_better ? metric_table(x, d) > metric_table(y, d)
                              : metric_table(x, d) < metric_table(y, d);
    });
    int i = 0;
    while (i < methods) {
      int j = i;
      while (j + 1 < methods &&
             metric_table(idx[static_cast<std::size_t>(j + 1)], d) ==
                 metric_table(idx[static_cast<std::size_t>(i)], d))
        ++j;
      const double avg_rank = 0.5 * ((i + 1) + (j + 1));
      for (int k = i; k <= j; ++k) sums[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] += avg_rank;
      i = j + 1;
    }
  }
  for (auto& s : sums) s /= datasets;
  return sums;
}

PerformanceProfile performance_profile(const MatrixRM& metric_table, bool higher_is_better) {
  const int methods = static_cast<int>(metric_table.rows());
  const int datasets = static_cast<int>(metric_table.cols());
  if (methods == 0 || datasets == 0)
    throw std::invalid_argument("performance_profile: empty table");
  if ((metric_table.array() <= 0.0).any())
    throw std::invalid_argument("performance_profile: values must be positive");

  MatrixRM tau(methods, datasets);
  for (int d = 0; d < datasets; ++d) {
    const double best =
        higher_is_better ? metric_table.col(d).maxCoeff() : metric_table.col(d).minCoeff();
    for (int m = 0; m < methods; ++m)
      tau(m, d) = higher_is_better ? best / metric_table(m, d) : metric_table(m, d) / best;
  }
  const double tau_max = tau.maxCoeff();

  PerformanceProfile profile;
  profile.series.resize(static_cast<std::size_t>(methods));
  profile.area.resize(static_cast<std::size_t>(methods));
  for (int m = 0; m < methods; ++m) {
    std::vector<double> taus(static_cast<std::size_t>(datasets));
    for (int d = 0; d < datasets; ++d) taus[static_cast<std::size_t>(d)] = tau(m, d);
    std::sort(taus.begin(), taus.end());
    auto& series = profile.series[static_cast<std::size_t>(m)];
    series.resize(taus.size());
    for (std::size_t i = 0; i < taus.size(); ++i)
      series[i] = {taus[i], static_cast<double>(i + 1) / datasets};
    // Area under the step CDF over [1, tau_max].
    double area = 0.0;
    double prev_tau = 1.0;
    double prev_cdf = 0.0;
    for (const auto& point : series) {
      area += (point.tau - prev_tau) * prev_cdf;
      prev_tau = point.tau;
      prev_cdf = point.cdf;
    }
    area += (tau_max - prev_tau) * prev_cdf;
    profile.area[static_cast<std::size_t>(m)] = area;
  }
  return profile;
}

}  // namespace zood
