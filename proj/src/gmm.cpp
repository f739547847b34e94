#include "zood/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zood/stats.hpp"

namespace zood {

void GmmSpec::validate() const {
  if (m < 1 || d < 1) throw std::invalid_argument("GmmSpec: m and d must be >= 1");
  if (weights.size() != m) throw std::invalid_argument("GmmSpec: weights size != m");
  if (centers.rows() != m || centers.cols() != d)
    throw std::invalid_argument("GmmSpec: centers shape != m x d");
  if (diag_covs.rows() != m || diag_covs.cols() != d)
    throw std::invalid_argument("GmmSpec: diag_covs shape != m x d");
  if (std::fabs(weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("GmmSpec: weights must sum to 1");
  if ((weights.array() <= 0.0).any())
    throw std::invalid_argument("GmmSpec: weights must be positive");
  if ((diag_covs.array() <= 0.0).any())
    throw std::invalid_argument("GmmSpec: variances must be positive");
}

GmmSpec sample_gmm_spec(int max_dims, int max_clusters, Rng& rng) {
  if (max_dims < 1 || max_clusters < 1)
    throw std::invalid_argument("sample_gmm_spec: bounds must be >= 1");
  GmmSpec spec;
  spec.d = static_cast<int>(rng.uniform_int(1, max_dims));
  spec.m = static_cast<int>(rng.uniform_int(1, max_clusters));
  spec.weights = Vector::Constant(spec.m, 1.0 / spec.m);
  spec.centers.resize(spec.m, spec.d);
  spec.diag_covs.resize(spec.m, spec.d);
  for (int j = 0; j < spec.m; ++j)
    for (int k = 0; k < spec.d; ++k) spec.centers(j, k) = rng.uniform(-5.0, 5.0);
  for (int j = 0; j < spec.m; ++j)
    for (int k = 0; k < spec.d; ++k) spec.diag_covs(j, k) = rng.uniform_oc(0.1, 5.0);
  return spec;
}

double mahalanobis_sq(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& center,
                      const Eigen::Ref<const Vector>& diag_cov) {
  if (x.size() != center.size() || x.size() != diag_cov.size())
    throw std::invalid_argument("mahalanobis_sq: dimension mismatch");
  if ((diag_cov.array() <= 0.0).any())
    throw std::invalid_argument("mahalanobis_sq: variances must be positive");
  return ((x - center).array().square() / diag_cov.array()).sum();
}

bool is_outlier_at_threshold(const Eigen::Ref<const Vector>& x, const GmmSpec& spec,
                             double threshold) {
  if (x.size() != spec.d) throw std::invalid_argument("is_outlier: dimension mismatch");
  for (int j = 0; j < spec.m; ++j) {
    const double dist = mahalanobis_sq(x, spec.centers.row(j), spec.diag_covs.row(j));
    if (dist <= threshold) return false;  // inside some component's ball
  }
  return true;
}

bool is_outlier(const Eigen::Ref<const Vector>& x, const GmmSpec& spec, double alpha) {
  return is_outlier_at_threshold(x, spec, chi2_quantile(spec.d, alpha));
}

GmmSpec inflate_spec(const GmmSpec& spec, const std::vector<int>& dims, double factor) {
  if (dims.empty()) throw std::invalid_argument("inflate_spec: dims must be nonempty");
  if (!(factor > 1.0)) throw std::invalid_argument("inflate_spec: factor must be > 1");
  std::vector<int> seen;
  for (int k : dims) {
    if (k < 0 || k >= spec.d) throw std::invalid_argument("inflate_spec: dim out of range");
    if (std::find(seen.begin(), seen.end(), k) != seen.end())
      throw std::invalid_argument("inflate_spec: duplicate dim");
    seen.push_back(k);
  }
  GmmSpec out = spec;
  for (int j = 0; j < spec.m; ++j)
    for (int k : dims) out.diag_covs(j, k) *= factor;
  return out;
}

Vector sample_gmm_point(const GmmSpec& spec, Rng& rng) {
  // Component index from the weight vector, then per-dimension Gaussians.
  const double u = rng.uniform();
  int j = spec.m - 1;
  double acc = 0.0;
  for (int i = 0; i < spec.m; ++i) {
    acc += spec.weights[i];
    if (u < acc) {
      j = i;
      break;
    }
  }
  Vector x(spec.d);
  for (int k = 0; k < spec.d; ++k)
    x[k] = spec.centers(j, k) + std::sqrt(spec.diag_covs(j, k)) * rng.normal();
  return x;
}

LabeledDataset synthesize_dataset(const GmmSpec& spec, int samples_per_class, double alpha,
                                  Rng& rng, const SynthesisOptions& options) {
  if (samples_per_class < 1) throw std::invalid_argument("synthesize_dataset: S must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("synthesize_dataset: alpha must be in (0, 1)");
  spec.validate();

  const double threshold = chi2_quantile(spec.d, alpha);
  const long long budget = options.max_attempts_per_class > 0
                               ? options.max_attempts_per_class
                               : 1000LL * samples_per_class;

  MatrixRM inliers(samples_per_class, spec.d);
  long long attempts = 0;
  for (int i = 0; i < samples_per_class;) {
    if (++attempts > budget)
      throw SynthesisError("synthesize_dataset: inlier rejection budget exhausted");
    const Vector x = sample_gmm_point(spec, rng);
    if (!is_outlier_at_threshold(x, spec, threshold)) inliers.row(i++) = x;
  }

  const int ksize = static_cast<int>(rng.uniform_int(1, spec.d));
  std::vector<int> inflated = rng.sample_indices(spec.d, ksize);
  std::sort(inflated.begin(), inflated.end());
  const GmmSpec inflated_spec = inflate_spec(spec, inflated, options.inflation_factor);

  MatrixRM outliers(samples_per_class, spec.d);
  attempts = 0;
  for (int i = 0; i < samples_per_class;) {
    if (++attempts > budget)
      throw SynthesisError("synthesize_dataset: outlier rejection budget exhausted");
    const Vector x = sample_gmm_point(inflated_spec, rng);
    if (is_outlier_at_threshold(x, spec, threshold)) outliers.row(i++) = x;
  }

  LabeledDataset ds;
  ds.inflated_dims = inflated;
  ds.percentile = alpha;
  ds.source_spec = spec;
  const int total = 2 * samples_per_class;
  ds.features.resize(total, spec.d);
  ds.labels.resize(static_cast<std::size_t>(total));

  std::vector<int> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  if (options.shuffle) rng.shuffle(order);
  for (int r = 0; r < total; ++r) {
    const int src = order[static_cast<std::size_t>(r)];
    if (src < samples_per_class) {
      ds.features.row(r) = inliers.row(src);
      ds.labels[static_cast<std::size_t>(r)] = 0;
    } else {
      ds.features.row(r) = outliers.row(src - samples_per_class);
      ds.labels[static_cast<std::size_t>(r)] = 1;
    }
  }
  return ds;
}

}  // namespace zood
