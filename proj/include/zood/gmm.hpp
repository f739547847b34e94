#pragma once

#include <stdexcept>

#include "zood/data.hpp"
#include "zood/rng.hpp"

namespace zood {

// Rejection sampling ran out of attempts; the caller may redraw the spec.
struct SynthesisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// d ~ U{1..max_dims}, m ~ U{1..max_clusters}, centers U[-5,5],
// variances U(0.1,5], uniform weights.
GmmSpec sample_gmm_spec(int max_dims, int max_clusters, Rng& rng);

// Squared Mahalanobis distance sum_k (x_k - mu_k)^2 / var_k.
double mahalanobis_sq(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& center,
                      const Eigen::Ref<const Vector>& diag_cov);

// Outlier iff the squared distance exceeds chi2_quantile(d, alpha) for every
// component (strict >; boundary points are inliers).
bool is_outlier(const Eigen::Ref<const Vector>& x, const GmmSpec& spec, double alpha);

// Same rule with the chi-square threshold already in hand.
bool is_outlier_at_threshold(const Eigen::Ref<const Vector>& x, const GmmSpec& spec,
                             double threshold);

// Variances on dims in `dims` multiplied by `factor`; centers/weights shared.
GmmSpec inflate_spec(const GmmSpec& spec, const std::vector<int>& dims, double factor);

// One draw from the mixture.
Vector sample_gmm_point(const GmmSpec& spec, Rng& rng);

struct SynthesisOptions {
  bool shuffle = true;            // interleave classes; false keeps inliers first
  double inflation_factor = 5.0;
  long long max_attempts_per_class = 0;  // 0 -> 1000 * samples_per_class
};

// S inliers from the spec plus S outliers from the inflated spec, both
// accepted against the ORIGINAL spec at percentile alpha.
LabeledDataset synthesize_dataset(const GmmSpec& spec, int samples_per_class, double alpha,
                                  Rng& rng, const SynthesisOptions& options = {});

}  // namespace zood
