#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace zood {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// A mixture hypothesis: m diagonal-covariance Gaussians in d dimensions.
struct GmmSpec {
  int m = 0;
  int d = 0;
  Vector weights;      // m, sums to 1
  MatrixRM centers;    // m x d
  MatrixRM diag_covs;  // m x d, strictly positive variances

  // Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

// Affine map x -> W x + b with W = U diag(lambda) U^T, |lambda| in
// [eigen_floor, 1], so W is symmetric and invertible by construction.
struct LinearMap {
  int dim = 0;
  MatrixRM w;          // dim x dim, symmetric
  Vector b;            // dim
  double eigen_floor = 0.1;
};

enum class TransformMode { kSubspace, kFull };

// Dense covariance block W Sigma W^T kept on transformed datasets so labels
// can be re-derived; the prior itself only ever produces diagonal covariances.
struct DenseBlockCov {
  std::vector<int> dims;         // index set the block covers (ascending)
  std::vector<MatrixRM> blocks;  // per component, |dims| x |dims|
};

struct LabeledDataset {
  MatrixRM features;              // n x d
  std::vector<int> labels;        // 0 inlier, 1 outlier
  std::vector<int> inflated_dims; // K, the dims inflated for outlier synthesis
  double percentile = 0.9;        // alpha
  GmmSpec source_spec;            // the (possibly transformed) labeling spec
  std::optional<DenseBlockCov> transformed_cov;
  std::optional<LinearMap> applied_map;
  std::optional<TransformMode> applied_mode;

  int n() const { return static_cast<int>(features.rows()); }
  int d() const { return static_cast<int>(features.cols()); }
};

}  // namespace zood
