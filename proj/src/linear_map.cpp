#include "zood/linear_map.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "zood/gmm.hpp"
#include "zood/stats.hpp"

namespace zood {

LinearMap sample_linear_map(int dim, Rng& rng) {
  if (dim < 1) throw std::invalid_argument("sample_linear_map: dim must be >= 1");
  Eigen::MatrixXd g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd u = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < dim; ++i)
    if (r(i, i) < 0.0) u.col(i) = -u.col(i);

  Vector lambda(dim);
  for (int i = 0; i < dim; ++i) {
    const double mag = rng.uniform(0.1, 1.0);
    lambda[i] = rng.uniform() < 0.5 ? -mag : mag;
  }

  LinearMap map;
  map.dim = dim;
  map.w = u * lambda.asDiagonal() * u.transpose();
  map.b.resize(dim);
  for (int i = 0; i < dim; ++i) map.b[i] = rng.uniform(-1.0, 1.0);
  map.eigen_floor = 0.1;
  return map;
}

namespace {

std::vector<int> target_dims(const LabeledDataset& ds, const LinearMap& map, TransformMode mode) {
  if (mode == TransformMode::kSubspace) {
    if (map.dim != static_cast<int>(ds.inflated_dims.size()))
      throw std::invalid_argument("apply_map: subspace map dim must equal |inflated_dims|");
    return ds.inflated_dims;
  }
  if (map.dim != ds.d()) throw std::invalid_argument("apply_map: full map dim must equal d");
  std::vector<int> dims(static_cast<std::size_t>(ds.d()));
  for (int k = 0; k < ds.d(); ++k) dims[static_cast<std::size_t>(k)] = k;
  return dims;
}

// Per-component covariance over `dims` in dense form, honoring an existing block.
MatrixRM covariance_on_dims(const GmmSpec& spec, const std::optional<DenseBlockCov>& block,
                            const std::vector<int>& dims, int component) {
  const int k = static_cast<int>(dims.size());
  MatrixRM cov = MatrixRM::Zero(k, k);
  for (int a = 0; a < k; ++a)
    cov(a, a) = spec.diag_covs(component, dims[static_cast<std::size_t>(a)]);
  if (block) {
    for (std::size_t a = 0; a < block->dims.size(); ++a) {
      const auto ia = std::find(dims.begin(), dims.end(), block->dims[a]);
      if (ia == dims.end())
        throw std::invalid_argument("apply_map: map dims must cover the existing block");
      for (std::size_t b = 0; b < block->dims.size(); ++b) {
        const auto ib = std::find(dims.begin(), dims.end(), block->dims[b]);
        cov(ia - dims.begin(), ib - dims.begin()) =
            block->blocks[static_cast<std::size_t>(component)](static_cast<Eigen::Index>(a),
                                                               static_cast<Eigen::Index>(b));
      }
    }
  }
  return cov;
}

}  // namespace

LabeledDataset apply_map(const LabeledDataset& ds, const LinearMap& map, TransformMode mode) {
  const std::vector<int> dims = target_dims(ds, map, mode);
  const int k = static_cast<int>(dims.size());

  LabeledDataset out = ds;

  // Gather the affected columns, transform, scatter back.
  MatrixRM sub(ds.n(), k);
  for (int a = 0; a < k; ++a) sub.col(a) = ds.features.col(dims[static_cast<std::size_t>(a)]);
  MatrixRM transformed = sub * map.w.transpose();
  transformed.rowwise() += map.b.transpose();
  for (int a = 0; a < k; ++a) out.features.col(dims[static_cast<std::size_t>(a)]) = transformed.col(a);

  // Transformed mixture: centers W mu + b on the affected dims, covariance
  // W Sigma W^T kept as a dense block.
  DenseBlockCov new_block;
  new_block.dims = dims;
  new_block.blocks.reserve(static_cast<std::size_t>(ds.source_spec.m));
  for (int j = 0; j < ds.source_spec.m; ++j) {
    const MatrixRM cov = covariance_on_dims(ds.source_spec, ds.transformed_cov, dims, j);
    new_block.blocks.push_back(map.w * cov * map.w.transpose());
    Vector mu(k);
    for (int a = 0; a < k; ++a) mu[a] = ds.source_spec.centers(j, dims[static_cast<std::size_t>(a)]);
    const Vector mu_new = map.w * mu + map.b;
    for (int a = 0; a < k; ++a) out.source_spec.centers(j, dims[static_cast<std::size_t>(a)]) = mu_new[a];
  }
  out.transformed_cov = std::move(new_block);
  out.applied_map = map;
  out.applied_mode = mode;
  return out;
}

Vector component_mahalanobis_sq(const Eigen::Ref<const Vector>& x, const GmmSpec& spec,
                                const std::optional<DenseBlockCov>& block) {
  if (x.size() != spec.d)
    throw std::invalid_argument("component_mahalanobis_sq: dimension mismatch");
  Vector dists(spec.m);
  for (int j = 0; j < spec.m; ++j) {
    double dist = 0.0;
    if (block) {
      const int k = static_cast<int>(block->dims.size());
      Vector diff(k);
      for (int a = 0; a < k; ++a) {
        const int dim = block->dims[static_cast<std::size_t>(a)];
        diff[a] = x[dim] - spec.centers(j, dim);
      }
      const Vector solved =
          block->blocks[static_cast<std::size_t>(j)].ldlt().solve(diff);
      dist += diff.dot(solved);
      for (int dim = 0; dim < spec.d; ++dim) {
        if (std::find(block->dims.begin(), block->dims.end(), dim) != block->dims.end()) continue;
        const double delta = x[dim] - spec.centers(j, dim);
        dist += delta * delta / spec.diag_covs(j, dim);
      }
    } else {
      dist = mahalanobis_sq(x, spec.centers.row(j), spec.diag_covs.row(j));
    }
    dists[j] = dist;
  }
  return dists;
}

int derive_label(const LabeledDataset& ds, int row) {
  const double threshold = chi2_quantile(ds.d(), ds.percentile);
  const Vector dists =
      component_mahalanobis_sq(ds.features.row(row), ds.source_spec, ds.transformed_cov);
  for (int j = 0; j < ds.source_spec.m; ++j)
    if (dists[j] <= threshold) return 0;
  return 1;
}

PreservationReport verify_preservation(const LabeledDataset& ds, const LinearMap& map,
                                       TransformMode mode) {
  const LabeledDataset after = apply_map(ds, map, mode);
  PreservationReport report;
  for (int r = 0; r < ds.n(); ++r) {
    const Vector before =
        component_mahalanobis_sq(ds.features.row(r), ds.source_spec, ds.transformed_cov);
    const Vector now =
        component_mahalanobis_sq(after.features.row(r), after.source_spec, after.transformed_cov);
    for (int j = 0; j < ds.source_spec.m; ++j) {
      const double drift = std::fabs(before[j] - now[j]);
      if (!(drift <= report.max_distance_drift))  // NaN counts as drift
        report.max_distance_drift = std::isnan(drift)
                                        ? std::numeric_limits<double>::infinity()
                                        : drift;
    }
    if (derive_label(after, r) != after.labels[static_cast<std::size_t>(r)]) ++report.label_flips;
  }
  return report;
}

}  // namespace zood
