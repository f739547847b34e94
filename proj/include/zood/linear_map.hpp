#pragma once

#include "zood/data.hpp"
#include "zood/rng.hpp"

namespace zood {

// W = U diag(lambda) U^T with U Haar-like from QR of a Gaussian matrix
// (signs fixed so R has positive diagonal), |lambda| uniform on [0.1, 1]
// with random sign, b uniform on [-1, 1].
LinearMap sample_linear_map(int dim, Rng& rng);

// Transforms rows on the selected index set (the dataset's inflated dims in
// subspace mode, all dims in full mode). Labels are copied unchanged; the
// spec metadata is updated to the transformed mixture for verification.
LabeledDataset apply_map(const LabeledDataset& ds, const LinearMap& map, TransformMode mode);

struct PreservationReport {
  double max_distance_drift = 0.0;
  int label_flips = 0;
};

// Applies the map to a copy and recomputes per-component squared Mahalanobis
// distances and labels under the transformed spec.
PreservationReport verify_preservation(const LabeledDataset& ds, const LinearMap& map,
                                       TransformMode mode);

// Per-component squared Mahalanobis distance under a spec whose covariance is
// diagonal except for an optional dense block.
Vector component_mahalanobis_sq(const Eigen::Ref<const Vector>& x, const GmmSpec& spec,
                                const std::optional<DenseBlockCov>& block);

// Label a row of a (possibly transformed) dataset against its own spec.
int derive_label(const LabeledDataset& ds, int row);

}  // namespace zood
