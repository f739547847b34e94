#pragma once

#include <vector>

#include "zood/data.hpp"

namespace zood {

// Per-feature monotone map through the empirical CDF onto a standard normal,
// clipped to [-8, 8]. Fit on context data only; test data reuses the grid.
class QuantileTransformer {
 public:
  static QuantileTransformer fit(const MatrixRM& x, int max_knots = 1000);

  MatrixRM apply(const MatrixRM& x) const;

  int dim() const { return static_cast<int>(knots_.size()); }

  static constexpr double kClip = 8.0;

 private:
  // Ascending empirical quantiles per feature at probabilities k/(K-1).
  std::vector<std::vector<double>> knots_;
};

}  // namespace zood
