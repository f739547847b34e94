#include "zood/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "zood/stats.hpp"

namespace zood {

QuantileTransformer QuantileTransformer::fit(const MatrixRM& x, int max_knots) {
  const int n = static_cast<int>(x.rows());
  if (n < 2) throw std::invalid_argument("QuantileTransformer: need at least 2 rows");
  if (max_knots < 2) throw std::invalid_argument("QuantileTransformer: need at least 2 knots");
  const int k = std::min(max_knots, n);

  QuantileTransformer qt;
  qt.knots_.resize(static_cast<std::size_t>(x.cols()));
  std::vector<double> column(static_cast<std::size_t>(n));
  for (int f = 0; f < x.cols(); ++f) {
    for (int r = 0; r < n; ++r) column[static_cast<std::size_t>(r)] = x(r, f);
    std::sort(column.begin(), column.end());
    auto& knots = qt.knots_[static_cast<std::size_t>(f)];
    knots.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      // Order-statistic interpolation at probability i / (k - 1).
      const double pos = static_cast<double>(i) * (n - 1) / (k - 1);
      const int lo = static_cast<int>(pos);
      const int hi = std::min(lo + 1, n - 1);
      const double frac = pos - lo;
      knots[static_cast<std::size_t>(i)] =
          column[static_cast<std::size_t>(lo)] * (1.0 - frac) +
          column[static_cast<std::size_t>(hi)] * frac;
    }
  }
  return qt;
}

MatrixRM QuantileTransformer::apply(const MatrixRM& x) const {
  if (static_cast<int>(x.cols()) != dim())
    throw std::invalid_argument("QuantileTransformer: feature count mismatch");
  MatrixRM out(x.rows(), x.cols());
  for (int f = 0; f < x.cols(); ++f) {
    const auto& knots = knots_[static_cast<std::size_t>(f)];
    const int k = static_cast<int>(knots.size());
    const bool constant = knots.front() == knots.back();
    for (int r = 0; r < x.rows(); ++r) {
      if (constant) {
        out(r, f) = 0.0;
        continue;
      }
      const double v = x(r, f);
      double p;
      if (v <= knots.front()) {
        p = 0.0;
      } else if (v >= knots.back()) {
        p = 1.0;
      } else {
        // Last knot <= v; constant runs collapse to their right edge, which
        // keeps the map monotone.
        const auto it = std::upper_bound(knots.begin(), knots.end(), v);
        const int j = static_cast<int>(it - knots.begin()) - 1;
        const double lo = knots[static_cast<std::size_t>(j)];
        const double hi = knots[static_cast<std::size_t>(j + 1)];
        const double frac = hi > lo ? (v - lo) / (hi - lo) : 0.0;
        p = (static_cast<double>(j) + frac) / (k - 1);
      }
      const double z = inverse_normal_cdf(p);
      out(r, f) = std::clamp(z, -kClip, kClip);
    }
  }
  return out;
}

}  // namespace zood
