#include "zood/score.hpp"

#include <algorithm>
#include <stdexcept>

#include "zood/quantile.hpp"

namespace zood {

Vector score(const Checkpoint& cp, const MatrixRM& x_train, const MatrixRM& x_test,
             const ScoreOptions& options) {
  if (x_train.rows() < 1) throw std::invalid_argument("score: empty training data");
  if (x_train.cols() < 1) throw std::invalid_argument("score: zero-dimensional data");
  if (x_train.cols() != x_test.cols())
    throw std::invalid_argument("score: train/test dimension mismatch");
  if (options.context_budget < 2) throw std::invalid_argument("score: context budget must be >= 2");

  MatrixRM train = x_train;
  MatrixRM test = x_test;
  if (options.quantile) {
    const QuantileTransformer qt = QuantileTransformer::fit(x_train);
    train = qt.apply(x_train);
    test = qt.apply(x_test);
  }

  const int n = static_cast<int>(train.rows());
  const int q = static_cast<int>(test.rows());
  const int budget = options.context_budget - 1;
  Vector probs(q);

  Rng rng = Rng::derive(options.seed, "score", 0);

  if (n <= budget) {
    // Whole training set fits: one forward pass, independent of the rng.
    const ForwardResult result = pfn_forward(cp.params, cp.model, train, test, rng);
    for (int i = 0; i < q; ++i) probs[i] = result.probs(i, 1);
    return probs;
  }

  const int group = options.strict_subsampling ? 1 : std::max(1, options.group_size);
  for (int start = 0; start < q; start += group) {
    const int count = std::min(group, q - start);
    const std::vector<int> picked = rng.sample_indices(n, budget);
    MatrixRM context(budget, train.cols());
    for (int i = 0; i < budget; ++i) context.row(i) = train.row(picked[static_cast<std::size_t>(i)]);
    const MatrixRM queries = test.middleRows(start, count);
    const ForwardResult result = pfn_forward(cp.params, cp.model, context, queries, rng);
    for (int i = 0; i < count; ++i) probs[start + i] = result.probs(i, 1);
  }
  return probs;
}

}  // namespace zood
