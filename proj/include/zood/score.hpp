#pragma once

#include <cstdint>

#include "zood/data.hpp"
#include "zood/train.hpp"

namespace zood {

struct ScoreOptions {
  int context_budget = 5000;  // C: at most C - 1 context rows per query
  bool quantile = true;       // fit on train data, applied to both
  bool strict_subsampling = true;  // one fresh context draw per query
  int group_size = 256;            // queries sharing a draw when not strict
  std::uint64_t seed = 0;
};

// Zero-shot outlier probabilities for each test row, one forward pass per
// context group. Train rows are the inlier context; no parameters change.
Vector score(const Checkpoint& cp, const MatrixRM& x_train, const MatrixRM& x_test,
             const ScoreOptions& options = {});

}  // namespace zood
