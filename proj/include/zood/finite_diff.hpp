#pragma once

#include <cmath>
#include <stdexcept>

#include "zood/array.hpp"

namespace zood {

// Central-difference gradient of a scalar-valued function, the oracle the
// tape's analytic gradients are checked against. Deliberately independent of
// the tape: it only re-evaluates f.
template <typename F>
ArrayT<double> finite_diff_grad(F&& f, const ArrayT<double>& x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be > 0");
  ArrayT<double> grad = ArrayT<double>::zeros(x.shape);
  ArrayT<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe.data[i] = x.data[i] + step;
    const double up = f(probe);
    probe.data[i] = x.data[i] - step;
    const double down = f(probe);
    probe.data[i] = x.data[i];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("finite_diff_grad: non-finite evaluation");
    grad.data[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace zood
