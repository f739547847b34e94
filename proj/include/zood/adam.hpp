#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "zood/array.hpp"

namespace zood {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<ArrayT<T>> m;
  std::vector<ArrayT<T>> v;
  long long t = 0;

  template <typename Ptrs>
  void init(const Ptrs& params) {
    m.clear();
    v.clear();
    for (const auto* p : params) {
      m.push_back(ArrayT<T>::zeros(p->shape));
      v.push_back(ArrayT<T>::zeros(p->shape));
    }
    t = 0;
  }
};

// One Adam update with bias correction. Gradients are read as-is; the caller
// owns zeroing them between steps.
template <typename T>
void adam_step(const std::vector<ArrayT<T>*>& params, const std::vector<const ArrayT<T>*>& grads,
               AdamState<T>& state, const AdamConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("adam_step: lr must be > 0");
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: param/grad/state count mismatch");
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const auto& g = *grads[i];
    if (!p.same_shape(g) || !p.same_shape(state.m[i]))
      throw std::invalid_argument("adam_step: shape mismatch");
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const T gk = g.data[k];
      m.data[k] = T(cfg.beta1) * m.data[k] + T(1.0 - cfg.beta1) * gk;
      v.data[k] = T(cfg.beta2) * v.data[k] + T(1.0 - cfg.beta2) * gk * gk;
      const double mhat = static_cast<double>(m.data[k]) / bc1;
      const double vhat = static_cast<double>(v.data[k]) / bc2;
      p.data[k] -= static_cast<T>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

}  // namespace zood
