#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace zood {

// A forward primitive produced a non-finite value.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major buffer, rank 1 or 2. float for training, double for
// gradient verification.
template <typename T>
struct ArrayT {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  ArrayT() = default;
  explicit ArrayT(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(count(shape), T(0));
  }

  static ArrayT zeros(std::vector<std::size_t> s) { return ArrayT(std::move(s)); }

  static ArrayT full(std::vector<std::size_t> s, T v) {
    ArrayT a(std::move(s));
    std::fill(a.data.begin(), a.data.end(), v);
    return a;
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t dim : s) {
      if (dim == 0) throw std::invalid_argument("ArrayT: zero dimension");
      n *= dim;
    }
    return n;
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  T& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
  T at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

  bool same_shape(const ArrayT& other) const { return shape == other.shape; }
};

template <typename T>
void throw_if_not_finite(const ArrayT<T>& a, const char* what) {
  for (T v : a.data)
    if (!std::isfinite(static_cast<double>(v)))
      throw NumericError(std::string(what) + ": non-finite value");
}

}  // namespace zood
