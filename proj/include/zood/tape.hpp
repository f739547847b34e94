#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "zood/array.hpp"

namespace zood {

// Reverse-mode tape. Nodes are appended in forward order, so a reverse sweep
// over the node list is a valid topological order. Gradients accumulate
// additively: a second backward() without clearing doubles them.
template <typename T>
class Tape {
 public:
  using Id = std::int32_t;
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatMap = Eigen::Map<Matrix>;
  using ConstMatMap = Eigen::Map<const Matrix>;

  Id leaf(ArrayT<T> value, bool needs_grad = false) {
    throw_if_not_finite(value, "leaf");
    return push(std::move(value), needs_grad, {});
  }

  const ArrayT<T>& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  const ArrayT<T>& grad(Id id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.data.empty()) n.grad = ArrayT<T>::zeros(n.value.shape);
    return n.grad;
  }

  std::size_t num_nodes() const { return nodes_.size(); }

  // ---- primitives ----

  Id matmul(Id a, Id b) {
    const auto& av = value(a);
    const auto& bv = value(b);
    require(av.rank() == 2 && bv.rank() == 2 && av.cols() == bv.rows(), "matmul: shape mismatch");
    ArrayT<T> out({av.rows(), bv.cols()});
    mat(out) = cmat(av) * cmat(bv);
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, Id self) {
      if (t.needs(a)) t.gmat(a) += t.cmat(t.gradc(self)) * t.cmat(t.value(b)).transpose();
      if (t.needs(b)) t.gmat(b) += t.cmat(t.value(a)).transpose() * t.cmat(t.gradc(self));
    });
  }

  // a * b^T; b is (c x k) with k matching a's columns.
  Id matmul_nt(Id a, Id b) {
    const auto& av = value(a);
    const auto& bv = value(b);
    require(av.rank() == 2 && bv.rank() == 2 && av.cols() == bv.cols(),
            "matmul_nt: shape mismatch");
    ArrayT<T> out({av.rows(), bv.rows()});
    mat(out) = cmat(av) * cmat(bv).transpose();
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, Id self) {
      if (t.needs(a)) t.gmat(a) += t.cmat(t.gradc(self)) * t.cmat(t.value(b));
      if (t.needs(b)) t.gmat(b) += t.cmat(t.gradc(self)).transpose() * t.cmat(t.value(a));
    });
  }

  Id transpose(Id x) {
    const auto& xv = value(x);
    require(xv.rank() == 2, "transpose: rank-2 input required");
    ArrayT<T> out({xv.cols(), xv.rows()});
    mat(out) = cmat(xv).transpose();
    return push(std::move(out), needs(x), [x](Tape& t, Id self) {
      if (t.needs(x)) t.gmat(x) += t.cmat(t.gradc(self)).transpose();
    });
  }

  Id add(Id a, Id b) {
    const auto& av = value(a);
    require(av.same_shape(value(b)), "add: shape mismatch");
    ArrayT<T> out(av.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] + value(b).data[i];
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, Id self) {
      const auto& g = t.gradc(self);
      if (t.needs(a)) t.accumulate(a, g);
      if (t.needs(b)) t.accumulate(b, g);
    });
  }

  Id mul(Id a, Id b) {
    const auto& av = value(a);
    require(av.same_shape(value(b)), "mul: shape mismatch");
    ArrayT<T> out(av.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] * value(b).data[i];
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, Id self) {
      const auto& g = t.gradc(self);
      if (t.needs(a)) {
        auto& ga = t.grad_buf(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * t.value(b).data[i];
      }
      if (t.needs(b)) {
        auto& gb = t.grad_buf(b);
        for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * t.value(a).data[i];
      }
    });
  }

  Id scale(Id x, T s) {
    ArrayT<T> out(value(x).shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = value(x).data[i] * s;
    return push(std::move(out), needs(x), [x, s](Tape& t, Id self) {
      if (!t.needs(x)) return;
      const auto& g = t.gradc(self);
      auto& gx = t.grad_buf(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i] * s;
    });
  }

  // x (r x c) + bias (c), broadcast over rows.
  Id add_row_bias(Id x, Id bias) {
    const auto& xv = value(x);
    const auto& bv = value(bias);
    require(xv.rank() == 2 && bv.size() == xv.cols(), "add_row_bias: shape mismatch");
    ArrayT<T> out(xv.shape);
    const std::size_t c = xv.cols();
    for (std::size_t r = 0; r < xv.rows(); ++r)
      for (std::size_t k = 0; k < c; ++k) out.data[r * c + k] = xv.data[r * c + k] + bv.data[k];
    return push(std::move(out), needs(x) || needs(bias), [x, bias](Tape& t, Id self) {
      const auto& g = t.gradc(self);
      if (t.needs(x)) t.accumulate(x, g);
      if (t.needs(bias)) {
        auto& gb = t.grad_buf(bias);
        const std::size_t c = gb.size();
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t k = 0; k < c; ++k) gb.data[k] += g.data[r * c + k];
      }
    });
  }

  Id slice_cols(Id x, std::size_t c0, std::size_t c1) {
    const auto& xv = value(x);
    require(xv.rank() == 2 && c0 < c1 && c1 <= xv.cols(), "slice_cols: bad range");
    ArrayT<T> out({xv.rows(), c1 - c0});
    const std::size_t c = xv.cols();
    const std::size_t w = c1 - c0;
    for (std::size_t r = 0; r < xv.rows(); ++r)
      for (std::size_t k = 0; k < w; ++k) out.data[r * w + k] = xv.data[r * c + c0 + k];
    return push(std::move(out), needs(x), [x, c0, c1](Tape& t, Id self) {
      if (!t.needs(x)) return;
      const auto& g = t.gradc(self);
      auto& gx = t.grad_buf(x);
      const std::size_t c = gx.cols();
      const std::size_t w = c1 - c0;
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t k = 0; k < w; ++k) gx.data[r * c + c0 + k] += g.data[r * w + k];
    });
  }

  Id concat_cols(const std::vector<Id>& parts) {
    require(!parts.empty(), "concat_cols: empty");
    const std::size_t r = value(parts[0]).rows();
    std::size_t c = 0;
    bool any_grad = false;
    for (Id p : parts) {
      require(value(p).rank() == 2 && value(p).rows() == r, "concat_cols: row mismatch");
      c += value(p).cols();
      any_grad = any_grad || needs(p);
    }
    ArrayT<T> out({r, c});
    std::size_t off = 0;
    for (Id p : parts) {
      const auto& pv = value(p);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t k = 0; k < pv.cols(); ++k)
          out.data[i * c + off + k] = pv.data[i * pv.cols() + k];
      off += pv.cols();
    }
    return push(std::move(out), any_grad, [parts](Tape& t, Id self) {
      const auto& g = t.gradc(self);
      const std::size_t c = g.cols();
      std::size_t off = 0;
      for (Id p : parts) {
        const std::size_t w = t.value(p).cols();
        if (t.needs(p)) {
          auto& gp = t.grad_buf(p);
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t k = 0; k < w; ++k) gp.data[i * w + k] += g.data[i * c + off + k];
        }
        off += w;
      }
    });
  }

  // Row softmax with per-row max subtraction.
  Id softmax_rows(Id x) {
    const auto& xv = value(x);
    require(xv.rank() == 2, "softmax_rows: rank-2 input required");
    ArrayT<T> out(xv.shape);
    const std::size_t c = xv.cols();
    for (std::size_t r = 0; r < xv.rows(); ++r) {
      const T* row = xv.data.data() + r * c;
      T* orow = out.data.data() + r * c;
      T mx = row[0];
      for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, row[k]);
      T sum = T(0);
      for (std::size_t k = 0; k < c; ++k) {
        orow[k] = std::exp(row[k] - mx);
        sum += orow[k];
      }
      for (std::size_t k = 0; k < c; ++k) orow[k] /= sum;
    }
    return push(std::move(out), needs(x), [x](Tape& t, Id self) {
      if (!t.needs(x)) return;
      const auto& y = t.value(self);
      const auto& g = t.gradc(self);
      auto& gx = t.grad_buf(x);
      const std::size_t c = y.cols();
      for (std::size_t r = 0; r < y.rows(); ++r) {
        const T* yr = y.data.data() + r * c;
        const T* gr = g.data.data() + r * c;
        T dot = T(0);
        for (std::size_t k = 0; k < c; ++k) dot += yr[k] * gr[k];
        T* gxr = gx.data.data() + r * c;
        for (std::size_t k = 0; k < c; ++k) gxr[k] += yr[k] * (gr[k] - dot);
      }
    });
  }

  // Per-row (x - mean) / sqrt(var + eps) * gain + bias, variance with 1/c.
  Id layer_norm(Id x, Id gain, Id bias, T eps) {
    const auto& xv = value(x);
    require(xv.rank() == 2 && xv.cols() >= 2, "layer_norm: needs rank 2, c >= 2");
    require(value(gain).size() == xv.cols() && value(bias).size() == xv.cols(),
            "layer_norm: gain/bias size mismatch");
    const std::size_t c = xv.cols();
    ArrayT<T> out(xv.shape);
    ArrayT<T> xhat(xv.shape);    // saved for backward
    ArrayT<T> inv_std({xv.rows()});
    const auto& gv = value(gain);
    const auto& bv = value(bias);
    for (std::size_t r = 0; r < xv.rows(); ++r) {
      const T* row = xv.data.data() + r * c;
      T mean = T(0);
      for (std::size_t k = 0; k < c; ++k) mean += row[k];
      mean /= static_cast<T>(c);
      T var = T(0);
      for (std::size_t k = 0; k < c; ++k) {
        const T d = row[k] - mean;
        var += d * d;
      }
      var /= static_cast<T>(c);
      const T istd = T(1) / std::sqrt(var + eps);
      inv_std.data[r] = istd;
      for (std::size_t k = 0; k < c; ++k) {
        const T xh = (row[k] - mean) * istd;
        xhat.data[r * c + k] = xh;
        out.data[r * c + k] = xh * gv.data[k] + bv.data[k];
      }
    }
    auto xhat_p = std::make_shared<ArrayT<T>>(std::move(xhat));
    auto istd_p = std::make_shared<ArrayT<T>>(std::move(inv_std));
    return push(std::move(out), needs(x) || needs(gain) || needs(bias),
                [x, gain, bias, xhat_p, istd_p](Tape& t, Id self) {
      const auto& g = t.gradc(self);
      const std::size_t c = g.cols();
      const auto& gv = t.value(gain);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const T* gr = g.data.data() + r * c;
        const T* xh = xhat_p->data.data() + r * c;
        if (t.needs(gain)) {
          auto& gg = t.grad_buf(gain);
          for (std::size_t k = 0; k < c; ++k) gg.data[k] += gr[k] * xh[k];
        }
        if (t.needs(bias)) {
          auto& gb = t.grad_buf(bias);
          for (std::size_t k = 0; k < c; ++k) gb.data[k] += gr[k];
        }
        if (t.needs(x)) {
          T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
          for (std::size_t k = 0; k < c; ++k) {
            const T dxh = gr[k] * gv.data[k];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh[k];
          }
          auto& gx = t.grad_buf(x);
          T* gxr = gx.data.data() + r * c;
          const T istd = istd_p->data[r];
          const T inv_c = T(1) / static_cast<T>(c);
          for (std::size_t k = 0; k < c; ++k) {
            const T dxh = gr[k] * gv.data[k];
            gxr[k] += istd * (dxh - inv_c * sum_dxhat - xh[k] * inv_c * sum_dxhat_xhat);
          }
        }
      }
    });
  }

  // tanh-approximation GELU.
  Id gelu(Id x) {
    const auto& xv = value(x);
    ArrayT<T> out(xv.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = gelu_fwd(xv.data[i]);
    return push(std::move(out), needs(x), [x](Tape& t, Id self) {
      if (!t.needs(x)) return;
      const auto& g = t.gradc(self);
      auto& gx = t.grad_buf(x);
      const auto& xv = t.value(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i] * gelu_bwd(xv.data[i]);
    });
  }

  // Mean over rows of -log softmax(logits)[label].
  Id cross_entropy_mean(Id logits, const std::vector<int>& labels) {
    const auto& lv = value(logits);
    require(lv.rank() == 2, "cross_entropy_mean: rank-2 logits required");
    require(labels.size() == lv.rows(), "cross_entropy_mean: label count mismatch");
    const std::size_t c = lv.cols();
    for (int y : labels)
      if (y < 0 || static_cast<std::size_t>(y) >= c)
        throw std::invalid_argument("cross_entropy_mean: label out of range");
    T total = T(0);
    for (std::size_t r = 0; r < lv.rows(); ++r) {
      const T* row = lv.data.data() + r * c;
      T mx = row[0];
      for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, row[k]);
      T lse = T(0);
      for (std::size_t k = 0; k < c; ++k) lse += std::exp(row[k] - mx);
      lse = std::log(lse) + mx;
      total += lse - row[labels[r]];
    }
    ArrayT<T> out({1});
    out.data[0] = total / static_cast<T>(lv.rows());
    auto labels_p = std::make_shared<std::vector<int>>(labels);
    return push(std::move(out), needs(logits), [logits, labels_p](Tape& t, Id self) {
      if (!t.needs(logits)) return;
      const T gscale = t.gradc(self).data[0] / static_cast<T>(t.value(logits).rows());
      const auto& lv = t.value(logits);
      auto& gl = t.grad_buf(logits);
      const std::size_t c = lv.cols();
      for (std::size_t r = 0; r < lv.rows(); ++r) {
        const T* row = lv.data.data() + r * c;
        T mx = row[0];
        for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, row[k]);
        T sum = T(0);
        for (std::size_t k = 0; k < c; ++k) sum += std::exp(row[k] - mx);
        T* gr = gl.data.data() + r * c;
        for (std::size_t k = 0; k < c; ++k) {
          const T p = std::exp(row[k] - mx) / sum;
          gr[k] += gscale * (p - (static_cast<int>(k) == (*labels_p)[r] ? T(1) : T(0)));
        }
      }
    });
  }

  Id sum(Id x) {
    ArrayT<T> out({1});
    T total = T(0);
    for (T v : value(x).data) total += v;
    out.data[0] = total;
    return push(std::move(out), needs(x), [x](Tape& t, Id self) {
      if (!t.needs(x)) return;
      const T g = t.gradc(self).data[0];
      auto& gx = t.grad_buf(x);
      for (auto& v : gx.data) v += g;
    });
  }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse creation order.
  void backward(Id loss) {
    require(value(loss).size() == 1, "backward: loss must be scalar");
    grad_buf(loss).data[0] += T(1);
    for (std::int32_t i = loss; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.backprop && !n.grad.data.empty()) n.backprop(*this, i);
    }
  }

  bool check_finite = true;

 private:
  struct NodeRec {
    ArrayT<T> value;
    ArrayT<T> grad;  // lazily allocated
    bool needs_grad = false;
    std::function<void(Tape&, Id)> backprop;
  };

  static void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  }

  bool needs(Id id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  ArrayT<T>& grad_buf(Id id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.data.empty()) n.grad = ArrayT<T>::zeros(n.value.shape);
    return n.grad;
  }

  const ArrayT<T>& gradc(Id id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  void accumulate(Id id, const ArrayT<T>& g) {
    auto& buf = grad_buf(id);
    for (std::size_t i = 0; i < g.size(); ++i) buf.data[i] += g.data[i];
  }

  MatMap mat(ArrayT<T>& a) {
    return MatMap(a.data.data(), static_cast<Eigen::Index>(a.rows()),
                  static_cast<Eigen::Index>(a.cols()));
  }
  ConstMatMap cmat(const ArrayT<T>& a) const {
    return ConstMatMap(a.data.data(), static_cast<Eigen::Index>(a.rows()),
                       static_cast<Eigen::Index>(a.cols()));
  }
  MatMap gmat(Id id) {
    auto& buf = grad_buf(id);
    return mat(buf);
  }

  Id push(ArrayT<T> value, bool needs_grad, std::function<void(Tape&, Id)> backprop) {
    if (check_finite) throw_if_not_finite(value, "tape op");
    NodeRec rec;
    rec.value = std::move(value);
    rec.needs_grad = needs_grad;
    rec.backprop = std::move(backprop);
    nodes_.push_back(std::move(rec));
    return static_cast<Id>(nodes_.size() - 1);
  }

  static T gelu_fwd(T x) {
    const T c0 = T(0.7978845608028654);  // sqrt(2/pi)
    const T a = T(0.044715);
    const T u = c0 * (x + a * x * x * x);
    return T(0.5) * x * (T(1) + std::tanh(u));
  }

  static T gelu_bwd(T x) {
    const T c0 = T(0.7978845608028654);
    const T a = T(0.044715);
    const T u = c0 * (x + a * x * x * x);
    const T th = std::tanh(u);
    return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * c0 * (T(1) + T(3) * a * x * x);
  }

  std::vector<NodeRec> nodes_;
};

}  // namespace zood
