#pragma once

#include <string>
#include <utility>
#include <vector>

#include "zood/data.hpp"
#include "zood/rng.hpp"
#include "zood/tape.hpp"

namespace zood {

enum class Precision { kF32, kF64 };

struct ModelConfig {
  int max_dims = 100;      // D: widest feature block the embedding accepts
  int num_layers = 4;      // L
  int hidden = 256;        // h_dim
  int heads = 4;           // H
  int routers = 500;       // R
  int ffn_multiplier = 4;
  Precision precision = Precision::kF32;

  int head_dim() const { return hidden / heads; }
  void validate() const;
};

// Exact learnable-scalar count for the ParamsLayout below.
long long count_params(const ModelConfig& config);

// One attention module's projections.
template <typename A>
struct MsaLayout {
  A wq, wk, wv, wo;  // hidden x hidden
  A bq, bk, bv, bo;  // hidden
};

// Every learnable array in the model, generic over the payload so the same
// layout describes parameter arrays, tape ids, and gradient buffers.
template <typename A>
struct ParamsLayout {
  struct Layer {
    A routers;  // R x hidden
    MsaLayout<A> msa1;  // routers gather from training tokens
    MsaLayout<A> msa2;  // tokens read back from the messages
    A ln1_gain, ln1_bias;
    A ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    A ln2_gain, ln2_bias;
  };
  A embed_w, embed_b;  // max_dims x hidden, hidden
  std::vector<Layer> layers;
  A head_w1, head_b1, head_w2, head_b2;  // hidden x hidden, hidden, hidden x 2, 2
};

template <typename T>
using ModelParamsT = ParamsLayout<ArrayT<T>>;

using ModelParams = ModelParamsT<float>;

// Fixed enumeration order; also the checkpoint manifest order.
template <typename A, typename Fn>
void visit_params(ParamsLayout<A>& p, Fn&& fn) {
  fn("embed.w", p.embed_w);
  fn("embed.b", p.embed_b);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    fn(pre + "routers", layer.routers);
    const auto msa = [&](const std::string& name, MsaLayout<A>& m) {
      fn(pre + name + ".wq", m.wq);
      fn(pre + name + ".wk", m.wk);
      fn(pre + name + ".wv", m.wv);
      fn(pre + name + ".wo", m.wo);
      fn(pre + name + ".bq", m.bq);
      fn(pre + name + ".bk", m.bk);
      fn(pre + name + ".bv", m.bv);
      fn(pre + name + ".bo", m.bo);
    };
    msa("msa1", layer.msa1);
    msa("msa2", layer.msa2);
    fn(pre + "ln1.gain", layer.ln1_gain);
    fn(pre + "ln1.bias", layer.ln1_bias);
    fn(pre + "ffn.w1", layer.ffn_w1);
    fn(pre + "ffn.b1", layer.ffn_b1);
    fn(pre + "ffn.w2", layer.ffn_w2);
    fn(pre + "ffn.b2", layer.ffn_b2);
    fn(pre + "ln2.gain", layer.ln2_gain);
    fn(pre + "ln2.bias", layer.ln2_bias);
  }
  fn("head.w1", p.head_w1);
  fn("head.b1", p.head_b1);
  fn("head.w2", p.head_w2);
  fn("head.b2", p.head_b2);
}

template <typename A, typename Fn>
void visit_params(const ParamsLayout<A>& p, Fn&& fn) {
  visit_params(const_cast<ParamsLayout<A>&>(p),
               [&](const std::string& name, A& a) { fn(name, const_cast<const A&>(a)); });
}

// Glorot-uniform weights, zero biases, N(0, 0.02) routers, unit layer norms.
template <typename T>
ModelParamsT<T> init_params(const ModelConfig& config, Rng& rng);

// Width adaptation in front of the embedding: rescale by D/d and zero-pad
// when d < D, subsample D features (seeded, recorded) when d > D.
struct FeatureAdapter {
  int d_in = 0;
  int d_model = 0;
  double scale = 1.0;
  std::vector<int> selected;  // nonempty iff d_in > d_model

  static FeatureAdapter make(int d, int max_dims, Rng& rng);
  MatrixRM apply(const MatrixRM& x) const;
};

// Raw per-head attention weights captured from the final layer.
template <typename T>
struct AttentionRecord {
  std::vector<ArrayT<T>> router_context;  // heads x (R x n), routers over context
  std::vector<ArrayT<T>> query_router;    // heads x (q x R), queries over messages
};

template <typename T>
using StagedParams = ParamsLayout<typename Tape<T>::Id>;

// Copies parameters onto a tape as (optionally differentiable) leaves.
template <typename T>
StagedParams<T> stage_params(Tape<T>& tape, const ModelParamsT<T>& params, bool needs_grad);

// Scaled dot-product multi-head attention, Tape graph form.
template <typename T>
typename Tape<T>::Id msa_forward(Tape<T>& tape, typename Tape<T>::Id queries,
                                 typename Tape<T>::Id keys_values,
                                 const MsaLayout<typename Tape<T>::Id>& p, int heads,
                                 std::vector<ArrayT<T>>* weight_capture = nullptr);

// One router layer: routers gather from training tokens, tokens (train and
// test alike) read back from the messages, then residual + LN + FFN.
template <typename T>
std::pair<typename Tape<T>::Id, typename Tape<T>::Id> router_block_forward(
    Tape<T>& tape, typename Tape<T>::Id z_train, typename Tape<T>::Id z_test,
    const typename StagedParams<T>::Layer& p, int heads, AttentionRecord<T>* record = nullptr);

// Full graph: embed both populations, L router blocks, head on test tokens.
template <typename T>
typename Tape<T>::Id pfn_logits_graph(Tape<T>& tape, const StagedParams<T>& staged,
                                      const ModelConfig& config, const MatrixRM& context,
                                      const MatrixRM& queries, const FeatureAdapter& adapter,
                                      AttentionRecord<T>* record = nullptr);

// Quadratic-attention variant used as the scaling baseline: training tokens
// self-attend (msa1), test tokens cross-attend to them (msa2).
template <typename T>
typename Tape<T>::Id dense_logits_graph(Tape<T>& tape, const StagedParams<T>& staged,
                                        const ModelConfig& config, const MatrixRM& context,
                                        const MatrixRM& queries, const FeatureAdapter& adapter);

struct ForwardResult {
  MatrixRM logits;  // q x 2
  MatrixRM probs;   // q x 2, rows sum to 1
};

template <typename T>
ForwardResult pfn_forward(const ModelParamsT<T>& params, const ModelConfig& config,
                          const MatrixRM& context, const MatrixRM& queries, Rng& rng);

struct AttendedPoint {
  int index = 0;
  double weight = 0.0;
};

// Top-k context points by induced last-layer cross-attention mass
// (query->message weights composed with message->context weights).
template <typename T>
std::vector<AttendedPoint> attention_topk(const ModelParamsT<T>& params,
                                          const ModelConfig& config, const MatrixRM& context,
                                          const Vector& query, int k, Rng& rng);

// Conversion helpers between Eigen matrices and tape arrays.
template <typename T>
ArrayT<T> to_array(const MatrixRM& m) {
  ArrayT<T> a({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      a.data[static_cast<std::size_t>(i * m.cols() + j)] = static_cast<T>(m(i, j));
  return a;
}

template <typename T>
MatrixRM to_matrix(const ArrayT<T>& a) {
  MatrixRM m(static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(a.at(i, j));
  return m;
}

// ---- template definitions ----

template <typename T>
ModelParamsT<T> init_params(const ModelConfig& config, Rng& rng) {
  config.validate();
  const std::size_t h = static_cast<std::size_t>(config.hidden);
  const std::size_t fh = h * static_cast<std::size_t>(config.ffn_multiplier);
  const std::size_t dmax = static_cast<std::size_t>(config.max_dims);
  const std::size_t r = static_cast<std::size_t>(config.routers);

  const auto glorot = [&rng](std::size_t fan_in, std::size_t fan_out) {
    ArrayT<T> w({fan_in, fan_out});
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : w.data) v = static_cast<T>(rng.uniform(-limit, limit));
    return w;
  };
  const auto zeros1 = [](std::size_t n) { return ArrayT<T>::zeros({n}); };

  ModelParamsT<T> p;
  p.embed_w = glorot(dmax, h);
  p.embed_b = zeros1(h);
  p.layers.resize(static_cast<std::size_t>(config.num_layers));
  for (auto& layer : p.layers) {
    layer.routers = ArrayT<T>({r, h});
    for (auto& v : layer.routers.data) v = static_cast<T>(rng.normal(0.0, 0.02));
    for (MsaLayout<ArrayT<T>>* m : {&layer.msa1, &layer.msa2}) {
      m->wq = glorot(h, h);
      m->wk = glorot(h, h);
      m->wv = glorot(h, h);
      m->wo = glorot(h, h);
      m->bq = zeros1(h);
      m->bk = zeros1(h);
      m->bv = zeros1(h);
      m->bo = zeros1(h);
    }
    layer.ln1_gain = ArrayT<T>::full({h}, T(1));
    layer.ln1_bias = zeros1(h);
    layer.ffn_w1 = glorot(h, fh);
    layer.ffn_b1 = zeros1(fh);
    layer.ffn_w2 = glorot(fh, h);
    layer.ffn_b2 = zeros1(h);
    layer.ln2_gain = ArrayT<T>::full({h}, T(1));
    layer.ln2_bias = zeros1(h);
  }
  p.head_w1 = glorot(h, h);
  p.head_b1 = zeros1(h);
  p.head_w2 = glorot(h, 2);
  p.head_b2 = zeros1(2);
  return p;
}

template <typename T>
StagedParams<T> stage_params(Tape<T>& tape, const ModelParamsT<T>& params, bool needs_grad) {
  StagedParams<T> staged;
  staged.layers.resize(params.layers.size());
  // Walk both layouts in the same fixed order, pairing array -> leaf id.
  std::vector<const ArrayT<T>*> arrays;
  visit_params(params, [&](const std::string&, const ArrayT<T>& a) { arrays.push_back(&a); });
  std::size_t next = 0;
  visit_params(staged, [&](const std::string&, typename Tape<T>::Id& id) {
    id = tape.leaf(*arrays[next++], needs_grad);
  });
  return staged;
}

template <typename T>
typename Tape<T>::Id msa_forward(Tape<T>& tape, typename Tape<T>::Id queries,
                                 typename Tape<T>::Id keys_values,
                                 const MsaLayout<typename Tape<T>::Id>& p, int heads,
                                 std::vector<ArrayT<T>>* weight_capture) {
  const std::size_t h = tape.value(p.wq).cols();
  if (h % static_cast<std::size_t>(heads) != 0)
    throw std::invalid_argument("msa_forward: hidden not divisible by heads");
  const std::size_t dh = h / static_cast<std::size_t>(heads);
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  const auto q = tape.add_row_bias(tape.matmul(queries, p.wq), p.bq);
  const auto k = tape.add_row_bias(tape.matmul(keys_values, p.wk), p.bk);
  const auto v = tape.add_row_bias(tape.matmul(keys_values, p.wv), p.bv);

  std::vector<typename Tape<T>::Id> head_outputs;
  head_outputs.reserve(static_cast<std::size_t>(heads));
  for (int i = 0; i < heads; ++i) {
    const std::size_t c0 = static_cast<std::size_t>(i) * dh;
    const auto qi = tape.slice_cols(q, c0, c0 + dh);
    const auto ki = tape.slice_cols(k, c0, c0 + dh);
    const auto vi = tape.slice_cols(v, c0, c0 + dh);
    const auto logits = tape.scale(tape.matmul_nt(qi, ki), scale);
    const auto weights = tape.softmax_rows(logits);
    if (weight_capture) weight_capture->push_back(tape.value(weights));
    head_outputs.push_back(tape.matmul(weights, vi));
  }
  return tape.add_row_bias(tape.matmul(tape.concat_cols(head_outputs), p.wo), p.bo);
}

template <typename T>
std::pair<typename Tape<T>::Id, typename Tape<T>::Id> router_block_forward(
    Tape<T>& tape, typename Tape<T>::Id z_train, typename Tape<T>::Id z_test,
    const typename StagedParams<T>::Layer& p, int heads, AttentionRecord<T>* record) {
  // Routers attend only to training tokens; test tokens never act as keys.
  const auto messages =
      msa_forward(tape, p.routers, z_train, p.msa1, heads,
                  record ? &record->router_context : nullptr);

  const auto ffn = [&](typename Tape<T>::Id z, typename Tape<T>::Id attended) {
    const auto normed = tape.layer_norm(tape.add(attended, z), p.ln1_gain, p.ln1_bias, T(1e-5));
    const auto hidden =
        tape.gelu(tape.add_row_bias(tape.matmul(normed, p.ffn_w1), p.ffn_b1));
    const auto projected = tape.add_row_bias(tape.matmul(hidden, p.ffn_w2), p.ffn_b2);
    return tape.layer_norm(tape.add(projected, normed), p.ln2_gain, p.ln2_bias, T(1e-5));
  };

  const auto train_attended = msa_forward(tape, z_train, messages, p.msa2, heads);
  const auto test_attended = msa_forward(tape, z_test, messages, p.msa2, heads,
                                         record ? &record->query_router : nullptr);
  return {ffn(z_train, train_attended), ffn(z_test, test_attended)};
}

template <typename T>
typename Tape<T>::Id pfn_logits_graph(Tape<T>& tape, const StagedParams<T>& staged,
                                      const ModelConfig& config, const MatrixRM& context,
                                      const MatrixRM& queries, const FeatureAdapter& adapter,
                                      AttentionRecord<T>* record) {
  if (context.rows() < 1 || queries.rows() < 1)
    throw std::invalid_argument("pfn_logits_graph: empty context or queries");
  if (context.cols() != queries.cols())
    throw std::invalid_argument("pfn_logits_graph: context/query dimension mismatch");
  const auto x_ctx = tape.leaf(to_array<T>(adapter.apply(context)), false);
  const auto x_qry = tape.leaf(to_array<T>(adapter.apply(queries)), false);
  auto z_train = tape.add_row_bias(tape.matmul(x_ctx, staged.embed_w), staged.embed_b);
  auto z_test = tape.add_row_bias(tape.matmul(x_qry, staged.embed_w), staged.embed_b);
  for (std::size_t l = 0; l < staged.layers.size(); ++l) {
    const bool last = l + 1 == staged.layers.size();
    std::tie(z_train, z_test) = router_block_forward(tape, z_train, z_test, staged.layers[l],
                                                     config.heads, last ? record : nullptr);
  }
  const auto hidden =
      tape.gelu(tape.add_row_bias(tape.matmul(z_test, staged.head_w1), staged.head_b1));
  return tape.add_row_bias(tape.matmul(hidden, staged.head_w2), staged.head_b2);
}

template <typename T>
typename Tape<T>::Id dense_logits_graph(Tape<T>& tape, const StagedParams<T>& staged,
                                        const ModelConfig& config, const MatrixRM& context,
                                        const MatrixRM& queries, const FeatureAdapter& adapter) {
  const auto x_ctx = tape.leaf(to_array<T>(adapter.apply(context)), false);
  const auto x_qry = tape.leaf(to_array<T>(adapter.apply(queries)), false);
  auto z_train = tape.add_row_bias(tape.matmul(x_ctx, staged.embed_w), staged.embed_b);
  auto z_test = tape.add_row_bias(tape.matmul(x_qry, staged.embed_w), staged.embed_b);
  for (const auto& p : staged.layers) {
    const auto ffn = [&](typename Tape<T>::Id z, typename Tape<T>::Id attended) {
      const auto normed = tape.layer_norm(tape.add(attended, z), p.ln1_gain, p.ln1_bias, T(1e-5));
      const auto hidden = tape.gelu(tape.add_row_bias(tape.matmul(normed, p.ffn_w1), p.ffn_b1));
      const auto projected = tape.add_row_bias(tape.matmul(hidden, p.ffn_w2), p.ffn_b2);
      return tape.layer_norm(tape.add(projected, normed), p.ln2_gain, p.ln2_bias, T(1e-5));
    };
    const auto train_attended = msa_forward(tape, z_train, z_train, p.msa1, config.heads);
    const auto test_attended = msa_forward(tape, z_test, z_train, p.msa2, config.heads);
    z_train = ffn(z_train, train_attended);
    z_test = ffn(z_test, test_attended);
  }
  const auto hidden =
      tape.gelu(tape.add_row_bias(tape.matmul(z_test, staged.head_w1), staged.head_b1));
  return tape.add_row_bias(tape.matmul(hidden, staged.head_w2), staged.head_b2);
}

}  // namespace zood
