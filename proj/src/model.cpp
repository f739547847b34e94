#include "zood/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace zood {

void ModelConfig::validate() const {
  if (max_dims < 1) throw std::invalid_argument("ModelConfig: max_dims must be >= 1");
  if (num_layers < 1) throw std::invalid_argument("ModelConfig: num_layers must be >= 1");
  if (hidden < 1) throw std::invalid_argument("ModelConfig: hidden must be >= 1");
  if (heads < 1 || hidden % heads != 0)
    throw std::invalid_argument("ModelConfig: hidden must be divisible by heads");
  if (routers < 1) throw std::invalid_argument("ModelConfig: routers must be >= 1");
  if (ffn_multiplier < 1) throw std::invalid_argument("ModelConfig: ffn_multiplier must be >= 1");
}

long long count_params(const ModelConfig& config) {
  config.validate();
  const long long h = config.hidden;
  const long long fh = h * config.ffn_multiplier;
  const long long embed = static_cast<long long>(config.max_dims) * h + h;
  const long long msa = 4 * (h * h + h);
  const long long per_layer = static_cast<long long>(config.routers) * h  // routers
                              + 2 * msa                                   // msa1 + msa2
                              + 2 * h + 2 * h                             // two layer norms
                              + (h * fh + fh) + (fh * h + h);             // ffn
  const long long head = (h * h + h) + (h * 2 + 2);
  return embed + config.num_layers * per_layer + head;
}

FeatureAdapter FeatureAdapter::make(int d, int max_dims, Rng& rng) {
  if (d < 1) throw std::invalid_argument("FeatureAdapter: d must be >= 1");
  FeatureAdapter a;
  a.d_in = d;
  a.d_model = max_dims;
  if (d <= max_dims) {
    a.scale = static_cast<double>(max_dims) / static_cast<double>(d);
  } else {
    a.selected = rng.sample_indices(d, max_dims);
    std::sort(a.selected.begin(), a.selected.end());
  }
  return a;
}

MatrixRM FeatureAdapter::apply(const MatrixRM& x) const {
  if (static_cast<int>(x.cols()) != d_in)
    throw std::invalid_argument("FeatureAdapter: input width mismatch");
  MatrixRM out = MatrixRM::Zero(x.rows(), d_model);
  if (selected.empty()) {
    out.leftCols(d_in) = x * scale;
  } else {
    for (int k = 0; k < d_model; ++k)
      out.col(k) = x.col(selected[static_cast<std::size_t>(k)]);
  }
  return out;
}

namespace {

MatrixRM softmax_rows_of(const MatrixRM& logits) {
  MatrixRM probs(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    probs.row(r) = (logits.row(r).array() - mx).exp();
    probs.row(r) /= probs.row(r).sum();
  }
  return probs;
}

}  // namespace

template <typename T>
ForwardResult pfn_forward(const ModelParamsT<T>& params, const ModelConfig& config,
                          const MatrixRM& context, const MatrixRM& queries, Rng& rng) {
  Tape<T> tape;
  const auto staged = stage_params(tape, params, false);
  const auto adapter =
      FeatureAdapter::make(static_cast<int>(context.cols()), config.max_dims, rng);
  const auto logits = pfn_logits_graph(tape, staged, config, context, queries, adapter);
  ForwardResult result;
  result.logits = to_matrix(tape.value(logits));
  result.probs = softmax_rows_of(result.logits);
  return result;
}

template <typename T>
std::vector<AttendedPoint> attention_topk(const ModelParamsT<T>& params,
                                          const ModelConfig& config, const MatrixRM& context,
                                          const Vector& query, int k, Rng& rng) {
  const int n = static_cast<int>(context.rows());
  if (k < 1 || k > n) throw std::invalid_argument("attention_topk: k out of range");
  Tape<T> tape;
  const auto staged = stage_params(tape, params, false);
  const auto adapter =
      FeatureAdapter::make(static_cast<int>(context.cols()), config.max_dims, rng);
  MatrixRM query_row(1, query.size());
  query_row.row(0) = query.transpose();
  AttentionRecord<T> record;
  pfn_logits_graph(tape, staged, config, context, query_row, adapter, &record);

  // Head-averaged stochastic matrices: (1 x R) query->message times
  // (R x n) message->context gives the induced weight over context points.
  const int heads = config.heads;
  MatrixRM query_router = MatrixRM::Zero(1, config.routers);
  MatrixRM router_context = MatrixRM::Zero(config.routers, n);
  for (int h = 0; h < heads; ++h) {
    query_router += to_matrix(record.query_router[static_cast<std::size_t>(h)]);
    router_context += to_matrix(record.router_context[static_cast<std::size_t>(h)]);
  }
  query_router /= heads;
  router_context /= heads;
  const MatrixRM induced = query_router * router_context;  // 1 x n

  std::vector<AttendedPoint> points(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) points[static_cast<std::size_t>(i)] = {i, induced(0, i)};
  std::stable_sort(points.begin(), points.end(), [](const AttendedPoint& a, const AttendedPoint& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.index < b.index;
  });
  points.resize(static_cast<std::size_t>(k));
  return points;
}

template ForwardResult pfn_forward<float>(const ModelParamsT<float>&, const ModelConfig&,
                                          const MatrixRM&, const MatrixRM&, Rng&);
template ForwardResult pfn_forward<double>(const ModelParamsT<double>&, const ModelConfig&,
                                           const MatrixRM&, const MatrixRM&, Rng&);
template std::vector<AttendedPoint> attention_topk<float>(const ModelParamsT<float>&,
                                                          const ModelConfig&, const MatrixRM&,
                                                          const Vector&, int, Rng&);
template std::vector<AttendedPoint> attention_topk<double>(const ModelParamsT<double>&,
                                                           const ModelConfig&, const MatrixRM&,
                                                           const Vector&, int, Rng&);

}  // namespace zood
