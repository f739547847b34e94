#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "zood/model.hpp"

using namespace zood;

namespace {

ModelConfig tiny_config(int max_dims = 4, int layers = 2, int hidden = 16, int heads = 2,
                        int routers = 3) {
  ModelConfig c;
  c.max_dims = max_dims;
  c.num_layers = layers;
  c.hidden = hidden;
  c.heads = heads;
  c.routers = routers;
  c.ffn_multiplier = 2;
  return c;
}

MatrixRM random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
  MatrixRM m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("count_params: embedding gap and reference band") {
  ModelConfig reference;  // D=100, L=4, h=256, H=4, R=500, ffn=4
  ModelConfig small = reference;
  small.max_dims = 20;
  CHECK(count_params(reference) - count_params(small) == 80 * 256);

  const double count = static_cast<double>(count_params(reference));
  CHECK(count >= 4.89e6 * 0.85);
  CHECK(count <= 4.89e6 * 1.15);

  ModelConfig doubled = reference;
  doubled.routers *= 2;
  CHECK(count_params(doubled) - count_params(reference) ==
        static_cast<long long>(reference.num_layers) * reference.routers * reference.hidden);
}

TEST_CASE("count_params matches allocated arrays") {
  const ModelConfig config = tiny_config();
  Rng rng(1);
  const auto params = init_params<float>(config, rng);
  long long total = 0;
  visit_params(params, [&](const std::string&, const ArrayT<float>& a) {
    total += static_cast<long long>(a.size());
  });
  CHECK(total == count_params(config));
}

TEST_CASE("feature adapter: rescale, pad, subsample") {
  Rng rng(2);

  SUBCASE("d == D is a plain pass-through") {
    const auto adapter = FeatureAdapter::make(4, 4, rng);
    const MatrixRM x = random_matrix(3, 4, rng);
    CHECK(adapter.apply(x) == x);
  }
  SUBCASE("d == D/2 doubles and zero-pads") {
    const auto adapter = FeatureAdapter::make(2, 4, rng);
    MatrixRM x(2, 2);
    x << 1.0, -2.0, 0.5, 3.0;
    const MatrixRM out = adapter.apply(x);
    CHECK(out(0, 0) == doctest::Approx(2.0));
    CHECK(out(0, 1) == doctest::Approx(-4.0));
    CHECK(out(0, 2) == doctest::Approx(0.0));
    CHECK(out(0, 3) == doctest::Approx(0.0));
    CHECK(out(1, 0) == doctest::Approx(1.0));
  }
  SUBCASE("d == D+1 drops exactly one feature, deterministically") {
    Rng r1(99), r2(99);
    const auto a1 = FeatureAdapter::make(5, 4, r1);
    const auto a2 = FeatureAdapter::make(5, 4, r2);
    CHECK(a1.selected == a2.selected);
    CHECK(a1.selected.size() == 4);
    const MatrixRM x = random_matrix(3, 5, rng);
    const MatrixRM out = a1.apply(x);
    CHECK(out.cols() == 4);
    for (int k = 0; k < 4; ++k)
      CHECK(out.col(k) == x.col(a1.selected[static_cast<std::size_t>(k)]));
  }
}

TEST_CASE("attention with one key returns the projected value row for all queries") {
  const ModelConfig config = tiny_config();
  Rng rng(3);
  const auto params = init_params<double>(config, rng);
  Tape<double> tape;
  const auto staged = stage_params(tape, params, false);

  const auto queries = tape.leaf(to_array<double>(random_matrix(5, config.hidden, rng)));
  const auto kv = tape.leaf(to_array<double>(random_matrix(1, config.hidden, rng)));
  const auto out = msa_forward(tape, queries, kv, staged.layers[0].msa1, config.heads);
  const auto& v = tape.value(out);
  for (std::size_t r = 1; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); ++c)
      CHECK(v.at(r, c) == doctest::Approx(v.at(0, c)).epsilon(1e-12));
}

TEST_CASE("identical keys give uniform attention weights") {
  const ModelConfig config = tiny_config();
  Rng rng(4);
  const auto params = init_params<double>(config, rng);
  Tape<double> tape;
  const auto staged = stage_params(tape, params, false);

  MatrixRM kv_rows = random_matrix(1, config.hidden, rng);
  MatrixRM kv(4, config.hidden);
  for (int i = 0; i < 4; ++i) kv.row(i) = kv_rows.row(0);

  std::vector<ArrayT<double>> weights;
  const auto queries = tape.leaf(to_array<double>(random_matrix(3, config.hidden, rng)));
  msa_forward(tape, queries, tape.leaf(to_array<double>(kv)), staged.layers[0].msa1,
              config.heads, &weights);
  REQUIRE(weights.size() == static_cast<std::size_t>(config.heads));
  for (const auto& w : weights)
    for (double v : w.data) CHECK(v == doctest::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("hand-computed 2x2 single-head attention golden value") {
  // h=2, H=1; every projection set by hand, recomputed with scalar loops.
  const double x[2][2] = {{1.0, 2.0}, {-1.0, 0.5}};
  const double wq[2][2] = {{0.3, -0.2}, {0.1, 0.4}};
  const double wk[2][2] = {{-0.5, 0.2}, {0.3, 0.1}};
  const double wv[2][2] = {{0.7, 0.0}, {-0.3, 0.6}};
  const double wo[2][2] = {{1.0, 0.5}, {-0.2, 0.3}};
  const double bq[2] = {0.05, -0.1};
  const double bk[2] = {0.2, 0.0};
  const double bv[2] = {0.0, 0.1};
  const double bo[2] = {-0.04, 0.02};

  // Oracle: explicit scalar arithmetic.
  double q[2][2], k[2][2], v[2][2];
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      q[i][j] = x[i][0] * wq[0][j] + x[i][1] * wq[1][j] + bq[j];
      k[i][j] = x[i][0] * wk[0][j] + x[i][1] * wk[1][j] + bk[j];
      v[i][j] = x[i][0] * wv[0][j] + x[i][1] * wv[1][j] + bv[j];
    }
  const double scale = 1.0 / std::sqrt(2.0);
  double expected[2][2];
  for (int i = 0; i < 2; ++i) {
    double logits[2];
    for (int j = 0; j < 2; ++j) logits[j] = scale * (q[i][0] * k[j][0] + q[i][1] * k[j][1]);
    const double mx = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - mx);
    const double e1 = std::exp(logits[1] - mx);
    const double w0 = e0 / (e0 + e1);
    const double w1 = e1 / (e0 + e1);
    double attended[2];
    for (int j = 0; j < 2; ++j) attended[j] = w0 * v[0][j] + w1 * v[1][j];
    for (int j = 0; j < 2; ++j)
      expected[i][j] = attended[0] * wo[0][j] + attended[1] * wo[1][j] + bo[j];
  }

  Tape<double> tape;
  const auto fill = [&](const double (&src)[2][2]) {
    ArrayT<double> a({2, 2});
    a.data = {src[0][0], src[0][1], src[1][0], src[1][1]};
    return tape.leaf(a);
  };
  const auto fill1 = [&](const double (&src)[2]) {
    ArrayT<double> a({2});
    a.data = {src[0], src[1]};
    return tape.leaf(a);
  };
  MsaLayout<Tape<double>::Id> p;
  p.wq = fill(wq);
  p.wk = fill(wk);
  p.wv = fill(wv);
  p.wo = fill(wo);
  p.bq = fill1(bq);
  p.bk = fill1(bk);
  p.bv = fill1(bv);
  p.bo = fill1(bo);
  const auto tokens = fill(x);
  const auto out = msa_forward(tape, tokens, tokens, p, 1);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(tape.value(out).at(i, j) == doctest::Approx(expected[i][j]).epsilon(1e-10));
}

TEST_CASE("router bottleneck with R=1 collapses the attended image") {
  ModelConfig config = tiny_config(4, 1, 16, 2, 1);
  Rng rng(5);
  const auto params = init_params<double>(config, rng);
  Tape<double> tape;
  const auto staged = stage_params(tape, params, false);

  const auto z_train = tape.leaf(to_array<double>(random_matrix(6, config.hidden, rng)));
  const auto z_test = tape.leaf(to_array<double>(random_matrix(4, config.hidden, rng)));
  const auto messages =
      msa_forward(tape, staged.layers[0].routers, z_train, staged.layers[0].msa1, config.heads);
  CHECK(tape.value(messages).rows() == 1);
  const auto attended = msa_forward(tape, z_test, messages, staged.layers[0].msa2, config.heads);
  const auto& v = tape.value(attended);
  for (std::size_t r = 1; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); ++c)
      CHECK(v.at(r, c) == doctest::Approx(v.at(0, c)).epsilon(1e-12));
}

TEST_CASE("probability rows sum to one") {
  const ModelConfig config = tiny_config();
  Rng rng(6);
  const auto params = init_params<float>(config, rng);
  const MatrixRM context = random_matrix(20, 3, rng);
  const MatrixRM queries = random_matrix(7, 3, rng);
  Rng fwd_rng(0);
  const ForwardResult result = pfn_forward(params, config, context, queries, fwd_rng);
  REQUIRE(result.probs.rows() == 7);
  for (int i = 0; i < 7; ++i)
    CHECK(result.probs.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("context permutation invariance") {
  const ModelConfig config = tiny_config();
  Rng rng(7);
  const auto params = init_params<float>(config, rng);
  const MatrixRM context = random_matrix(30, 4, rng);
  const MatrixRM queries = random_matrix(5, 4, rng);

  Rng r1(0), r2(0);
  const ForwardResult base = pfn_forward(params, config, context, queries, r1);

  MatrixRM shuffled = context;
  std::vector<int> perm(30);
  for (int i = 0; i < 30; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng perm_rng(8);
  perm_rng.shuffle(perm);
  for (int i = 0; i < 30; ++i) shuffled.row(i) = context.row(perm[static_cast<std::size_t>(i)]);
  const ForwardResult permuted = pfn_forward(params, config, shuffled, queries, r2);

  CHECK((base.probs - permuted.probs).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("query independence: joint and singleton scoring agree") {
  const ModelConfig config = tiny_config();
  Rng rng(8);
  const auto params = init_params<float>(config, rng);
  const MatrixRM context = random_matrix(25, 4, rng);
  const MatrixRM queries = random_matrix(6, 4, rng);

  Rng r1(0);
  const ForwardResult joint = pfn_forward(params, config, context, queries, r1);
  for (int i = 0; i < 6; ++i) {
    Rng r2(0);
    const ForwardResult single = pfn_forward(params, config, context, queries.middleRows(i, 1), r2);
    CHECK(std::fabs(single.probs(0, 0) - joint.probs(i, 0)) < 1e-5);
    CHECK(std::fabs(single.probs(0, 1) - joint.probs(i, 1)) < 1e-5);
  }
}

TEST_CASE("every parameter except key biases receives gradient") {
  // Key-projection biases shift all logits of a softmax row equally, so their
  // gradient vanishes identically; all other arrays must be live.
  const ModelConfig config = tiny_config();
  Rng rng(9);
  const auto params = init_params<double>(config, rng);

  Tape<double> tape;
  const auto staged = stage_params(tape, params, true);
  const MatrixRM context = random_matrix(12, 3, rng);
  const MatrixRM queries = random_matrix(8, 3, rng);
  Rng adapt_rng(0);
  const auto adapter = FeatureAdapter::make(3, config.max_dims, adapt_rng);
  const auto logits = pfn_logits_graph(tape, staged, config, context, queries, adapter);
  std::vector<int> labels(8);
  for (int i = 0; i < 8; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
  tape.backward(tape.cross_entropy_mean(logits, labels));

  visit_params(staged, [&](const std::string& name, const Tape<double>::Id& id) {
    double max_abs = 0.0;
    for (double v : tape.grad(id).data) max_abs = std::max(max_abs, std::fabs(v));
    if (name.find(".bk") != std::string::npos) {
      CHECK(max_abs < 1e-12);
    } else {
      CHECK(max_abs > 0.0);
    }
  });
}

TEST_CASE("attention_topk: weights form a distribution, n=1 trivial") {
  const ModelConfig config = tiny_config();
  Rng rng(10);
  const auto params = init_params<float>(config, rng);
  const MatrixRM context = random_matrix(15, 3, rng);
  const Vector query = random_matrix(1, 3, rng).row(0).transpose();

  Rng r1(0);
  const auto top = attention_topk(params, config, context, query, 15, r1);
  REQUIRE(top.size() == 15);
  double total = 0.0;
  for (const auto& p : top) {
    CHECK(p.weight >= 0.0);
    total += p.weight;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
  for (std::size_t i = 1; i < top.size(); ++i) CHECK(top[i - 1].weight >= top[i].weight);

  Rng r2(0);
  const auto single = attention_topk(params, config, context.topRows(1), query, 1, r2);
  REQUIRE(single.size() == 1);
  CHECK(single[0].index == 0);
  CHECK(single[0].weight == doctest::Approx(1.0).epsilon(1e-6));

  Rng r3(0);
  CHECK_THROWS_AS(attention_topk(params, config, context, query, 16, r3), std::invalid_argument);
}

TEST_CASE("invalid configs are rejected") {
  ModelConfig bad = tiny_config();
  bad.hidden = 15;  // not divisible by heads=2
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  ModelConfig zero = tiny_config();
  zero.routers = 0;
  CHECK_THROWS_AS(zero.validate(), std::invalid_argument);
}
