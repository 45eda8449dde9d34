#include <gtest/gtest.h>

#include <cmath>

#include "tarif/attention.hpp"
#include "tarif/errors.hpp"
#include "tarif/graph.hpp"
#include "tarif/model.hpp"
#include "tarif/random.hpp"

namespace tarif {
namespace {

TEST(Kernel, SigmoidAndRelu) {
  Matrix h(1, 3);
  h << -1.0, 0.0, 2.0;
  const Matrix s = kernel_map(h, KernelKind::Sigmoid);
  EXPECT_NEAR(s(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(s(0, 2), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  EXPECT_EQ(kernel_map(h, KernelKind::Relu), (Matrix(1, 3) << 0.0, 0.0, 2.0).finished());
  EXPECT_EQ(parse_kernel(to_string(KernelKind::Relu)), KernelKind::Relu);
  EXPECT_THROW(parse_kernel("cosine"), ArgumentError);
}

TEST(Sharpen, ReferenceValues) {
  EXPECT_EQ(sharpen_value(0.0, 2.0, 3.0), 0.0);
  EXPECT_NEAR(sharpen_value(1.0, 1.0, 1.0), 0.693147180559945309, 1e-15);
  // High-precision reference: 2 * ln(5)^1.5.
  EXPECT_NEAR(sharpen_value(2.0, 2.0, 1.5), 4.08358252728442001, 1e-13);
  EXPECT_NEAR(sharpen_derivative(1.0, 2.0, 2.0), 1.86674737503809204, 1e-13);
}

TEST(Sharpen, MonotoneIncreasing) {
  double prev = 0.0;
  for (double x = 0.01; x < 50.0; x *= 1.3) {
    const double f = sharpen_value(x, 1.5, 2.5);
    EXPECT_GT(f, prev);
    prev = f;
  }
}

TEST(Sharpen, NegativeInputRejected) {
  EXPECT_THROW(sharpen(Matrix::Constant(1, 1, -0.1), 2.0, 2.0), ArgumentError);
}

TEST(LinearAttention, SingleNode) {
  Matrix q(1, 2), k(1, 2), v(1, 3);
  q << 0.5, 2.0;
  k << 1.0, 0.25;
  v << 1.0, -2.0, 3.0;
  EXPECT_LT((linear_attention(q, k, v) - (q * k.transpose())(0, 0) * v).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(LinearAttention, MatchesQuadraticOrder) {
  CounterRng rng(1);
  const Matrix q = rng.uniform_matrix(50, 8, 0.0, 1.0), k = rng.uniform_matrix(50, 8, 0.0, 1.0);
  const Matrix v = rng.normal_matrix(50, 8);
  const Matrix explicit_map = q * k.transpose();
  EXPECT_LT((linear_attention(q, k, v) - explicit_map * v).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(LinearAttention, ShapeMismatchThrows) {
  EXPECT_THROW(linear_attention(Matrix::Ones(3, 2), Matrix::Ones(4, 2), Matrix::Ones(3, 2)), DimensionError);
}

TEST(LinearAttention, MapRankBoundedByWidth) {
  CounterRng rng(2);
  for (int t = 0; t < 20; ++t) {
    const Matrix q = kernel_map(rng.normal_matrix(64, 4), KernelKind::Sigmoid);
    const Matrix k = kernel_map(rng.normal_matrix(64, 4), KernelKind::Sigmoid);
    EXPECT_EQ(numerical_rank(Matrix(q * k.transpose())).numerical_rank, 4);
  }
}

TEST(SoftmaxAttention, SingleRowReturnsValue) {
  const Matrix v = (Matrix(1, 3) << 4.0, 5.0, 6.0).finished();
  EXPECT_LT((softmax_attention(Matrix::Ones(1, 2), Matrix::Ones(1, 2), v) - v).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SoftmaxAttention, MatchesTwoStepOracle) {
  CounterRng rng(3);
  const Matrix q = rng.normal_matrix(40, 6), k = rng.normal_matrix(40, 6), v = rng.normal_matrix(40, 5);
  Matrix scores = q * k.transpose() / std::sqrt(6.0);
  for (Index i = 0; i < scores.rows(); ++i) {
    scores.row(i) = (scores.row(i).array() - scores.row(i).maxCoeff()).exp();
    scores.row(i) /= scores.row(i).sum();
  }
  EXPECT_LT((softmax_attention(q, k, v, 7) - scores * v).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SoftmaxAttention, DuplicateKeysGetUniformWeight) {
  const Matrix q = Matrix::Identity(3, 3).topRows(1).replicate(3, 1);
  Matrix v(3, 1);
  v << 1.0, 2.0, 6.0;
  const Matrix out = softmax_attention(q, q, v);
  EXPECT_NEAR(out(0, 0), 3.0, 1e-12);
}

TEST(GatBranch, NoEdgesGivesIdentityMap) {
  const Graph g = build_graph(4, {}, Matrix::Zero(4, 1), {0, 1, 0, 1});
  CounterRng rng(4);
  const Matrix v = rng.normal_matrix(4, 3);
  const GatWeights w{rng.normal_matrix(3, 3), rng.normal_matrix(3, 1), rng.normal_matrix(3, 1)};
  const auto r = gat_branch(g.with_self_loops(), v, w);
  EXPECT_LT((Matrix(r.attention) - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((r.features - v * w.weight).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GatBranch, RowsAreStochastic) {
  SbmSpec spec;
  spec.n = 50;
  spec.seed = 5;
  const Graph g = generate_sbm(spec);
  CounterRng rng(6);
  const GatWeights w{rng.normal_matrix(16, 8), rng.normal_matrix(8, 1), rng.normal_matrix(8, 1)};
  const Matrix m = gat_branch(g.with_self_loops(), g.features, w).attention;
  EXPECT_LT((m.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(GatBranch, SymmetricPairSplitsEvenly) {
  const Graph g = build_graph(2, {{0, 1}}, Matrix::Zero(2, 1), {0, 1});
  Matrix v(2, 2);
  v << 1.0, 1.0, 1.0, 1.0;
  const GatWeights w{Matrix::Identity(2, 2), Matrix::Constant(2, 1, 0.3), Matrix::Constant(2, 1, 0.3)};
  const Matrix m = gat_branch(g.with_self_loops(), v, w).attention;
  EXPECT_LT((m.array() - 0.5).abs().maxCoeff(), 1e-15);
}

// ---------------------------------------------------------------------------

struct HybridFixture : ::testing::Test {
  void SetUp() override {
    SbmSpec spec;
    spec.n = 64;
    spec.feature_dim = 8;
    spec.seed = 11;
    graph = generate_sbm(spec);
    nbrs = graph.with_self_loops();
    weights = random_hybrid_weights(8, 12);
    cfg.d_model = 8;
  }
  Graph graph;
  ad::Neighborhoods nbrs;
  HybridWeights weights;
  TarifConfig cfg;
};

TEST_F(HybridFixture, AllComponentsOffIsPlainLinearAttention) {
  cfg = apply_variant(cfg, Variant::Vanilla);
  cfg.normalize_global = false;
  const Matrix phi_q = kernel_map(graph.features * weights.wq, cfg.kernel);
  const Matrix phi_k = kernel_map(graph.features * weights.wk, cfg.kernel);
  const Matrix expected = linear_attention(phi_q, phi_k, graph.features * weights.wv);
  EXPECT_LT((hybrid_layer(nbrs, graph.features, weights, cfg) - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST_F(HybridFixture, NormalizedGlobalTermUsesRowStochasticMap) {
  cfg = apply_variant(cfg, Variant::Vanilla);
  const Matrix phi_q = kernel_map(graph.features * weights.wq, cfg.kernel);
  const Matrix phi_k = kernel_map(graph.features * weights.wk, cfg.kernel);
  const Matrix expected = row_normalize(Matrix(phi_q * phi_k.transpose())) * (graph.features * weights.wv);
  AttentionTrace trace;
  EXPECT_LT((hybrid_layer(nbrs, graph.features, weights, cfg, &trace) - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((linear_attention_map(trace).rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST_F(HybridFixture, VanishingGateLeavesLinearPath) {
  cfg.use_post_modulation = false;
  cfg.lambda = 1e-300;
  TarifConfig linear_only = cfg;
  linear_only.use_gat_branch = false;
  EXPECT_LT((hybrid_layer(nbrs, graph.features, weights, cfg) -
             hybrid_layer(nbrs, graph.features, weights, linear_only))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST_F(HybridFixture, PostModulationIsElementwise) {
  TarifConfig plain = cfg;
  plain.use_post_modulation = false;
  const Matrix z = hybrid_layer(nbrs, graph.features, weights, plain);
  const Matrix zbar = hybrid_layer(nbrs, graph.features, weights, cfg);
  EXPECT_LT((zbar - (graph.features * weights.psi).cwiseProduct(z)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_F(HybridFixture, EquivalentMapReproducesOutput) {
  cfg.use_post_modulation = false;
  AttentionTrace trace;
  const Matrix z = hybrid_layer(nbrs, graph.features, weights, cfg, &trace);
  const Matrix m_eq = equivalent_attention_map(trace, nbrs);
  // The GAT branch aggregates its own projection of V.
  const Matrix v = graph.features * weights.wv;
  const Matrix global = linear_attention_map(trace) * v;
  const Matrix local = (m_eq - linear_attention_map(trace)) * (v * weights.gat.weight);
  EXPECT_LT((z - global - local).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(RankAugmentation, EquivalentMapExceedsLinearRank) {
  int strictly_greater = 0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    SbmSpec spec;
    spec.n = 64;
    spec.feature_dim = 4;
    spec.seed = 100 + t;
    const Graph g = generate_sbm(spec);
    const auto nbrs = g.with_self_loops();
    TarifConfig cfg;
    cfg.d_model = 4;
    cfg.use_post_modulation = false;
    AttentionTrace trace;
    hybrid_layer(nbrs, g.features, random_hybrid_weights(4, 200 + t), cfg, &trace);
    const Index base = numerical_rank(linear_attention_map(trace)).numerical_rank;
    const Index eq = numerical_rank(equivalent_attention_map(trace, nbrs)).numerical_rank;
    EXPECT_LE(base, 4);
    EXPECT_GE(eq, base);
    strictly_greater += eq > base;
  }
  EXPECT_GE(strictly_greater, 19);
}

}  // namespace
}  // namespace tarif
