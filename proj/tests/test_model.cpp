#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>

#include "tarif/errors.hpp"
#include "tarif/graph.hpp"
#include "tarif/model.hpp"

namespace tarif {
namespace {

Graph small_graph(std::uint64_t seed = 1) {
  SbmSpec spec;
  spec.n = 40;
  spec.num_classes = 3;
  spec.feature_dim = 6;
  spec.p_in = 0.3;
  spec.p_out = 0.05;
  spec.seed = seed;
  return generate_sbm(spec);
}

TarifConfig small_config() {
  TarifConfig cfg;
  cfg.d_model = 8;
  cfg.seed = 5;
  return cfg;
}

TEST(Config, VariantsMapToFlags) {
  const TarifConfig v = apply_variant(TarifConfig{}, parse_variant("vanilla"));
  EXPECT_FALSE(v.use_gat_branch || v.use_gate || v.use_sharpening || v.use_post_modulation);
  const TarifConfig ng = apply_variant(TarifConfig{}, Variant::NoGate);
  EXPECT_TRUE(ng.use_gat_branch && !ng.use_gate && ng.use_sharpening && ng.use_post_modulation);
  for (Variant x : kAllVariants) EXPECT_EQ(parse_variant(to_string(x)), x);
  EXPECT_THROW(parse_variant("no-such-variant"), ArgumentError);
}

TEST(Config, JsonRoundTrip) {
  TarifConfig cfg = small_config();
  cfg.lambda = 0.37;
  cfg.kernel = KernelKind::Relu;
  cfg.use_gate = false;
  const TarifConfig back = tarif_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
}

TEST(Config, UnknownKeyAndBadValuesRejected) {
  EXPECT_THROW(tarif_config_from_json({{"dmodel", 3}}), ArgumentError);
  EXPECT_THROW(tarif_config_from_json({{"lambda", -1.0}}), ArgumentError);
  EXPECT_THROW(tarif_config_from_json({{"d_model", "wide"}}), ArgumentError);
}

TEST(Config, ExponentsToScales) {
  const auto [alpha, beta] = TarifConfig::exponents_to_scales(2.0, 1.5);
  EXPECT_DOUBLE_EQ(alpha, 2.0);
  EXPECT_DOUBLE_EQ(beta, 1.0);
  EXPECT_THROW(TarifConfig::exponents_to_scales(1.0, 2.0), ArgumentError);
}

TEST(Parameters, ClassifiedByRole) {
  EXPECT_EQ(classify("attn0.wq"), ParamClass::Projection);
  EXPECT_EQ(classify("attn0.gate"), ParamClass::Gate);
  EXPECT_EQ(classify("attn0.sharpen"), ParamClass::Sharpening);
  EXPECT_EQ(classify("attn0.psi"), ParamClass::PostModulation);
  EXPECT_EQ(classify("attn0.gat.weight"), ParamClass::Gat);
  EXPECT_EQ(classify("gnn1.att_self0"), ParamClass::Gat);
}

TEST(Parameters, OnlyEnabledComponentsAllocate) {
  const TarifModel full(small_config(), 6, 3);
  const TarifModel vanilla(apply_variant(small_config(), Variant::Vanilla), 6, 3);
  EXPECT_GT(full.parameter_count(), vanilla.parameter_count());
  for (const auto& p : vanilla.parameters()) {
    EXPECT_EQ(p.name.find(".gate"), std::string::npos);
    EXPECT_EQ(p.name.find(".psi"), std::string::npos);
  }
}

TEST(Forward, LogitShape) {
  const Graph g = small_graph();
  const TarifModel model(small_config(), 6, 3);
  const Matrix logits = model.logits(GraphContext(g));
  EXPECT_EQ(logits.rows(), 40);
  EXPECT_EQ(logits.cols(), 3);
}

TEST(Forward, PermutationEquivariant) {
  const Graph g = small_graph();
  std::vector<Index> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.begin() + 25);
  std::rotate(perm.begin(), perm.begin() + 7, perm.end());
  const Graph pg = permute(g, perm);
  const TarifModel model(small_config(), 6, 3);
  const Matrix a = model.logits(GraphContext(g));
  const Matrix b = model.logits(GraphContext(pg));
  for (Index i = 0; i < 40; ++i) {
    EXPECT_LT((b.row(i) - a.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Forward, ZeroFeaturesGiveUniformLogitsPerNode) {
  Graph g = small_graph();
  g.features.setZero();
  const Matrix logits = TarifModel(small_config(), 6, 3).logits(GraphContext(g));
  for (Index i = 0; i < logits.rows(); ++i) {
    EXPECT_LT((logits.row(i).array() - logits(i, 0)).abs().maxCoeff(), 1e-12);
  }
}

TEST(Forward, DeterministicGivenSeed) {
  const Graph g = small_graph();
  EXPECT_EQ(TarifModel(small_config(), 6, 3).logits(GraphContext(g)),
            TarifModel(small_config(), 6, 3).logits(GraphContext(g)));
}

TEST(Forward, WrongFeatureWidthThrows) {
  const Graph g = small_graph();
  EXPECT_THROW(TarifModel(small_config(), 7, 3).logits(GraphContext(g)), DimensionError);
}

TEST(Forward, TraceRecordsEachAttentionLayer) {
  TarifConfig cfg = small_config();
  cfg.n_attn_layers = 2;
  const Graph g = small_graph();
  ForwardTrace trace;
  TarifModel(cfg, 6, 3).logits(GraphContext(g), &trace);
  ASSERT_EQ(trace.attention.size(), 2u);
  EXPECT_NEAR(trace.attention[0].p, 2.0, 1e-12);
  EXPECT_NEAR(trace.attention[0].q, 1.5, 1e-12);
  EXPECT_NEAR(trace.attention[0].gat_coefficient, 0.05, 1e-12);
}

TEST(Checkpoint, RoundTripPreservesLogits) {
  const Graph g = small_graph();
  const TarifModel model(small_config(), 6, 3);
  const auto dir = std::filesystem::temp_directory_path() / "tarif_model_ckpt";
  std::filesystem::remove_all(dir);
  save_checkpoint(model, dir, {{"note", "x"}});
  nlohmann::json extra;
  const TarifModel back = load_checkpoint(dir, &extra);
  EXPECT_EQ(extra["note"], "x");
  EXPECT_EQ(back.logits(GraphContext(g)), model.logits(GraphContext(g)));
}

TEST(Checkpoint, MissingDirectoryThrows) {
  EXPECT_ANY_THROW(load_checkpoint("/nonexistent/tarif/checkpoint"));
}

}  // namespace
}  // namespace tarif
