#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tarif/diagnostics.hpp"
#include "tarif/errors.hpp"
#include "tarif/matrix_io.hpp"
#include "tarif/random.hpp"

namespace tarif {
namespace {

TEST(Pse, ReferenceValues) {
  EXPECT_NEAR(pse(std::vector<double>{2.0, 1.0, 1.0}), 1.0397207708399179, 1e-15);
  EXPECT_NEAR(pse(std::vector<double>{1.0, 1.0, 1.0, 1.0}), std::log(4.0), 1e-15);
  EXPECT_EQ(pse(std::vector<double>{0.0, 3.0, 0.0}), 0.0);
}

TEST(Pse, ScaleInvariant) {
  const std::vector<double> a{0.3, 1.2, 4.0}, b{3.0, 12.0, 40.0};
  EXPECT_NEAR(pse(a), pse(b), 1e-14);
}

TEST(Pse, InvalidInputs) {
  EXPECT_THROW(pse(std::vector<double>{}), ArgumentError);
  EXPECT_THROW(pse(std::vector<double>{1.0, -0.1}), ArgumentError);
  EXPECT_THROW(pse(std::vector<double>{0.0, 0.0}), ArgumentError);
}

TEST(AttentionEntropy, MeanOfRowEntropies) {
  CounterRng rng(1);
  const Matrix m = row_normalize(rng.uniform_matrix(7, 5, 0.0, 1.0));
  double expected = 0.0;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) expected -= m(i, j) * std::log(m(i, j));
  }
  EXPECT_NEAR(attention_entropy(m), expected / 7.0, 1e-13);
}

TEST(AttentionEntropy, ZeroRowIsDegenerate) {
  Matrix m = Matrix::Ones(3, 3);
  m.row(2).setZero();
  EXPECT_THROW(attention_entropy(m), DegenerateRowError);
}

TEST(Subsample, EvenlySpaced) {
  EXPECT_EQ(even_subsample(10, 5), (std::vector<Index>{0, 2, 4, 6, 8}));
  EXPECT_EQ(even_subsample(4, 4), (std::vector<Index>{0, 1, 2, 3}));
}

struct DiagnoseFixture : ::testing::Test {
  void SetUp() override {
    SbmSpec spec;
    spec.n = 150;
    spec.seed = 3;
    graph = generate_sbm(spec);
  }
  Graph graph;
};

TEST_F(DiagnoseFixture, VanillaRankBoundedByWidth) {
  TarifConfig cfg = apply_variant(TarifConfig{}, Variant::Vanilla);
  cfg.d_model = 4;
  const TarifModel model(cfg, 16, 4);
  const auto report = diagnose(model, GraphContext(graph));
  ASSERT_EQ(report.layers.size(), 1u);
  EXPECT_LE(report.layers[0].rank, 4);
  EXPECT_EQ(report.layers[0].nodes, 150);
}

TEST_F(DiagnoseFixture, FullModelRaisesRank) {
  TarifConfig cfg;
  cfg.d_model = 4;
  const auto report = diagnose(TarifModel(cfg, 16, 4), GraphContext(graph));
  EXPECT_GT(report.layers[0].rank, report.layers[0].linear_rank);
  EXPECT_GT(report.layers[0].scatter_trace, 0.0);
}

TEST_F(DiagnoseFixture, SubsampleAndDump) {
  const auto dir = std::filesystem::temp_directory_path() / "tarif_diag_dump";
  std::filesystem::remove_all(dir);
  DiagnoseOptions opt;
  opt.subsample = 120;
  opt.dump_dir = dir;
  const auto report = diagnose(TarifModel(TarifConfig{}, 16, 4), GraphContext(graph), opt);
  EXPECT_EQ(report.nodes.size(), 120u);
  ASSERT_TRUE(report.layers[0].snapshot.has_value());
  std::ifstream in(*report.layers[0].snapshot);
  const auto j = nlohmann::json::parse(in);
  const Matrix map = matrix_from_json(j.contains("map") ? j["map"] : j);
  EXPECT_EQ(map.rows(), 120);
  EXPECT_EQ(map.cols(), 120);
}

TEST_F(DiagnoseFixture, CapWithoutSubsampleRejected) {
  DiagnoseOptions opt;
  opt.cap = 100;
  EXPECT_THROW(diagnose(TarifModel(TarifConfig{}, 16, 4), GraphContext(graph), opt), ArgumentError);
}

TEST_F(DiagnoseFixture, JsonLinesAppend) {
  const auto path = std::filesystem::temp_directory_path() / "tarif_diag.jsonl";
  std::filesystem::remove(path);
  const auto report = diagnose(TarifModel(TarifConfig{}, 16, 4), GraphContext(graph));
  append_report_jsonl(path, report, 1);
  append_report_jsonl(path, report, 2);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["epoch"], ++lines);
    EXPECT_TRUE(j.contains("rank") && j.contains("mean_pse") && j.contains("scatter_trace"));
  }
  EXPECT_EQ(lines, 2);
}

}  // namespace
}  // namespace tarif
