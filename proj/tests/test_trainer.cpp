#include <gtest/gtest.h>

#include <cmath>

#include "tarif/errors.hpp"
#include "tarif/random.hpp"
#include "tarif/trainer.hpp"

namespace tarif {
namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

TEST(Metrics, AucMatchesPairwiseCount) {
  CounterRng rng(21);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 10 + static_cast<std::size_t>(rng.uniform_int(60));
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse scores so that ties occur.
      s[i] = std::floor(rng.uniform() * 8.0);
      y[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(rng.uniform_int(2));
    }
    EXPECT_NEAR(roc_auc(s, y), pairwise_auc(s, y), 1e-12);
  }
}

TEST(Metrics, AucRejectsSingleClass) {
  EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), ArgumentError);
}

TEST(Metrics, CrossEntropyMatchesLoop) {
  CounterRng rng(3);
  const Matrix logits = rng.normal_matrix(12, 4, 3.0);
  std::vector<int> y(12);
  for (int i = 0; i < 12; ++i) y[static_cast<std::size_t>(i)] = (i * 7) % 4;
  const std::vector<Index> rows{0, 3, 4, 9, 11};
  double expected = 0.0;
  for (Index r : rows) {
    double z = 0.0;
    for (Index c = 0; c < 4; ++c) z += std::exp(logits(r, c));
    expected += std::log(z) - logits(r, y[static_cast<std::size_t>(r)]);
  }
  EXPECT_NEAR(cross_entropy(logits, y, rows), expected / 5.0, 1e-10);
}

TEST(Metrics, Accuracy) {
  Matrix logits(3, 2);
  logits << 1, 0, 0, 1, 2, 1;
  EXPECT_DOUBLE_EQ(accuracy(logits, std::vector<int>{0, 1, 1}, std::vector<Index>{0, 1, 2}), 2.0 / 3.0);
  EXPECT_EQ(parse_metric("roc_auc"), Metric::RocAuc);
  EXPECT_THROW(parse_metric("f1"), ArgumentError);
}

TEST(Adam, ZeroLearningRateLeavesParameters) {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  std::vector<Matrix> p{Matrix::Constant(2, 3, 1.5)};
  const std::vector<Matrix> g{Matrix::Constant(2, 3, -4.0)};
  Adam adam(p, cfg);
  adam.step(p, g);
  EXPECT_EQ(p[0], Matrix::Constant(2, 3, 1.5));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.0;
  std::vector<Matrix> p{Matrix::Zero(1, 2)};
  const std::vector<Matrix> g{(Matrix(1, 2) << 3.0, -0.5).finished()};
  Adam adam(p, cfg);
  adam.step(p, g);
  EXPECT_NEAR(p[0](0, 0), -0.1, 1e-7);
  EXPECT_NEAR(p[0](0, 1), 0.1, 1e-7);
}

TEST(TrainConfigJson, RoundTripAndValidation) {
  TrainConfig cfg;
  cfg.epochs = 17;
  cfg.metric = Metric::RocAuc;
  EXPECT_EQ(to_json(train_config_from_json(to_json(cfg))), to_json(cfg));
  cfg.learning_rate = -1.0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
}

struct TrainFixture : ::testing::Test {
  void SetUp() override {
    SbmSpec spec;
    spec.n = 120;
    spec.num_classes = 3;
    spec.feature_dim = 6;
    spec.sigma = 0.0;
    spec.seed = 2;
    graph = split(generate_sbm(spec), 0.5, 0.25, 3);
    model.d_model = 8;
    cfg.epochs = 200;
    cfg.weight_decay = 0.0;
    cfg.patience = 1000;
  }
  Graph graph;
  TarifConfig model;
  TrainConfig cfg;
};

TEST_F(TrainFixture, SeparableClassesAreFit) {
  // Select on the training nodes so the kept parameters are the best fit.
  graph.val_mask = graph.train_mask;
  const auto r = train(graph, model, cfg);
  EXPECT_DOUBLE_EQ(r.best_val, 1.0);
  const Matrix logits = r.model->logits(GraphContext(graph));
  EXPECT_DOUBLE_EQ(accuracy(logits, graph.labels, graph.train_rows()), 1.0);
  EXPECT_LT(r.epochs.back().train_loss, r.epochs.front().train_loss);
}

TEST_F(TrainFixture, IdenticalSeedsGiveIdenticalTrajectories) {
  cfg.epochs = 10;
  const auto a = train(graph, model, cfg);
  const auto b = train(graph, model, cfg);
  ASSERT_EQ(a.epochs.size(), b.epochs.size());
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    EXPECT_EQ(a.epochs[i].train_loss, b.epochs[i].train_loss);
    EXPECT_EQ(a.epochs[i].val_metric, b.epochs[i].val_metric);
  }
}

TEST_F(TrainFixture, EarlyStoppingHonoursPatience) {
  cfg.epochs = 400;
  cfg.patience = 5;
  const auto r = train(graph, model, cfg);
  EXPECT_TRUE(r.early_stopped);
  EXPECT_EQ(r.epochs.back().epoch, r.best_epoch + 5);
}

TEST_F(TrainFixture, AblationNeedsThreeSeeds) {
  const auto seeds = derive_seeds(1, 2);
  EXPECT_THROW(ablation_sweep(graph, model, cfg, seeds), ArgumentError);
}

TEST(Seeds, DerivedSeedsAreDistinctAndStable) {
  const auto a = derive_seeds(7, 5);
  EXPECT_EQ(a, derive_seeds(7, 5));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) EXPECT_NE(a[i], a[j]);
  }
}

TEST(Preflight, EveryParameterClassWithinTolerance) {
  const auto report = preflight_grad_check(TarifConfig{}, 4);
  ASSERT_FALSE(report.per_class.empty());
  for (const auto& [cls, err] : report.per_class) EXPECT_LT(err, 1e-4);
}

}  // namespace
}  // namespace tarif
