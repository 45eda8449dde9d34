#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tarif/autodiff.hpp"
#include "tarif/errors.hpp"
#include "tarif/graph.hpp"
#include "tarif/model.hpp"

namespace tarif {

enum class Metric { Accuracy, RocAuc };
Metric parse_metric(std::string_view name);
std::string to_string(Metric m);

struct TrainConfig {
  int epochs = 300;
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int eval_every = 1;
  int patience = 50;
  Metric metric = Metric::Accuracy;
  std::uint64_t seed = 0;
  /// Where the last finite parameters go if training diverges.
  std::optional<std::filesystem::path> checkpoint_dir;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Adam with coupled L2 weight decay (g += wd * theta).
class Adam {
 public:
  Adam(std::span<const Matrix> shapes, const TrainConfig& cfg);
  void step(std::span<Matrix> params, std::span<const Matrix> grads);
  long steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

/// Mean softmax cross-entropy over `rows` (differentiable).
ad::Var cross_entropy(const ad::Var& logits, std::span<const int> labels, std::span<const Index> rows);
double cross_entropy(const Matrix& logits, std::span<const int> labels, std::span<const Index> rows);

/// Mann-Whitney AUC of scores for binary labels (0/1); ties count one half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const Index> rows);
/// Binary: AUC of the class-1 softmax probability. K > 2: macro one-vs-rest.
double roc_auc(const Matrix& logits, std::span<const int> labels, std::span<const Index> rows);
double evaluate(Metric metric, const Matrix& logits, std::span<const int> labels,
                std::span<const Index> rows);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double test_metric = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  double best_val = 0.0;
  double test_at_best = 0.0;
  int best_epoch = 0;
  bool early_stopped = false;
  std::optional<TarifModel> model;  // parameters from the best validation epoch
};

class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, std::string checkpoint)
      : NumericalError(what), checkpoint_(std::move(checkpoint)) {}
  const std::string& checkpoint() const noexcept { return checkpoint_; }

 private:
  std::string checkpoint_;
};

/// Full-batch training on the graph's train mask with early stopping on the
/// validation metric.
TrainResult train(const Graph& graph, const TarifConfig& model_cfg, const TrainConfig& cfg);

/// CSV: epoch,train_loss,val_metric,test_metric,seconds
void write_training_log(const std::filesystem::path& path, const TrainResult& result);

struct PreflightReport {
  ad::GradCheckReport check;
  std::vector<std::string> names;
  std::vector<std::pair<ParamClass, double>> per_class;  // worst relative error per class
  double seconds = 0.0;
};

/// Gradient check of the training loss on a 30-node SBM graph built from seed.
PreflightReport preflight_grad_check(const TarifConfig& model_cfg, std::uint64_t seed,
                                     double step = 1e-5);

struct SweepRun {
  Variant variant = Variant::Full;
  std::uint64_t seed = 0;
  double best_val = 0.0;
  double test_metric = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
};

struct VariantSummary {
  Variant variant = Variant::Full;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation over seeds
  std::vector<SweepRun> runs;
};

/// Every ablation variant x seed; runs are independent and may execute in
/// parallel. The results do not depend on the thread count.
std::vector<VariantSummary> ablation_sweep(const Graph& graph, const TarifConfig& base,
                                           const TrainConfig& cfg, std::span<const std::uint64_t> seeds);

/// n seeds derived from one root seed.
std::vector<std::uint64_t> derive_seeds(std::uint64_t root, std::size_t n);

nlohmann::json to_json(const std::vector<VariantSummary>& sweep);

}  // namespace tarif
