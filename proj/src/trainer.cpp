#include "tarif/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "tarif/matrix_io.hpp"
#include "tarif/parallel.hpp"
#include "tarif/random.hpp"

namespace tarif {

using json = nlohmann::json;

Metric parse_metric(std::string_view name) {
  if (name == "accuracy") return Metric::Accuracy;
  if (name == "roc_auc") return Metric::RocAuc;
  throw ArgumentError("unknown metric '" + std::string(name) + "' (expected accuracy or roc_auc)");
}

std::string to_string(Metric m) { return m == Metric::RocAuc ? "roc_auc" : "accuracy"; }

void TrainConfig::validate() const {
  if (epochs < 0) throw ArgumentError("epochs must be >= 0");
  if (!(learning_rate >= 0.0)) throw ArgumentError("learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw ArgumentError("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ArgumentError("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ArgumentError("eps must be > 0");
  if (eval_every < 1) throw ArgumentError("eval_every must be >= 1");
  if (patience < 1) throw ArgumentError("patience must be >= 1");
}

json to_json(const TrainConfig& cfg) {
  return json{{"epochs", cfg.epochs},           {"learning_rate", cfg.learning_rate},
              {"weight_decay", cfg.weight_decay}, {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},             {"eps", cfg.eps},
              {"eval_every", cfg.eval_every},   {"patience", cfg.patience},
              {"metric", to_string(cfg.metric)}, {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("train config must be a JSON object");
  TrainConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "epochs") cfg.epochs = value.get<int>();
      else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
      else if (key == "weight_decay") cfg.weight_decay = value.get<double>();
      else if (key == "beta1") cfg.beta1 = value.get<double>();
      else if (key == "beta2") cfg.beta2 = value.get<double>();
      else if (key == "eps") cfg.eps = value.get<double>();
      else if (key == "eval_every") cfg.eval_every = value.get<int>();
      else if (key == "patience") cfg.patience = value.get<int>();
      else if (key == "metric") cfg.metric = parse_metric(value.get<std::string>());
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else throw ArgumentError("unknown train config key '" + key + "'");
    } catch (const json::exception& e) {
      throw ArgumentError("train config key '" + key + "': " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------

Adam::Adam(std::span<const Matrix> shapes, const TrainConfig& cfg)
    : lr_(cfg.learning_rate),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.eps),
      weight_decay_(cfg.weight_decay) {
  for (const auto& s : shapes) {
    m_.push_back(Matrix::Zero(s.rows(), s.cols()));
    v_.push_back(Matrix::Zero(s.rows(), s.cols()));
  }
}

void Adam::step(std::span<Matrix> params, std::span<const Matrix> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw DimensionError("Adam::step: parameter count changed");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix g = grads[i] + weight_decay_ * params[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    params[i].array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

// ---------------------------------------------------------------------------

ad::Var cross_entropy(const ad::Var& logits, std::span<const int> labels, std::span<const Index> rows) {
  return ad::masked_cross_entropy(logits, labels, rows);
}

double cross_entropy(const Matrix& logits, std::span<const int> labels, std::span<const Index> rows) {
  ad::Tape tape;
  return ad::masked_cross_entropy(tape.constant(logits), labels, rows).scalar();
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("roc_auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positives = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      const int y = labels[order[k]];
      if (y != 0 && y != 1) throw ArgumentError("roc_auc: labels must be 0 or 1");
      if (y == 1) {
        positives += 1.0;
        rank_sum += mid_rank;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(scores.size()) - positives;
  if (positives == 0.0 || negatives == 0.0) throw ArgumentError("roc_auc: need both classes present");
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const Index> rows) {
  if (rows.empty()) throw ArgumentError("accuracy: no rows selected");
  std::size_t correct = 0;
  for (Index r : rows) {
    Index best;
    logits.row(r).maxCoeff(&best);
    if (best == labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

double roc_auc(const Matrix& logits, std::span<const int> labels, std::span<const Index> rows) {
  if (rows.empty()) throw ArgumentError("roc_auc: no rows selected");
  Matrix prob(static_cast<Index>(rows.size()), logits.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = logits.row(rows[i]);
    const auto e = (row.array() - row.maxCoeff()).exp();
    prob.row(static_cast<Index>(i)) = e / e.sum();
  }
  const Index k = logits.cols();
  std::vector<double> scores(rows.size());
  std::vector<int> binary(rows.size());
  auto one_vs_rest = [&](Index c) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      scores[i] = prob(static_cast<Index>(i), c);
      binary[i] = labels[static_cast<std::size_t>(rows[i])] == c ? 1 : 0;
    }
    return roc_auc(scores, binary);
  };
  if (k == 2) return one_vs_rest(1);
  double total = 0.0;
  for (Index c = 0; c < k; ++c) total += one_vs_rest(c);
  return total / static_cast<double>(k);
}

double evaluate(Metric metric, const Matrix& logits, std::span<const int> labels,
                std::span<const Index> rows) {
  return metric == Metric::RocAuc ? roc_auc(logits, labels, rows) : accuracy(logits, labels, rows);
}

// ---------------------------------------------------------------------------

namespace {

bool all_finite(std::span<const Matrix> values) {
  return std::all_of(values.begin(), values.end(), [](const Matrix& m) { return m.allFinite(); });
}

std::string save_last_good(const TrainConfig& cfg, const TarifModel& model) {
  if (!cfg.checkpoint_dir) return {};
  const auto dir = *cfg.checkpoint_dir / "last_good";
  save_checkpoint(model, dir);
  return dir.string();
}

}  // namespace

TrainResult train(const Graph& graph, const TarifConfig& model_cfg, const TrainConfig& cfg) {
  cfg.validate();
  if (!graph.has_splits()) throw ArgumentError("train: graph has no train/val/test split");
  const auto train_rows = graph.train_rows();
  const auto val_rows = graph.val_rows();
  const auto test_rows = graph.test_rows();
  if (train_rows.empty() || val_rows.empty() || test_rows.empty()) {
    throw ArgumentError("train: every split must select at least one node");
  }

  TarifModel model(model_cfg, graph.features.cols(), graph.num_classes());
  const GraphContext ctx(graph);
  std::vector<Matrix> params = model.parameter_values();
  Adam adam(params, cfg);

  TrainResult result;
  result.best_val = -std::numeric_limits<double>::infinity();
  std::vector<Matrix> best = params;
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    model.set_parameter_values(params);
    ad::Tape tape;
    std::vector<ad::Var> vars;
    vars.reserve(params.size());
    for (const auto& p : params) vars.push_back(tape.leaf(p));

    ad::Var loss;
    ad::Gradients grads;
    Matrix logits;
    try {
      const ad::Var out = model.forward(tape, ctx, vars);
      logits = out.value();
      loss = cross_entropy(out, graph.labels, train_rows);
      grads = ad::backward(loss);
    } catch (const NumericalError& e) {
      const auto path = save_last_good(cfg, model);
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ": " + e.what() +
                                 (path.empty() ? "" : "; last good parameters in " + path),
                             path);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss.scalar();
    const bool eval = epoch % cfg.eval_every == 0 || epoch == cfg.epochs;
    if (eval) {
      log.val_metric = evaluate(cfg.metric, logits, graph.labels, val_rows);
      log.test_metric = evaluate(cfg.metric, logits, graph.labels, test_rows);
      if (log.val_metric > result.best_val) {
        result.best_val = log.val_metric;
        result.test_at_best = log.test_metric;
        result.best_epoch = epoch;
        best = params;
        since_best = 0;
      } else {
        since_best += cfg.eval_every;
      }
    }

    std::vector<Matrix> g;
    g.reserve(vars.size());
    for (const auto& v : vars) g.push_back(grads[v]);
    std::vector<Matrix> next = params;
    adam.step(next, g);
    if (!all_finite(next)) {
      const auto path = save_last_good(cfg, model);
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                                 ": non-finite parameters after update" +
                                 (path.empty() ? "" : "; last good parameters in " + path),
                             path);
    }
    params = std::move(next);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.epochs.push_back(log);
    if (eval && since_best >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }
  if (result.epochs.empty()) result.best_val = 0.0;
  model.set_parameter_values(best);
  result.model.emplace(std::move(model));
  return result;
}

void write_training_log(const std::filesystem::path& path, const TrainResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,train_loss,val_metric,test_metric,seconds\n";
  for (const auto& e : result.epochs) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_metric) << ','
        << format_double(e.test_metric) << ',' << format_double(e.seconds) << '\n';
  }
}

// ---------------------------------------------------------------------------

PreflightReport preflight_grad_check(const TarifConfig& model_cfg, std::uint64_t seed, double step) {
  const auto start = std::chrono::steady_clock::now();
  SbmSpec spec;
  spec.n = 30;
  spec.num_classes = 3;
  spec.p_in = 0.3;
  spec.p_out = 0.1;
  spec.feature_dim = 8;
  spec.seed = seed;
  const Graph graph = generate_sbm(spec);
  TarifConfig cfg = model_cfg;
  cfg.seed = CounterRng(seed).split(1).next_u64();
  const TarifModel model(cfg, graph.features.cols(), graph.num_classes());
  const GraphContext ctx(graph);
  std::vector<Index> rows(static_cast<std::size_t>(graph.n));
  std::iota(rows.begin(), rows.end(), Index{0});

  const auto values = model.parameter_values();
  PreflightReport report;
  report.check = ad::grad_check(
      [&](ad::Tape& tape, std::span<const ad::Var> p) {
        return cross_entropy(model.forward(tape, ctx, p), graph.labels, rows);
      },
      values, step, ad::GradCheckOptions{.floor = 1e-6, .kink_retry = true});
  for (const auto& p : model.parameters()) report.names.push_back(p.name);
  for (std::size_t i = 0; i < report.names.size(); ++i) {
    const ParamClass c = classify(report.names[i]);
    auto it = std::find_if(report.per_class.begin(), report.per_class.end(),
                           [&](const auto& e) { return e.first == c; });
    if (it == report.per_class.end()) {
      report.per_class.emplace_back(c, report.check.relative_errors[i]);
    } else {
      it->second = std::max(it->second, report.check.relative_errors[i]);
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------

std::vector<std::uint64_t> derive_seeds(std::uint64_t root, std::size_t n) {
  const CounterRng rng(root);
  std::vector<std::uint64_t> seeds(n);
  for (std::size_t i = 0; i < n; ++i) seeds[i] = rng.split(i).next_u64();
  return seeds;
}

std::vector<VariantSummary> ablation_sweep(const Graph& graph, const TarifConfig& base,
                                           const TrainConfig& cfg, std::span<const std::uint64_t> seeds) {
  if (seeds.size() < 3) throw ArgumentError("ablation sweep needs at least 3 seeds");
  constexpr std::size_t kVariants = std::size(kAllVariants);
  std::vector<SweepRun> runs(kVariants * seeds.size());
  parallel_for(runs.size(), [&](std::size_t i) {
    const Variant v = kAllVariants[i / seeds.size()];
    const std::uint64_t seed = seeds[i % seeds.size()];
    TarifConfig mc = apply_variant(base, v);
    mc.seed = seed;
    TrainConfig tc = cfg;
    tc.seed = seed;
    tc.checkpoint_dir.reset();
    const TrainResult r = train(graph, mc, tc);
    runs[i] = {v, seed, r.best_val, r.test_at_best, r.best_epoch, static_cast<int>(r.epochs.size())};
  });

  std::vector<VariantSummary> out;
  for (std::size_t vi = 0; vi < kVariants; ++vi) {
    VariantSummary s;
    s.variant = kAllVariants[vi];
    s.runs.assign(runs.begin() + static_cast<std::ptrdiff_t>(vi * seeds.size()),
                  runs.begin() + static_cast<std::ptrdiff_t>((vi + 1) * seeds.size()));
    double sum = 0.0;
    for (const auto& r : s.runs) sum += r.test_metric;
    s.mean = sum / static_cast<double>(s.runs.size());
    double ss = 0.0;
    for (const auto& r : s.runs) ss += (r.test_metric - s.mean) * (r.test_metric - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.runs.size() - 1));
    out.push_back(std::move(s));
  }
  return out;
}

json to_json(const std::vector<VariantSummary>& sweep) {
  json variants = json::array();
  for (const auto& s : sweep) {
    json runs = json::array();
    for (const auto& r : s.runs) {
      runs.push_back({{"seed", r.seed}, {"best_val", r.best_val}, {"test_metric", r.test_metric},
                      {"best_epoch", r.best_epoch}, {"epochs_run", r.epochs_run}});
    }
    variants.push_back({{"variant", to_string(s.variant)}, {"mean", s.mean}, {"std", s.std}, {"runs", runs}});
  }
  return json{{"variants", variants}};
}

}  // namespace tarif
