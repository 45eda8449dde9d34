#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "manifest.hpp"
#include "tarif/attention.hpp"
#include "tarif/diagnostics.hpp"
#include "tarif/graph.hpp"
#include "tarif/matrix_io.hpp"
#include "tarif/model.hpp"
#include "tarif/oracles.hpp"
#include "tarif/random.hpp"
#include "tarif/trainer.hpp"

namespace tarif::cli {

namespace fs = std::filesystem;

namespace {

std::uint64_t sub_seed(std::uint64_t root, std::uint64_t stream) {
  return CounterRng(root).split(stream).next_u64();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Graph load_dataset(const Settings& s) {
  const auto path = s.get<std::string>("data.path");
  if (path.empty()) throw UsageProblem("no dataset given (use --data DIR)");
  const fs::path dir = data_path(path);
  if (!fs::is_directory(dir)) throw UsageProblem("dataset directory " + dir.string() + " does not exist");
  return load_graph(dir);
}

json model_defaults() {
  json j = to_json(TarifConfig{});
  j.erase("seed");
  json out = json::object();
  for (const auto& [k, v] : j.items()) out["tarif." + k] = v;
  return out;
}

json train_defaults() {
  json j = to_json(TrainConfig{});
  j.erase("seed");
  json out = json::object();
  for (const auto& [k, v] : j.items()) out["train." + k] = v;
  return out;
}

TarifConfig resolve_model(const Settings& s) {
  try {
    return tarif_config_from_json(s.section("tarif"));
  } catch (const ArgumentError& e) {
    throw UsageProblem(e.what());
  }
}

TrainConfig resolve_train(const Settings& s) {
  try {
    return train_config_from_json(s.section("train"));
  } catch (const ArgumentError& e) {
    throw UsageProblem(e.what());
  }
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

}  // namespace

json command_defaults(const std::string& command) {
  const std::uint64_t seed0 = 0;
  if (command == "generate") {
    return {{"data.n", 400},           {"data.k", 4},          {"data.p_in", 0.1},
            {"data.p_out", 0.01},      {"data.d", 16},         {"data.mean_scale", 1.0},
            {"data.sigma", 0.5},       {"data.train_frac", 0.5}, {"data.val_frac", 0.25},
            {"seed", seed0},           {"out", "data/sbm"},    {"force", false}};
  }
  if (command == "train") {
    json j = model_defaults();
    j.update(train_defaults());
    j.update({{"data.path", ""},
              {"variant", ""},
              {"ablation", false},
              {"seeds", 0},
              {"skip_preflight", false},
              {"seed", seed0},
              {"out", "runs/train"}});
    return j;
  }
  if (command == "diagnose") {
    return {{"checkpoint", ""},
            {"data.path", ""},
            {"subsample", 0},
            {"rank_tol", default_rank_tol<double>()},
            {"dump_maps", false},
            {"report_out", ""},
            {"baseline", ""},
            {"out", "runs/diagnose"}};
  }
  if (command == "verify-theorems") {
    return {{"theorem", 0},    {"trials", 0},     {"x_max", 1e4},
            {"self_test_fail", false}, {"seed", seed0}, {"out", "runs/verify"}};
  }
  if (command == "bench-scaling") {
    return {{"sizes", "1000,2000,4000,8000,16000"},
            {"d", 16},
            {"avg_degree", 10.0},
            {"repeats", 3},
            {"softmax", true},
            {"block_rows", 256},
            {"seed", seed0},
            {"out", "runs/bench"}};
  }
  throw UsageProblem("unknown command '" + command + "'");
}

// ---------------------------------------------------------------------------

int cmd_generate(const Settings& s) {
  SbmSpec spec;
  spec.n = s.get<Index>("data.n");
  spec.num_classes = s.get<int>("data.k");
  spec.p_in = s.get<double>("data.p_in");
  spec.p_out = s.get<double>("data.p_out");
  spec.feature_dim = s.get<Index>("data.d");
  spec.mean_scale = s.get<double>("data.mean_scale");
  spec.sigma = s.get<double>("data.sigma");
  const auto root = s.get<std::uint64_t>("seed");
  spec.seed = sub_seed(root, 0);
  const double train_frac = s.get<double>("data.train_frac");
  const double val_frac = s.get<double>("data.val_frac");
  if (!(spec.p_in >= 0.0 && spec.p_in <= 1.0 && spec.p_out >= 0.0 && spec.p_out <= 1.0)) {
    throw UsageProblem("edge probabilities must lie in [0, 1]");
  }
  if (spec.num_classes > spec.feature_dim) throw UsageProblem("--k must not exceed --d");
  if (!(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0)) {
    throw UsageProblem("split fractions must be positive and sum below 1");
  }

  const fs::path out = data_path(s.get<std::string>("out"));
  if (fs::exists(out) && !fs::is_empty(out) && !s.get<bool>("force")) {
    throw UsageProblem("output directory " + out.string() + " is not empty (use --force)");
  }
  Manifest manifest(out, "generate", s.values());
  manifest.start();

  Graph g;
  try {
    g = split(generate_sbm(spec), train_frac, val_frac, sub_seed(root, 1));
  } catch (const ArgumentError& e) {
    throw UsageProblem(e.what());
  }
  save_graph(g, out);
  for (const char* f : {"edges.txt", "features.csv", "labels.txt", "masks.json"}) manifest.add_artifact(f, out / f);
  const double h = edge_homophily(g);
  manifest.note("edge_homophily", h);
  manifest.note("num_edges", g.num_edges());
  manifest.note("num_classes", g.num_classes());
  manifest.note("heterophilic", h < 1.0 / spec.num_classes);
  manifest.finish(0);
  std::cout << "wrote " << out.string() << ": n=" << g.n << " edges=" << g.num_edges()
            << " edge_homophily=" << fmt(h) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_train(const Settings& s) {
  // Everything that can be rejected is checked before any compute.
  TarifConfig model_cfg = resolve_model(s);
  TrainConfig train_cfg = resolve_train(s);
  const auto variant_name = s.get<std::string>("variant");
  const bool ablation = s.get<bool>("ablation");
  if (!variant_name.empty()) {
    if (ablation) throw UsageProblem("--variant and --ablation conflict (the sweep runs every variant)");
    for (const char* key : {"tarif.use_gat_branch", "tarif.use_gate", "tarif.use_sharpening",
                            "tarif.use_post_modulation"}) {
      if (s.user_set(key)) throw UsageProblem(std::string("--variant conflicts with ") + key);
    }
    try {
      model_cfg = apply_variant(model_cfg, parse_variant(variant_name));
    } catch (const ArgumentError& e) {
      throw UsageProblem(e.what());
    }
  }
  int n_seeds = s.get<int>("seeds");
  if (n_seeds == 0) n_seeds = ablation ? 5 : 1;
  if (n_seeds < 1) throw UsageProblem("--seeds must be positive");
  if (ablation && n_seeds < 3) throw UsageProblem("--ablation needs at least 3 seeds");
  const Graph graph = load_dataset(s);
  if (!graph.has_splits()) throw UsageProblem("dataset has no train/val/test masks");

  const fs::path out = s.get<std::string>("out");
  const auto root = s.get<std::uint64_t>("seed");
  Manifest manifest(out, "train", s.values());
  manifest.note("resolved_model", to_json(model_cfg));
  manifest.start();

  if (!s.get<bool>("skip_preflight")) {
    const auto report = preflight_grad_check(model_cfg, sub_seed(root, 100));
    json per_param = json::array();
    for (std::size_t i = 0; i < report.names.size(); ++i) {
      per_param.push_back({{"name", report.names[i]}, {"relative_error", report.check.relative_errors[i]}});
    }
    json per_class = json::object();
    for (const auto& [c, e] : report.per_class) per_class[to_string(c)] = e;
    const bool ok = report.check.max_relative_error < 1e-4;
    write_json(out / "preflight.json", {{"max_relative_error", report.check.max_relative_error},
                                        {"per_class", per_class},
                                        {"per_parameter", per_param},
                                        {"pass", ok}});
    manifest.add_artifact("preflight", out / "preflight.json");
    std::cout << "preflight gradient check: max relative error "
              << format_double(report.check.max_relative_error) << (ok ? " (ok)" : " (FAILED)") << '\n';
    if (!ok) {
      manifest.finish(1);
      return 1;
    }
  }

  const auto seeds = derive_seeds(root, static_cast<std::size_t>(n_seeds));
  if (ablation) {
    const auto sweep = ablation_sweep(graph, model_cfg, train_cfg, seeds);
    write_json(out / "sweep.json", to_json(sweep));
    manifest.add_artifact("sweep", out / "sweep.json");
    for (const auto& v : sweep) {
      std::cout << to_string(v.variant) << ": " << fmt(100.0 * v.mean, 2) << " +- " << fmt(100.0 * v.std, 2)
                << " (" << to_string(train_cfg.metric) << ", " << v.runs.size() << " seeds)\n";
    }
    manifest.finish(0);
    return 0;
  }

  json runs = json::array();
  double total = 0.0;
  for (int i = 0; i < n_seeds; ++i) {
    TarifConfig mc = model_cfg;
    mc.seed = seeds[static_cast<std::size_t>(i)];
    TrainConfig tc = train_cfg;
    tc.seed = seeds[static_cast<std::size_t>(i)];
    const std::string suffix = i == 0 ? "" : "_seed" + std::to_string(i);
    tc.checkpoint_dir = out / ("checkpoint" + suffix);
    TrainResult r;
    try {
      r = train(graph, mc, tc);
    } catch (const TrainingDiverged& e) {
      std::cerr << "error: " << e.what() << '\n';
      manifest.note("diverged", e.checkpoint());
      manifest.finish(1);
      return 1;
    }
    write_training_log(out / ("train_log" + suffix + ".csv"), r);
    save_checkpoint(*r.model, *tc.checkpoint_dir,
                    {{"best_epoch", r.best_epoch}, {"best_val", r.best_val}, {"test_metric", r.test_at_best}});
    manifest.add_artifact("train_log" + suffix, out / ("train_log" + suffix + ".csv"));
    manifest.add_artifact("checkpoint" + suffix, *tc.checkpoint_dir);
    runs.push_back({{"seed", tc.seed},
                    {"best_epoch", r.best_epoch},
                    {"best_val", r.best_val},
                    {"test_metric", r.test_at_best},
                    {"epochs_run", r.epochs.size()},
                    {"early_stopped", r.early_stopped}});
    total += r.test_at_best;
    std::cout << "seed " << i << ": best val " << fmt(r.best_val) << " at epoch " << r.best_epoch << ", test "
              << fmt(r.test_at_best) << '\n';
  }
  write_json(out / "result.json", {{"metric", to_string(train_cfg.metric)},
                                   {"runs", runs},
                                   {"mean_test_metric", total / n_seeds}});
  manifest.add_artifact("result", out / "result.json");
  manifest.finish(0);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_diagnose(const Settings& s) {
  const auto ckpt = s.get<std::string>("checkpoint");
  if (ckpt.empty()) throw UsageProblem("no checkpoint given (use --checkpoint DIR)");
  const Graph graph = load_dataset(s);
  DiagnoseOptions opt;
  opt.subsample = s.get<Index>("subsample");
  opt.rank_tol = s.get<double>("rank_tol");
  if (opt.subsample < 0) throw UsageProblem("--subsample must be >= 0");
  if (!(opt.rank_tol > 0.0 && opt.rank_tol < 1.0)) throw UsageProblem("--rank-tol must lie in (0, 1)");
  if (opt.subsample == 0 && graph.n > opt.cap) {
    throw UsageProblem("graph has " + std::to_string(graph.n) + " nodes, above the " + std::to_string(opt.cap) +
                       "-node snapshot cap; pass --subsample (e.g. --subsample 120)");
  }
  if (opt.subsample > graph.n) throw UsageProblem("--subsample exceeds the node count");
  const auto baseline = s.get<std::string>("baseline");

  const fs::path out = s.get<std::string>("out");
  Manifest manifest(out, "diagnose", s.values());
  manifest.start();
  if (s.get<bool>("dump_maps")) opt.dump_dir = out / "maps";

  auto run_one = [&](const std::string& path, const fs::path& report_path, std::optional<fs::path> dumps) {
    json extra;
    const TarifModel model = load_checkpoint(path, &extra);
    if (model.input_dim() != graph.features.cols()) {
      throw UsageProblem("checkpoint expects " + std::to_string(model.input_dim()) + " features, dataset has " +
                         std::to_string(graph.features.cols()));
    }
    const GraphContext ctx(graph);
    DiagnoseOptions o = opt;
    o.dump_dir = std::move(dumps);
    const auto report = diagnose(model, ctx, o);
    fs::remove(report_path);
    append_report_jsonl(report_path, report, extra.value("best_epoch", 0));
    return report;
  };

  const auto report_out = s.get<std::string>("report_out");
  const fs::path report_path = report_out.empty() ? out / "diagnostics.jsonl" : fs::path(report_out);
  const auto report = run_one(ckpt, report_path, opt.dump_dir);
  manifest.add_artifact("report", report_path);
  if (opt.dump_dir) manifest.add_artifact("maps", *opt.dump_dir);
  for (const auto& l : report.layers) {
    std::cout << "layer " << l.layer << ": rank " << l.rank << " (linear part " << l.linear_rank << ") of "
              << l.nodes << ", mean PSE " << fmt(l.mean_pse) << ", tr(S_B) " << fmt(l.scatter_trace) << '\n';
  }

  if (!baseline.empty()) {
    const auto base = run_one(baseline, out / "baseline.jsonl",
                              opt.dump_dir ? std::optional<fs::path>(out / "baseline_maps") : std::nullopt);
    manifest.add_artifact("baseline_report", out / "baseline.jsonl");
    json layers = json::array();
    for (std::size_t l = 0; l < std::min(report.layers.size(), base.layers.size()); ++l) {
      const auto& a = report.layers[l];
      const auto& b = base.layers[l];
      layers.push_back({{"layer", l},
                        {"rank", a.rank},
                        {"baseline_rank", b.rank},
                        {"mean_pse", a.mean_pse},
                        {"baseline_mean_pse", b.mean_pse},
                        {"rank_increased", a.rank > b.rank},
                        {"pse_decreased", a.mean_pse < b.mean_pse}});
      std::cout << "layer " << l << " vs baseline: rank " << b.rank << " -> " << a.rank << ", PSE "
                << fmt(b.mean_pse) << " -> " << fmt(a.mean_pse) << '\n';
    }
    write_json(out / "comparison.json", {{"layers", layers}});
    manifest.add_artifact("comparison", out / "comparison.json");
  }
  manifest.finish(0);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_verify_theorems(const Settings& s) {
  const int which = s.get<int>("theorem");
  const int trials = s.get<int>("trials");
  const double x_max = s.get<double>("x_max");
  if (which < 0 || which > 4) throw UsageProblem("--theorem must be 1-4 (or 0 for all)");
  if (trials < 0) throw UsageProblem("--trials must be >= 0");
  if (!(x_max > 1e-2)) throw UsageProblem("--x-max must exceed 1e-2");
  const bool self_test = s.get<bool>("self_test_fail");
  const auto root = s.get<std::uint64_t>("seed");
  const fs::path out = s.get<std::string>("out");
  const fs::path repro = out / "repro";

  Manifest manifest(out, "verify-theorems", s.values());
  manifest.start();
  std::vector<OracleResult> results;
  auto wanted = [&](int t) { return which == 0 || which == t; };
  if (wanted(1)) {
    Theorem1Options o;
    o.seed = sub_seed(root, 1);
    o.repro_dir = repro;
    if (trials > 0) o.trials = static_cast<std::size_t>(trials);
    results.push_back(verify_theorem1(o));
  }
  if (wanted(2) || self_test) {
    Theorem2Options o;
    o.seed = sub_seed(root, 2);
    o.repro_dir = repro;
    o.force_violation = self_test;
    if (trials > 0) o.trials = static_cast<std::size_t>(trials);
    results.push_back(verify_theorem2(o));
  }
  if (wanted(3)) {
    Theorem3Options o;
    o.x_max = x_max;
    results.push_back(verify_theorem3(o));
  }
  if (wanted(4)) {
    Theorem4Options o;
    o.seed = sub_seed(root, 4);
    if (trials > 0) o.trials = static_cast<std::size_t>(trials);
    results.push_back(verify_theorem4(o));
  }

  bool all_pass = true;
  json arr = json::array();
  for (const auto& r : results) {
    all_pass = all_pass && r.pass;
    arr.push_back(to_json(r));
    std::cout << "theorem " << r.theorem << ": " << (r.pass ? "PASS" : "FAIL") << " trials=" << r.trials
              << " violations=" << r.violations << " min_slack=" << format_double(r.min_slack) << '\n';
    for (const auto& f : r.reproduction_files) std::cout << "  reproduction: " << f << '\n';
  }
  write_json(out / "theorems.json", {{"results", arr}, {"pass", all_pass}});
  manifest.add_artifact("theorems", out / "theorems.json");
  manifest.finish(all_pass ? 0 : 1);
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Index> parse_sizes(const std::string& text) {
  std::vector<Index> sizes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 2) throw std::invalid_argument(item);
      sizes.push_back(static_cast<Index>(v));
    } catch (const std::logic_error&) {
      throw UsageProblem("--sizes: cannot parse '" + item + "'");
    }
  }
  if (sizes.size() < 2) throw UsageProblem("--sizes needs at least two values");
  return sizes;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ad::Neighborhoods random_neighborhoods(Index n, double avg_degree, std::uint64_t seed) {
  CounterRng rng(seed);
  const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) * avg_degree / 2.0));
  std::vector<std::pair<Index, Index>> edges;
  edges.reserve(m);
  for (std::size_t e = 0; e < m; ++e) {
    edges.emplace_back(static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(n))),
                       static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(n))));
  }
  return build_graph(n, edges, Matrix::Zero(n, 1), std::vector<int>(static_cast<std::size_t>(n), 0))
      .with_self_loops();
}

}  // namespace

int cmd_bench_scaling(const Settings& s) {
  const auto sizes = parse_sizes(s.get<std::string>("sizes"));
  const Index d = s.get<Index>("d");
  const double avg_degree = s.get<double>("avg_degree");
  const int repeats = s.get<int>("repeats");
  const Index block = s.get<Index>("block_rows");
  if (d < 1 || repeats < 1 || block < 1 || !(avg_degree >= 0.0)) {
    throw UsageProblem("--d, --repeats, --block-rows must be positive and --avg-degree non-negative");
  }
  const bool with_softmax = s.get<bool>("softmax");
  const auto root = s.get<std::uint64_t>("seed");
  const fs::path out = s.get<std::string>("out");
  Manifest manifest(out, "bench-scaling", s.values());
  manifest.start();

  TarifConfig cfg;
  cfg.d_model = d;
  const HybridWeights w = random_hybrid_weights(d, sub_seed(root, 0));

  std::vector<double> ns, lin_t, lin_m, sm_t, sm_m;
  std::ofstream csv(out / "scaling.csv");
  csv << "method,n,seconds,peak_bytes\n";
  for (Index n : sizes) {
    const auto nbrs = random_neighborhoods(n, avg_degree, sub_seed(root, static_cast<std::uint64_t>(n)));
    CounterRng rng(sub_seed(root, 1000000 + static_cast<std::uint64_t>(n)));
    const Matrix h = rng.normal_matrix(n, d);

    std::vector<double> times;
    std::size_t bytes = 0;
    for (int r = 0; r < repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      ad::Tape tape;
      HybridVars vars;
      vars.wq = tape.leaf(w.wq);
      vars.wk = tape.leaf(w.wk);
      vars.wv = tape.leaf(w.wv);
      vars.gate = tape.leaf(Matrix::Constant(1, 1, w.gate));
      vars.sharpen = tape.leaf(Matrix::Constant(1, 1, w.sharpen));
      vars.psi = tape.leaf(w.psi);
      vars.gat_weight = tape.leaf(w.gat.weight);
      vars.att_self = {tape.leaf(w.gat.att_self)};
      vars.att_neighbor = {tape.leaf(w.gat.att_neighbor)};
      const ad::Var z = hybrid_layer(nbrs, tape.constant(h), vars, cfg);
      const auto grads = ad::backward(ad::sum(z));
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      bytes = tape.value_bytes();
    }
    ns.push_back(static_cast<double>(n));
    lin_t.push_back(median(times));
    lin_m.push_back(static_cast<double>(bytes));
    csv << "linear," << n << ',' << format_double(lin_t.back()) << ',' << bytes << '\n';

    if (with_softmax) {
      const Matrix q = rng.normal_matrix(n, d), k = rng.normal_matrix(n, d), v = rng.normal_matrix(n, d);
      times.clear();
      for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const Matrix o = softmax_attention(q, k, v, block);
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      }
      // Score block plus the four n x d operands.
      const auto sm_bytes = static_cast<std::size_t>((std::min(block, n) * n + 4 * n * d) * 8);
      sm_t.push_back(median(times));
      sm_m.push_back(static_cast<double>(sm_bytes));
      csv << "softmax," << n << ',' << format_double(sm_t.back()) << ',' << sm_bytes << '\n';
    }
    std::cout << "n=" << n << " linear " << fmt(lin_t.back(), 5) << "s"
              << (with_softmax ? " softmax " + fmt(sm_t.back(), 5) + "s" : std::string()) << '\n';
  }
  csv.close();

  auto max_doubling = [&](const std::vector<double>& t) {
    double worst = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) {
      if (ns[i] == 2.0 * ns[i - 1]) worst = std::max(worst, t[i] / t[i - 1]);
    }
    return worst;
  };
  json fit = {{"linear",
               {{"time_exponent", log_log_slope(ns, lin_t)},
                {"memory_exponent", log_log_slope(ns, lin_m)},
                {"max_doubling_time_ratio", max_doubling(lin_t)}}}};
  if (with_softmax) {
    fit["softmax"] = {{"time_exponent", log_log_slope(ns, sm_t)},
                      {"memory_exponent", log_log_slope(ns, sm_m)},
                      {"max_doubling_time_ratio", max_doubling(sm_t)}};
  }
  write_json(out / "scaling.json", fit);
  manifest.add_artifact("csv", out / "scaling.csv");
  manifest.add_artifact("fit", out / "scaling.json");
  std::cout << "linear time exponent " << fmt(fit["linear"]["time_exponent"].get<double>(), 3);
  if (with_softmax) std::cout << ", softmax time exponent " << fmt(fit["softmax"]["time_exponent"].get<double>(), 3);
  std::cout << '\n';
  manifest.finish(0);
  return 0;
}

}  // namespace tarif::cli
