// Acceptance checks: one PASS/FAIL line per criterion; exits 1 if any fail.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tarif/attention.hpp"
#include "tarif/diagnostics.hpp"
#include "tarif/graph.hpp"
#include "tarif/model.hpp"
#include "tarif/oracles.hpp"
#include "tarif/random.hpp"
#include "tarif/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tarif;

namespace {

const fs::path kWork = fs::temp_directory_path() / "tarif_acceptance";

struct Outcome {
  bool pass = false;
  std::string detail;
};

int run(const std::string& args) {
  const std::string cmd = std::string(TARIF_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string fmt(double x, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome theorem_suite() {
  const auto out = kWork / "c1";
  const auto t0 = std::chrono::steady_clock::now();
  const int code = run("verify-theorems --out " + out.string());
  const double secs = seconds_since(t0);
  if (code != 0) return {false, "exit code " + std::to_string(code)};
  const json j = read_json(out / "theorems.json");
  std::size_t violations = 0;
  std::string trials;
  for (const auto& r : j["results"]) {
    violations += r["violations"].get<std::size_t>();
    trials += " T" + std::to_string(r["theorem"].get<int>()) + "=" + std::to_string(r["trials"].get<std::size_t>());
  }
  return {violations == 0 && secs < 300.0,
          "violations=" + std::to_string(violations) + " trials:" + trials + " runtime=" + fmt(secs, 3) + "s"};
}

Outcome rank_augmentation() {
  int bounded = 0, augmented = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    SbmSpec spec;
    spec.n = 64;
    spec.feature_dim = 4;
    spec.seed = 5000 + t;
    const Graph g = generate_sbm(spec);
    const auto nbrs = g.with_self_loops();
    TarifConfig cfg;
    cfg.d_model = 4;
    cfg.use_post_modulation = false;
    AttentionTrace trace;
    hybrid_layer(nbrs, g.features, random_hybrid_weights(4, 7000 + t), cfg, &trace);
    const Index base = numerical_rank(Matrix(trace.phi_q * trace.phi_k.transpose())).numerical_rank;
    const Index eq = numerical_rank(equivalent_attention_map(trace, nbrs)).numerical_rank;
    bounded += base <= 4;
    augmented += eq > base;
  }
  return {bounded == 100 && augmented >= 95,
          "rank<=4 in " + std::to_string(bounded) + "/100, augmented in " + std::to_string(augmented) + "/100"};
}

double mean_row_pse(const Matrix& m) {
  double total = 0.0;
  for (Index i = 0; i < m.rows(); ++i) total += pse(m.row(i));
  return total / static_cast<double>(m.rows());
}

Outcome entropy_direction() {
  // Sharpening acts on the kernel features that build the attention map.
  int lower = 0, trials = 0;
  CounterRng rng(31);
  while (trials < 100) {
    const Matrix phi = kernel_map(rng.normal_matrix(64, 8, 1.5), KernelKind::Sigmoid);
    bool constant_row = false;
    for (Index i = 0; i < phi.rows(); ++i) constant_row |= phi.row(i).maxCoeff() == phi.row(i).minCoeff();
    if (constant_row) continue;
    ++trials;
    lower += mean_row_pse(sharpen(phi, 2.0, 1.5)) < mean_row_pse(phi);
  }
  Theorem4Options o;
  o.seed = 77;
  const auto t4 = verify_theorem4(o);
  const auto premise = t4.details["premise_columns"].get<std::size_t>();
  const bool t4_ok = t4.pass && premise > 0 && t4.violations == 0;
  return {lower >= 99 && t4_ok, "sharpened lower in " + std::to_string(lower) +
                                    "/100; post-modulation premise columns=" + std::to_string(premise) +
                                    " violations=" + std::to_string(t4.violations)};
}

Outcome gradient_preflight() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = preflight_grad_check(TarifConfig{}, CounterRng(0).split(100).next_u64());
  const double secs = seconds_since(t0);
  bool ok = secs < 60.0 && report.per_class.size() == 5;
  std::string detail;
  for (const auto& [cls, err] : report.per_class) {
    ok = ok && err < 1e-4;
    detail += to_string(cls) + "=" + fmt(err, 3) + " ";
  }
  return {ok, detail + "runtime=" + fmt(secs, 3) + "s"};
}

Outcome linear_attention_oracle() {
  CounterRng rng(41);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Index n = 2 + static_cast<Index>(rng.uniform_int(199));
    const Index d = 1 + static_cast<Index>(rng.uniform_int(16));
    const Matrix q = kernel_map(rng.normal_matrix(n, d), KernelKind::Sigmoid);
    const Matrix k = kernel_map(rng.normal_matrix(n, d), KernelKind::Sigmoid);
    const Matrix v = rng.normal_matrix(n, d);
    Matrix scores(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        double s = 0.0;
        for (Index c = 0; c < d; ++c) s += q(i, c) * k(j, c);
        scores(i, j) = s;
      }
    }
    Matrix expected = Matrix::Zero(n, d);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) expected.row(i) += scores(i, j) * v.row(j);
    }
    worst = std::max(worst, (linear_attention(q, k, v) - expected).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-9, "max abs difference " + fmt(worst, 3)};
}

Outcome ablation_direction() {
  const auto data = kWork / "c6_data";
  const auto out = kWork / "c6_train";
  const auto t0 = std::chrono::steady_clock::now();
  if (run("generate --n 2000 --k 4 --p-in 0.005 --p-out 0.02 --sigma 1.0 --seed 2026 --force --out " +
          data.string()) != 0) {
    return {false, "generate failed"};
  }
  if (run("train --data " + data.string() + " --ablation --seeds 5 --d-model 16 --lambda 4 --seed 2026 --out " +
          out.string()) != 0) {
    return {false, "ablation sweep failed"};
  }
  const double secs = seconds_since(t0);
  const json sweep = read_json(out / "sweep.json");
  double full_mean = 0.0, full_std = 0.0, vanilla = 0.0, best_removal = -1.0;
  std::string worst;
  std::ostringstream table;
  for (const auto& v : sweep["variants"]) {
    const std::string name = v["variant"];
    const double mean = 100.0 * v["mean"].get<double>(), sd = 100.0 * v["std"].get<double>();
    table << name << "=" << fmt(mean) << "+-" << fmt(sd, 2) << " ";
    if (name == "full") {
      full_mean = mean;
      full_std = sd;
    } else if (name == "vanilla") {
      vanilla = mean;
    } else if ((name == "no-post-modulation" || name == "no-gate") && mean > best_removal) {
      best_removal = mean;
      worst = name;
    }
  }
  const bool beats_vanilla = full_mean - vanilla >= 2.0;
  const bool removal_ok = best_removal - full_mean <= full_std;
  return {beats_vanilla && removal_ok && secs < 900.0,
          table.str() + "| full-vanilla=" + fmt(full_mean - vanilla, 3) + " best removal " + worst + " " +
              fmt(best_removal - full_mean, 3) + " vs std " + fmt(full_std, 3) + " | runtime=" + fmt(secs, 3) + "s"};
}

Outcome scaling() {
  const auto out = kWork / "c7";
  if (run("bench-scaling --out " + out.string()) != 0) return {false, "bench-scaling failed"};
  const json fit = read_json(out / "scaling.json");
  const double lin = fit["linear"]["time_exponent"], sm = fit["softmax"]["time_exponent"];
  return {lin >= 0.8 && lin <= 1.3 && sm > 1.7,
          "linear exponent " + fmt(lin, 3) + ", softmax exponent " + fmt(sm, 3)};
}

Outcome metric_oracles() {
  CounterRng rng(51);
  int exact = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 5 + static_cast<std::size_t>(rng.uniform_int(80));
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform() * 10.0) / 10.0;
      y[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(rng.uniform_int(2));
    }
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (y[i] != 1 || y[j] != 0) continue;
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
    }
    exact += roc_auc(s, y) == wins / pairs;
  }
  double worst_ce = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Matrix logits = rng.normal_matrix(30, 5, 4.0);
    std::vector<int> y(30);
    std::vector<Index> rows;
    for (Index i = 0; i < 30; ++i) {
      y[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(5));
      if (rng.bernoulli(0.6)) rows.push_back(i);
    }
    if (rows.empty()) rows.push_back(0);
    double loop = 0.0;
    for (Index r : rows) {
      double z = 0.0;
      for (Index c = 0; c < 5; ++c) z += std::exp(logits(r, c));
      loop += std::log(z) - logits(r, y[static_cast<std::size_t>(r)]);
    }
    loop /= static_cast<double>(rows.size());
    worst_ce = std::max(worst_ce, std::abs(cross_entropy(logits, y, rows) - loop));
  }
  return {exact == 50 && worst_ce < 1e-10,
          "roc_auc exact " + std::to_string(exact) + "/50, cross-entropy max diff " + fmt(worst_ce, 3)};
}

// --- replay ---------------------------------------------------------------

bool timing_key(const std::string& k) {
  return k == "seconds" || k == "time_exponent" || k == "max_doubling_time_ratio";
}

json strip_timing(const json& j) {
  if (j.is_object()) {
    json out = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!timing_key(it.key())) out[it.key()] = strip_timing(it.value());
    }
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& e : j) out.push_back(strip_timing(e));
    return out;
  }
  return j;
}

std::string slurp(const fs::path& p, const fs::path& root) {
  std::ifstream in(p, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string needle = root.string();
  for (std::size_t pos; (pos = text.find(needle)) != std::string::npos;) text.replace(pos, needle.size(), "<out>");
  return text;
}

std::string drop_timing_columns(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  std::vector<bool> keep;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (keep.empty()) {
      for (const auto& c : cells) keep.push_back(!timing_key(c));
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i >= keep.size() || keep[i]) out += cells[i] + ",";
    }
    out += "\n";
  }
  return out;
}

std::string normalized(const fs::path& p, const fs::path& root) {
  const std::string text = slurp(p, root);
  const auto ext = p.extension();
  if (ext == ".json") return strip_timing(json::parse(text)).dump();
  if (ext == ".jsonl") {
    std::istringstream in(text);
    std::string out;
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) out += strip_timing(json::parse(line)).dump() + "\n";
    }
    return out;
  }
  if (ext == ".csv" && text.rfind("epoch,", 0) == 0) return drop_timing_columns(text);
  if (ext == ".csv" && text.rfind("method,", 0) == 0) return drop_timing_columns(text);
  return text;
}

// Returns an empty string when the directories agree.
std::string compare_dirs(const fs::path& a, const fs::path& b) {
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    const auto rel = fs::relative(e.path(), a);
    if (!fs::exists(b / rel)) return "missing " + rel.string();
    if (normalized(e.path(), a) != normalized(b / rel, b)) return "differs: " + rel.string();
    ++files;
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file() && !fs::exists(a / fs::relative(e.path(), b))) return "extra file in replay";
  }
  return files == 0 ? "no outputs" : "";
}

Outcome replay_determinism() {
  const auto base = kWork / "c9";
  fs::remove_all(base);
  const std::string data = (base / "data").string();
  const std::string train = (base / "train").string();
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"data", "generate --n 300 --seed 3 --out " + data},
      {"train", "train --data " + data + " --epochs 25 --seed 4 --out " + train},
      {"diagnose", "diagnose --checkpoint " + train + "/checkpoint --data " + data +
                       " --dump-maps --baseline " + train + "/checkpoint --out " + (base / "diagnose").string()},
      {"verify", "verify-theorems --trials 8 --seed 5 --out " + (base / "verify").string()},
      {"bench", "bench-scaling --sizes 300,600 --repeats 1 --seed 6 --out " + (base / "bench").string()},
  };
  std::string detail;
  bool ok = true;
  for (const auto& [name, args] : runs) {
    const auto first = base / name;
    const auto again = base / (name + "_replay");
    if (run(args) != 0) {
      ok = false;
      detail += name + ": run failed; ";
      continue;
    }
    if (run("--from-manifest " + (first / "manifest.json").string() + " --out " + again.string()) != 0) {
      ok = false;
      detail += name + ": replay failed; ";
      continue;
    }
    const std::string diff = compare_dirs(first, again);
    ok = ok && diff.empty();
    detail += name + ": " + (diff.empty() ? "identical" : diff) + "; ";
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  fs::create_directories(kWork);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"theorem oracle suite", theorem_suite},
      {"rank bound and augmentation", rank_augmentation},
      {"entropy direction", entropy_direction},
      {"gradient pre-flight", gradient_preflight},
      {"linear attention oracle", linear_attention_oracle},
      {"desk-scale ablation direction", ablation_direction},
      {"scaling exponents", scaling},
      {"metric oracles", metric_oracles},
      {"replay determinism", replay_determinism},
  };
  // Optional argument: comma-free list of criterion numbers to run, e.g. "159".
  const std::string only = argc > 1 ? argv[1] : "";
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const char id = static_cast<char>('1' + i);
    if (!only.empty() && only.find(id) == std::string::npos) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first
              << "): " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
