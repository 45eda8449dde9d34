#include <deque>
#include <functional>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "commands.hpp"
#include "manifest.hpp"
#include "tarif/errors.hpp"

namespace tarif::cli {

namespace {

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
  const char* flag_value = nullptr;  // boolean switch: value written when present
};

struct CommandSpec {
  const char* name;
  const char* help;
  std::vector<FlagSpec> flags;
  std::function<int(const Settings&)> run;
};

std::vector<CommandSpec> command_table() {
  return {
      {"generate",
       "Generate a stochastic block model dataset with splits",
       {{"--n", "data.n", "number of nodes"},
        {"--k", "data.k", "number of classes"},
        {"--p-in", "data.p_in", "intra-class edge probability"},
        {"--p-out", "data.p_out", "inter-class edge probability"},
        {"--d", "data.d", "feature dimension"},
        {"--mean-scale", "data.mean_scale", "class mean scale"},
        {"--sigma", "data.sigma", "feature noise"},
        {"--train-frac", "data.train_frac", "training fraction"},
        {"--val-frac", "data.val_frac", "validation fraction"},
        {"--force", "force", "overwrite a non-empty output directory", "true"}},
       cmd_generate},
      {"train",
       "Train a model (or run the ablation sweep)",
       {{"--data", "data.path", "dataset directory"},
        {"--variant", "variant", "full|no-post-modulation|no-post-modulation-no-sharpening|no-gate|vanilla"},
        {"--ablation", "ablation", "run every variant over several seeds", "true"},
        {"--seeds", "seeds", "number of seeds"},
        {"--epochs", "train.epochs", "maximum epochs"},
        {"--lr", "train.learning_rate", "learning rate"},
        {"--weight-decay", "train.weight_decay", "L2 weight decay"},
        {"--patience", "train.patience", "early-stopping patience"},
        {"--metric", "train.metric", "accuracy|roc_auc"},
        {"--d-model", "tarif.d_model", "hidden width"},
        {"--lambda", "tarif.lambda", "GAT gate scale"},
        {"--alpha", "tarif.alpha", "scale of the inner sharpening exponent p"},
        {"--beta", "tarif.beta", "scale of the outer sharpening exponent q"},
        {"--kernel", "tarif.kernel", "sigmoid|relu"},
        {"--gnn-layers", "tarif.n_gnn_layers", "GAT backbone layers"},
        {"--attn-layers", "tarif.n_attn_layers", "hybrid attention layers"},
        {"--gat-heads", "tarif.gat_heads", "attention heads per GAT layer"},
        {"--skip-preflight", "skip_preflight", "skip the gradient check", "true"}},
       cmd_train},
      {"diagnose",
       "Rank, entropy and class scatter of a checkpoint's attention maps",
       {{"--checkpoint", "checkpoint", "checkpoint directory"},
        {"--data", "data.path", "dataset directory"},
        {"--subsample", "subsample", "evenly spaced node subset size"},
        {"--rank-tol", "rank_tol", "relative singular value tolerance"},
        {"--dump-maps", "dump_maps", "write the attention maps as JSON", "true"},
        {"--report-out", "report_out", "JSON lines report path"},
        {"--baseline", "baseline", "second checkpoint to compare against"}},
       cmd_diagnose},
      {"verify-theorems",
       "Run the randomized theorem oracles",
       {{"--theorem", "theorem", "1-4, or 0 for all"},
        {"--trials", "trials", "trials per oracle (0: oracle default)"},
        {"--x-max", "x_max", "upper end of the sharpening grid"},
        {"--self-test-fail", "self_test_fail", "include a known-violating construction", "true"}},
       cmd_verify_theorems},
      {"bench-scaling",
       "Time one hybrid layer forward and backward across graph sizes",
       {{"--sizes", "sizes", "comma-separated node counts"},
        {"--d", "d", "feature width"},
        {"--avg-degree", "avg_degree", "average degree"},
        {"--repeats", "repeats", "repeats per size (median reported)"},
        {"--no-softmax", "softmax", "skip the softmax baseline", "false"},
        {"--block-rows", "block_rows", "softmax baseline row block"}},
       cmd_bench_scaling},
  };
}

struct Parsed {
  std::deque<std::string> values;
  std::deque<bool> switches;
  std::string config;
  std::vector<std::string> sets;
  std::string seed, out;
};

int dispatch(const std::vector<CommandSpec>& table, CLI::App& app, std::map<std::string, Parsed>& parsed,
             const std::string& manifest_path, const std::string& replay_out) {
  const CommandSpec* cmd = nullptr;
  for (const auto& c : table) {
    if (app.got_subcommand(c.name)) cmd = &c;
  }
  json manifest;
  if (!manifest_path.empty()) {
    manifest = read_json_file(manifest_path);
    if (!manifest.contains("command") || !manifest.contains("config")) {
      throw UsageProblem(manifest_path + ": not a manifest");
    }
    const auto name = manifest["command"].get<std::string>();
    if (cmd && name != cmd->name) throw UsageProblem("manifest records '" + name + "', not '" + cmd->name + "'");
    for (const auto& c : table) {
      if (name == c.name) cmd = &c;
    }
    if (!cmd) throw UsageProblem(manifest_path + ": unknown command '" + name + "'");
  }
  if (!cmd) throw UsageProblem("a subcommand is required (see --help)");

  Settings settings(command_defaults(cmd->name));
  auto& p = parsed[cmd->name];
  if (!p.config.empty()) settings.merge(read_json_file(p.config), p.config);
  if (!manifest.is_null()) settings.merge(manifest["config"], manifest_path, false);
  if (!replay_out.empty()) settings.set_text("out", replay_out, "--out");
  for (const auto& kv : p.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageProblem("--set expects key=value, got '" + kv + "'");
    settings.set_text(kv.substr(0, eq), kv.substr(eq + 1), "--set");
  }
  std::size_t vi = 0, si = 0;
  for (const auto& f : cmd->flags) {
    if (f.flag_value) {
      if (p.switches[si++]) settings.set_text(f.key, f.flag_value, f.flag);
    } else {
      const auto& v = p.values[vi++];
      if (app.get_subcommand(cmd->name)->count(f.flag) > 0) settings.set_text(f.key, v, f.flag);
    }
  }
  if (!p.seed.empty() && settings.values().contains("seed")) settings.set_text("seed", p.seed, "--seed");
  if (!p.out.empty()) settings.set_text("out", p.out, "--out");
  return cmd->run(settings);
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Linear graph transformer with sharpened kernels, a gated GAT branch and post-modulation"};
  app.set_version_flag("--version", std::string(kToolVersion));
  std::string manifest_path, replay_out;
  app.add_option("--from-manifest", manifest_path, "replay the run recorded in a manifest.json");
  app.add_option("--out", replay_out, "output directory for a replayed run");
  app.require_subcommand(0, 1);

  const auto table = command_table();
  std::map<std::string, Parsed> parsed;
  for (const auto& c : table) {
    auto* sub = app.add_subcommand(c.name, c.help);
    auto& p = parsed[c.name];
    for (const auto& f : c.flags) {
      if (f.flag_value) {
        p.switches.push_back(false);
        sub->add_flag(f.flag, p.switches.back(), f.help);
      } else {
        p.values.emplace_back();
        sub->add_option(f.flag, p.values.back(), f.help);
      }
    }
    sub->add_option("--config", p.config, "flat dotted-key JSON config file");
    sub->add_option("--set", p.sets, "override one setting (key=value), repeatable");
    if (command_defaults(c.name).contains("seed")) sub->add_option("--seed", p.seed, "root random seed");
    sub->add_option("--out", p.out, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return dispatch(table, app, parsed, manifest_path, replay_out);
  } catch (const UsageProblem& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace tarif::cli

int main(int argc, char** argv) { return tarif::cli::run(argc, argv); }
