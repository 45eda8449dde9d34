#include "tarif/model.hpp"

#include <cmath>
#include <fstream>

#include "tarif/errors.hpp"
#include "tarif/matrix_io.hpp"
#include "tarif/random.hpp"

namespace tarif {

using json = nlohmann::json;

void TarifConfig::validate() const {
  if (d_model < 1) throw ArgumentError("d_model must be positive");
  if (n_gnn_layers < 0 || n_attn_layers < 0) throw ArgumentError("layer counts must be >= 0");
  if (gat_heads < 1) throw ArgumentError("gat_heads must be >= 1");
  if (!(lambda > 0.0)) throw ArgumentError("lambda must be > 0");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ArgumentError("alpha and beta must be > 0");
  if (!(leaky_slope >= 0.0)) throw ArgumentError("leaky_slope must be >= 0");
  if (!(layer_norm_eps > 0.0)) throw ArgumentError("layer_norm_eps must be > 0");
}

std::pair<double, double> TarifConfig::exponents_to_scales(double p_init, double q_init) {
  // sigma(0) = 1/2, so p_init = 1 + alpha / 2.
  if (!(p_init > 1.0) || !(q_init > 1.0)) {
    throw ArgumentError("initial exponents must exceed 1 (got p=" + format_double(p_init) +
                        ", q=" + format_double(q_init) + ")");
  }
  return {2.0 * (p_init - 1.0), 2.0 * (q_init - 1.0)};
}

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::Full;
  if (name == "no-post-modulation") return Variant::NoPostModulation;
  if (name == "no-post-modulation-no-sharpening") return Variant::NoPostModulationNoSharpening;
  if (name == "no-gate") return Variant::NoGate;
  if (name == "vanilla") return Variant::Vanilla;
  throw ArgumentError("unknown variant '" + std::string(name) +
                      "' (expected full, no-post-modulation, no-post-modulation-no-sharpening, "
                      "no-gate or vanilla)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoPostModulation: return "no-post-modulation";
    case Variant::NoPostModulationNoSharpening: return "no-post-modulation-no-sharpening";
    case Variant::NoGate: return "no-gate";
    case Variant::Vanilla: return "vanilla";
  }
  return "full";
}

TarifConfig apply_variant(TarifConfig cfg, Variant v) {
  cfg.use_gat_branch = cfg.use_gate = cfg.use_sharpening = cfg.use_post_modulation = true;
  switch (v) {
    case Variant::Full: break;
    case Variant::NoPostModulation: cfg.use_post_modulation = false; break;
    case Variant::NoPostModulationNoSharpening:
      cfg.use_post_modulation = false;
      cfg.use_sharpening = false;
      break;
    case Variant::NoGate: cfg.use_gate = false; break;
    case Variant::Vanilla:
      cfg.use_gat_branch = cfg.use_gate = cfg.use_sharpening = cfg.use_post_modulation = false;
      break;
  }
  return cfg;
}

json to_json(const TarifConfig& cfg) {
  return json{{"d_model", cfg.d_model},
              {"n_gnn_layers", cfg.n_gnn_layers},
              {"n_attn_layers", cfg.n_attn_layers},
              {"gat_heads", cfg.gat_heads},
              {"lambda", cfg.lambda},
              {"alpha", cfg.alpha},
              {"beta", cfg.beta},
              {"kernel", to_string(cfg.kernel)},
              {"leaky_slope", cfg.leaky_slope},
              {"layer_norm_eps", cfg.layer_norm_eps},
              {"normalize_global", cfg.normalize_global},
              {"use_gat_branch", cfg.use_gat_branch},
              {"use_gate", cfg.use_gate},
              {"use_sharpening", cfg.use_sharpening},
              {"use_post_modulation", cfg.use_post_modulation},
              {"seed", cfg.seed}};
}

TarifConfig tarif_config_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("model config must be a JSON object");
  TarifConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "d_model") cfg.d_model = value.get<Index>();
      else if (key == "n_gnn_layers") cfg.n_gnn_layers = value.get<int>();
      else if (key == "n_attn_layers") cfg.n_attn_layers = value.get<int>();
      else if (key == "gat_heads") cfg.gat_heads = value.get<int>();
      else if (key == "lambda") cfg.lambda = value.get<double>();
      else if (key == "alpha") cfg.alpha = value.get<double>();
      else if (key == "beta") cfg.beta = value.get<double>();
      else if (key == "kernel") cfg.kernel = parse_kernel(value.get<std::string>());
      else if (key == "leaky_slope") cfg.leaky_slope = value.get<double>();
      else if (key == "layer_norm_eps") cfg.layer_norm_eps = value.get<double>();
      else if (key == "normalize_global") cfg.normalize_global = value.get<bool>();
      else if (key == "use_gat_branch") cfg.use_gat_branch = value.get<bool>();
      else if (key == "use_gate") cfg.use_gate = value.get<bool>();
      else if (key == "use_sharpening") cfg.use_sharpening = value.get<bool>();
      else if (key == "use_post_modulation") cfg.use_post_modulation = value.get<bool>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else throw ArgumentError("unknown model config key '" + key + "'");
    } catch (const json::exception& e) {
      throw ArgumentError("model config key '" + key + "': " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ParamClass classify(const std::string& name) {
  auto ends_with = [&](std::string_view suffix) {
    return name.size() >= suffix.size() &&
           name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".gate")) return ParamClass::Gate;
  if (ends_with(".sharpen")) return ParamClass::Sharpening;
  if (ends_with(".psi")) return ParamClass::PostModulation;
  if (name.find("gat.") != std::string::npos || name.rfind("gnn", 0) == 0 ||
      name.rfind("refine", 0) == 0) {
    return ParamClass::Gat;
  }
  return ParamClass::Projection;
}

std::string to_string(ParamClass c) {
  switch (c) {
    case ParamClass::Projection: return "projection";
    case ParamClass::Gate: return "gate";
    case ParamClass::Sharpening: return "sharpening";
    case ParamClass::PostModulation: return "post_modulation";
    case ParamClass::Gat: return "gat";
  }
  return "projection";
}

// ---------------------------------------------------------------------------
// Layers on the tape
// ---------------------------------------------------------------------------

namespace {

ad::Var kernel(const ad::Var& x, KernelKind kind) {
  return kind == KernelKind::Relu ? ad::relu(x) : ad::sigmoid(x);
}

}  // namespace

ad::Var gat_conv(const ad::Neighborhoods& nbrs, const ad::Var& x, const ad::Var& weight,
                 std::span<const ad::Var> att_self, std::span<const ad::Var> att_neighbor,
                 double slope, std::vector<double>* weights_out) {
  if (att_self.empty() || att_self.size() != att_neighbor.size()) {
    throw ArgumentError("gat_conv: need one self and one neighbour vector per head");
  }
  const ad::Var h = ad::matmul(x, weight);
  ad::Var out;
  std::vector<double> head_weights;
  if (weights_out) weights_out->assign(nbrs.targets.size(), 0.0);
  const double inv_heads = 1.0 / static_cast<double>(att_self.size());
  for (std::size_t k = 0; k < att_self.size(); ++k) {
    ad::Var agg = ad::edge_softmax_aggregate(nbrs, h, ad::matmul(h, att_self[k]),
                                             ad::matmul(h, att_neighbor[k]), slope,
                                             weights_out ? &head_weights : nullptr);
    out = out.valid() ? ad::add(out, agg) : agg;
    if (weights_out) {
      for (std::size_t e = 0; e < head_weights.size(); ++e) (*weights_out)[e] += inv_heads * head_weights[e];
    }
  }
  return att_self.size() == 1 ? out : ad::scale(out, inv_heads);
}

ad::Var hybrid_layer(const ad::Neighborhoods& nbrs, const ad::Var& h, const HybridVars& vars,
                     const TarifConfig& cfg, AttentionTrace* trace) {
  if (h.rows() != nbrs.num_nodes()) {
    throw DimensionError("hybrid_layer: input " + shape_string(h.value()) + " for " +
                         std::to_string(nbrs.num_nodes()) + " nodes");
  }
  ad::Var phi_q = kernel(ad::matmul(h, vars.wq), cfg.kernel);
  ad::Var phi_k = kernel(ad::matmul(h, vars.wk), cfg.kernel);
  const ad::Var v = ad::matmul(h, vars.wv);

  double p = 1.0, q = 1.0;
  if (cfg.use_sharpening) {
    const ad::Var s = ad::sigmoid(vars.sharpen);
    const ad::Var pv = ad::add_scalar(ad::scale(s, cfg.alpha), 1.0);
    const ad::Var qv = ad::add_scalar(ad::scale(s, cfg.beta), 1.0);
    phi_q = ad::sharpen(phi_q, pv, qv);
    phi_k = ad::sharpen(phi_k, pv, qv);
    p = pv.scalar();
    q = qv.scalar();
  }

  ad::Var z = ad::matmul(phi_q, ad::matmul(ad::transpose(phi_k), v));
  Vector row_scale;
  if (cfg.normalize_global) {
    ad::Tape& tape = h.tape();
    const ad::Var key_total = ad::matmul(tape.constant(Matrix::Ones(1, h.rows())), phi_k);  // 1 x d
    const ad::Var inv = ad::power(ad::matmul(phi_q, ad::transpose(key_total)), -1.0);       // n x 1
    z = ad::hadamard(ad::matmul(inv, tape.constant(Matrix::Ones(1, z.cols()))), z);
    if (trace) row_scale = inv.value().col(0);
  }

  double coefficient = 0.0;
  std::vector<double> gat_weights;
  if (cfg.use_gat_branch) {
    ad::Var local = gat_conv(nbrs, v, vars.gat_weight, vars.att_self, vars.att_neighbor,
                             cfg.leaky_slope, trace ? &gat_weights : nullptr);
    if (cfg.use_gate) {
      const ad::Var g = ad::scale(ad::sigmoid(vars.gate), cfg.lambda);
      coefficient = g.scalar();
      local = ad::scale_by(local, g);
    } else {
      coefficient = 1.0;
    }
    z = ad::add(z, local);
  }

  if (cfg.use_post_modulation) z = ad::hadamard(ad::matmul(h, vars.psi), z);

  if (trace) {
    trace->phi_q = phi_q.value();
    trace->phi_k = phi_k.value();
    trace->global_row_scale = std::move(row_scale);
    trace->gat_weights = std::move(gat_weights);
    trace->gat_coefficient = coefficient;
    trace->p = p;
    trace->q = q;
    trace->output = z.value();
  }
  return z;
}

Matrix hybrid_layer(const ad::Neighborhoods& nbrs, const Matrix& h, const HybridWeights& w,
                    const TarifConfig& cfg, AttentionTrace* trace) {
  ad::Tape tape;
  HybridVars vars;
  vars.wq = tape.constant(w.wq);
  vars.wk = tape.constant(w.wk);
  vars.wv = tape.constant(w.wv);
  vars.gate = tape.constant(Matrix::Constant(1, 1, w.gate));
  vars.sharpen = tape.constant(Matrix::Constant(1, 1, w.sharpen));
  if (cfg.use_post_modulation) vars.psi = tape.constant(w.psi);
  if (cfg.use_gat_branch) {
    vars.gat_weight = tape.constant(w.gat.weight);
    vars.att_self.push_back(tape.constant(w.gat.att_self));
    vars.att_neighbor.push_back(tape.constant(w.gat.att_neighbor));
  }
  return hybrid_layer(nbrs, tape.constant(h), vars, cfg, trace).value();
}

HybridWeights random_hybrid_weights(Index d, std::uint64_t seed) {
  CounterRng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  HybridWeights w;
  w.wq = rng.uniform_matrix(d, d, -bound, bound);
  w.wk = rng.uniform_matrix(d, d, -bound, bound);
  w.wv = rng.uniform_matrix(d, d, -bound, bound);
  w.psi = rng.uniform_matrix(d, d, -bound, bound);
  w.gat.weight = rng.uniform_matrix(d, d, -bound, bound);
  w.gat.att_self = rng.uniform_matrix(d, 1, -bound, bound);
  w.gat.att_neighbor = rng.uniform_matrix(d, 1, -bound, bound);
  return w;
}

namespace {

std::vector<Index> all_rows(Index n) {
  std::vector<Index> rows(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

}  // namespace

Matrix linear_attention_map(const AttentionTrace& trace, std::span<const Index> subset) {
  const bool scaled = trace.global_row_scale.size() > 0;
  if (subset.empty()) {
    Matrix m = trace.phi_q * trace.phi_k.transpose();
    if (scaled) m = trace.global_row_scale.asDiagonal() * m;
    return m;
  }
  const auto m = static_cast<Index>(subset.size());
  Matrix q(m, trace.phi_q.cols()), k(m, trace.phi_k.cols());
  for (Index i = 0; i < m; ++i) {
    const Index node = subset[static_cast<std::size_t>(i)];
    q.row(i) = trace.phi_q.row(node);
    if (scaled) q.row(i) *= trace.global_row_scale(node);
    k.row(i) = trace.phi_k.row(node);
  }
  return q * k.transpose();
}

Matrix equivalent_attention_map(const AttentionTrace& trace, const ad::Neighborhoods& nbrs,
                                std::span<const Index> subset) {
  Matrix m = linear_attention_map(trace, subset);
  if (trace.gat_weights.empty() || trace.gat_coefficient == 0.0) return m;
  const Index n = nbrs.num_nodes();
  std::vector<Index> rows = subset.empty() ? all_rows(n) : std::vector<Index>(subset.begin(), subset.end());
  std::vector<Index> position(static_cast<std::size_t>(n), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) position[static_cast<std::size_t>(rows[i])] = static_cast<Index>(i);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto node = static_cast<std::size_t>(rows[i]);
    for (Index e = nbrs.offsets[node]; e < nbrs.offsets[node + 1]; ++e) {
      const Index col = position[static_cast<std::size_t>(nbrs.targets[static_cast<std::size_t>(e)])];
      if (col >= 0) {
        m(static_cast<Index>(i), col) += trace.gat_coefficient * trace.gat_weights[static_cast<std::size_t>(e)];
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Stacked model
// ---------------------------------------------------------------------------

TarifModel::TarifModel(TarifConfig cfg, Index input_dim, int num_classes)
    : cfg_(cfg), input_dim_(input_dim), num_classes_(num_classes) {
  cfg_.validate();
  if (input_dim < 1) throw ArgumentError("input dimension must be positive");
  if (num_classes < 2) throw ArgumentError("need at least 2 classes");
  CounterRng root(cfg_.seed);
  const Index d = cfg_.d_model;
  auto uniform = [&](Index rows, Index cols, Index fan_in) {
    CounterRng rng = root.split(params_.size());
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return rng.uniform_matrix(rows, cols, -bound, bound);
  };

  in_w_ = add_param("input.weight", uniform(input_dim, d, input_dim));
  in_b_ = add_param("input.bias", Matrix::Zero(1, d));
  for (int l = 0; l < cfg_.n_gnn_layers; ++l) {
    gnn_.push_back(add_gat("gnn" + std::to_string(l) + ".", d, d, root));
  }
  for (int l = 0; l < cfg_.n_attn_layers; ++l) {
    const std::string prefix = "attn" + std::to_string(l) + ".";
    AttnIds ids;
    ids.wq = add_param(prefix + "wq", uniform(d, d, d));
    ids.wk = add_param(prefix + "wk", uniform(d, d, d));
    ids.wv = add_param(prefix + "wv", uniform(d, d, d));
    if (cfg_.use_gat_branch) {
      ids.gat = add_gat(prefix + "gat.", d, d, root);
      if (cfg_.use_gate) ids.gate = add_param(prefix + "gate", Matrix::Zero(1, 1));
    }
    if (cfg_.use_sharpening) ids.sharpen = add_param(prefix + "sharpen", Matrix::Zero(1, 1));
    if (cfg_.use_post_modulation) ids.psi = add_param(prefix + "psi", uniform(d, d, d));
    attn_.push_back(std::move(ids));
  }
  refine_ = add_gat("refine.", d, d, root);
  head_w_ = add_param("head.weight", uniform(d, num_classes, d));
  head_b_ = add_param("head.bias", Matrix::Zero(1, num_classes));
}

std::size_t TarifModel::add_param(std::string name, Matrix value) {
  params_.push_back({std::move(name), std::move(value)});
  return params_.size() - 1;
}

TarifModel::GatIds TarifModel::add_gat(const std::string& prefix, Index d_in, Index d_out,
                                       CounterRng& rng) {
  auto uniform = [&](Index rows, Index cols, Index fan_in) {
    CounterRng r = rng.split(params_.size());
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return r.uniform_matrix(rows, cols, -bound, bound);
  };
  GatIds ids;
  ids.weight = add_param(prefix + "weight", uniform(d_in, d_out, d_in));
  for (int k = 0; k < cfg_.gat_heads; ++k) {
    ids.att_self.push_back(add_param(prefix + "att_self" + std::to_string(k), uniform(d_out, 1, d_out)));
    ids.att_neighbor.push_back(
        add_param(prefix + "att_neighbor" + std::to_string(k), uniform(d_out, 1, d_out)));
  }
  return ids;
}

std::vector<Matrix> TarifModel::parameter_values() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

void TarifModel::set_parameter_values(std::span<const Matrix> values) {
  if (values.size() != params_.size()) {
    throw DimensionError("expected " + std::to_string(params_.size()) + " parameters, got " +
                         std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].rows() != params_[i].value.rows() || values[i].cols() != params_[i].value.cols()) {
      throw DimensionError("parameter " + params_[i].name + ": expected " +
                           shape_string(params_[i].value) + ", got " + shape_string(values[i]));
    }
    params_[i].value = values[i];
  }
}

std::size_t TarifModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += static_cast<std::size_t>(p.value.size());
  return total;
}

ad::Var TarifModel::gnn_block(const GraphContext& ctx, const ad::Var& h, const GatIds& ids,
                              std::span<const ad::Var> p) const {
  std::vector<ad::Var> self, nbr;
  for (auto i : ids.att_self) self.push_back(p[i]);
  for (auto i : ids.att_neighbor) nbr.push_back(p[i]);
  const ad::Var agg = gat_conv(ctx.nbrs, h, p[ids.weight], self, nbr, cfg_.leaky_slope);
  return ad::relu(ad::layer_norm(ad::add(h, agg), cfg_.layer_norm_eps));
}

ad::Var TarifModel::forward(ad::Tape& tape, const GraphContext& ctx, std::span<const ad::Var> p,
                            ForwardTrace* trace) const {
  if (p.size() != params_.size()) {
    throw DimensionError("forward: expected " + std::to_string(params_.size()) +
                         " parameter vars, got " + std::to_string(p.size()));
  }
  const Graph& g = *ctx.graph;
  if (g.features.cols() != input_dim_) {
    throw DimensionError("forward: model expects " + std::to_string(input_dim_) +
                         " input features, graph has " + std::to_string(g.features.cols()));
  }
  if (trace) trace->attention.clear();

  ad::Var h = ad::add_row(ad::matmul(tape.constant(g.features), p[in_w_]), p[in_b_]);
  for (const auto& ids : gnn_) h = gnn_block(ctx, h, ids, p);

  for (const auto& ids : attn_) {
    HybridVars vars;
    vars.wq = p[ids.wq];
    vars.wk = p[ids.wk];
    vars.wv = p[ids.wv];
    if (ids.gate != kNone) vars.gate = p[ids.gate];
    if (ids.sharpen != kNone) vars.sharpen = p[ids.sharpen];
    if (ids.psi != kNone) vars.psi = p[ids.psi];
    if (ids.gat) {
      vars.gat_weight = p[ids.gat->weight];
      for (auto i : ids.gat->att_self) vars.att_self.push_back(p[i]);
      for (auto i : ids.gat->att_neighbor) vars.att_neighbor.push_back(p[i]);
    }
    AttentionTrace* t = nullptr;
    if (trace) t = &trace->attention.emplace_back();
    const ad::Var z = hybrid_layer(ctx.nbrs, h, vars, cfg_, t);
    h = ad::layer_norm(ad::add(h, z), cfg_.layer_norm_eps);
    if (t) t->output = h.value();
  }

  h = gnn_block(ctx, h, refine_, p);
  return ad::add_row(ad::matmul(h, p[head_w_]), p[head_b_]);
}

Matrix TarifModel::logits(const GraphContext& ctx, ForwardTrace* trace) const {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(params_.size());
  for (const auto& prm : params_) vars.push_back(tape.constant(prm.value));
  return forward(tape, ctx, vars, trace).value();
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

std::string param_file(const std::string& name) { return "params/" + name + ".csv"; }

}  // namespace

void save_checkpoint(const TarifModel& model, const std::filesystem::path& dir, const json& extra) {
  std::filesystem::create_directories(dir / "params");
  json params = json::array();
  for (const auto& p : model.parameters()) {
    write_csv(dir / param_file(p.name), p.value);
    params.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()},
                      {"file", param_file(p.name)}});
  }
  json manifest{{"config", to_json(model.config())},
                {"input_dim", model.input_dim()},
                {"num_classes", model.num_classes()},
                {"parameters", params},
                {"extra", extra}};
  std::ofstream out(dir / "checkpoint.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "checkpoint.json").string());
  out << manifest.dump(2) << '\n';
}

TarifModel load_checkpoint(const std::filesystem::path& dir, json* extra) {
  std::ifstream in(dir / "checkpoint.json");
  if (!in) throw std::runtime_error("cannot read " + (dir / "checkpoint.json").string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint.json: ") + e.what(), 0);
  }
  TarifModel model(tarif_config_from_json(manifest.at("config")), manifest.at("input_dim").get<Index>(),
                   manifest.at("num_classes").get<int>());
  const json& params = manifest.at("parameters");
  auto& mine = model.parameters();
  if (params.size() != mine.size()) {
    throw ArgumentError("checkpoint has " + std::to_string(params.size()) +
                        " parameters, config implies " + std::to_string(mine.size()));
  }
  for (std::size_t i = 0; i < mine.size(); ++i) {
    const auto name = params[i].at("name").get<std::string>();
    if (name != mine[i].name) {
      throw ArgumentError("checkpoint parameter " + std::to_string(i) + " is '" + name +
                          "', expected '" + mine[i].name + "'");
    }
    Matrix value = read_csv(dir / params[i].at("file").get<std::string>());
    if (value.rows() != mine[i].value.rows() || value.cols() != mine[i].value.cols()) {
      throw DimensionError("checkpoint parameter " + name + " has shape " + shape_string(value) +
                           ", expected " + shape_string(mine[i].value));
    }
    mine[i].value = std::move(value);
  }
  if (extra) *extra = manifest.value("extra", json::object());
  return model;
}

}  // namespace tarif
