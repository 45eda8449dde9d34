#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tarif/attention.hpp"
#include "tarif/autodiff.hpp"
#include "tarif/graph.hpp"
#include "tarif/random.hpp"

namespace tarif {

struct TarifConfig {
  Index d_model = 32;
  int n_gnn_layers = 2;
  int n_attn_layers = 1;
  int gat_heads = 1;
  double lambda = 0.1;
  // p = 1 + alpha * sigmoid(w), q = 1 + beta * sigmoid(w); w starts at 0 so
  // the initial exponents are p = 2, q = 1.5.
  double alpha = 2.0;
  double beta = 1.0;
  KernelKind kernel = KernelKind::Sigmoid;
  double leaky_slope = 0.2;
  double layer_norm_eps = 1e-5;
  // Divide each global-attention row by its total weight phi(q_i).sum_j phi(k_j).
  bool normalize_global = true;
  bool use_gat_branch = true;
  bool use_gate = true;
  bool use_sharpening = true;
  bool use_post_modulation = true;
  std::uint64_t seed = 0;

  void validate() const;

  /// alpha, beta such that the exponents start at (p, q); both must exceed 1.
  static std::pair<double, double> exponents_to_scales(double p_init, double q_init);
};

/// The five rows of the component ablation.
enum class Variant { Full, NoPostModulation, NoPostModulationNoSharpening, NoGate, Vanilla };

inline constexpr Variant kAllVariants[] = {Variant::Full, Variant::NoPostModulation,
                                           Variant::NoPostModulationNoSharpening, Variant::NoGate,
                                           Variant::Vanilla};

Variant parse_variant(std::string_view name);
std::string to_string(Variant v);
TarifConfig apply_variant(TarifConfig cfg, Variant v);

nlohmann::json to_json(const TarifConfig& cfg);
TarifConfig tarif_config_from_json(const nlohmann::json& j);

struct Parameter {
  std::string name;
  Matrix value;
};

/// Broad parameter groups, used to report gradient checks per group.
enum class ParamClass { Projection, Gate, Sharpening, PostModulation, Gat };
ParamClass classify(const std::string& name);
std::string to_string(ParamClass c);

/// Graph plus its self-loop neighbourhoods, built once and shared by passes.
struct GraphContext {
  explicit GraphContext(const Graph& g) : graph(&g), nbrs(g.with_self_loops()) {}
  const Graph* graph;
  ad::Neighborhoods nbrs;
};

/// What a hybrid attention layer saw, for diagnostics.
struct AttentionTrace {
  Matrix phi_q;               // kernel-mapped (and sharpened) queries
  Matrix phi_k;               // kernel-mapped (and sharpened) keys
  Vector global_row_scale;    // 1 / row total of phi_q phi_k^T; empty when unnormalized
  std::vector<double> gat_weights;  // CSR over self-loop neighbourhoods, head mean; empty if no branch
  double gat_coefficient = 0.0;     // lambda * sigmoid(a), 1 when ungated, 0 without branch
  double p = 1.0, q = 1.0;
  Matrix output;  // layer output; inside a model, the block output after residual + norm
};

struct ForwardTrace {
  std::vector<AttentionTrace> attention;
};

class TarifModel {
 public:
  TarifModel(TarifConfig cfg, Index input_dim, int num_classes);

  const TarifConfig& config() const noexcept { return cfg_; }
  Index input_dim() const noexcept { return input_dim_; }
  int num_classes() const noexcept { return num_classes_; }

  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  std::vector<Matrix> parameter_values() const;
  void set_parameter_values(std::span<const Matrix> values);
  std::size_t parameter_count() const;

  /// Logits (n x K). `params` are tape leaves in parameters() order.
  ad::Var forward(ad::Tape& tape, const GraphContext& ctx, std::span<const ad::Var> params,
                  ForwardTrace* trace = nullptr) const;

  /// Forward on a private tape with the current parameter values.
  Matrix logits(const GraphContext& ctx, ForwardTrace* trace = nullptr) const;

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  struct GatIds {
    std::size_t weight;
    std::vector<std::size_t> att_self, att_neighbor;  // one per head
  };
  struct AttnIds {
    std::size_t wq, wk, wv;
    std::size_t gate = kNone, sharpen = kNone, psi = kNone;
    std::optional<GatIds> gat;
  };

  std::size_t add_param(std::string name, Matrix value);
  GatIds add_gat(const std::string& prefix, Index d_in, Index d_out, CounterRng& rng);
  ad::Var gnn_block(const GraphContext& ctx, const ad::Var& h, const GatIds& ids,
                    std::span<const ad::Var> p) const;

  TarifConfig cfg_;
  Index input_dim_;
  int num_classes_;
  std::vector<Parameter> params_;
  std::size_t in_w_ = 0, in_b_ = 0, head_w_ = 0, head_b_ = 0;
  std::vector<GatIds> gnn_;
  std::vector<AttnIds> attn_;
  GatIds refine_{};
};

/// Tape handles for one hybrid attention layer. Members the config switches
/// off may be left invalid.
struct HybridVars {
  ad::Var wq, wk, wv;
  ad::Var gate;     // a, 1x1
  ad::Var sharpen;  // w, 1x1
  ad::Var psi;
  ad::Var gat_weight;
  std::vector<ad::Var> att_self, att_neighbor;  // one per head
};

/// Z = phi(Q)(phi(K)^T V) + lambda sigma(a) GAT(V) with Q = H Wq, K = H Wk,
/// V = H Wv, phi followed by sharpening; returns psi(H) (.) Z. Each term can
/// be switched off through cfg.
ad::Var hybrid_layer(const ad::Neighborhoods& nbrs, const ad::Var& h, const HybridVars& vars,
                     const TarifConfig& cfg, AttentionTrace* trace = nullptr);

/// Mean over heads of edge-softmax aggregation of x W.
ad::Var gat_conv(const ad::Neighborhoods& nbrs, const ad::Var& x, const ad::Var& weight,
                 std::span<const ad::Var> att_self, std::span<const ad::Var> att_neighbor,
                 double slope, std::vector<double>* weights_out = nullptr);

/// Plain-matrix weights for a standalone hybrid layer (single GAT head).
struct HybridWeights {
  Matrix wq, wk, wv, psi;
  double gate = 0.0;     // a
  double sharpen = 0.0;  // w
  GatWeights gat;
};

Matrix hybrid_layer(const ad::Neighborhoods& nbrs, const Matrix& h, const HybridWeights& w,
                    const TarifConfig& cfg, AttentionTrace* trace = nullptr);

/// Random weights with fan-in uniform scaling, a = w = 0.
HybridWeights random_hybrid_weights(Index d, std::uint64_t seed);

/// Explicit n x n (or |subset| x |subset|) equivalent map
/// phi_q phi_k^T + coefficient * M_GAT.
Matrix equivalent_attention_map(const AttentionTrace& trace, const ad::Neighborhoods& nbrs,
                                std::span<const Index> subset = {});
/// phi_q phi_k^T restricted to subset (all rows when empty).
Matrix linear_attention_map(const AttentionTrace& trace, std::span<const Index> subset = {});

// Checkpoint: directory with checkpoint.json (config + shapes) and one CSV
// per parameter under params/.
void save_checkpoint(const TarifModel& model, const std::filesystem::path& dir,
                     const nlohmann::json& extra = nlohmann::json::object());
TarifModel load_checkpoint(const std::filesystem::path& dir, nlohmann::json* extra = nullptr);

}  // namespace tarif
