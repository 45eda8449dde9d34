#include "tarif/diagnostics.hpp"

#include <fstream>

#include "tarif/matrix_io.hpp"

namespace tarif {

double attention_entropy(const Matrix& map) {
  if (map.size() == 0) throw ArgumentError("attention_entropy: empty map");
  if ((map.array() < 0.0).any()) throw ArgumentError("attention_entropy: negative entry");
  double total = 0.0;
  for (Index i = 0; i < map.rows(); ++i) {
    if (!(map.row(i).sum() > 0.0)) throw DegenerateRowError("attention_entropy: zero row", i);
    total += pse(map.row(i));
  }
  return total / static_cast<double>(map.rows());
}

std::vector<Index> even_subsample(Index n, Index k) {
  if (k < 1 || k > n) {
    throw ArgumentError("subsample size " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<Index> nodes(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) nodes[static_cast<std::size_t>(i)] = i * n / k;
  return nodes;
}

namespace {

// Mean PSE over rows with positive mass (relu kernels can zero a row out).
double mean_row_pse(const Matrix& m) {
  double total = 0.0;
  Index rows = 0;
  for (Index i = 0; i < m.rows(); ++i) {
    if (m.row(i).sum() > 0.0) {
      total += pse(m.row(i));
      ++rows;
    }
  }
  return rows ? total / static_cast<double>(rows) : 0.0;
}

}  // namespace

DiagnosticsReport diagnose(const TarifModel& model, const GraphContext& ctx,
                           const DiagnoseOptions& options) {
  const Index n = ctx.graph->n;
  DiagnosticsReport report;
  if (options.subsample > 0) {
    if (options.subsample > options.cap) {
      throw ArgumentError("subsample " + std::to_string(options.subsample) + " exceeds the " +
                          std::to_string(options.cap) + "-node snapshot cap");
    }
    report.nodes = even_subsample(n, options.subsample);
  } else {
    if (n > options.cap) {
      throw ArgumentError("graph has " + std::to_string(n) + " nodes, above the " +
                          std::to_string(options.cap) +
                          "-node snapshot cap; pass a subsample size (e.g. --subsample 120)");
    }
    report.nodes = even_subsample(n, n);
  }
  const std::span<const Index> subset =
      options.subsample > 0 ? std::span<const Index>(report.nodes) : std::span<const Index>();

  ForwardTrace trace;
  model.logits(ctx, &trace);
  if (options.dump_dir) std::filesystem::create_directories(*options.dump_dir);

  for (std::size_t l = 0; l < trace.attention.size(); ++l) {
    const AttentionTrace& t = trace.attention[l];
    const Matrix linear = linear_attention_map(t, subset);
    const Matrix full = equivalent_attention_map(t, ctx.nbrs, subset);
    LayerDiagnostics d;
    d.layer = static_cast<int>(l);
    d.nodes = full.rows();
    const auto rank = numerical_rank(full, options.rank_tol);
    d.rank = rank.numerical_rank;
    d.rank_tolerance = rank.tolerance;
    d.linear_rank = numerical_rank(linear, options.rank_tol).numerical_rank;
    d.mean_pse = mean_row_pse(full);
    d.linear_mean_pse = mean_row_pse(linear);
    d.scatter_trace = scatter_trace(t.output, ctx.graph->labels);
    d.gat_coefficient = t.gat_coefficient;
    d.p = t.p;
    d.q = t.q;
    if (options.dump_dir) {
      const auto path = *options.dump_dir / ("attention_layer" + std::to_string(l) + ".json");
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write " + path.string());
      out << to_json(full).dump() << '\n';
      d.snapshot = path.string();
    }
    report.layers.push_back(std::move(d));
  }
  return report;
}

nlohmann::json to_json(const LayerDiagnostics& d) {
  nlohmann::json j{{"layer", d.layer},
                   {"nodes", d.nodes},
                   {"rank", d.rank},
                   {"rank_tolerance", d.rank_tolerance},
                   {"linear_rank", d.linear_rank},
                   {"mean_pse", d.mean_pse},
                   {"linear_mean_pse", d.linear_mean_pse},
                   {"scatter_trace", d.scatter_trace},
                   {"gat_coefficient", d.gat_coefficient},
                   {"p", d.p},
                   {"q", d.q}};
  if (d.snapshot) j["snapshot"] = *d.snapshot;
  return j;
}

void append_report_jsonl(const std::filesystem::path& path, const DiagnosticsReport& report,
                         int epoch) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& layer : report.layers) {
    auto j = to_json(layer);
    j["epoch"] = epoch;
    out << j.dump() << '\n';
  }
}

}  // namespace tarif
