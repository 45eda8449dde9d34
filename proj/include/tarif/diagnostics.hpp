#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tarif/errors.hpp"
#include "tarif/linalg.hpp"
#include "tarif/model.hpp"

namespace tarif {

/// Positive sequence entropy -sum (x_i/s) ln(x_i/s), s = sum x, 0 ln 0 = 0.
template <typename Derived>
double pse(const Eigen::MatrixBase<Derived>& x) {
  if (x.size() == 0) throw ArgumentError("pse: empty sequence");
  if ((x.array() < 0).any()) throw ArgumentError("pse: negative entry");
  const double s = x.sum();
  if (!(s > 0.0)) throw ArgumentError("pse: all-zero sequence");
  double h = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double p = x(i) / s;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

inline double pse(std::span<const double> x) {
  return pse(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Index>(x.size())));
}

/// Mean row entropy of a non-negative map. Throws DegenerateRowError on a
/// zero row.
double attention_entropy(const Matrix& map);

inline constexpr Index kSnapshotCap = 2048;

struct LayerDiagnostics {
  int layer = 0;
  Index nodes = 0;  // size of the materialized map
  Index rank = 0;
  double rank_tolerance = 0.0;
  Index linear_rank = 0;  // rank of the global (linear) part alone
  double mean_pse = 0.0;
  double linear_mean_pse = 0.0;
  double scatter_trace = 0.0;  // of the block output over all nodes
  double gat_coefficient = 0.0;
  double p = 1.0, q = 1.0;
  std::optional<std::string> snapshot;  // path of the dumped map
};

struct DiagnosticsReport {
  std::vector<LayerDiagnostics> layers;
  std::vector<Index> nodes;  // rows/cols of the materialized maps
};

struct DiagnoseOptions {
  Index subsample = 0;  // 0: all nodes (must be <= cap)
  double rank_tol = default_rank_tol<double>();
  Index cap = kSnapshotCap;
  std::optional<std::filesystem::path> dump_dir;  // write each map as JSON
};

/// Evenly spaced node ids: floor(i * n / k) for i < k.
std::vector<Index> even_subsample(Index n, Index k);

/// Runs the model once and measures every attention layer.
DiagnosticsReport diagnose(const TarifModel& model, const GraphContext& ctx,
                           const DiagnoseOptions& options = {});

nlohmann::json to_json(const LayerDiagnostics& d);
/// One JSON object per layer, tagged with epoch.
void append_report_jsonl(const std::filesystem::path& path, const DiagnosticsReport& report,
                         int epoch);

}  // namespace tarif
