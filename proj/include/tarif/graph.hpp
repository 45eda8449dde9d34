#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tarif/autodiff.hpp"
#include "tarif/linalg.hpp"

namespace tarif {

/// Undirected attributed graph in CSR form. Self-loops are never stored.
struct Graph {
  Index n = 0;
  std::vector<Index> csr_offsets;  // size n + 1
  std::vector<Index> csr_targets;  // sorted within each row
  Matrix features;                 // n x d
  std::vector<int> labels;         // size n, values in [0, num_classes)
  std::vector<std::uint8_t> train_mask, val_mask, test_mask;

  Index num_directed_edges() const { return static_cast<Index>(csr_targets.size()); }
  Index num_edges() const { return num_directed_edges() / 2; }
  Index degree(Index i) const {
    return csr_offsets[static_cast<std::size_t>(i) + 1] - csr_offsets[static_cast<std::size_t>(i)];
  }
  int num_classes() const;
  bool has_splits() const { return !train_mask.empty(); }

  std::vector<Index> train_rows() const;
  std::vector<Index> val_rows() const;
  std::vector<Index> test_rows() const;

  /// Neighbourhoods with a self-loop prepended to every row.
  ad::Neighborhoods with_self_loops() const;

  friend bool operator==(const Graph& a, const Graph& b);
};

/// Builds a symmetrized, deduplicated CSR graph; self-loops are dropped.
Graph build_graph(Index n, const std::vector<std::pair<Index, Index>>& edges, Matrix features,
                  std::vector<int> labels);

/// Fraction of edges whose endpoints share a label.
double edge_homophily(const Graph& g);

struct SbmSpec {
  Index n = 400;
  int num_classes = 4;
  double p_in = 0.1;
  double p_out = 0.01;
  Index feature_dim = 16;
  double mean_scale = 1.0;
  double sigma = 0.5;
  std::uint64_t seed = 0;
};

/// Stochastic block model with Gaussian-mixture features around mutually
/// orthogonal class means mean_scale * e_k.
Graph generate_sbm(const SbmSpec& spec);

/// Stratified seeded split; every class needs at least 3 nodes.
Graph split(Graph graph, double train_frac, double val_frac, std::uint64_t seed);

/// Edge list (`src dst` per line), features CSV, labels (one int per line).
Graph load_edge_list(const std::filesystem::path& edges, const std::filesystem::path& features,
                     const std::filesystem::path& labels);

/// Directory with edges.txt, features.csv, labels.txt, masks.json.
void save_graph(const Graph& g, const std::filesystem::path& dir);
Graph load_graph(const std::filesystem::path& dir);

/// Relabels nodes: node i of the result is node perm[i] of the input.
Graph permute(const Graph& g, const std::vector<Index>& perm);

/// Induced subgraph on the listed nodes, in the given order.
Graph induced_subgraph(const Graph& g, const std::vector<Index>& nodes);

}  // namespace tarif
