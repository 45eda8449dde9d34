#include "tarif/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tarif/matrix_io.hpp"
#include "tarif/random.hpp"

namespace tarif {

int Graph::num_classes() const {
  int k = 0;
  for (int y : labels) k = std::max(k, y + 1);
  return k;
}

namespace {

std::vector<Index> rows_of(const std::vector<std::uint8_t>& mask) {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) rows.push_back(static_cast<Index>(i));
  }
  return rows;
}

}  // namespace

std::vector<Index> Graph::train_rows() const { return rows_of(train_mask); }
std::vector<Index> Graph::val_rows() const { return rows_of(val_mask); }
std::vector<Index> Graph::test_rows() const { return rows_of(test_mask); }

ad::Neighborhoods Graph::with_self_loops() const {
  ad::Neighborhoods nb;
  nb.offsets.resize(static_cast<std::size_t>(n) + 1, 0);
  nb.targets.reserve(csr_targets.size() + static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    nb.targets.push_back(i);
    const auto b = csr_offsets[static_cast<std::size_t>(i)];
    const auto e = csr_offsets[static_cast<std::size_t>(i) + 1];
    nb.targets.insert(nb.targets.end(), csr_targets.begin() + b, csr_targets.begin() + e);
    nb.offsets[static_cast<std::size_t>(i) + 1] = static_cast<Index>(nb.targets.size());
  }
  return nb;
}

bool operator==(const Graph& a, const Graph& b) {
  return a.n == b.n && a.csr_offsets == b.csr_offsets && a.csr_targets == b.csr_targets &&
         a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
         a.features == b.features && a.labels == b.labels && a.train_mask == b.train_mask &&
         a.val_mask == b.val_mask && a.test_mask == b.test_mask;
}

Graph build_graph(Index n, const std::vector<std::pair<Index, Index>>& edges, Matrix features,
                  std::vector<int> labels) {
  if (features.rows() != n) {
    throw DimensionError("build_graph: features " + shape_string(features) + " for " +
                         std::to_string(n) + " nodes");
  }
  if (static_cast<Index>(labels.size()) != n) {
    throw DimensionError("build_graph: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " nodes");
  }
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(n));
  for (const auto& [s, t] : edges) {
    if (s < 0 || t < 0 || s >= n || t >= n) {
      throw ArgumentError("build_graph: edge (" + std::to_string(s) + ", " + std::to_string(t) +
                          ") out of range");
    }
    if (s == t) continue;
    adj[static_cast<std::size_t>(s)].push_back(t);
    adj[static_cast<std::size_t>(t)].push_back(s);
  }
  Graph g;
  g.n = n;
  g.csr_offsets.assign(1, 0);
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    g.csr_targets.insert(g.csr_targets.end(), row.begin(), row.end());
    g.csr_offsets.push_back(static_cast<Index>(g.csr_targets.size()));
  }
  g.features = std::move(features);
  g.labels = std::move(labels);
  return g;
}

double edge_homophily(const Graph& g) {
  if (g.csr_targets.empty()) return 0.0;
  Index same = 0;
  for (Index i = 0; i < g.n; ++i) {
    for (Index k = g.csr_offsets[static_cast<std::size_t>(i)];
         k < g.csr_offsets[static_cast<std::size_t>(i) + 1]; ++k) {
      same += g.labels[static_cast<std::size_t>(i)] ==
              g.labels[static_cast<std::size_t>(g.csr_targets[static_cast<std::size_t>(k)])];
    }
  }
  return static_cast<double>(same) / static_cast<double>(g.csr_targets.size());
}

Graph generate_sbm(const SbmSpec& spec) {
  if (spec.num_classes < 1) throw ArgumentError("generate_sbm: need at least one class");
  if (spec.num_classes > spec.feature_dim) {
    throw ArgumentError("generate_sbm: K = " + std::to_string(spec.num_classes) +
                        " exceeds feature dimension d = " + std::to_string(spec.feature_dim) +
                        "; orthogonal means need K <= d");
  }
  if (spec.n < spec.num_classes) throw ArgumentError("generate_sbm: need n >= K");
  if (spec.p_in < 0 || spec.p_in > 1 || spec.p_out < 0 || spec.p_out > 1) {
    throw ArgumentError("generate_sbm: probabilities must lie in [0, 1]");
  }
  if (spec.sigma < 0) throw ArgumentError("generate_sbm: sigma must be non-negative");

  const CounterRng root(spec.seed);
  CounterRng label_rng = root.split(0);
  CounterRng edge_rng = root.split(1);
  CounterRng feature_rng = root.split(2);

  std::vector<int> labels(static_cast<std::size_t>(spec.n));
  for (Index i = 0; i < spec.n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % spec.num_classes);
  label_rng.shuffle(std::span<int>(labels));

  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 0; i < spec.n; ++i) {
    for (Index j = i + 1; j < spec.n; ++j) {
      const bool same = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)];
      if (edge_rng.bernoulli(same ? spec.p_in : spec.p_out)) edges.emplace_back(i, j);
    }
  }

  Matrix features(spec.n, spec.feature_dim);
  for (Index i = 0; i < spec.n; ++i) {
    for (Index c = 0; c < spec.feature_dim; ++c) {
      const double mean = (c == labels[static_cast<std::size_t>(i)]) ? spec.mean_scale : 0.0;
      features(i, c) = mean + spec.sigma * feature_rng.normal();
    }
  }
  return build_graph(spec.n, edges, std::move(features), std::move(labels));
}

namespace {

// Per-class quotas summing to `total`, each within one of size * frac
// (largest-remainder rounding, ties broken by class index).
std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes, double frac,
                                   std::size_t total) {
  std::vector<std::size_t> quota(sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const double exact = static_cast<double>(sizes[c]) * frac;
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total && r < remainders.size(); ++r, ++assigned) {
    ++quota[remainders[r].second];
  }
  return quota;
}

}  // namespace

Graph split(Graph graph, double train_frac, double val_frac, std::uint64_t seed) {
  if (!(train_frac > 0 && val_frac > 0 && train_frac + val_frac < 1)) {
    throw ArgumentError("split: fractions must be positive with sum < 1");
  }
  const int k = graph.num_classes();
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(k));
  for (Index i = 0; i < graph.n; ++i) {
    members[static_cast<std::size_t>(graph.labels[static_cast<std::size_t>(i)])].push_back(i);
  }
  std::vector<std::size_t> sizes;
  for (int c = 0; c < k; ++c) {
    const auto& m = members[static_cast<std::size_t>(c)];
    if (m.size() < 3) {
      throw ArgumentError("split: class " + std::to_string(c) + " has " + std::to_string(m.size()) +
                          " nodes; stratification needs at least 3");
    }
    sizes.push_back(m.size());
  }
  const double n_total = static_cast<double>(graph.n);
  const auto train_quota =
      apportion(sizes, train_frac, static_cast<std::size_t>(std::llround(n_total * train_frac)));
  const auto val_quota =
      apportion(sizes, val_frac, static_cast<std::size_t>(std::llround(n_total * val_frac)));

  const auto n = static_cast<std::size_t>(graph.n);
  graph.train_mask.assign(n, 0);
  graph.val_mask.assign(n, 0);
  graph.test_mask.assign(n, 0);
  const CounterRng root(seed);
  for (int c = 0; c < k; ++c) {
    auto& m = members[static_cast<std::size_t>(c)];
    CounterRng rng = root.split(static_cast<std::uint64_t>(c));
    rng.shuffle(std::span<Index>(m));
    const std::size_t n_train = std::clamp<std::size_t>(train_quota[static_cast<std::size_t>(c)], 1, m.size() - 1);
    const std::size_t n_val = std::min(val_quota[static_cast<std::size_t>(c)], m.size() - n_train);
    for (std::size_t r = 0; r < m.size(); ++r) {
      auto& mask = r < n_train ? graph.train_mask
                               : (r < n_train + n_val ? graph.val_mask : graph.test_mask);
      mask[static_cast<std::size_t>(m[r])] = 1;
    }
  }
  return graph;
}

Graph load_edge_list(const std::filesystem::path& edges_path,
                     const std::filesystem::path& features_path,
                     const std::filesystem::path& labels_path) {
  Matrix features = read_csv(features_path);
  const Index n = features.rows();

  std::ifstream lin(labels_path);
  if (!lin) throw ParseError("cannot open " + labels_path.string(), 0);
  std::vector<int> raw_labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lin, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    long v;
    std::string extra;
    if (!(ss >> v) || (ss >> extra) || v < 0) {
      throw ParseError("labels: expected one non-negative integer, got '" + line + "'", line_no);
    }
    if (static_cast<Index>(raw_labels.size()) >= n) {
      throw ParseError("labels: more labels than feature rows (" + std::to_string(n) + ")", line_no);
    }
    raw_labels.push_back(static_cast<int>(v));
  }
  if (static_cast<Index>(raw_labels.size()) != n) {
    throw ParseError("labels: " + std::to_string(raw_labels.size()) + " labels for " +
                         std::to_string(n) + " feature rows",
                     line_no);
  }
  // Labels must be contiguous 0..K-1 so every class id is meaningful.
  const int k = *std::max_element(raw_labels.begin(), raw_labels.end()) + 1;
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  for (int y : raw_labels) seen[static_cast<std::size_t>(y)] = true;
  for (int c = 0; c < k; ++c) {
    if (!seen[static_cast<std::size_t>(c)]) {
      const auto at = static_cast<std::size_t>(
          std::find_if(raw_labels.begin(), raw_labels.end(), [&](int y) { return y > c; }) -
          raw_labels.begin());
      throw ParseError("labels: label out of range (class " + std::to_string(c) +
                           " missing below max label " + std::to_string(k - 1) + ")",
                       at + 1);
    }
  }

  std::ifstream ein(edges_path);
  if (!ein) throw ParseError("cannot open " + edges_path.string(), 0);
  std::vector<std::pair<Index, Index>> edges;
  line_no = 0;
  while (std::getline(ein, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ss(line);
    long long s, t;
    std::string extra;
    if (!(ss >> s >> t) || (ss >> extra)) {
      throw ParseError("edges: expected 'src dst', got '" + line + "'", line_no);
    }
    if (s < 0 || t < 0 || s >= n || t >= n) {
      throw ParseError("edges: node id out of range [0, " + std::to_string(n) + ")", line_no);
    }
    edges.emplace_back(static_cast<Index>(s), static_cast<Index>(t));
  }
  return build_graph(n, edges, std::move(features), std::move(raw_labels));
}

void save_graph(const Graph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "edges.txt");
    for (Index i = 0; i < g.n; ++i) {
      for (Index k = g.csr_offsets[static_cast<std::size_t>(i)];
           k < g.csr_offsets[static_cast<std::size_t>(i) + 1]; ++k) {
        const Index j = g.csr_targets[static_cast<std::size_t>(k)];
        if (i < j) out << i << ' ' << j << '\n';
      }
    }
  }
  write_csv(dir / "features.csv", g.features);
  {
    std::ofstream out(dir / "labels.txt");
    for (int y : g.labels) out << y << '\n';
  }
  nlohmann::json masks = {{"train", g.train_rows()}, {"val", g.val_rows()}, {"test", g.test_rows()}};
  std::ofstream(dir / "masks.json") << masks.dump() << '\n';
}

Graph load_graph(const std::filesystem::path& dir) {
  Graph g = load_edge_list(dir / "edges.txt", dir / "features.csv", dir / "labels.txt");
  const auto mask_path = dir / "masks.json";
  if (!std::filesystem::exists(mask_path)) return g;
  std::ifstream in(mask_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("masks.json: " + std::string(e.what()), 0);
  }
  const auto n = static_cast<std::size_t>(g.n);
  auto fill = [&](const char* key, std::vector<std::uint8_t>& mask) {
    mask.assign(n, 0);
    for (Index i : j.at(key).get<std::vector<Index>>()) {
      if (i < 0 || static_cast<std::size_t>(i) >= n) {
        throw ParseError(std::string("masks.json: ") + key + " index out of range", 0);
      }
      mask[static_cast<std::size_t>(i)] = 1;
    }
  };
  fill("train", g.train_mask);
  fill("val", g.val_mask);
  fill("test", g.test_mask);
  bool any_train = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (g.train_mask[i] + g.val_mask[i] + g.test_mask[i] > 1) {
      throw ParseError("masks.json: node " + std::to_string(i) + " appears in two splits", 0);
    }
    any_train = any_train || g.train_mask[i];
  }
  if (!any_train) {
    g.train_mask.clear();
    g.val_mask.clear();
    g.test_mask.clear();
  }
  return g;
}

Graph induced_subgraph(const Graph& g, const std::vector<Index>& nodes) {
  std::vector<Index> new_id(static_cast<std::size_t>(g.n), -1);
  for (std::size_t r = 0; r < nodes.size(); ++r) new_id[static_cast<std::size_t>(nodes[r])] = static_cast<Index>(r);
  std::vector<std::pair<Index, Index>> edges;
  Matrix features(static_cast<Index>(nodes.size()), g.features.cols());
  std::vector<int> labels;
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const Index old = nodes[r];
    features.row(static_cast<Index>(r)) = g.features.row(old);
    labels.push_back(g.labels[static_cast<std::size_t>(old)]);
    for (Index k = g.csr_offsets[static_cast<std::size_t>(old)];
         k < g.csr_offsets[static_cast<std::size_t>(old) + 1]; ++k) {
      const Index t = new_id[static_cast<std::size_t>(g.csr_targets[static_cast<std::size_t>(k)])];
      if (t >= 0) edges.emplace_back(static_cast<Index>(r), t);
    }
  }
  Graph out = build_graph(static_cast<Index>(nodes.size()), edges, std::move(features), std::move(labels));
  if (g.has_splits()) {
    for (Index old : nodes) {
      out.train_mask.push_back(g.train_mask[static_cast<std::size_t>(old)]);
      out.val_mask.push_back(g.val_mask[static_cast<std::size_t>(old)]);
      out.test_mask.push_back(g.test_mask[static_cast<std::size_t>(old)]);
    }
  }
  return out;
}

Graph permute(const Graph& g, const std::vector<Index>& perm) {
  if (static_cast<Index>(perm.size()) != g.n) throw ArgumentError("permute: size mismatch");
  return induced_subgraph(g, perm);
}

}  // namespace tarif
