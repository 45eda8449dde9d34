#include "tarif/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "tarif/attention.hpp"
#include "tarif/diagnostics.hpp"
#include "tarif/matrix_io.hpp"
#include "tarif/parallel.hpp"
#include "tarif/random.hpp"

namespace tarif {

using json = nlohmann::json;

json to_json(const OracleResult& r) {
  return json{{"theorem", r.theorem},
              {"trials", r.trials},
              {"violations", r.violations},
              {"min_slack", r.min_slack},
              {"mean_slack", r.mean_slack},
              {"pass", r.pass},
              {"details", r.details},
              {"reproduction_files", r.reproduction_files}};
}

namespace {

std::vector<int> balanced_labels(Index n, int k, CounterRng& rng) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % k);
  rng.shuffle(std::span<int>(labels));
  return labels;
}

Matrix class_mean_rows(std::span<const int> labels, Index d, double scale) {
  Matrix y = Matrix::Zero(static_cast<Index>(labels.size()), d);
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Index>(i), labels[i]) = scale;
  return y;
}

// Columns alpha_k - gamma, with alpha_k = M^T (class-k indicator / n_k) and
// gamma = M^T 1 / n.
Matrix centroid_deviations(const Matrix& m, std::span<const int> labels) {
  const Index n = m.rows();
  const int k = *std::max_element(labels.begin(), labels.end()) + 1;
  Matrix sel = Matrix::Zero(n, k);
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  for (Index i = 0; i < n; ++i) counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] += 1.0;
  for (Index i = 0; i < n; ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    sel(i, c) = 1.0 / counts[static_cast<std::size_t>(c)];
  }
  Matrix dev = m.transpose() * sel;
  const Vector gamma = m.transpose() * Vector::Constant(n, 1.0 / static_cast<double>(n));
  dev.colwise() -= gamma;
  return dev;
}

void check_options(Index n, Index d, int k) {
  if (k < 2) throw ArgumentError("need at least 2 classes");
  if (k > d) throw ArgumentError("orthogonal class means need K <= d");
  if (n < k) throw ArgumentError("need n >= K");
}

std::string dump_instance(const std::filesystem::path& dir, const std::string& name, json body) {
  std::filesystem::create_directories(dir);
  const auto path = dir / (name + ".json");
  std::ofstream out(path);
  out << body.dump() << '\n';
  return path.string();
}

void summarize_slack(OracleResult& r, const std::vector<double>& slack) {
  if (slack.empty()) return;
  r.min_slack = *std::min_element(slack.begin(), slack.end());
  r.mean_slack = std::accumulate(slack.begin(), slack.end(), 0.0) / static_cast<double>(slack.size());
}

}  // namespace

Matrix random_rank_r_stochastic(Index n, Index r, std::uint64_t seed) {
  if (r < 1 || r > n) throw ArgumentError("rank must lie in [1, n]");
  CounterRng rng(seed);
  const Matrix u = rng.normal_matrix(n, r).cwiseAbs();
  const Matrix v = rng.normal_matrix(n, r).cwiseAbs();
  return row_normalize(Matrix(u * v.transpose()));
}

double expected_scatter_trace(const Matrix& m, const Matrix& class_mean_rows,
                              std::span<const int> labels, double sigma) {
  if (m.rows() != m.cols() || m.cols() != class_mean_rows.rows() ||
      static_cast<Index>(labels.size()) != m.rows()) {
    throw DimensionError("expected_scatter_trace: M " + shape_string(m) + ", Y " +
                         shape_string(class_mean_rows) + ", " + std::to_string(labels.size()) +
                         " labels");
  }
  const Matrix dev = centroid_deviations(m, labels);
  const double d = static_cast<double>(class_mean_rows.cols());
  return ((class_mean_rows.transpose() * dev).squaredNorm() + d * sigma * sigma * dev.squaredNorm()) /
         static_cast<double>(dev.cols());
}

// ---------------------------------------------------------------------------

OracleResult verify_theorem1(const Theorem1Options& o) {
  check_options(o.n, o.d, o.num_classes);
  if (o.max_rank < 1 || o.max_rank > o.n) throw ArgumentError("max_rank must lie in [1, n]");
  if (o.trials == 0 || o.redraws == 0) throw ArgumentError("trials and redraws must be positive");

  struct Trial {
    Index rank = 0;
    double estimate = 0.0, exact = 0.0, bound = 0.0, std_error = 0.0;
    bool lemma1 = true, lemma2 = true, rank_ok = true;
    std::optional<std::string> repro;
  };
  std::vector<Trial> out(o.trials);
  const CounterRng root(o.seed);
  const double sqrt_k = std::sqrt(static_cast<double>(o.num_classes));
  const double n = static_cast<double>(o.n);

  parallel_for(o.trials, [&](std::size_t t) {
    CounterRng rng = root.split(t);
    Trial& tr = out[t];
    tr.rank = 1 + static_cast<Index>(t) % o.max_rank;
    const auto labels = balanced_labels(o.n, o.num_classes, rng);
    const Matrix y = class_mean_rows(labels, o.d, o.mean_scale);
    const std::uint64_t m_seed = rng.next_u64();
    const Matrix m = random_rank_r_stochastic(o.n, tr.rank, m_seed);
    tr.rank_ok = numerical_rank(m).numerical_rank == tr.rank;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(y.transpose() * y),
                                                       Eigen::EigenvaluesOnly);
    const double lambda_max = eig.eigenvalues().maxCoeff();
    const double c = n / sqrt_k * (lambda_max + static_cast<double>(o.d) * o.sigma * o.sigma);
    tr.bound = c * static_cast<double>(tr.rank);

    const Matrix dev = centroid_deviations(m, labels);
    for (Index k = 0; k < dev.cols(); ++k) tr.lemma1 = tr.lemma1 && dev.col(k).norm() <= std::sqrt(n);
    const Matrix a = dev * dev.transpose() / static_cast<double>(dev.cols());
    tr.lemma2 = a.norm() <= n / sqrt_k;
    tr.exact = expected_scatter_trace(m, y, labels, o.sigma);

    double sum = 0.0, sum2 = 0.0;
    Matrix x;
    for (std::size_t s = 0; s < o.redraws; ++s) {
      x = y + rng.normal_matrix(o.n, o.d, o.sigma);
      const double v = scatter_trace(Matrix(m * x), labels);
      sum += v;
      sum2 += v * v;
    }
    const double r = static_cast<double>(o.redraws);
    tr.estimate = sum / r;
    tr.std_error = r > 1 ? std::sqrt(std::max(0.0, (sum2 - r * tr.estimate * tr.estimate) / (r - 1)) / r) : 0.0;

    const bool bad = !(tr.estimate <= tr.bound) || !(tr.exact <= tr.bound) || !tr.lemma1 || !tr.lemma2 || !tr.rank_ok;
    if (bad && o.repro_dir) {
      tr.repro = dump_instance(*o.repro_dir, "theorem1_trial" + std::to_string(t),
                               json{{"theorem", 1}, {"trial", t}, {"seed", o.seed}, {"m_seed", m_seed},
                                    {"labels", labels}, {"M", to_json(m)}, {"X", to_json(x)},
                                    {"estimate", tr.estimate}, {"bound", tr.bound}});
    }
  });

  OracleResult res;
  res.theorem = 1;
  res.trials = o.trials;
  std::vector<double> slack;
  std::vector<double> by_rank(static_cast<std::size_t>(o.max_rank), 0.0);
  std::vector<double> count(static_cast<std::size_t>(o.max_rank), 0.0);
  std::size_t lemma_failures = 0, rank_failures = 0;
  double worst_error_ratio = 0.0;
  for (const auto& tr : out) {
    const bool bad = !(tr.estimate <= tr.bound) || !(tr.exact <= tr.bound) || !tr.lemma1 || !tr.lemma2 || !tr.rank_ok;
    if (bad) ++res.violations;
    if (!tr.lemma1 || !tr.lemma2) ++lemma_failures;
    if (!tr.rank_ok) ++rank_failures;
    if (tr.repro) res.reproduction_files.push_back(*tr.repro);
    slack.push_back((tr.bound - tr.estimate) / tr.bound);
    by_rank[static_cast<std::size_t>(tr.rank - 1)] += tr.estimate;
    count[static_cast<std::size_t>(tr.rank - 1)] += 1.0;
    if (tr.bound > tr.estimate) worst_error_ratio = std::max(worst_error_ratio, tr.std_error / (tr.bound - tr.estimate));
  }
  summarize_slack(res, slack);
  json per_rank = json::array();
  bool nondecreasing = true;
  double prev = -1.0;
  for (std::size_t r = 0; r < by_rank.size(); ++r) {
    if (count[r] == 0.0) continue;
    const double mean = by_rank[r] / count[r];
    per_rank.push_back({{"rank", r + 1}, {"mean_scatter_trace", mean}, {"bound", out[r].bound}});
    nondecreasing = nondecreasing && mean >= prev;
    prev = mean;
  }
  res.details = {{"per_rank", per_rank},
                 {"mean_nondecreasing_in_rank", nondecreasing},
                 {"lemma_failures", lemma_failures},
                 {"rank_construction_failures", rank_failures},
                 {"max_mc_error_over_slack", worst_error_ratio}};
  res.pass = res.violations == 0;
  return res;
}

// ---------------------------------------------------------------------------

OracleResult verify_theorem2(const Theorem2Options& o) {
  check_options(o.n, o.d, o.num_classes);
  if (!o.force_violation && !(o.contraction > 0.0 && o.contraction < 1.0)) {
    throw ArgumentError("contraction factor must lie in (0, 1)");
  }
  if (o.groups < 1 || o.groups >= o.n) throw ArgumentError("groups must lie in [1, n)");
  if (o.trials == 0 || o.redraws == 0) throw ArgumentError("trials and redraws must be positive");

  struct Trial {
    double mc_reduced = 0.0, mc_base = 0.0, exact_reduced = 0.0, exact_base = 0.0;
    Index rank_reduced = 0, rank_base = 0;
    double max_contraction_eig = 0.0;
    std::optional<std::string> repro;
    bool bad = false;
  };
  std::vector<Trial> out(o.trials);
  const CounterRng root(o.seed);

  parallel_for(o.trials, [&](std::size_t t) {
    CounterRng rng = root.split(t);
    Trial& tr = out[t];
    const auto labels = balanced_labels(o.n, o.num_classes, rng);
    const Matrix y = class_mean_rows(labels, o.d, o.mean_scale);
    const Matrix m2 = row_normalize(rng.uniform_matrix(o.n, o.n, 0.0, 1.0));

    Matrix p;
    if (o.force_violation) {
      p = 1.5 * Matrix::Identity(o.n, o.n);
    } else {
      std::vector<Index> group(static_cast<std::size_t>(o.n));
      for (Index i = 0; i < o.n; ++i) group[static_cast<std::size_t>(i)] = i % o.groups;
      rng.shuffle(std::span<Index>(group));
      std::vector<double> size(static_cast<std::size_t>(o.groups), 0.0);
      for (Index g : group) size[static_cast<std::size_t>(g)] += 1.0;
      p = Matrix::Zero(o.n, o.n);
      for (Index i = 0; i < o.n; ++i) {
        for (Index j = 0; j < o.n; ++j) {
          const Index g = group[static_cast<std::size_t>(i)];
          if (g == group[static_cast<std::size_t>(j)]) p(i, j) = o.contraction / size[static_cast<std::size_t>(g)];
        }
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(p.transpose() * p),
                                                         Eigen::EigenvaluesOnly);
      tr.max_contraction_eig = eig.eigenvalues().maxCoeff();
      if (!(tr.max_contraction_eig < 1.0 - 1e-12)) {
        throw NumericalError("theorem 2 oracle: constructed P violates P^T P < I (largest eigenvalue " +
                             format_double(tr.max_contraction_eig) + ")");
      }
    }
    const Matrix m1 = p * m2;
    tr.rank_reduced = numerical_rank(m1).numerical_rank;
    tr.rank_base = numerical_rank(m2).numerical_rank;
    tr.exact_reduced = expected_scatter_trace(m1, y, labels, o.sigma);
    tr.exact_base = expected_scatter_trace(m2, y, labels, o.sigma);

    Matrix x;
    for (std::size_t s = 0; s < o.redraws; ++s) {
      x = y + rng.normal_matrix(o.n, o.d, o.sigma);
      tr.mc_reduced += scatter_trace(Matrix(m1 * x), labels);
      tr.mc_base += scatter_trace(Matrix(m2 * x), labels);
    }
    tr.mc_reduced /= static_cast<double>(o.redraws);
    tr.mc_base /= static_cast<double>(o.redraws);
    tr.bad = !(tr.mc_reduced < tr.mc_base) || !(tr.exact_reduced < tr.exact_base);
    if (!o.force_violation) tr.bad = tr.bad || !(tr.rank_reduced < tr.rank_base);
    if (tr.bad && o.repro_dir) {
      tr.repro = dump_instance(*o.repro_dir, "theorem2_trial" + std::to_string(t),
                               json{{"theorem", 2}, {"trial", t}, {"seed", o.seed}, {"labels", labels},
                                    {"P", to_json(p)}, {"M", to_json(m2)}, {"X", to_json(x)},
                                    {"mc_reduced", tr.mc_reduced}, {"mc_base", tr.mc_base}});
    }
  });

  OracleResult res;
  res.theorem = 2;
  res.trials = o.trials;
  std::vector<double> slack;
  double max_eig = 0.0;
  for (const auto& tr : out) {
    if (tr.bad) ++res.violations;
    if (tr.repro) res.reproduction_files.push_back(*tr.repro);
    slack.push_back((tr.mc_base - tr.mc_reduced) / tr.mc_base);
    max_eig = std::max(max_eig, tr.max_contraction_eig);
  }
  summarize_slack(res, slack);
  res.details = {{"contraction", o.force_violation ? 1.5 : o.contraction},
                 {"max_eigenvalue_PtP", o.force_violation ? 2.25 : max_eig},
                 {"rank_base", out.front().rank_base},
                 {"rank_reduced", out.front().rank_reduced},
                 {"forced_violation", o.force_violation}};
  res.pass = res.violations == 0;
  return res;
}

// ---------------------------------------------------------------------------

OracleResult verify_theorem3(const Theorem3Options& o) {
  for (double v : o.pq_values) {
    if (!(v > 1.0)) throw ArgumentError("theorem 3 needs p, q > 1");
  }
  if (!(o.fd_step > 0.0)) throw ArgumentError("fd_step must be positive");
  std::vector<double> grid = o.x_grid;
  if (grid.empty()) {
    const double lo = std::log10(1e-2), hi = std::log10(o.x_max);
    for (int i = 0; i < 50; ++i) grid.push_back(std::pow(10.0, lo + (hi - lo) * i / 49.0));
  }
  for (double x : grid) {
    if (!(x > 0.0)) throw ArgumentError("theorem 3 grid points must be positive");
  }

  auto fd1 = [&](double x, double p, double q) {
    const double h = o.fd_step * x;
    return (sharpen_value(x + h, p, q) - sharpen_value(x - h, p, q)) / (2.0 * h);
  };
  auto fd2 = [&](double x, double p, double q) {
    const double h = o.fd_step * x;
    return (sharpen_value(x + h, p, q) - 2.0 * sharpen_value(x, p, q) + sharpen_value(x - h, p, q)) / (h * h);
  };

  OracleResult res;
  res.theorem = 3;
  std::vector<double> slack;
  double max_derivative_error = 0.0;
  json growth = json::array();
  for (double p : o.pq_values) {
    for (double q : o.pq_values) {
      for (double x : grid) {
        ++res.trials;
        const double d1 = fd1(x, p, q), d2 = fd2(x, p, q);
        if (!(d1 > 0.0) || !(d2 > 0.0)) ++res.violations;
        slack.push_back(x * d2 / d1);
        const double exact = sharpen_derivative(x, p, q);
        max_derivative_error = std::max(max_derivative_error, std::abs(d1 - exact) / exact);
      }
      // Growth: f' normalized by (ln x)^q stays within a bounded factor over
      // [lo, hi], and the power function's derivative grows faster than f's.
      ++res.trials;
      const double lo = o.growth_low, hi = o.growth_high;
      const double f_lo = fd1(lo, p, q), f_hi = fd1(hi, p, q);
      const double normalized = (f_hi / std::pow(std::log(hi), q)) / (f_lo / std::pow(std::log(lo), q));
      const double limit = std::pow(p, q) * 1.5;
      const double power_ratio = std::pow(hi / lo, p - 1.0);
      const double f_ratio = f_hi / f_lo;
      const bool bounded = normalized < limit && normalized > 1.0 / limit;
      const bool slower = power_ratio > f_ratio;
      if (!bounded || !slower) ++res.violations;
      growth.push_back({{"p", p}, {"q", q}, {"normalized_ratio", normalized}, {"limit", limit},
                        {"derivative_ratio", f_ratio}, {"power_derivative_ratio", power_ratio}});
    }
  }
  summarize_slack(res, slack);

  bool boundary_convex = true;
  for (double x : grid) boundary_convex = boundary_convex && fd1(x, 1.0, 1.0) > 0.0 && fd2(x, 1.0, 1.0) > 0.0;
  const double l2 = std::log(2.0);
  res.details = {{"grid_points", grid.size()},
                 {"max_relative_derivative_error", max_derivative_error},
                 {"growth", growth},
                 {"fprime_at_1_p2_q2", fd1(1.0, 2.0, 2.0)},
                 {"fprime_at_1_p2_q2_analytic", l2 * l2 + 2.0 * l2},
                 {"boundary_p1_q1_convex", boundary_convex}};
  res.pass = res.violations == 0;
  return res;
}

// ---------------------------------------------------------------------------

bool post_modulation_premise(std::span<const double> u, std::span<const double> x) {
  if (u.size() != x.size()) throw DimensionError("premise: length mismatch");
  bool constant = true;
  for (std::size_t i = 1; i < x.size(); ++i) constant = constant && x[i] == x[0];
  if (constant) return false;
  std::vector<std::size_t> order(u.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return u[a] != u[b] ? u[a] > u[b] : x[a] > x[b];
  });
  // After sorting by u (ties broken by x), x must be non-increasing.
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (x[order[i]] > x[order[i - 1]]) return false;
  }
  return true;
}

OracleResult verify_theorem4(const Theorem4Options& o) {
  if (o.n < 2) throw ArgumentError("theorem 4 needs n >= 2");
  if (o.num_classes < 2 || o.num_classes > o.n) throw ArgumentError("need 2 <= K <= n");
  if (!(o.intra_mass > 0.0 && o.intra_mass < 1.0)) throw ArgumentError("intra_mass must lie in (0, 1)");

  struct Trial {
    std::size_t premise_columns = 0, violations = 0;
    std::vector<double> slack;
  };
  std::vector<Trial> out(o.trials);
  const CounterRng root(o.seed);

  parallel_for(o.trials, [&](std::size_t t) {
    CounterRng rng = root.split(t);
    Trial& tr = out[t];
    const auto labels = balanced_labels(o.n, o.num_classes, rng);
    std::vector<double> size(static_cast<std::size_t>(o.num_classes), 0.0);
    for (int y : labels) size[static_cast<std::size_t>(y)] += 1.0;
    Matrix m(o.n, o.n);
    for (Index i = 0; i < o.n; ++i) {
      const auto ci = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
      for (Index j = 0; j < o.n; ++j) {
        m(i, j) = labels[static_cast<std::size_t>(j)] == static_cast<int>(ci)
                      ? o.intra_mass / size[ci]
                      : (1.0 - o.intra_mass) / (static_cast<double>(o.n) - size[ci]);
      }
    }
    // Per-class level plus noise; half the columns get noise large enough
    // that the ordering premise often fails.
    Matrix x(o.n, o.d);
    for (Index j = 0; j < o.d; ++j) {
      std::vector<double> level(static_cast<std::size_t>(o.num_classes));
      for (auto& l : level) l = rng.uniform(1.0, 5.0);
      const double noise = j < o.d / 2 ? 0.02 : 0.5;
      for (Index i = 0; i < o.n; ++i) {
        x(i, j) = level[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] + rng.uniform(-noise, noise);
      }
    }
    if (!((x.array() > 0.0).all())) throw ArgumentError("theorem 4 needs strictly positive features");
    const Matrix y1 = m * x;
    const Matrix y2 = y1.cwiseProduct(x);
    for (Index j = 0; j < o.d; ++j) {
      const Vector u = y1.col(j), xc = x.col(j);
      if (!post_modulation_premise(std::span<const double>(u.data(), u.size()),
                                   std::span<const double>(xc.data(), xc.size()))) {
        continue;
      }
      ++tr.premise_columns;
      const double h1 = pse(y1.col(j)), h2 = pse(y2.col(j));
      if (!(h2 < h1)) ++tr.violations;
      tr.slack.push_back(h1 - h2);
    }
  });

  OracleResult res;
  res.theorem = 4;
  res.trials = o.trials;
  std::size_t premise = 0;
  std::vector<double> slack;
  for (const auto& tr : out) {
    res.violations += tr.violations;
    premise += tr.premise_columns;
    slack.insert(slack.end(), tr.slack.begin(), tr.slack.end());
  }
  summarize_slack(res, slack);

  const Vector two_x = (Vector(2) << 4.0, 1.0).finished();
  Matrix two_m(2, 2);
  two_m << 0.8, 0.2, 0.2, 0.8;
  const Vector two_y1 = two_m * two_x;
  const Vector two_y2 = two_y1.cwiseProduct(two_x);
  res.details = {{"premise_columns", premise},
                 {"total_columns", o.trials * static_cast<std::size_t>(o.d)},
                 {"two_node_pse_before", pse(two_y1)},
                 {"two_node_pse_after", pse(two_y2)}};
  res.pass = res.violations == 0 && premise > 0;
  return res;
}

}  // namespace tarif
