#pragma once

// Monte-Carlo and finite-difference checks of the four theoretical results:
//   1. E tr S_B(MX) <= C rank(M),  C = n/sqrt(K) (lambda_max(YY^T) + d sigma^2)
//   2. a contraction P (P^T P < I) that lowers rank also lowers E tr S_B
//   3. the log-power sharpening function is increasing and convex with
//      polylogarithmic derivative growth
//   4. post-modulation (MX) (.) X lowers per-column PSE

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tarif/linalg.hpp"

namespace tarif {

struct OracleResult {
  int theorem = 0;
  std::size_t trials = 0;
  std::size_t violations = 0;
  double min_slack = 0.0;
  double mean_slack = 0.0;
  bool pass = false;
  nlohmann::json details = nlohmann::json::object();
  std::vector<std::string> reproduction_files;
};

nlohmann::json to_json(const OracleResult& r);

struct Theorem1Options {
  Index n = 60;
  Index d = 8;
  int num_classes = 4;
  double sigma = 0.5;
  double mean_scale = 1.0;
  Index max_rank = 8;  // trials cycle through r = 1..max_rank
  std::size_t trials = 200;
  std::size_t redraws = 50;  // feature samples per trial
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> repro_dir;
};

struct Theorem2Options {
  Index n = 60;
  Index d = 8;
  int num_classes = 4;
  double sigma = 0.5;
  double mean_scale = 1.0;
  double contraction = 0.9;  // P = c * group-averaging projector
  Index groups = 15;         // rank of the projector
  std::size_t trials = 100;
  std::size_t redraws = 200;
  std::uint64_t seed = 0;
  /// Self-test: P = 1.5 I with the contraction guard bypassed; must fail.
  bool force_violation = false;
  std::optional<std::filesystem::path> repro_dir;
};

struct Theorem3Options {
  std::vector<double> x_grid;  // empty: 50 log-spaced points in [1e-2, x_max]
  double x_max = 1e4;
  std::vector<double> pq_values = {1.5, 2.0, 3.0};  // grid is pq_values^2
  double fd_step = 1e-4;                             // relative to x
  double growth_low = 1e3, growth_high = 1e6;
};

struct Theorem4Options {
  Index n = 100;
  Index d = 16;
  int num_classes = 4;
  double intra_mass = 0.8;  // share of each row of M on same-class nodes
  std::size_t trials = 200;
  std::uint64_t seed = 0;
};

/// Random rank-r row-stochastic n x n matrix: row_normalize(U V^T) with
/// non-negative U, V in R^{n x r}.
Matrix random_rank_r_stochastic(Index n, Index r, std::uint64_t seed);

/// Exact E tr S_B(M X) for X = Y + sigma E: tr(A M (YY^T + d sigma^2 I) M^T).
double expected_scatter_trace(const Matrix& m, const Matrix& class_mean_rows,
                              std::span<const int> labels, double sigma);

OracleResult verify_theorem1(const Theorem1Options& options = {});
OracleResult verify_theorem2(const Theorem2Options& options = {});
OracleResult verify_theorem3(const Theorem3Options& options = {});
OracleResult verify_theorem4(const Theorem4Options& options = {});

/// True when u_i > u_j implies x_i >= x_j for all pairs and x is not constant.
bool post_modulation_premise(std::span<const double> u, std::span<const double> x);

}  // namespace tarif
