#pragma once

// Dense linear algebra used throughout: checked products, numerical rank via
// one-sided Jacobi SVD, row normalization and between-class scatter.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tarif/errors.hpp"

namespace tarif {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Mat<double>;
using Vector = Vec<double>;
using Index = Eigen::Index;

inline std::string shape_string(Index rows, Index cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

template <typename Derived>
std::string shape_string(const Eigen::MatrixBase<Derived>& m) {
  return shape_string(m.rows(), m.cols());
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Matrix product with an explicit shape check.
template <typename DerivedA, typename DerivedB>
Mat<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                      const Eigen::MatrixBase<DerivedB>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: shape mismatch " + shape_string(a) + " x " + shape_string(b));
  }
  return a * b;
}

template <typename Scalar>
struct RankEstimate {
  Index numerical_rank = 0;
  std::vector<Scalar> singular_values;  // descending
  Scalar tolerance = 0;
};

enum class SvdMethod {
  Jacobi,  // one-sided Jacobi, always
  Auto,    // Jacobi up to kJacobiMaxDim, Eigen's divide-and-conquer SVD above
};

inline constexpr Index kJacobiMaxDim = 512;
inline constexpr int kJacobiMaxSweeps = 100;

/// Singular values by one-sided (Hestenes) Jacobi rotations, descending.
///
/// Columns of the working copy are orthogonalized pairwise until every pair
/// satisfies |u_p . u_q| <= eps * |u_p| |u_q|; the singular values are then
/// the column norms. Wide inputs are transposed first.
template <typename Derived>
std::vector<typename Derived::Scalar> jacobi_singular_values(const Eigen::MatrixBase<Derived>& m,
                                                             int max_sweeps = kJacobiMaxSweeps) {
  using Scalar = typename Derived::Scalar;
  using ColMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
  ColMat w = m.rows() >= m.cols() ? ColMat(m) : ColMat(m.transpose());
  const Index n = w.cols();
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();

  const Scalar frob2 = w.squaredNorm();
  Vec<Scalar> norms2(n);
  for (Index j = 0; j < n; ++j) norms2(j) = w.col(j).squaredNorm();
  const Scalar negligible = eps * eps * frob2;
  // A dot product over m rows carries about m*eps relative rounding.
  const Scalar orth_tol = eps * static_cast<Scalar>(w.rows());

  bool converged = n < 2 || frob2 == Scalar(0);
  int sweep = 0;
  while (!converged) {
    if (sweep == max_sweeps) {
      throw NumericalError("jacobi_singular_values: no convergence after " +
                           std::to_string(max_sweeps) + " sweeps");
    }
    ++sweep;
    bool rotated = false;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const Scalar alpha = norms2(p);
        const Scalar beta = norms2(q);
        // Columns at rounding level of the whole matrix only churn; they sit
        // far below any rank tolerance.
        if (std::min(alpha, beta) <= negligible) continue;
        const Scalar gamma = w.col(p).dot(w.col(q));
        if (std::abs(gamma) <= orth_tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const Scalar zeta = (beta - alpha) / (Scalar(2) * gamma);
        const Scalar t = std::copysign(Scalar(1), zeta) / (std::abs(zeta) + std::sqrt(Scalar(1) + zeta * zeta));
        const Scalar c = Scalar(1) / std::sqrt(Scalar(1) + t * t);
        const Scalar s = c * t;
        for (Index i = 0; i < w.rows(); ++i) {
          const Scalar up = w(i, p);
          const Scalar uq = w(i, q);
          w(i, p) = c * up - s * uq;
          w(i, q) = s * up + c * uq;
        }
        norms2(p) = w.col(p).squaredNorm();
        norms2(q) = w.col(q).squaredNorm();
      }
    }
    converged = !rotated;
  }

  std::vector<Scalar> sv(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) sv[static_cast<std::size_t>(j)] = std::sqrt(norms2(j));
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

/// Default relative tolerance: machine epsilon of the scalar type.
template <typename Scalar>
constexpr Scalar default_rank_tol() {
  return std::numeric_limits<Scalar>::epsilon();
}

/// Count of singular values above sigma_max * max(rows, cols) * rel_tol.
template <typename Derived>
RankEstimate<typename Derived::Scalar> numerical_rank(
    const Eigen::MatrixBase<Derived>& m,
    typename Derived::Scalar rel_tol = default_rank_tol<typename Derived::Scalar>(),
    SvdMethod method = SvdMethod::Auto) {
  using Scalar = typename Derived::Scalar;
  if (m.size() == 0) throw ArgumentError("numerical_rank: empty matrix");
  if (!(rel_tol > Scalar(0) && rel_tol < Scalar(1))) {
    throw ArgumentError("numerical_rank: rel_tol must lie in (0, 1)");
  }
  RankEstimate<Scalar> out;
  if (method == SvdMethod::Auto && std::min(m.rows(), m.cols()) > kJacobiMaxDim) {
    Eigen::BDCSVD<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> svd(m.eval());
    const auto& s = svd.singularValues();
    out.singular_values.assign(s.data(), s.data() + s.size());
  } else {
    out.singular_values = jacobi_singular_values(m);
  }
  const Scalar smax = out.singular_values.empty() ? Scalar(0) : out.singular_values.front();
  out.tolerance = smax * static_cast<Scalar>(std::max(m.rows(), m.cols())) * rel_tol;
  out.numerical_rank = static_cast<Index>(
      std::count_if(out.singular_values.begin(), out.singular_values.end(),
                    [&](Scalar s) { return s > out.tolerance; }));
  return out;
}

/// Divide every row by its sum. Entries must be non-negative.
template <typename Derived>
Mat<typename Derived::Scalar> row_normalize(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if ((m.array() < Scalar(0)).any()) {
    throw ArgumentError("row_normalize: negative entry");
  }
  Mat<Scalar> out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    const Scalar s = out.row(i).sum();
    if (!(s > Scalar(0))) {
      throw DegenerateRowError("row_normalize: row " + std::to_string(i) + " sums to zero", i);
    }
    out.row(i) /= s;
  }
  return out;
}

/// Per-class mean rows; labels must be in [0, num_classes).
template <typename Derived>
Mat<typename Derived::Scalar> class_means(const Eigen::MatrixBase<Derived>& features,
                                          std::span<const int> labels, int num_classes) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> means = Mat<Scalar>::Zero(num_classes, features.cols());
  std::vector<Index> counts(static_cast<std::size_t>(num_classes), 0);
  for (Index i = 0; i < features.rows(); ++i) {
    const int k = labels[static_cast<std::size_t>(i)];
    means.row(k) += features.row(i);
    ++counts[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k < num_classes; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) {
      throw ArgumentError("class " + std::to_string(k) + " has no members");
    }
    means.row(k) /= static_cast<Scalar>(counts[static_cast<std::size_t>(k)]);
  }
  return means;
}

/// tr(S_B) for the unweighted between-class scatter:
/// (1/K) * sum_k |mu_k - mu|^2 with mu the global mean row.
/// K is taken as max(label) + 1 and every class must be populated.
template <typename Derived>
typename Derived::Scalar scatter_trace(const Eigen::MatrixBase<Derived>& features,
                                       std::span<const int> labels) {
  using Scalar = typename Derived::Scalar;
  if (labels.empty()) throw ArgumentError("scatter_trace: empty label list");
  if (static_cast<Index>(labels.size()) != features.rows()) {
    throw DimensionError("scatter_trace: " + std::to_string(labels.size()) + " labels for " +
                         shape_string(features) + " features");
  }
  int num_classes = 0;
  for (int y : labels) {
    if (y < 0) throw ArgumentError("scatter_trace: negative label");
    num_classes = std::max(num_classes, y + 1);
  }
  const Mat<Scalar> means = class_means(features, labels, num_classes);
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mu = features.colwise().mean();
  return (means.rowwise() - mu).squaredNorm() / static_cast<Scalar>(num_classes);
}

}  // namespace tarif
