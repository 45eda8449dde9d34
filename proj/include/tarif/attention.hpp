#pragma once

// Attention building blocks on plain matrices. The differentiable versions
// used for training live in model.hpp and are checked against these.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/SparseCore>

#include "tarif/autodiff.hpp"
#include "tarif/linalg.hpp"

namespace tarif {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class KernelKind { Sigmoid, Relu };

KernelKind parse_kernel(std::string_view name);
std::string to_string(KernelKind kind);

/// Element-wise non-negative feature map phi.
template <typename Derived>
Mat<typename Derived::Scalar> kernel_map(const Eigen::MatrixBase<Derived>& h, KernelKind kind) {
  using Scalar = typename Derived::Scalar;
  if (kind == KernelKind::Relu) return h.cwiseMax(Scalar(0));
  return h.unaryExpr([](Scalar x) {
    return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-x))
                          : std::exp(x) / (Scalar(1) + std::exp(x));
  });
}

/// Log-power sharpening f(x; p, q) = x * log(1 + x^p)^q for x >= 0.
double sharpen_value(double x, double p, double q);
/// df/dx.
double sharpen_derivative(double x, double p, double q);

/// Element-wise sharpening; throws on negative entries or p, q < 1.
Matrix sharpen(const Matrix& x, double p, double q);

/// phi_q (phi_k^T v), right-associated: O(n d^2), never forms the n x n map.
Matrix linear_attention(const Matrix& phi_q, const Matrix& phi_k, const Matrix& v);

/// softmax(q k^T / sqrt(d_k)) v, computed in row blocks of `block_rows` so the
/// full score matrix is never resident.
Matrix softmax_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                         Index block_rows = 256);

/// Single-head GAT weights: value projection and the two halves of the
/// attention vector a = [a_self ; a_neighbor].
struct GatWeights {
  Matrix weight;        // d_in x d_out
  Matrix att_self;      // d_out x 1
  Matrix att_neighbor;  // d_out x 1
};

struct GatResult {
  Matrix features;       // n x d_out
  SparseMatrix attention;  // row-stochastic, self-loops included
};

/// GAT aggregation over `nbrs` (which must contain self-loops).
GatResult gat_branch(const ad::Neighborhoods& nbrs, const Matrix& v, const GatWeights& w,
                     double slope = 0.2);

/// CSR weights (as produced by edge_softmax_aggregate) to a sparse matrix.
SparseMatrix to_sparse(const ad::Neighborhoods& nbrs, const std::vector<double>& weights);

}  // namespace tarif
