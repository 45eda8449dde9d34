#include "tarif/attention.hpp"

#include <cmath>

namespace tarif {

KernelKind parse_kernel(std::string_view name) {
  if (name == "sigmoid") return KernelKind::Sigmoid;
  if (name == "relu") return KernelKind::Relu;
  throw ArgumentError("unknown kernel '" + std::string(name) + "' (expected sigmoid or relu)");
}

std::string to_string(KernelKind kind) { return kind == KernelKind::Relu ? "relu" : "sigmoid"; }

namespace {

double log1p_pow(double x, double p) {
  if (x <= 1.0) return std::log1p(std::pow(x, p));
  return p * std::log(x) + std::log1p(std::pow(x, -p));
}

}  // namespace

double sharpen_value(double x, double p, double q) {
  if (x == 0.0) return 0.0;
  return x * std::pow(log1p_pow(x, p), q);
}

double sharpen_derivative(double x, double p, double q) {
  if (x == 0.0) return 0.0;
  const double L = log1p_pow(x, p);
  const double ratio = x <= 1.0 ? std::pow(x, p) / (1.0 + std::pow(x, p)) : 1.0 / (1.0 + std::pow(x, -p));
  return std::pow(L, q) + q * std::pow(L, q - 1.0) * p * ratio;
}

Matrix sharpen(const Matrix& x, double p, double q) {
  if (!(p >= 1.0 && q >= 1.0)) throw ArgumentError("sharpen: exponents must satisfy p, q >= 1");
  if ((x.array() < 0.0).any()) {
    throw ArgumentError("sharpen: negative input; apply the kernel map first");
  }
  return x.unaryExpr([=](double v) { return sharpen_value(v, p, q); });
}

Matrix linear_attention(const Matrix& phi_q, const Matrix& phi_k, const Matrix& v) {
  if (phi_q.rows() != phi_k.rows() || phi_k.rows() != v.rows() || phi_q.cols() != phi_k.cols()) {
    throw DimensionError("linear_attention: incompatible shapes q" + shape_string(phi_q) + " k" +
                         shape_string(phi_k) + " v" + shape_string(v));
  }
  const Matrix kv = phi_k.transpose() * v;  // d x d_v
  return phi_q * kv;
}

Matrix softmax_attention(const Matrix& q, const Matrix& k, const Matrix& v, Index block_rows) {
  if (q.rows() != k.rows() || k.rows() != v.rows() || q.cols() != k.cols()) {
    throw DimensionError("softmax_attention: incompatible shapes q" + shape_string(q) + " k" +
                         shape_string(k) + " v" + shape_string(v));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  const Index n = q.rows();
  Matrix out(n, v.cols());
  block_rows = std::max<Index>(1, block_rows);
  for (Index start = 0; start < n; start += block_rows) {
    const Index rows = std::min(block_rows, n - start);
    Matrix scores = (q.middleRows(start, rows) * k.transpose()) * scale;
    for (Index i = 0; i < rows; ++i) {
      const double m = scores.row(i).maxCoeff();
      scores.row(i) = (scores.row(i).array() - m).exp();
      scores.row(i) /= scores.row(i).sum();
    }
    out.middleRows(start, rows) = scores * v;
  }
  return out;
}

SparseMatrix to_sparse(const ad::Neighborhoods& nbrs, const std::vector<double>& weights) {
  const Index n = nbrs.num_nodes();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(weights.size());
  for (Index i = 0; i < n; ++i) {
    for (Index k = nbrs.offsets[static_cast<std::size_t>(i)];
         k < nbrs.offsets[static_cast<std::size_t>(i) + 1]; ++k) {
      triplets.emplace_back(i, nbrs.targets[static_cast<std::size_t>(k)],
                            weights[static_cast<std::size_t>(k)]);
    }
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

GatResult gat_branch(const ad::Neighborhoods& nbrs, const Matrix& v, const GatWeights& w,
                     double slope) {
  if (v.rows() != nbrs.num_nodes()) {
    throw DimensionError("gat_branch: values " + shape_string(v) + " for " +
                         std::to_string(nbrs.num_nodes()) + " nodes");
  }
  const Matrix h = tarif::matmul(v, w.weight);
  const Matrix self_score = tarif::matmul(h, w.att_self);
  const Matrix nbr_score = tarif::matmul(h, w.att_neighbor);
  const Index n = h.rows();

  std::vector<double> weights(nbrs.targets.size());
  Matrix out = Matrix::Zero(n, h.cols());
  for (Index i = 0; i < n; ++i) {
    const auto b = static_cast<std::size_t>(nbrs.offsets[static_cast<std::size_t>(i)]);
    const auto e = static_cast<std::size_t>(nbrs.offsets[static_cast<std::size_t>(i) + 1]);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = b; k < e; ++k) {
      const double z = self_score(i, 0) + nbr_score(nbrs.targets[k], 0);
      weights[k] = z > 0.0 ? z : slope * z;
      mx = std::max(mx, weights[k]);
    }
    double total = 0.0;
    for (std::size_t k = b; k < e; ++k) {
      weights[k] = std::exp(weights[k] - mx);
      total += weights[k];
    }
    for (std::size_t k = b; k < e; ++k) {
      weights[k] /= total;
      out.row(i) += weights[k] * h.row(nbrs.targets[k]);
    }
  }
  return {std::move(out), to_sparse(nbrs, weights)};
}

}  // namespace tarif
