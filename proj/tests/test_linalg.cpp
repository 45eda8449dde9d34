#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "tarif/errors.hpp"
#include "tarif/linalg.hpp"
#include "tarif/matrix_io.hpp"
#include "tarif/parallel.hpp"
#include "tarif/random.hpp"

namespace tarif {
namespace {

Matrix triple_loop(const Matrix& a, const Matrix& b) {
  Matrix c = Matrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j)
      for (Index k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

// Row echelon form with partial pivoting; counts pivots above tol.
Index elimination_rank(Matrix m, double tol = 1e-9) {
  Index rank = 0;
  for (Index col = 0; col < m.cols() && rank < m.rows(); ++col) {
    Index pivot = rank;
    for (Index r = rank + 1; r < m.rows(); ++r)
      if (std::abs(m(r, col)) > std::abs(m(pivot, col))) pivot = r;
    if (std::abs(m(pivot, col)) <= tol) continue;
    m.row(pivot).swap(m.row(rank));
    for (Index r = rank + 1; r < m.rows(); ++r) m.row(r) -= m(r, col) / m(rank, col) * m.row(rank);
    ++rank;
  }
  return rank;
}

double scatter_by_loops(const Matrix& x, const std::vector<int>& y, int k) {
  std::vector<std::vector<double>> sums(static_cast<std::size_t>(k), std::vector<double>(x.cols(), 0.0));
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  std::vector<double> mu(x.cols(), 0.0);
  for (Index i = 0; i < x.rows(); ++i) {
    ++counts[y[i]];
    for (Index j = 0; j < x.cols(); ++j) {
      sums[y[i]][j] += x(i, j);
      mu[j] += x(i, j) / x.rows();
    }
  }
  double total = 0.0;
  for (int c = 0; c < k; ++c)
    for (Index j = 0; j < x.cols(); ++j) {
      const double diff = sums[c][j] / counts[c] - mu[j];
      total += diff * diff;
    }
  return total / k;
}

TEST(Matmul, MatchesTripleLoop) {
  CounterRng rng(1);
  for (int t = 0; t < 10; ++t) {
    const Matrix a = rng.normal_matrix(7, 5), b = rng.normal_matrix(5, 3);
    EXPECT_LT((matmul(a, b) - triple_loop(a, b)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Matmul, Associative) {
  CounterRng rng(2);
  const Matrix a = rng.normal_matrix(6, 4), b = rng.normal_matrix(4, 5), c = rng.normal_matrix(5, 3);
  EXPECT_LT((matmul(matmul(a, b), c) - matmul(a, matmul(b, c))).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Matrix::Zero(2, 3), Matrix::Zero(2, 3)), DimensionError);
}

TEST(Rank, IdentityIsFull) { EXPECT_EQ(numerical_rank(Matrix::Identity(8, 8)).numerical_rank, 8); }

TEST(Rank, OuterProductIsOne) {
  CounterRng rng(3);
  const Matrix u = rng.normal_matrix(8, 1), v = rng.normal_matrix(8, 1);
  EXPECT_EQ(numerical_rank(Matrix(u * v.transpose())).numerical_rank, 1);
}

TEST(Rank, KernelProductMatchesElimination) {
  CounterRng rng(4);
  for (int t = 0; t < 20; ++t) {
    const Matrix q = rng.normal_matrix(8, 2).array().exp().matrix();
    const Matrix k = rng.normal_matrix(8, 2).array().exp().matrix();
    const Matrix m = q * k.transpose();
    EXPECT_EQ(numerical_rank(m).numerical_rank, 2);
    EXPECT_EQ(numerical_rank(m).numerical_rank, elimination_rank(m));
  }
}

TEST(Rank, JacobiAgreesWithEigenSvd) {
  CounterRng rng(5);
  const Matrix m = rng.normal_matrix(12, 9);
  const auto ours = jacobi_singular_values(m);
  const Vector ref = Eigen::JacobiSVD<Matrix>(m).singularValues();
  ASSERT_EQ(ours.size(), static_cast<std::size_t>(ref.size()));
  for (std::size_t i = 0; i < ours.size(); ++i) EXPECT_NEAR(ours[i], ref(static_cast<Index>(i)), 1e-10);
}

TEST(Rank, RankDeficientConverges) {
  CounterRng rng(6);
  const Matrix m = rng.normal_matrix(60, 3) * rng.normal_matrix(3, 60);
  EXPECT_EQ(numerical_rank(m).numerical_rank, 3);
}

TEST(Rank, NeverExceedsMinDimension) {
  CounterRng rng(7);
  const Matrix m = rng.normal_matrix(5, 11);
  EXPECT_LE(numerical_rank(m).numerical_rank, 5);
}

TEST(Rank, RejectsBadTolerance) {
  EXPECT_THROW(numerical_rank(Matrix::Identity(2, 2), 0.0), ArgumentError);
  EXPECT_THROW(numerical_rank(Matrix(0, 0)), ArgumentError);
}

TEST(RowNormalize, HandCase) {
  Matrix m(2, 2);
  m << 2, 2, 1, 3;
  Matrix expected(2, 2);
  expected << 0.5, 0.5, 0.25, 0.75;
  EXPECT_LT((row_normalize(m) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RowNormalize, IdempotentAndStochastic) {
  CounterRng rng(8);
  const Matrix m = rng.uniform_matrix(6, 6, 0.0, 1.0);
  const Matrix once = row_normalize(m);
  EXPECT_LT((once.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_LT((row_normalize(once) - once).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RowNormalize, ZeroRowReportsIndex) {
  Matrix m = Matrix::Ones(3, 2);
  m.row(1).setZero();
  try {
    row_normalize(m);
    FAIL();
  } catch (const DegenerateRowError& e) {
    EXPECT_EQ(e.row(), 1);
  }
}

TEST(Scatter, IdenticalRowsGiveZero) {
  const Matrix x = Matrix::Ones(4, 3);
  EXPECT_EQ(scatter_trace(x, std::vector<int>{0, 1, 0, 1}), 0.0);
}

TEST(Scatter, TwoPointCase) {
  Matrix x(4, 2);
  x << 0, 0, 0, 0, 2, 0, 2, 0;
  EXPECT_DOUBLE_EQ(scatter_trace(x, std::vector<int>{0, 0, 1, 1}), 1.0);
}

TEST(Scatter, MatchesLoopOracleAndIsTranslationInvariant) {
  CounterRng rng(9);
  const Matrix x = rng.normal_matrix(20, 3);
  std::vector<int> y(20);
  for (int i = 0; i < 20; ++i) y[i] = i % 4;
  EXPECT_NEAR(scatter_trace(x, y), scatter_by_loops(x, y, 4), 1e-10);
  const Matrix shifted = x.rowwise() + Eigen::RowVector3d(5.0, -2.0, 1.0);
  EXPECT_NEAR(scatter_trace(shifted, y), scatter_trace(x, y), 1e-10);
}

TEST(Scatter, EmptyClassThrows) {
  EXPECT_THROW(scatter_trace(Matrix::Zero(2, 2), std::vector<int>{0, 2}), ArgumentError);
}

TEST(Random, SplitStreamsAreReproducibleAndDistinct) {
  CounterRng a(42), b(42);
  EXPECT_EQ(a.split(3).next_u64(), b.split(3).next_u64());
  EXPECT_NE(a.split(3).next_u64(), a.split(4).next_u64());
}

TEST(Random, NormalMoments) {
  CounterRng rng(10);
  const Matrix z = rng.normal_matrix(20000, 1);
  EXPECT_NEAR(z.mean(), 0.0, 0.03);
  EXPECT_NEAR((z.array() - z.mean()).square().mean(), 1.0, 0.05);
}

TEST(Parallel, ResultsIndependentOfWorkerCount) {
  std::vector<std::uint64_t> one(64), many(64);
  auto body = [](std::vector<std::uint64_t>& out) {
    return [&out](std::size_t i) { out[i] = CounterRng(7).split(i).next_u64(); };
  };
  parallel_for(64, body(one), 1);
  parallel_for(64, body(many), 4);
  EXPECT_EQ(one, many);
}

TEST(MatrixIo, CsvRoundTripIsExact) {
  CounterRng rng(11);
  const Matrix m = rng.normal_matrix(5, 4);
  std::stringstream ss;
  write_csv(ss, m);
  EXPECT_EQ(read_csv(ss), m);
  EXPECT_EQ(matrix_from_json(to_json(m)), m);
}

}  // namespace
}  // namespace tarif
