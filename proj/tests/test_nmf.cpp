#include "topicresponse/nmf.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace topicresponse;
using namespace topicresponse::nmf;

namespace {

Matrix random_nonneg(Index m, Index n, std::mt19937_64& rng, double density = 1.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix v(m, n);
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = u(rng) < density ? u(rng) : 0.0;
  return v;
}

}  // namespace

TEST(Frobenius, Examples) {
  Matrix a(1, 2), b(1, 2);
  a << 3, 0;
  b << 0, 4;
  EXPECT_DOUBLE_EQ(frobenius_sq(a, b), 25.0);
  EXPECT_DOUBLE_EQ(frobenius_sq(a, a), 0.0);
  EXPECT_THROW(frobenius_sq(a, Matrix::Zero(2, 1)), DimensionError);

  std::mt19937_64 rng(1);
  const Matrix x = random_nonneg(5, 5, rng);
  const Matrix y = random_nonneg(5, 5, rng);
  double loop = 0.0;
  for (Index i = 0; i < 5; ++i) {
    for (Index j = 0; j < 5; ++j) loop += (x(i, j) - y(i, j)) * (x(i, j) - y(i, j));
  }
  EXPECT_NEAR(frobenius_sq(x, y), loop, 1e-14);
}

TEST(Fit, TraceMonotoneAndNonNegative) {
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const Matrix v = random_nonneg(30, 20, rng, 0.3);
    const auto r = nmf_fit(v, 4, static_cast<std::uint64_t>(seed));
    for (std::size_t t = 1; t < r.trace.size(); ++t) EXPECT_LE(r.trace[t], r.trace[t - 1] + 1e-9);
    EXPECT_GE(r.fact.W.minCoeff(), 0.0);
    EXPECT_GE(r.fact.H.minCoeff(), 0.0);
  }
}

TEST(Fit, SparseAndDenseInputsAgree) {
  std::mt19937_64 rng(3);
  const Matrix v = random_nonneg(25, 15, rng, 0.3);
  const SparseMatrix sv = v.sparseView();
  const auto dense = nmf_fit(v, 3, 5);
  const auto sparse = nmf_fit(sv, 3, 5);
  EXPECT_LT((dense.fact.W - sparse.fact.W).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(dense.iterations, sparse.iterations);
}

TEST(Fit, RankOneRecovery) {
  std::mt19937_64 rng(9);
  const Matrix w = random_nonneg(40, 1, rng).array() + 0.1;
  const Matrix h = random_nonneg(1, 30, rng).array() + 0.1;
  const Matrix v = w * h;
  NmfOptions opts;
  opts.max_iter = 2000;
  opts.tol = 0.0;
  const auto r = nmf_fit(v, 1, 2, opts);
  EXPECT_LT(std::sqrt(reconstruction_error(v, r.fact)) / v.norm(), 1e-3);
}

TEST(Fit, SingleColumnGivesProportionalW) {
  Matrix v = Matrix::Zero(6, 4);
  v.col(2) << 1, 2, 0, 3, 0.5, 4;
  const auto r = nmf_fit(v, 1, 1, NmfOptions{3000, 0.0});
  const Vector w = r.fact.W.col(0);
  const double scale = v.col(2).dot(w) / w.squaredNorm();
  EXPECT_LT((scale * w - v.col(2)).norm() / v.col(2).norm(), 1e-3);
}

TEST(Fit, DeterministicGivenSeed) {
  std::mt19937_64 rng(2);
  const Matrix v = random_nonneg(20, 10, rng);
  const auto a = nmf_fit(v, 3, 42);
  const auto b = nmf_fit(v, 3, 42);
  EXPECT_EQ(a.fact.W, b.fact.W);
  EXPECT_EQ(a.fact.H, b.fact.H);
  EXPECT_EQ(a.trace, b.trace);
}

TEST(Fit, StopsOnTolerance) {
  std::mt19937_64 rng(2);
  const Matrix v = random_nonneg(20, 10, rng);
  const auto r = nmf_fit(v, 3, 1, NmfOptions{5000, 1e-4});
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.iterations, 5000);
}

TEST(Normalize, RowMaxBecomesOne) {
  Factorization f{Matrix::Ones(3, 2), Matrix::Zero(2, 3)};
  f.H << 1, 4, 2,
         0, 0, 0;
  const auto g = normalize(f);
  EXPECT_DOUBLE_EQ(g.H(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(g.H(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(g.W(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(g.W(0, 1), 1.0);  // zero row left unscaled
  EXPECT_EQ(g.H.row(1), f.H.row(1));
}

TEST(Normalize, PreservesProductAndIsIdempotent) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    Factorization f{random_nonneg(8, 3, rng) * 3.0, random_nonneg(3, 6, rng) * 7.0};
    const auto g = normalize(f);
    EXPECT_LT((f.W * f.H - g.W * g.H).cwiseAbs().maxCoeff(), 1e-12);
    for (Index i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(g.H.row(i).maxCoeff(), 1.0);
    const auto h = normalize(g);
    EXPECT_EQ(h.H, g.H);
    EXPECT_EQ(h.W, g.W);
  }
}
