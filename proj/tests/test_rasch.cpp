#include "topicresponse/rasch.hpp"
#include "topicresponse/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace topicresponse;
using namespace topicresponse::rasch;

namespace {

RaschParams random_params(Index k, Index n, std::mt19937_64& rng, double sd = 1.5) {
  std::normal_distribution<double> normal(0.0, sd);
  RaschParams p{Vector(k), Vector(n)};
  for (Index i = 0; i < k; ++i) p.beta(i) = normal(rng);
  for (Index j = 0; j < n; ++j) p.theta(j) = normal(rng);
  return p;
}

Matrix random_binary(Index k, Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix x(k, n);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng) < 0.5 ? 1.0 : 0.0;
  return x;
}

}  // namespace

TEST(Icc, KnownValues) {
  EXPECT_DOUBLE_EQ(icc_probability(0.0, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(icc_probability(3.7, 3.7), 0.5);
  // 1 / (1 + e^-1) evaluated to 30 digits with mpmath.
  EXPECT_NEAR(icc_probability(1.0, 0.0), 0.7310585786300048792511592418, 1e-15);
  EXPECT_NEAR(icc_probability(0.0, 1.0), 0.2689414213699951207488407582, 1e-15);
}

TEST(Icc, SymmetryAndMonotonicity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int t = 0; t < 1000; ++t) {
    const double a = u(rng);
    const double b = u(rng);
    EXPECT_NEAR(icc_probability(a, b) + icc_probability(b, a), 1.0, 1e-15);
    EXPECT_GE(icc_probability(a + 0.1, b), icc_probability(a, b));
    EXPECT_LE(icc_probability(a, b + 0.1), icc_probability(a, b));
  }
  EXPECT_GT(icc_probability(-800.0, 0.0), -1e-300);
  EXPECT_LE(icc_probability(800.0, 0.0), 1.0);
  EXPECT_TRUE(std::isfinite(icc_probability(800.0, -800.0)));
}

TEST(LogLikelihood, SingleCell) {
  RaschParams p{Vector::Constant(1, 0.3), Vector::Constant(1, 0.3)};
  EXPECT_NEAR(log_likelihood(p, Matrix::Ones(1, 1)), std::log(0.5), 1e-15);
}

TEST(LogLikelihood, MatchesBruteForceProduct) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const auto p = random_params(2, 2, rng);
    const Matrix x = random_binary(2, 2, rng);
    double product = 1.0;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const double e = std::exp(p.theta(j) - p.beta(i));
        const double prob = e / (1.0 + e);
        product *= x(i, j) == 1.0 ? prob : 1.0 - prob;
      }
    }
    EXPECT_NEAR(log_likelihood(p, x), std::log(product), 1e-12);
  }
}

TEST(LogLikelihood, AllZeroLimitAndTranslationInvariance) {
  RaschParams p{Vector::Constant(3, 40.0), Vector::Constant(4, -40.0)};
  const double ll = log_likelihood(p, Matrix::Zero(3, 4));
  EXPECT_LT(ll, 0.0);
  EXPECT_GT(ll, -1e-30);

  std::mt19937_64 rng(5);
  auto q = random_params(4, 6, rng);
  const Matrix x = random_binary(4, 6, rng);
  const double before = log_likelihood(q, x);
  q.beta.array() += 2.5;
  q.theta.array() += 2.5;
  EXPECT_NEAR(log_likelihood(q, x), before, 1e-12);
}

TEST(LogLikelihood, DimensionMismatchThrows) {
  RaschParams p{Vector::Zero(2), Vector::Zero(3)};
  EXPECT_THROW(log_likelihood(p, Matrix::Zero(3, 2)), DimensionError);
}

TEST(InitParams, ToyMatrixConsistentEntries) {
  // Person 1 answers 1 of 5 items, item 1 is answered by 4 of 5 persons.
  Matrix persons(5, 5);
  persons << 1, 0, 0, 0, 0,
             1, 1, 0, 0, 0,
             0, 1, 1, 0, 0,
             1, 0, 1, 1, 0,
             1, 1, 1, 0, 1;
  const auto p = init_params(persons.transpose());
  EXPECT_NEAR(p.theta(0), -1.39, 0.01);
  EXPECT_NEAR(p.theta(4), 1.39, 0.01);
  EXPECT_NEAR(p.beta(0), -1.39, 0.01);
  EXPECT_NEAR(p.beta(3), 1.39, 0.01);
  // Remaining entries follow the same log-odds of their own proportions.
  EXPECT_NEAR(p.theta(1), std::log(0.4 / 0.6), 1e-12);
  EXPECT_NEAR(p.beta(1), std::log(0.4 / 0.6), 1e-12);
}

TEST(InitParams, PseudoCounts) {
  Matrix x = Matrix::Zero(5, 3);
  x.col(0).setOnes();   // all five correct
  x(0, 1) = 1.0;        // item 0 answered by everyone below
  x(0, 2) = 1.0;
  const auto p = init_params(x, 1.0);
  EXPECT_NEAR(p.theta(0), std::log(4.0), 1e-12);                 // r = 4
  EXPECT_NEAR(p.beta(0), std::log((1 - 2.0 / 3) / (2.0 / 3)), 1e-12);  // s = 3 -> 2
  EXPECT_NEAR(p.beta(4), std::log((1 - 1.0 / 3) / (1.0 / 3)), 1e-12);  // s = 1
  Matrix zero = Matrix::Zero(4, 4);
  const auto z = init_params(zero, 1.0);
  EXPECT_NEAR(z.theta(0), std::log(0.25 / 0.75), 1e-12);
  EXPECT_NEAR(z.beta(0), std::log(0.75 / 0.25), 1e-12);
}

TEST(InitParams, RejectsBadInputs) {
  EXPECT_THROW(init_params(Matrix::Zero(1, 5)), DimensionError);
  EXPECT_THROW(init_params(Matrix::Zero(4, 4), 0.0), std::invalid_argument);
  EXPECT_THROW(init_params(Matrix::Zero(4, 4), 2.5), std::invalid_argument);
  EXPECT_NO_THROW(init_params(Matrix::Zero(2, 4), 1.0));
}

TEST(Newton, HandCaseOneBetaStep) {
  Matrix x(2, 2);
  x << 1, 0,
       1, 1;
  RaschParams p{Vector::Zero(2), Vector::Zero(2)};
  newton_step_beta(x, p, 20, kLogitCap);
  // Item 0: sum(p - x) = 0, unchanged. Item 1: (1 - 2) / 0.5 = -2.
  EXPECT_DOUBLE_EQ(p.beta(0), 0.0);
  EXPECT_DOUBLE_EQ(p.beta(1), -2.0);
}

TEST(Newton, HandCaseOneThetaStep) {
  Matrix x(2, 2);
  x << 1, 0,
       1, 0;
  RaschParams p{Vector::Zero(2), Vector::Constant(2, 0.0)};
  newton_step_theta(x, p, 20, kLogitCap);
  // Person 0: (2 - 1) / 0.5 = 2 ; person 1: (0 - 1) / 0.5 = -2.
  EXPECT_DOUBLE_EQ(p.theta(0), 2.0);
  EXPECT_DOUBLE_EQ(p.theta(1), -2.0);
}

TEST(Newton, ExpectationIsStationary) {
  std::mt19937_64 rng(2);
  auto p = random_params(5, 7, rng, 0.8);
  const Matrix x = probabilities(p);
  const auto r = jml_fit(x, p);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 2);  // one recentering step, then no movement
  EXPECT_LT((r.params.beta - p.beta).cwiseAbs().maxCoeff(), 1e-9 + std::abs(p.beta.mean()));
  center(p);
  EXPECT_LT((r.params.beta - p.beta).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((r.params.theta - p.theta).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Newton, AcceptedStepsNeverDecreaseLikelihood) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    const auto truth = random_params(6, 12, rng);
    const Matrix x = simulate(truth, rng());
    RaschParams p = init_params(x);
    const Matrix adj = adjust_extremes(x, 1.0);
    double previous = log_likelihood(p, adj);
    for (int s = 0; s < 10; ++s) {
      newton_step_beta(adj, p, 20, kLogitCap);
      const double mid = log_likelihood(p, adj);
      EXPECT_GE(mid, previous - 1e-12);
      newton_step_theta(adj, p, 20, kLogitCap);
      const double after = log_likelihood(p, adj);
      EXPECT_GE(after, mid - 1e-12);
      center(p);
      EXPECT_NEAR(log_likelihood(p, adj), after, 1e-9);
      previous = log_likelihood(p, adj);
    }
  }
}

TEST(Jml, TraceIsMonotoneAndCentered) {
  const auto s = synthetic::rasch_sample(300, 12, 4);
  const auto r = jml_fit(s.responses, init_params(s.responses));
  ASSERT_TRUE(r.converged);
  for (std::size_t t = 1; t < r.trace.size(); ++t) {
    EXPECT_GE(r.trace[t].log_likelihood, r.trace[t - 1].log_likelihood - 1e-9);
  }
  EXPECT_NEAR(r.params.beta.mean(), 0.0, 1e-12);
  EXPECT_LE(r.params.theta.cwiseAbs().maxCoeff(), kLogitCap);
}

TEST(Jml, RecoversDifficultiesAndOrdering) {
  const auto s = synthetic::rasch_sample(500, 20, 1);
  const auto r = jml_fit(s.responses, init_params(s.responses));
  const Vector b = r.params.beta.array() - r.params.beta.mean();
  const Vector t = s.truth.beta.array() - s.truth.beta.mean();
  EXPECT_GT(b.dot(t) / std::sqrt(b.squaredNorm() * t.squaredNorm()), 0.95);
  for (Index i = 1; i < 20; ++i) EXPECT_LT(r.params.beta(i - 1), r.params.beta(i) + 0.35);
}

TEST(Jml, ExtremeScoresStayFinite) {
  Matrix x(4, 4);
  x << 1, 1, 0, 0,
       1, 0, 1, 0,
       1, 1, 0, 0,
       1, 0, 0, 0;
  const auto r = jml_fit(x, init_params(x));
  // Person 0 answered everything, person 3 nothing: fit at scores k - 1 and 1.
  EXPECT_LT(r.params.theta(0), kLogitCap);
  EXPECT_GT(r.params.theta(3), -kLogitCap);
  EXPECT_GT(r.params.theta(0), r.params.theta(1));
  EXPECT_GT(r.params.theta(1), r.params.theta(2));
  EXPECT_NEAR(r.params.theta(3), r.params.theta(2), 1e-9);  // both score 1

  JmlOptions raw;
  raw.extreme_epsilon = 0.0;
  const auto capped = jml_fit(x, init_params(x), raw);
  EXPECT_GT(capped.params.theta(0), r.params.theta(0));
  EXPECT_LE(capped.params.theta.cwiseAbs().maxCoeff(), kLogitCap);
}

TEST(Jml, AdjustExtremes) {
  Matrix x(2, 3);
  x << 1, 0, 1,
       1, 0, 0;
  const Matrix a = adjust_extremes(x, 1.0);
  EXPECT_DOUBLE_EQ(a(0, 0), 0.5);  // column of ones rescaled to sum k - 1 = 1
  EXPECT_DOUBLE_EQ(a(0, 1), 0.5);  // column of zeros set to epsilon / k
  EXPECT_DOUBLE_EQ(a(0, 2), 1.0);
  EXPECT_EQ(adjust_extremes(x, 0.0), x);
}

TEST(FitStatistics, MatchesLoopOracle) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 50; ++t) {
    const auto p = random_params(10, 10, rng);
    const Matrix x = random_binary(10, 10, rng);
    const auto s = fit_statistics(p, x);
    for (Index i = 0; i < 10; ++i) {
      double r2 = 0, v = 0, z2 = 0;
      for (Index j = 0; j < 10; ++j) {
        const double e = 1.0 / (1.0 + std::exp(p.beta(i) - p.theta(j)));
        r2 += (x(i, j) - e) * (x(i, j) - e);
        v += e * (1 - e);
        z2 += (x(i, j) - e) * (x(i, j) - e) / (e * (1 - e));
      }
      EXPECT_NEAR(s.item_infit(i), r2 / v, 1e-12);
      EXPECT_NEAR(s.item_outfit(i), z2 / 10, 1e-12);
    }
    EXPECT_EQ(s.excluded_cells, 0);
  }
}

TEST(FitStatistics, UniformVarianceAndPerfectFit) {
  RaschParams same{Vector::Zero(3), Vector::Zero(4)};
  std::mt19937_64 rng(1);
  const Matrix x = random_binary(3, 4, rng);
  const auto s = fit_statistics(same, x);
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(s.item_infit(i), s.item_outfit(i), 1e-15);

  const auto p = random_params(4, 5, rng);
  const auto perfect = fit_statistics(p, probabilities(p));
  EXPECT_LT(perfect.item_infit.cwiseAbs().maxCoeff(), 1e-24);
  EXPECT_LT(perfect.item_outfit.cwiseAbs().maxCoeff(), 1e-24);
  EXPECT_LT(perfect.person_infit.cwiseAbs().maxCoeff(), 1e-24);
}

TEST(FitStatistics, DegenerateCellsExcluded) {
  RaschParams p{Vector::Constant(2, -400.0), Vector::Zero(2)};
  p.beta(1) = 0.0;
  const auto s = fit_statistics(p, Matrix::Ones(2, 2));
  EXPECT_EQ(s.excluded_cells, 2);
  EXPECT_TRUE(std::isfinite(s.item_infit(0)));
  EXPECT_TRUE(std::isfinite(s.item_outfit(1)));
}

TEST(Simulate, SaturationMonteCarloDeterminism) {
  RaschParams hi{Vector::Constant(5, -5.0), Vector::Constant(20, 5.0)};
  EXPECT_EQ(simulate(hi, 1).sum(), 100.0);

  RaschParams half{Vector::Zero(1), Vector::Zero(100000)};
  EXPECT_NEAR(simulate(half, 9).mean(), 0.5, 0.01);

  std::mt19937_64 rng(4);
  const auto p = random_params(6, 8, rng);
  EXPECT_EQ(simulate(p, 77), simulate(p, 77));
  EXPECT_NE(simulate(p, 77), simulate(p, 78));
}
