#include "topicresponse/metrics.hpp"
#include "topicresponse/synthetic.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace topicresponse;
using namespace topicresponse::metrics;

namespace {

joint::JointModel random_model(Index m, Index n, int k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  joint::JointModel model;
  model.hyper.k = k;
  model.fact.W = Matrix(m, k);
  model.fact.H = Matrix(k, n);
  for (Index i = 0; i < model.fact.W.size(); ++i) model.fact.W.data()[i] = u(rng);
  for (Index i = 0; i < model.fact.H.size(); ++i) model.fact.H.data()[i] = u(rng);
  model.params.beta = Vector(k);
  model.params.theta = Vector(n);
  for (Index i = 0; i < k; ++i) model.params.beta(i) = normal(rng);
  for (Index j = 0; j < n; ++j) model.params.theta(j) = normal(rng);
  return model;
}

corpus::HIdeal ideal_for(Index n, int k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<double> g(static_cast<std::size_t>(n));
  for (auto& x : g) x = u(rng);
  return corpus::build_h_ideal(g, k);
}

}  // namespace

TEST(MetricSuite, PerfectModel) {
  joint::JointModel m;
  m.fact.W = Matrix::Constant(3, 2, 0.5);
  m.fact.H = Matrix::Zero(2, 3);
  m.fact.H(0, 0) = 1;
  m.fact.H(1, 1) = 1;
  m.fact.H(0, 2) = 1;
  m.params = {Vector::Zero(2), Vector::Zero(3)};
  const Matrix v = m.fact.W * m.fact.H;
  const corpus::HIdeal ideal{Eigen::VectorXi::Ones(3), 2};
  const auto s = metric_suite(m, v, ideal);
  EXPECT_EQ(s.approx_error, 0.0);
  EXPECT_EQ(s.grade_error, 0.0);
  EXPECT_EQ(s.binary_gap, 0.0);
  EXPECT_NEAR(s.neg_log_likelihood, 6 * std::log(2.0), 1e-12);
}

TEST(MetricSuite, HalfHBinaryGap) {
  std::mt19937_64 rng(1);
  auto m = random_model(4, 6, 3, rng);
  m.fact.H.setConstant(0.5);
  const auto s = metric_suite(m, Matrix::Zero(4, 6), ideal_for(6, 3, rng));
  EXPECT_DOUBLE_EQ(s.binary_gap, 3 * 6 * 0.0625);
}

TEST(MetricSuite, AgreesWithObjectiveBreakdown) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 30; ++t) {
    const auto m = random_model(7, 5, 3, rng);
    const auto ideal = ideal_for(5, 3, rng);
    Matrix v(7, 5);
    for (Index i = 0; i < v.size(); ++i) v.data()[i] = std::uniform_real_distribution<double>(0, 1)(rng);
    const auto s = metric_suite(m, v, ideal);
    const auto b = joint::objective(m, v, ideal);
    EXPECT_NEAR(s.approx_error, b.approx, 1e-9);
    EXPECT_NEAR(s.grade_error, b.grade, 1e-9);
    EXPECT_NEAR(s.binary_gap, b.binary, 1e-9);
    EXPECT_NEAR(s.neg_log_likelihood_continuous, b.rasch_negll, 1e-9);
    EXPECT_NEAR(s.neg_log_likelihood,
                -rasch::log_likelihood(m.params, joint::threshold_H(m.fact.H, m.hyper.tau)), 1e-9);
  }
}

TEST(MetricSuite, DimensionMismatch) {
  std::mt19937_64 rng(3);
  const auto m = random_model(4, 5, 3, rng);
  EXPECT_THROW(metric_suite(m, Matrix::Zero(4, 6), ideal_for(6, 3, rng)), DimensionError);
}

TEST(TopicReport, OrderingAndTerms) {
  Matrix w = Matrix::Zero(4, 3);
  w(2, 0) = 1.0;                 // topic 0 owns "c" only
  w(0, 1) = 0.5;
  w(1, 1) = 0.5;                 // tie: "a" before "b"
  w(3, 2) = 0.9;
  w(1, 2) = 0.3;
  const Vector beta = (Vector(3) << 0.2, -1.0, 2.0).finished();
  const std::vector<std::string> terms{"a", "b", "c", "d"};
  const auto r = topic_report(w, beta, terms, 2);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].topic, 1);
  EXPECT_EQ(r[0].terms, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(r[1].terms.front(), "c");
  EXPECT_EQ(r[2].topic, 2);  // hardest last
  EXPECT_EQ(r[2].terms, (std::vector<std::string>{"d", "b"}));
  EXPECT_EQ(r[2].rank, 3);
  EXPECT_THROW(topic_report(w, beta, {"a"}, 2), DimensionError);
}

TEST(TopicReport, InvariantUnderTopicPermutation) {
  std::mt19937_64 rng(4);
  const auto m = random_model(12, 3, 5, rng);
  std::vector<std::string> terms;
  for (int i = 0; i < 12; ++i) terms.push_back("t" + std::to_string(i));
  const auto a = topic_report(m.fact.W, m.params.beta, terms, 4);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 3, 0, 4, 1, 2;
  const Matrix w2 = m.fact.W * perm;
  const Vector b2 = perm.transpose() * m.params.beta;
  const auto b = topic_report(w2, b2, terms, 4);
  for (std::size_t r = 0; r < a.size(); ++r) {
    EXPECT_EQ(a[r].terms, b[r].terms);
    EXPECT_EQ(a[r].difficulty, b[r].difficulty);
  }
}

TEST(TopicReport, PlantedOwnership) {
  synthetic::CorpusSpec spec;
  spec.words = 20;
  spec.students = 30;
  spec.topics = 4;
  spec.overlap = 0.0;
  const auto pc = synthetic::planted_corpus(spec, 2);
  std::vector<std::string> terms = pc.vocab.terms;
  const auto r = topic_report(pc.W, pc.truth.beta, terms, 5);
  for (const auto& row : r) {
    for (const auto& t : row.terms) {
      EXPECT_EQ(pc.vocab.index.at(t) % 4, row.topic) << t;
    }
  }
}

TEST(InfitReport, Flags) {
  rasch::FitStats s;
  s.item_infit = Vector::Ones(5);
  EXPECT_EQ(infit_report(s).flagged, 0);
  s.item_infit(2) = 1.31;
  s.item_infit(3) = 0.7;   // inclusive
  s.item_infit(4) = 1.3;   // inclusive
  const auto r = infit_report(s);
  EXPECT_EQ(r.flagged, 1);
  EXPECT_FALSE(r.in_range[2]);
  Index total = 0;
  for (const auto& b : r.histogram) total += b.count;
  EXPECT_EQ(total, 5);
}

TEST(InfitReport, ModelGeneratedDataFits) {
  const auto s = synthetic::rasch_sample(1000, 10, 5);
  const auto fit = rasch::jml_fit(s.responses, rasch::init_params(s.responses));
  const auto r = infit_report(rasch::fit_statistics(fit.params, s.responses));
  EXPECT_LE(r.flagged, 2);
}

TEST(WrightMap, Histograms) {
  rasch::RaschParams same{synthetic::even_difficulties(5), Vector::Constant(40, 0.3)};
  const auto a = wright_map(same, 0.5);
  int nonzero = 0;
  for (const auto& b : a.abilities) nonzero += b.count > 0;
  EXPECT_EQ(nonzero, 1);

  const auto w = wright_map(same, 1.0);
  Index total = 0;
  int occupied = 0;
  for (const auto& b : w.difficulties) {
    total += b.count;
    occupied += b.count > 0;
  }
  EXPECT_EQ(total, 5);
  EXPECT_GE(occupied, 4);
  EXPECT_LE(occupied, 5);
  EXPECT_EQ(w.abilities.size(), w.difficulties.size());
  for (std::size_t i = 0; i < w.abilities.size(); ++i) {
    EXPECT_EQ(w.abilities[i].start, w.difficulties[i].start);
    EXPECT_DOUBLE_EQ(std::remainder(w.abilities[i].start, 1.0), 0.0);
  }
}

TEST(WrightMap, CountsPartition) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int t = 0; t < 20; ++t) {
    rasch::RaschParams p{Vector(7), Vector(50)};
    for (Index i = 0; i < 7; ++i) p.beta(i) = normal(rng);
    for (Index j = 0; j < 50; ++j) p.theta(j) = normal(rng);
    const auto w = wright_map(p, 0.5);
    Index a = 0, d = 0;
    for (const auto& b : w.abilities) a += b.count;
    for (const auto& b : w.difficulties) d += b.count;
    EXPECT_EQ(a, 50);
    EXPECT_EQ(d, 7);
  }
  EXPECT_THROW(wright_map({Vector::Zero(2), Vector::Zero(2)}, 0.0), std::invalid_argument);
}
