// Planted data generators for recovery tests and the `simulate` command.

#ifndef TOPICRESPONSE_SYNTHETIC_HPP
#define TOPICRESPONSE_SYNTHETIC_HPP

#include "topicresponse/common.hpp"
#include "topicresponse/corpus.hpp"
#include "topicresponse/rasch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace topicresponse::synthetic {

inline std::string padded_id(const char* prefix, Index i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05ld", prefix, static_cast<long>(i));
  return buf;
}

// k difficulties evenly spaced on [lo, hi].
inline Vector even_difficulties(Index k, double lo = -2.0, double hi = 2.0) {
  if (k == 1) return Vector::Constant(1, 0.5 * (lo + hi));
  return Vector::LinSpaced(k, lo, hi);
}

struct RaschSample {
  rasch::RaschParams truth;
  rasch::ResponseMatrix responses;
};

// theta ~ N(0,1), beta evenly spaced on [-2,2], Bernoulli responses.
inline RaschSample rasch_sample(Index n, Index k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RaschSample s;
  s.truth.beta = even_difficulties(k);
  s.truth.theta.resize(n);
  for (Index j = 0; j < n; ++j) s.truth.theta(j) = normal(rng);
  s.responses = rasch::simulate(s.truth, rng());
  return s;
}

struct PlantedCorpus {
  corpus::WordStudentMatrix matrix;
  corpus::Vocabulary vocab;
  std::vector<double> grades;  // aligned with matrix columns
  Matrix W;                    // m x k, scaled with V
  Matrix H;                    // k x n, binary
  rasch::RaschParams truth;
};

struct CorpusSpec {
  Index words = 200;
  Index students = 300;
  Index topics = 10;
  double noise = 0.01;
  // Probability that a word also loads (weakly) on a second topic.
  double overlap = 0.1;
  // Tokens drawn per student and active topic. 0 emits the expected matrix
  // W*H* (plus noise); otherwise V is the tf-idf of sampled token counts.
  int tokens_per_topic = 0;
};

// Each active topic of a student emits `tokens` words drawn from that
// topic's column of W; counts are weighted tf * log(n/df).
inline Matrix sampled_tfidf(const Matrix& w, const Matrix& h, int tokens, std::mt19937_64& rng) {
  const Index m = w.rows();
  const Index n = h.cols();
  Matrix counts = Matrix::Zero(m, n);
  std::vector<std::discrete_distribution<Index>> topic_words;
  for (Index t = 0; t < w.cols(); ++t) {
    topic_words.emplace_back(w.col(t).data(), w.col(t).data() + m);
  }
  for (Index j = 0; j < n; ++j) {
    for (Index t = 0; t < h.rows(); ++t) {
      if (h(t, j) <= 0) continue;
      for (int c = 0; c < tokens; ++c) counts(topic_words[static_cast<std::size_t>(t)](rng), j) += 1.0;
    }
  }
  Matrix v = Matrix::Zero(m, n);
  for (Index i = 0; i < m; ++i) {
    const double df = static_cast<double>((counts.row(i).array() > 0).count());
    if (df == 0) continue;
    v.row(i) = counts.row(i) * std::log(static_cast<double>(n) / df);
  }
  return v;
}

// grade_j = 100 * rank(theta_j) / n, H_ideal from the grades, and each
// student's H column switches on H_ideal_j topics chosen by Gumbel-top-k on
// the Rasch logits theta_j - beta_i. Every word belongs to one topic block.
inline PlantedCorpus planted_corpus(const CorpusSpec& spec, std::uint64_t seed) {
  const Index m = spec.words;
  const Index n = spec.students;
  const Index k = spec.topics;
  if (m < k || n < 2 || k < 2) {
    throw std::invalid_argument("planted_corpus: need words >= topics >= 2 and students >= 2");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  PlantedCorpus pc;
  pc.truth.beta = even_difficulties(k);
  pc.truth.theta.resize(n);
  for (Index j = 0; j < n; ++j) pc.truth.theta(j) = normal(rng);

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return pc.truth.theta(a) < pc.truth.theta(b); });
  pc.grades.assign(static_cast<std::size_t>(n), 0.0);
  for (Index r = 0; r < n; ++r) {
    pc.grades[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] =
        100.0 * static_cast<double>(r + 1) / static_cast<double>(n);
  }
  const auto ideal = corpus::build_h_ideal(pc.grades, static_cast<int>(k));

  pc.H = Matrix::Zero(k, n);
  std::vector<std::pair<double, Index>> keys(static_cast<std::size_t>(k));
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < k; ++i) {
      const double u = std::max(unif(rng), 1e-300);
      keys[static_cast<std::size_t>(i)] = {pc.truth.theta(j) - pc.truth.beta(i) - std::log(-std::log(u)), i};
    }
    std::sort(keys.begin(), keys.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (int c = 0; c < ideal.values(j); ++c) pc.H(keys[static_cast<std::size_t>(c)].second, j) = 1.0;
  }

  pc.W = Matrix::Zero(m, k);
  for (Index w = 0; w < m; ++w) {
    const Index owner = w % k;
    pc.W(w, owner) = 0.5 + 0.5 * unif(rng);
    if (unif(rng) < spec.overlap) {
      const Index other = (owner + 1 + static_cast<Index>(unif(rng) * static_cast<double>(k - 1))) % k;
      pc.W(w, other) += 0.3 * unif(rng);
    }
  }

  Matrix v = pc.W * pc.H;
  if (spec.tokens_per_topic > 0) {
    v = sampled_tfidf(pc.W, pc.H, spec.tokens_per_topic, rng);
  } else if (spec.noise > 0) {
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < m; ++i) {
        if (v(i, j) > 0) {
          v(i, j) = std::max(0.0, v(i, j) + spec.noise * normal(rng));
        } else if (unif(rng) < 0.02) {
          v(i, j) = spec.noise * std::abs(normal(rng));
        }
      }
    }
  }
  const double peak = v.maxCoeff();
  if (peak > 0) {
    v /= peak;
    pc.W /= peak;
  }
  pc.matrix.values = v.sparseView();
  pc.matrix.values.makeCompressed();
  for (Index j = 0; j < n; ++j) pc.matrix.student_ids.push_back(padded_id("s", j));
  for (Index w = 0; w < m; ++w) {
    pc.vocab.index.emplace(padded_id("w", w), w);
    pc.vocab.terms.push_back(padded_id("w", w));
  }
  return pc;
}

}  // namespace topicresponse::synthetic

#endif  // TOPICRESPONSE_SYNTHETIC_HPP
