// Joint NMF + Rasch estimation.
//
// Objective (all norms squared Frobenius):
//
//   f(W,H,theta,beta) = |V - WH|^2 - l0 * loglik_R(H, theta, beta) + l1 |W|^2
//                       + l2 |1_r H - H_ideal|^2 + l3 |H o H - H|^2
//
// where loglik_R is the Rasch log-likelihood with h_ij standing in for the
// response x_ij and 1_r is the 1 x k ones row (so 1_r H holds the column sums
// of H). W and H take multiplicative steps derived from the KKT conditions;
// theta and beta take damped Newton steps on loglik_R.
//
// The grade-guided baseline (GG-NMF) runs the same W/H iteration without the
// Rasch coupling and estimates Rasch parameters afterwards on thresholded H.

#ifndef TOPICRESPONSE_TOPIC_RESPONSE_HPP
#define TOPICRESPONSE_TOPIC_RESPONSE_HPP

#include "topicresponse/common.hpp"
#include "topicresponse/corpus.hpp"
#include "topicresponse/nmf.hpp"
#include "topicresponse/rasch.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace topicresponse::joint {

using corpus::HIdeal;
using nmf::Factorization;
using rasch::RaschParams;

enum class Block { W, H, Rasch };

struct Hyperparams {
  double lambda0 = 0.1;  // Rasch log-likelihood
  double lambda1 = 0.1;  // |W|^2
  double lambda2 = 1.0;  // grade guidance
  double lambda3 = 1.0;  // binary H
  int k = 10;
  int max_iter = 500;
  double tol = 1e-6;  // relative change of the total objective
  int init_iter = 200;  // plain NMF iterations used for initialization
  double tau = 0.5;     // threshold used for init counts and reporting
  double epsilon = 1.0;  // Rasch pseudo-count
  // Upper bound on h_ij. The Rasch term is linear in h and unbounded below
  // once h > 1, so responses are kept in [0, h_max]; infinity disables it.
  double h_max = 1.0;
  std::array<Block, 3> order{Block::W, Block::H, Block::Rasch};

  void validate() const {
    if (!(lambda0 > 0 && lambda1 > 0 && lambda2 > 0 && lambda3 > 0)) {
      throw std::invalid_argument("hyperparameters: every lambda must be > 0");
    }
    if (k < 2) throw std::invalid_argument("hyperparameters: k must be >= 2");
    if (max_iter < 0 || init_iter < 0) {
      throw std::invalid_argument("hyperparameters: iteration budgets must be >= 0");
    }
    if (!(tau > 0 && tau <= 1)) throw std::invalid_argument("hyperparameters: tau must be in (0,1]");
    if (!(h_max > 0)) throw std::invalid_argument("hyperparameters: h_max must be > 0");
  }
};

struct JointModel {
  Factorization fact;
  RaschParams params;
  Hyperparams hyper;
};

struct ObjectiveBreakdown {
  double total = 0.0;
  double approx = 0.0;       // |V - WH|^2
  double rasch_negll = 0.0;  // -loglik_R(H, theta, beta)
  double w_reg = 0.0;        // |W|^2
  double grade = 0.0;        // |1_r H - H_ideal|^2
  double binary = 0.0;       // |H o H - H|^2
};

struct TraceEntry {
  ObjectiveBreakdown objective;
  double max_delta_w = 0.0;
  double max_delta_h = 0.0;
  double max_delta_rasch = 0.0;
};

using IterationTrace = std::vector<TraceEntry>;

struct FitResult {
  JointModel model;
  IterationTrace trace;  // entry 0 is the initialized state
  int iterations = 0;
  bool converged = false;
  // GG-NMF only: the post-hoc Rasch estimation on thresholded H.
  std::optional<rasch::JmlResult> rasch_phase;
};

inline void check_dims(const Factorization& f, Index m, Index n, const HIdeal& h_ideal) {
  if (f.W.rows() != m || f.H.cols() != n || f.W.cols() != f.H.rows()) {
    throw DimensionError("factorization does not match a " + std::to_string(m) + "x" +
                         std::to_string(n) + " matrix");
  }
  if (h_ideal.values.size() != n) {
    throw DimensionError("H_ideal has " + std::to_string(h_ideal.values.size()) +
                         " entries, expected " + std::to_string(n));
  }
  if (h_ideal.k != f.H.rows()) {
    throw DimensionError("H_ideal was built for k=" + std::to_string(h_ideal.k) +
                         " but the model has k=" + std::to_string(f.H.rows()));
  }
}

// 0/1 matrix with entry 1 iff h_ij >= tau.
inline rasch::ResponseMatrix threshold_H(const Matrix& h, double tau = 0.5) {
  return (h.array() >= tau).cast<double>().matrix();
}

inline double grade_error(const Matrix& h, const HIdeal& h_ideal) {
  const Eigen::RowVectorXd diff = h.colwise().sum() - h_ideal.values.cast<double>().transpose();
  return diff.squaredNorm();
}

inline double binary_gap(const Matrix& h) {
  return (h.array().square() - h.array()).square().sum();
}

template <typename MatrixType>
ObjectiveBreakdown objective(const JointModel& model, const MatrixType& v, const HIdeal& h_ideal,
                             bool include_rasch = true) {
  const auto& f = model.fact;
  check_dims(f, v.rows(), v.cols(), h_ideal);
  const Hyperparams& hp = model.hyper;
  ObjectiveBreakdown b;
  b.approx = nmf::reconstruction_error(v, f);
  b.w_reg = f.W.squaredNorm();
  b.grade = grade_error(f.H, h_ideal);
  b.binary = binary_gap(f.H);
  if (include_rasch) {
    b.rasch_negll = -rasch::log_likelihood(model.params, f.H);
  }
  b.total = b.approx + hp.lambda0 * b.rasch_negll + hp.lambda1 * b.w_reg + hp.lambda2 * b.grade +
            hp.lambda3 * b.binary;
  return b;
}

// w_ij <- w_ij (V H^T)_ij / (W H H^T + l1 W)_ij
template <typename MatrixType>
Matrix update_W(const JointModel& model, const MatrixType& v) {
  const auto& f = model.fact;
  const Matrix numer = v * f.H.transpose();
  Matrix denom = f.W * (f.H * f.H.transpose());
  denom += model.hyper.lambda1 * f.W;
  return (f.W.array() * numer.array() / denom.array().max(kDenominatorFloor)).matrix();
}

// h_ij <- h_ij * num_ij / den_ij with
//   num = 2 W^T V + 8 l3 h^3 + 6 l3 h^2 + 2 l2 1_r^T H_ideal + l0 (theta - beta)^+
//   den = 2 W^T W H + 12 l3 h^3 + 2 l2 1_r^T 1_r H + 2 l3 h + l0 (theta - beta)^-
// den - num is the gradient of f with respect to H. The result is clipped to
// h_max.
// `rasch_weight` overrides l0 (GG-NMF passes 0).
template <typename MatrixType>
Matrix update_H(const JointModel& model, const MatrixType& v, const HIdeal& h_ideal,
                std::optional<double> rasch_weight = std::nullopt) {
  const auto& f = model.fact;
  const auto& hp = model.hyper;
  const double l0 = rasch_weight.value_or(hp.lambda0);
  const Index k = f.H.rows();
  const Index n = f.H.cols();

  const Matrix wtv = f.W.transpose() * v;
  const Matrix wtwh = (f.W.transpose() * f.W) * f.H;
  const Eigen::RowVectorXd col_sums = f.H.colwise().sum();

  Matrix out(k, n);
  for (Index j = 0; j < n; ++j) {
    const double ideal = static_cast<double>(h_ideal.values(j));
    for (Index i = 0; i < k; ++i) {
      const double h = f.H(i, j);
      const double h2 = h * h;
      const double h3 = h2 * h;
      double num = 2.0 * wtv(i, j) + 8.0 * hp.lambda3 * h3 + 6.0 * hp.lambda3 * h2 +
                   2.0 * hp.lambda2 * ideal;
      double den = 2.0 * wtwh(i, j) + 12.0 * hp.lambda3 * h3 + 2.0 * hp.lambda2 * col_sums(j) +
                   2.0 * hp.lambda3 * h;
      if (l0 != 0.0) {
        const double d = model.params.theta(j) - model.params.beta(i);
        if (d > 0) {
          num += l0 * d;
        } else {
          den -= l0 * d;
        }
      }
      out(i, j) = std::min(h * num / std::max(den, kDenominatorFloor), hp.h_max);
    }
  }
  return out;
}

// One damped Newton step on every beta_i then every theta_j with H as the
// response matrix, then recentering to mean(beta) = 0.
inline RaschParams update_rasch(const JointModel& model, int max_halvings = 20,
                                double cap = rasch::kLogitCap) {
  RaschParams p = model.params;
  rasch::newton_step_beta(model.fact.H, p, max_halvings, cap);
  rasch::newton_step_theta(model.fact.H, p, max_halvings, cap);
  rasch::center(p);
  return p;
}

namespace detail {

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

inline double max_abs_diff(const RaschParams& a, const RaschParams& b) {
  double d = 0.0;
  if (a.beta.size() > 0) d = std::max(d, (a.beta - b.beta).cwiseAbs().maxCoeff());
  if (a.theta.size() > 0) d = std::max(d, (a.theta - b.theta).cwiseAbs().maxCoeff());
  return d;
}

template <typename MatrixType>
JointModel initialize(const MatrixType& v, const Hyperparams& hyper, std::uint64_t seed) {
  nmf::NmfOptions opts;
  opts.max_iter = hyper.init_iter;
  opts.tol = hyper.tol;
  JointModel model;
  model.hyper = hyper;
  model.fact = nmf::normalize(nmf::nmf_fit(v, hyper.k, seed, opts).fact);
  model.params = rasch::init_params(threshold_H(model.fact.H, hyper.tau), hyper.epsilon);
  return model;
}

template <typename MatrixType>
FitResult iterate(JointModel model, const MatrixType& v, const HIdeal& h_ideal, bool coupled) {
  const Hyperparams& hp = model.hyper;
  FitResult result;
  result.trace.push_back({objective(model, v, h_ideal, coupled)});
  double previous = result.trace.back().objective.total;
  for (int it = 0; it < hp.max_iter; ++it) {
    TraceEntry entry;
    for (const Block block : hp.order) {
      switch (block) {
        case Block::W: {
          Matrix w = update_W(model, v);
          entry.max_delta_w = max_abs_diff(w, model.fact.W);
          model.fact.W = std::move(w);
          break;
        }
        case Block::H: {
          Matrix h = coupled ? update_H(model, v, h_ideal) : update_H(model, v, h_ideal, 0.0);
          entry.max_delta_h = max_abs_diff(h, model.fact.H);
          model.fact.H = std::move(h);
          break;
        }
        case Block::Rasch: {
          if (!coupled) break;
          RaschParams p = update_rasch(model);
          entry.max_delta_rasch = max_abs_diff(p, model.params);
          model.params = std::move(p);
          break;
        }
      }
    }
    entry.objective = objective(model, v, h_ideal, coupled);
    result.trace.push_back(entry);
    result.iterations = it + 1;
    const double current = entry.objective.total;
    const double rel = std::abs(previous - current) / std::max(std::abs(previous), 1e-300);
    previous = current;
    if (rel < hp.tol) {
      result.converged = true;
      break;
    }
  }
  result.model = std::move(model);
  return result;
}

}  // namespace detail

// Algorithm: NMF init, normalize, Rasch init on thresholded H, then iterate
// W, H, beta/theta until the relative change of f drops below tol.
template <typename MatrixType>
FitResult fit(const MatrixType& v, const HIdeal& h_ideal, const Hyperparams& hyper,
              std::uint64_t seed) {
  hyper.validate();
  if (h_ideal.k != hyper.k) {
    throw DimensionError("H_ideal was built for k=" + std::to_string(h_ideal.k) +
                         " but hyperparameters ask for k=" + std::to_string(hyper.k));
  }
  return detail::iterate(detail::initialize(v, hyper, seed), v, h_ideal, true);
}

// Same starting point and W/H iteration with the Rasch term removed, then a
// separate JML fit on the thresholded H.
template <typename MatrixType>
FitResult gg_nmf_fit(const MatrixType& v, const HIdeal& h_ideal, const Hyperparams& hyper,
                     std::uint64_t seed, const rasch::JmlOptions& jml = {}) {
  hyper.validate();
  if (h_ideal.k != hyper.k) {
    throw DimensionError("H_ideal was built for k=" + std::to_string(h_ideal.k) +
                         " but hyperparameters ask for k=" + std::to_string(hyper.k));
  }
  FitResult result = detail::iterate(detail::initialize(v, hyper, seed), v, h_ideal, false);
  const rasch::ResponseMatrix x = threshold_H(result.model.fact.H, hyper.tau);
  auto phase = rasch::jml_fit(x, rasch::init_params(x, hyper.epsilon), jml);
  result.model.params = phase.params;
  result.rasch_phase = std::move(phase);
  return result;
}

}  // namespace topicresponse::joint

#endif  // TOPICRESPONSE_TOPIC_RESPONSE_HPP
