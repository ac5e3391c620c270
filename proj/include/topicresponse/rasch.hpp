// Dichotomous Rasch model: response probabilities, joint log-likelihood,
// starting values, joint maximum likelihood estimation and item/person fit.
//
// Responses are held in a k x n matrix (items x persons). Entries may be
// fractional in [0,1]; every formula below is well defined for them, which
// the joint topic model relies on when it feeds H in as the response matrix.

#ifndef TOPICRESPONSE_RASCH_HPP
#define TOPICRESPONSE_RASCH_HPP

#include "topicresponse/common.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

namespace topicresponse::rasch {

inline constexpr double kLogitCap = 10.0;

struct RaschParams {
  Vector beta;   // item difficulties, length k
  Vector theta;  // person abilities, length n

  Index items() const { return beta.size(); }
  Index persons() const { return theta.size(); }
};

// k x n, entries in [0,1].
using ResponseMatrix = Matrix;

struct FitStats {
  Vector item_infit;
  Vector item_outfit;
  Vector person_infit;
  Vector person_outfit;
  double low = 0.7;
  double high = 1.3;
  // Cells skipped because p(1-p) was numerically zero.
  Index excluded_cells = 0;
};

struct JmlOptions {
  double tol = 1e-6;
  int max_iter = 200;
  int max_halvings = 20;
  double logit_cap = kLogitCap;
  double extreme_epsilon = 1.0;  // 0 keeps extreme scores as they are
};

struct JmlSweep {
  double log_likelihood = 0.0;
  double max_delta = 0.0;
};

struct JmlResult {
  RaschParams params;
  std::vector<JmlSweep> trace;
  bool converged = false;
  int iterations = 0;
};

inline double icc_probability(double theta, double beta) {
  const double x = theta - beta;
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline void check_dims(const RaschParams& params, const ResponseMatrix& x) {
  if (x.rows() != params.items() || x.cols() != params.persons()) {
    throw DimensionError("response matrix is " + std::to_string(x.rows()) + "x" +
                         std::to_string(x.cols()) + " but params describe " +
                         std::to_string(params.items()) + " items and " +
                         std::to_string(params.persons()) + " persons");
  }
}

inline Matrix probabilities(const RaschParams& params) {
  Matrix p(params.items(), params.persons());
  for (Index j = 0; j < p.cols(); ++j) {
    for (Index i = 0; i < p.rows(); ++i) {
      p(i, j) = icc_probability(params.theta(j), params.beta(i));
    }
  }
  return p;
}

inline double log_likelihood(const RaschParams& params, const ResponseMatrix& x) {
  check_dims(params, x);
  double total = 0.0;
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) {
      const double d = params.theta(j) - params.beta(i);
      total += x(i, j) * d - softplus(d);
    }
  }
  return total;
}

namespace detail {

// Contribution of one item row (or person column) to the log-likelihood;
// the total separates over items once theta is fixed, and vice versa.
inline double item_loglik(const ResponseMatrix& x, const Vector& theta, Index i, double beta_i) {
  double total = 0.0;
  for (Index j = 0; j < x.cols(); ++j) {
    const double d = theta(j) - beta_i;
    total += x(i, j) * d - softplus(d);
  }
  return total;
}

inline double person_loglik(const ResponseMatrix& x, const Vector& beta, Index j, double theta_j) {
  double total = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const double d = theta_j - beta(i);
    total += x(i, j) * d - softplus(d);
  }
  return total;
}

inline double clamp_cap(double v, double cap) { return std::clamp(v, -cap, cap); }

// Damped Newton step for a single scalar parameter of a concave objective.
// `loglik` evaluates the parameter's own contribution; the step is halved
// until that contribution does not decrease. Returns the accepted value.
template <typename LogLik>
double damped_newton(double current, double gradient, double curvature, int max_halvings,
                     double cap, LogLik&& loglik) {
  if (curvature <= 0 || gradient == 0.0) {
    return current;
  }
  const double base = loglik(current);
  double step = gradient / curvature;
  for (int h = 0; h <= max_halvings; ++h, step *= 0.5) {
    const double candidate = clamp_cap(current + step, cap);
    if (candidate == current) {
      return current;
    }
    if (loglik(candidate) >= base) {
      return candidate;
    }
  }
  return current;
}

}  // namespace detail

// One Newton step per item difficulty, holding theta fixed.
inline void newton_step_beta(const ResponseMatrix& x, RaschParams& params, int max_halvings,
                             double cap) {
  for (Index i = 0; i < x.rows(); ++i) {
    double residual = 0.0;  // sum_j (p_ij - x_ij) = d loglik / d beta_i
    double information = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
      const double p = icc_probability(params.theta(j), params.beta(i));
      residual += p - x(i, j);
      information += p * (1.0 - p);
    }
    params.beta(i) = detail::damped_newton(
        params.beta(i), residual, information, max_halvings, cap,
        [&](double b) { return detail::item_loglik(x, params.theta, i, b); });
  }
}

// One Newton step per person ability, holding beta fixed.
inline void newton_step_theta(const ResponseMatrix& x, RaschParams& params, int max_halvings,
                              double cap) {
  for (Index j = 0; j < x.cols(); ++j) {
    double residual = 0.0;  // sum_i (x_ij - p_ij) = d loglik / d theta_j
    double information = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
      const double p = icc_probability(params.theta(j), params.beta(i));
      residual += x(i, j) - p;
      information += p * (1.0 - p);
    }
    params.theta(j) = detail::damped_newton(
        params.theta(j), residual, information, max_halvings, cap,
        [&](double t) { return detail::person_loglik(x, params.beta, j, t); });
  }
}

// Shift both scales so that mean(beta) = 0. theta - beta is unchanged.
inline void center(RaschParams& params) {
  if (params.items() == 0) {
    return;
  }
  const double shift = params.beta.mean();
  params.beta.array() -= shift;
  params.theta.array() -= shift;
}

// Starting values from raw proportions, with pseudo-counts for extreme
// scores. `counts` is the matrix the raw scores are taken from.
inline RaschParams init_params(const ResponseMatrix& counts, double epsilon = 1.0) {
  const Index k = counts.rows();
  const Index n = counts.cols();
  if (k < 2 || n < 2) {
    throw DimensionError("init_params needs at least 2 items and 2 persons");
  }
  if (!(epsilon > 0.0) || !(epsilon <= static_cast<double>(std::min(k, n)) / 2.0)) {
    throw std::invalid_argument("init_params: epsilon must lie in (0, min(k,n)/2]");
  }
  RaschParams params{Vector(k), Vector(n)};
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  for (Index j = 0; j < n; ++j) {
    double r = counts.col(j).sum();
    if (r <= 0.0) {
      r = epsilon;
    } else if (r >= kd) {
      r = kd - epsilon;
    }
    const double p = r / kd;
    params.theta(j) = std::log(p / (1.0 - p));
  }
  for (Index i = 0; i < k; ++i) {
    double s = counts.row(i).sum();
    if (s <= 0.0) {
      s = epsilon;
    } else if (s >= nd) {
      s = nd - epsilon;
    }
    const double p = s / nd;
    params.beta(i) = std::log((1.0 - p) / p);
  }
  return params;
}

// Applies the pseudo-count rule to the data: a person with raw score 0 or k
// is refit at score epsilon or k - epsilon, and likewise items against n.
// Their maximum-likelihood estimates do not exist otherwise.
inline ResponseMatrix adjust_extremes(const ResponseMatrix& x, double epsilon) {
  ResponseMatrix out = x;
  if (!(epsilon > 0.0)) {
    return out;
  }
  const double kd = static_cast<double>(x.rows());
  const double nd = static_cast<double>(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double r = out.col(j).sum();
    if (r <= 0.0) {
      out.col(j).setConstant(epsilon / kd);
    } else if (r >= kd) {
      out.col(j) *= (kd - epsilon) / r;
    }
  }
  for (Index i = 0; i < x.rows(); ++i) {
    const double s = out.row(i).sum();
    if (s <= 0.0) {
      out.row(i).setConstant(epsilon / nd);
    } else if (s >= nd) {
      out.row(i) *= (nd - epsilon) / s;
    }
  }
  return out;
}

// Alternating damped Newton sweeps (all beta, then all theta), centering
// beta after each sweep. Extreme scores are adjusted first, so the trace
// log-likelihood is that of the adjusted data. Non-convergence is reported,
// not thrown.
inline JmlResult jml_fit(const ResponseMatrix& raw, RaschParams init, const JmlOptions& opts = {}) {
  check_dims(init, raw);
  const ResponseMatrix x = adjust_extremes(raw, opts.extreme_epsilon);
  JmlResult result;
  result.params = std::move(init);
  RaschParams& params = result.params;
  for (int it = 0; it < opts.max_iter; ++it) {
    const RaschParams before = params;
    newton_step_beta(x, params, opts.max_halvings, opts.logit_cap);
    newton_step_theta(x, params, opts.max_halvings, opts.logit_cap);
    center(params);
    // Centering may push an extreme person just past the cap.
    params.theta = params.theta.cwiseMax(-opts.logit_cap).cwiseMin(opts.logit_cap);

    const double delta = std::max((params.beta - before.beta).lpNorm<Eigen::Infinity>(),
                                  (params.theta - before.theta).lpNorm<Eigen::Infinity>());
    result.trace.push_back({log_likelihood(params, x), delta});
    result.iterations = it + 1;
    if (delta < opts.tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

inline FitStats fit_statistics(const RaschParams& params, const ResponseMatrix& x,
                               double low = 0.7, double high = 1.3) {
  check_dims(params, x);
  const Index k = x.rows();
  const Index n = x.cols();
  FitStats stats;
  stats.low = low;
  stats.high = high;

  Vector item_r2 = Vector::Zero(k), item_s = Vector::Zero(k), item_z2 = Vector::Zero(k);
  Vector person_r2 = Vector::Zero(n), person_s = Vector::Zero(n), person_z2 = Vector::Zero(n);
  Eigen::VectorXi item_cells = Eigen::VectorXi::Zero(k);
  Eigen::VectorXi person_cells = Eigen::VectorXi::Zero(n);

  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < k; ++i) {
      const double p = icc_probability(params.theta(j), params.beta(i));
      const double variance = p * (1.0 - p);
      if (!(variance > 1e-12)) {
        ++stats.excluded_cells;
        continue;
      }
      const double r = x(i, j) - p;
      const double z2 = r * r / variance;
      item_r2(i) += r * r;
      item_s(i) += variance;
      item_z2(i) += z2;
      ++item_cells(i);
      person_r2(j) += r * r;
      person_s(j) += variance;
      person_z2(j) += z2;
      ++person_cells(j);
    }
  }

  auto ratio = [](double num, double den) { return den > 0 ? num / den : 0.0; };
  stats.item_infit.resize(k);
  stats.item_outfit.resize(k);
  for (Index i = 0; i < k; ++i) {
    stats.item_infit(i) = ratio(item_r2(i), item_s(i));
    stats.item_outfit(i) = ratio(item_z2(i), item_cells(i));
  }
  stats.person_infit.resize(n);
  stats.person_outfit.resize(n);
  for (Index j = 0; j < n; ++j) {
    stats.person_infit(j) = ratio(person_r2(j), person_s(j));
    stats.person_outfit(j) = ratio(person_z2(j), person_cells(j));
  }
  return stats;
}

// Independent Bernoulli draws from the model probabilities.
inline ResponseMatrix simulate(const RaschParams& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ResponseMatrix x(params.items(), params.persons());
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) {
      x(i, j) = unif(rng) < icc_probability(params.theta(j), params.beta(i)) ? 1.0 : 0.0;
    }
  }
  return x;
}

}  // namespace topicresponse::rasch

#endif  // TOPICRESPONSE_RASCH_HPP
