// Plain NMF with Lee-Seung multiplicative updates on the squared Frobenius
// objective, plus the product-preserving rescaling used before joint fitting.

#ifndef TOPICRESPONSE_NMF_HPP
#define TOPICRESPONSE_NMF_HPP

#include "topicresponse/common.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace topicresponse::nmf {

struct Factorization {
  Matrix W;  // m x k
  Matrix H;  // k x n
};

struct NmfOptions {
  int max_iter = 500;
  double tol = 1e-6;  // relative objective change
};

struct NmfResult {
  Factorization fact;
  std::vector<double> trace;  // objective after each iteration
  int iterations = 0;
  bool converged = false;
};

// Sum of squared differences.
inline double frobenius_sq(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "frobenius_sq");
  return (a - b).squaredNorm();
}

template <typename MatrixType>
double reconstruction_error(const MatrixType& v, const Factorization& f) {
  Matrix diff = f.W * f.H;
  diff -= v;
  return diff.squaredNorm();
}

// Strictly positive start drawn from U(0.1, 1.1).
inline Factorization random_init(Index m, Index n, Index k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.1, 1.1);
  Factorization f{Matrix(m, k), Matrix(k, n)};
  for (Index c = 0; c < k; ++c) {
    for (Index r = 0; r < m; ++r) f.W(r, c) = unif(rng);
  }
  for (Index c = 0; c < n; ++c) {
    for (Index r = 0; r < k; ++r) f.H(r, c) = unif(rng);
  }
  return f;
}

template <typename MatrixType>
void update_H(const MatrixType& v, Factorization& f) {
  const Matrix numer = f.W.transpose() * v;
  const Matrix denom = (f.W.transpose() * f.W) * f.H;
  f.H.array() *= numer.array() / denom.array().max(kDenominatorFloor);
}

template <typename MatrixType>
void update_W(const MatrixType& v, Factorization& f) {
  const Matrix numer = v * f.H.transpose();
  const Matrix denom = f.W * (f.H * f.H.transpose());
  f.W.array() *= numer.array() / denom.array().max(kDenominatorFloor);
}

template <typename MatrixType>
NmfResult nmf_fit(const MatrixType& v, Index k, std::uint64_t seed, const NmfOptions& opts = {}) {
  if (k < 1) {
    throw std::invalid_argument("nmf_fit: k must be >= 1");
  }
  NmfResult result;
  result.fact = random_init(v.rows(), v.cols(), k, seed);
  double previous = reconstruction_error(v, result.fact);
  for (int it = 0; it < opts.max_iter; ++it) {
    update_H(v, result.fact);
    update_W(v, result.fact);
    const double current = reconstruction_error(v, result.fact);
    result.trace.push_back(current);
    result.iterations = it + 1;
    const double rel = std::abs(previous - current) / std::max(previous, 1e-300);
    previous = current;
    if (rel < opts.tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

// Rescale (W, H) -> (W D, D^-1 H) so every nonzero row of H peaks at 1.
inline Factorization normalize(const Factorization& f) {
  Factorization out = f;
  for (Index r = 0; r < out.H.rows(); ++r) {
    const double peak = out.H.row(r).maxCoeff();
    if (peak > 0.0 && peak != 1.0) {
      out.H.row(r) /= peak;
      out.W.col(r) *= peak;
    }
  }
  return out;
}

}  // namespace topicresponse::nmf

#endif  // TOPICRESPONSE_NMF_HPP
