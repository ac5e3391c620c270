// Evaluation metrics, infit reports, topic tables and Wright-map histograms.
//
// metric_suite deliberately recomputes every quantity with plain loops so it
// can cross-check the optimizer's own objective breakdown.

#ifndef TOPICRESPONSE_METRICS_HPP
#define TOPICRESPONSE_METRICS_HPP

#include "topicresponse/common.hpp"
#include "topicresponse/corpus.hpp"
#include "topicresponse/rasch.hpp"
#include "topicresponse/topic_response.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace topicresponse::metrics {

struct MetricSuite {
  double neg_log_likelihood = 0.0;             // thresholded H, final theta/beta
  double neg_log_likelihood_continuous = 0.0;  // continuous H, diagnostic
  double approx_error = 0.0;                   // |V - WH|^2
  double grade_error = 0.0;                    // |1_r H - H_ideal|^2
  double binary_gap = 0.0;                     // |H o H - H|^2
};

namespace detail {

inline double negll_loop(const Matrix& x, const rasch::RaschParams& p) {
  double total = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double d = p.theta(j) - p.beta(i);
      total += rasch::softplus(d) - x(i, j) * d;
    }
  }
  return total;
}

template <typename MatrixType>
double approx_loop(const MatrixType& v, const Matrix& w, const Matrix& h) {
  const Matrix dense = Matrix(v);
  double total = 0.0;
  for (Index j = 0; j < h.cols(); ++j) {
    for (Index i = 0; i < w.rows(); ++i) {
      double wh = 0.0;
      for (Index t = 0; t < w.cols(); ++t) wh += w(i, t) * h(t, j);
      const double r = dense(i, j) - wh;
      total += r * r;
    }
  }
  return total;
}

}  // namespace detail

template <typename MatrixType>
MetricSuite metric_suite(const joint::JointModel& model, const MatrixType& v,
                         const corpus::HIdeal& h_ideal) {
  const Matrix& w = model.fact.W;
  const Matrix& h = model.fact.H;
  joint::check_dims(model.fact, v.rows(), v.cols(), h_ideal);
  rasch::check_dims(model.params, h);

  MetricSuite s;
  s.approx_error = detail::approx_loop(v, w, h);
  for (Index j = 0; j < h.cols(); ++j) {
    double col = 0.0;
    for (Index i = 0; i < h.rows(); ++i) {
      col += h(i, j);
      const double gap = h(i, j) * h(i, j) - h(i, j);
      s.binary_gap += gap * gap;
    }
    const double diff = col - static_cast<double>(h_ideal.values(j));
    s.grade_error += diff * diff;
  }
  s.neg_log_likelihood =
      detail::negll_loop(joint::threshold_H(h, model.hyper.tau), model.params);
  s.neg_log_likelihood_continuous = detail::negll_loop(h, model.params);
  return s;
}

struct TopicRow {
  Index topic = 0;  // column of W / row of H
  int rank = 0;     // 1 = easiest
  double difficulty = 0.0;
  std::vector<std::string> terms;
};

using TopicReport = std::vector<TopicRow>;

// Top terms per topic by descending W weight (ties by term), rows ordered by
// ascending difficulty.
inline TopicReport topic_report(const Matrix& w, const Vector& beta,
                                const std::vector<std::string>& terms, std::size_t top_t = 10) {
  if (static_cast<Index>(terms.size()) != w.rows()) {
    throw DimensionError("topic_report: vocabulary size does not match W rows");
  }
  if (beta.size() != w.cols()) {
    throw DimensionError("topic_report: beta length does not match W columns");
  }
  TopicReport report;
  std::vector<Index> rows(terms.size());
  for (Index t = 0; t < w.cols(); ++t) {
    std::iota(rows.begin(), rows.end(), Index{0});
    const std::size_t take = std::min(top_t, rows.size());
    std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end(),
                      [&](Index a, Index b) {
                        if (w(a, t) != w(b, t)) return w(a, t) > w(b, t);
                        return terms[static_cast<std::size_t>(a)] <
                               terms[static_cast<std::size_t>(b)];
                      });
    TopicRow row;
    row.topic = t;
    row.difficulty = beta(t);
    for (std::size_t c = 0; c < take; ++c) {
      row.terms.push_back(terms[static_cast<std::size_t>(rows[c])]);
    }
    report.push_back(std::move(row));
  }
  // Equal difficulties fall back to comparing the term lists so the report
  // does not depend on internal topic numbering.
  std::sort(report.begin(), report.end(), [](const TopicRow& a, const TopicRow& b) {
    if (a.difficulty != b.difficulty) return a.difficulty < b.difficulty;
    return a.terms < b.terms;
  });
  for (std::size_t r = 0; r < report.size(); ++r) report[r].rank = static_cast<int>(r + 1);
  return report;
}

inline TopicReport topic_report(const joint::JointModel& model,
                                const std::vector<std::string>& terms, std::size_t top_t = 10) {
  return topic_report(model.fact.W, model.params.beta, terms, top_t);
}

struct HistogramBin {
  double start = 0.0;
  double end = 0.0;
  Index count = 0;
};

using Histogram = std::vector<HistogramBin>;

// Bins [e, e + width) with edges on multiples of width covering [lo, hi].
inline std::vector<double> aligned_edges(double lo, double hi, double width) {
  if (!(width > 0)) throw std::invalid_argument("bin width must be > 0");
  const double first = std::floor(lo / width);
  double last = std::floor(hi / width) + 1.0;
  std::vector<double> edges;
  for (double e = first; e <= last; e += 1.0) edges.push_back(e * width);
  return edges;
}

inline Histogram histogram(const Vector& values, const std::vector<double>& edges) {
  Histogram h;
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) h.push_back({edges[b], edges[b + 1], 0});
  if (h.empty()) return h;
  const double width = edges[1] - edges[0];
  for (Index i = 0; i < values.size(); ++i) {
    auto b = static_cast<std::ptrdiff_t>(std::floor((values(i) - edges.front()) / width));
    b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(h.size()) - 1);
    ++h[static_cast<std::size_t>(b)].count;
  }
  return h;
}

struct InfitReport {
  Vector infit;
  std::vector<bool> in_range;
  Index flagged = 0;
  double low = 0.7;
  double high = 1.3;
  Histogram histogram;
};

// Flags items whose infit falls outside [low, high] (both ends inclusive).
inline InfitReport infit_report(const rasch::FitStats& stats, double bin_width = 0.1) {
  InfitReport r;
  r.infit = stats.item_infit;
  r.low = stats.low;
  r.high = stats.high;
  for (Index i = 0; i < r.infit.size(); ++i) {
    const bool ok = r.infit(i) >= r.low && r.infit(i) <= r.high;
    r.in_range.push_back(ok);
    if (!ok) ++r.flagged;
  }
  if (r.infit.size() > 0) {
    r.histogram = histogram(
        r.infit, aligned_edges(r.infit.minCoeff(), r.infit.maxCoeff(), bin_width));
  }
  return r;
}

struct WrightMapData {
  std::vector<double> edges;
  Histogram abilities;
  Histogram difficulties;
};

inline WrightMapData wright_map(const rasch::RaschParams& params, double bin_width = 0.5) {
  double lo = 0.0;
  double hi = 0.0;
  bool any = false;
  for (const Vector* v : {&params.theta, &params.beta}) {
    if (v->size() == 0) continue;
    lo = any ? std::min(lo, v->minCoeff()) : v->minCoeff();
    hi = any ? std::max(hi, v->maxCoeff()) : v->maxCoeff();
    any = true;
  }
  WrightMapData out;
  out.edges = aligned_edges(lo, hi, bin_width);
  out.abilities = histogram(params.theta, out.edges);
  out.difficulties = histogram(params.beta, out.edges);
  return out;
}

}  // namespace topicresponse::metrics

#endif  // TOPICRESPONSE_METRICS_HPP
