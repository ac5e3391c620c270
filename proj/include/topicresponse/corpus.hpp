// Corpus ingestion: tokenize and stem forum posts, aggregate them per
// student into a word-student tf-idf matrix, and derive the grade-implied
// target topic counts.

#ifndef TOPICRESPONSE_CORPUS_HPP
#define TOPICRESPONSE_CORPUS_HPP

#include "topicresponse/common.hpp"
#include "topicresponse/porter_stemmer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace topicresponse::corpus {

struct Document {
  std::string student_id;
  std::string text;
};

struct GradeRecord {
  std::string student_id;
  double grade = 0.0;
};

struct Vocabulary {
  std::vector<std::string> terms;
  std::unordered_map<std::string, Index> index;

  Index size() const { return static_cast<Index>(terms.size()); }
};

inline constexpr const char* kTfIdfVariant = "raw_tf*log(n/df), global max rescaled to [0,1]";

struct WordStudentMatrix {
  SparseMatrix values;  // m x n
  std::vector<std::string> student_ids;

  Index words() const { return values.rows(); }
  Index students() const { return values.cols(); }
  double sparsity() const {
    const double cells = static_cast<double>(values.rows()) * static_cast<double>(values.cols());
    return cells > 0 ? static_cast<double>(values.nonZeros()) / cells : 0.0;
  }
};

struct HIdeal {
  Eigen::VectorXi values;  // length n, each in [1, k-1]
  int k = 0;
};

struct PreprocessOptions {
  std::set<std::string> stopwords;
  std::size_t min_token_len = 2;
  bool stem = true;
};

struct CorpusStats {
  Index students = 0;
  Index words = 0;
  Index nonzeros = 0;
  double sparsity_percent = 0.0;
  std::vector<std::string> dominant_terms;
};

// A common English stop list (NLTK's).
inline std::set<std::string> default_stopwords() {
  static const char* const kWords[] = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours",
      "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself",
      "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
      "who", "whom", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
      "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
      "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by",
      "for", "with", "about", "against", "between", "into", "through", "during", "before",
      "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
      "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
      "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no",
      "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will",
      "just", "don", "should", "now"};
  return {std::begin(kWords), std::end(kWords)};
}

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t b = 1; b < len; ++b) {
      const auto cc = static_cast<unsigned char>(s[i + b]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlongs, surrogates, out of range.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
      return false;
    }
    i += len;
  }
  return true;
}

// Lowercased runs of ASCII alphanumerics. Any other byte separates tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

inline std::vector<std::string> analyze(std::string_view text, const PreprocessOptions& opts) {
  std::vector<std::string> out;
  for (auto& tok : tokenize(text)) {
    if (tok.size() < opts.min_token_len || opts.stopwords.count(tok)) continue;
    out.push_back(opts.stem ? porter::stem(std::move(tok)) : std::move(tok));
  }
  return out;
}

struct PreprocessResult {
  Vocabulary vocab;
  WordStudentMatrix matrix;
  // Students whose every surviving term occurs in all documents (zero idf).
  std::vector<std::string> dropped_students;
};

// Aggregates posts per student, weights terms by tf * log(n/df) and rescales
// by the global maximum. Students and terms are sorted so the output does
// not depend on document order. Terms carrying zero weight everywhere (those
// used by every student) are dropped, as are students left without any
// weighted term.
inline PreprocessResult preprocess(const std::vector<Document>& documents,
                                   const PreprocessOptions& opts) {
  if (documents.empty()) {
    throw InputError("preprocess: no documents");
  }
  // student -> term -> count
  std::map<std::string, std::map<std::string, double>> counts;
  for (std::size_t d = 0; d < documents.size(); ++d) {
    const auto& doc = documents[d];
    if (doc.student_id.empty()) {
      throw InputError("preprocess: document " + std::to_string(d) + " has an empty student_id");
    }
    if (!valid_utf8(doc.text)) {
      throw InputError("preprocess: document " + std::to_string(d) + " (student " +
                       doc.student_id + ") is not valid UTF-8");
    }
    for (auto& term : analyze(doc.text, opts)) {
      counts[doc.student_id][std::move(term)] += 1.0;
    }
  }
  if (counts.empty()) {
    throw InputError("preprocess: empty corpus, no tokens survive filtering");
  }

  const double n_docs = static_cast<double>(counts.size());
  std::map<std::string, double> df;
  for (const auto& [student, terms] : counts) {
    for (const auto& [term, c] : terms) df[term] += 1.0;
  }
  std::map<std::string, double> idf;
  for (const auto& [term, d] : df) {
    const double w = std::log(n_docs / d);
    if (w > 0.0) idf.emplace(term, w);
  }

  PreprocessResult result;
  for (const auto& [term, w] : idf) {
    result.vocab.index.emplace(term, result.vocab.size());
    result.vocab.terms.push_back(term);
  }

  std::vector<Eigen::Triplet<double>> triplets;
  double peak = 0.0;
  Index col = 0;
  for (const auto& [student, terms] : counts) {
    bool any = false;
    for (const auto& [term, c] : terms) {
      const auto it = idf.find(term);
      if (it == idf.end()) continue;
      const double weight = c * it->second;
      triplets.emplace_back(result.vocab.index.at(term), col, weight);
      peak = std::max(peak, weight);
      any = true;
    }
    if (any) {
      result.matrix.student_ids.push_back(student);
      ++col;
    } else {
      result.dropped_students.push_back(student);
    }
  }
  if (triplets.empty() || peak <= 0.0) {
    throw InputError("preprocess: empty corpus, every term has zero tf-idf weight");
  }
  for (auto& t : triplets) t = Eigen::Triplet<double>(t.row(), t.col(), t.value() / peak);

  result.matrix.values.resize(result.vocab.size(), col);
  result.matrix.values.setFromTriplets(triplets.begin(), triplets.end());
  result.matrix.values.makeCompressed();
  return result;
}

// Target number of distinct topics per student:
// min(floor((g + w) / w), k - 1) with w = 100 / (k - 1).
inline int h_ideal_value(double grade, int k) {
  const double width = 100.0 / static_cast<double>(k - 1);
  const int v = static_cast<int>(std::floor((grade + width) / width));
  return std::min(v, k - 1);
}

inline HIdeal build_h_ideal(const std::vector<double>& grades, int k) {
  if (k < 2) {
    throw std::invalid_argument("build_h_ideal: k must be >= 2");
  }
  HIdeal out;
  out.k = k;
  out.values.resize(static_cast<Index>(grades.size()));
  for (std::size_t j = 0; j < grades.size(); ++j) {
    const double g = grades[j];
    if (!(g >= 0.0 && g <= 100.0)) {
      throw InputError("build_h_ideal: grade " + std::to_string(g) + " outside [0,100]");
    }
    out.values(static_cast<Index>(j)) = h_ideal_value(g, k);
  }
  return out;
}

// Looks up each matrix column's grade; every missing student is reported.
inline std::vector<double> align_grades(const std::vector<std::string>& student_ids,
                                        const std::vector<GradeRecord>& grades) {
  std::unordered_map<std::string, double> lookup;
  for (const auto& g : grades) lookup[g.student_id] = g.grade;
  std::vector<double> aligned;
  std::vector<std::string> missing;
  aligned.reserve(student_ids.size());
  for (const auto& id : student_ids) {
    const auto it = lookup.find(id);
    if (it == lookup.end()) {
      missing.push_back(id);
      aligned.push_back(0.0);
    } else {
      aligned.push_back(it->second);
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing grade for student(s):";
    for (const auto& id : missing) msg += " " + id;
    throw InputError(msg);
  }
  return aligned;
}

inline HIdeal build_h_ideal(const std::vector<std::string>& student_ids,
                            const std::vector<GradeRecord>& grades, int k) {
  return build_h_ideal(align_grades(student_ids, grades), k);
}

inline CorpusStats corpus_stats(const WordStudentMatrix& v, const Vocabulary& vocab,
                                std::size_t top_t) {
  if (vocab.size() != v.words()) {
    throw DimensionError("corpus_stats: vocabulary has " + std::to_string(vocab.size()) +
                         " terms but matrix has " + std::to_string(v.words()) + " rows");
  }
  CorpusStats s;
  s.students = v.students();
  s.words = v.words();
  s.nonzeros = v.values.nonZeros();
  s.sparsity_percent = 100.0 * v.sparsity();

  Vector weight = Vector::Zero(v.words());
  for (Index c = 0; c < v.values.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(v.values, c); it; ++it) weight(it.row()) += it.value();
  }
  std::vector<Index> order(static_cast<std::size_t>(v.words()));
  for (Index i = 0; i < v.words(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (weight(a) != weight(b)) return weight(a) > weight(b);
    return vocab.terms[static_cast<std::size_t>(a)] < vocab.terms[static_cast<std::size_t>(b)];
  });
  order.resize(std::min(order.size(), top_t));
  for (const Index i : order) s.dominant_terms.push_back(vocab.terms[static_cast<std::size_t>(i)]);
  return s;
}

}  // namespace topicresponse::corpus

#endif  // TOPICRESPONSE_CORPUS_HPP
