// Text formats: dense CSV matrices, `id,value` vectors, coordinate-format
// sparse matrices with a JSON sidecar, posts (JSON lines or delimited) and
// grade files. Doubles are written with 17 significant digits so that a
// round trip is exact.

#ifndef TOPICRESPONSE_IO_HPP
#define TOPICRESPONSE_IO_HPP

#include "topicresponse/common.hpp"
#include "topicresponse/corpus.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace topicresponse::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string located(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

inline double parse_double(const std::string& field, const fs::path& path, std::size_t line) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end) {
    throw InputError(located(path, line) + "expected a number, got '" + field + "'");
  }
  return v;
}

inline long parse_index(const std::string& field, const fs::path& path, std::size_t line) {
  long v = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end || v < 0) {
    throw InputError(located(path, line) + "expected a non-negative integer, got '" + field + "'");
  }
  return v;
}

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

inline std::string read_file(const fs::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  auto out = open_out(path);
  out << content;
}

// Dense matrix, one row per line, no header.
inline void write_dense_csv(const fs::path& path, const Matrix& m) {
  std::string s;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) s += ',';
      s += format_double(m(r, c));
    }
    s += '\n';
  }
  write_file(path, s);
}

inline Matrix read_dense_csv(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (const auto& f : split(line, ',')) row.push_back(parse_double(f, path, lineno));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InputError(located(path, lineno) + "expected " + std::to_string(rows.front().size()) +
                       " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  return m;
}

// `id,value` with header.
inline void write_vector_csv(const fs::path& path, const std::vector<std::string>& ids,
                             const Vector& v) {
  if (static_cast<Index>(ids.size()) != v.size()) {
    throw DimensionError("write_vector_csv: " + std::to_string(ids.size()) + " ids for " +
                         std::to_string(v.size()) + " values");
  }
  std::string s = "id,value\n";
  for (Index i = 0; i < v.size(); ++i) {
    s += ids[static_cast<std::size_t>(i)] + "," + format_double(v(i)) + "\n";
  }
  write_file(path, s);
}

struct NamedVector {
  std::vector<std::string> ids;
  Vector values;
};

inline NamedVector read_vector_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> vals;
  NamedVector out;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    if (lineno == 1 && trim(line) == "id,value") continue;
    const auto f = split(line, ',');
    if (f.size() != 2) throw InputError(located(path, lineno) + "expected 'id,value'");
    out.ids.push_back(f[0]);
    vals.push_back(parse_double(f[1], path, lineno));
  }
  out.values = Eigen::Map<Vector>(vals.data(), static_cast<Index>(vals.size()));
  return out;
}

// Coordinate format: header `row,col,value`, zero-based indices, column-major order.
inline void write_coordinate(const fs::path& path, const SparseMatrix& m) {
  std::string s = "row,col,value\n";
  for (Index c = 0; c < m.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) {
      s += std::to_string(it.row()) + "," + std::to_string(it.col()) + "," +
           format_double(it.value()) + "\n";
    }
  }
  write_file(path, s);
}

inline bool is_coordinate_file(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  return trim(line) == "row,col,value";
}

inline SparseMatrix read_coordinate(const fs::path& path, Index rows, Index cols) {
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<Eigen::Triplet<double>> trips;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    if (lineno == 1 && trim(line) == "row,col,value") continue;
    const auto f = split(line, ',');
    if (f.size() != 3) throw InputError(located(path, lineno) + "expected 'row,col,value'");
    const long r = parse_index(f[0], path, lineno);
    const long c = parse_index(f[1], path, lineno);
    const double v = parse_double(f[2], path, lineno);
    if (r >= rows || c >= cols) {
      throw DimensionError(located(path, lineno) + "entry (" + f[0] + "," + f[1] +
                           ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (v < 0) throw InputError(located(path, lineno) + "negative entry");
    trips.emplace_back(r, c, v);
  }
  SparseMatrix m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

// Coordinate file whose dimensions are not known upfront.
inline SparseMatrix read_coordinate(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  Index rows = 0;
  Index cols = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || (lineno == 1 && trim(line) == "row,col,value")) continue;
    const auto f = split(line, ',');
    if (f.size() != 3) throw InputError(located(path, lineno) + "expected 'row,col,value'");
    rows = std::max<Index>(rows, parse_index(f[0], path, lineno) + 1);
    cols = std::max<Index>(cols, parse_index(f[1], path, lineno) + 1);
  }
  return read_coordinate(path, rows, cols);
}

struct MatrixMeta {
  Index m = 0;
  Index n = 0;
  std::vector<std::string> student_ids;
  std::vector<std::string> terms;
  std::string tfidf_variant = corpus::kTfIdfVariant;
  json extra = json::object();
};

inline void write_matrix_meta(const fs::path& path, const MatrixMeta& meta) {
  json j = meta.extra;
  j["m"] = meta.m;
  j["n"] = meta.n;
  j["student_ids"] = meta.student_ids;
  j["terms"] = meta.terms;
  j["tfidf_variant"] = meta.tfidf_variant;
  write_file(path, j.dump(2) + "\n");
}

inline MatrixMeta read_matrix_meta(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  MatrixMeta meta;
  try {
    meta.m = j.at("m").get<Index>();
    meta.n = j.at("n").get<Index>();
    meta.student_ids = j.at("student_ids").get<std::vector<std::string>>();
    meta.terms = j.at("terms").get<std::vector<std::string>>();
    meta.tfidf_variant = j.value("tfidf_variant", std::string());
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  if (static_cast<Index>(meta.student_ids.size()) != meta.n ||
      static_cast<Index>(meta.terms.size()) != meta.m) {
    throw DimensionError(path.string() + ": id lists do not match m/n");
  }
  meta.extra = std::move(j);
  return meta;
}

// Sidecar for `V.coo.csv` is `V.coo.csv.meta.json`.
inline fs::path meta_path(const fs::path& matrix) {
  return fs::path(matrix.string() + ".meta.json");
}

inline corpus::WordStudentMatrix read_word_student(const fs::path& path, corpus::Vocabulary* vocab) {
  const MatrixMeta meta = read_matrix_meta(meta_path(path));
  corpus::WordStudentMatrix v;
  v.values = read_coordinate(path, meta.m, meta.n);
  v.student_ids = meta.student_ids;
  if (vocab) {
    vocab->terms = meta.terms;
    vocab->index.clear();
    for (std::size_t i = 0; i < meta.terms.size(); ++i) vocab->index.emplace(meta.terms[i], static_cast<Index>(i));
  }
  return v;
}

inline void write_word_student(const fs::path& path, const corpus::WordStudentMatrix& v,
                               const corpus::Vocabulary& vocab, json extra = json::object()) {
  write_coordinate(path, v.values);
  MatrixMeta meta;
  meta.m = v.words();
  meta.n = v.students();
  meta.student_ids = v.student_ids;
  meta.terms = vocab.terms;
  meta.extra = std::move(extra);
  write_matrix_meta(meta_path(path), meta);
}

// Unquotes a CSV field ("a ""b""" -> a "b").
inline std::string unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      out += s[i];
      if (s[i] == '"' && s[i + 1] == '"') ++i;
    }
    return out;
  }
  return s;
}

// JSON lines with `student_id` and `text`, or two columns split at the first
// tab (or comma) with an optional `student_id,text` header.
inline std::vector<corpus::Document> read_posts(const fs::path& path) {
  auto in = open_in(path);
  std::vector<corpus::Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!corpus::valid_utf8(line)) throw InputError(located(path, lineno) + "invalid UTF-8");
    corpus::Document doc;
    if (t.front() == '{') {
      try {
        const json j = json::parse(t);
        doc.student_id = j.at("student_id").is_string() ? j.at("student_id").get<std::string>()
                                                        : j.at("student_id").dump();
        doc.text = j.at("text").get<std::string>();
      } catch (const json::exception& e) {
        throw InputError(located(path, lineno) + e.what());
      }
    } else {
      auto pos = line.find('\t');
      if (pos == std::string::npos) pos = line.find(',');
      if (pos == std::string::npos) {
        throw InputError(located(path, lineno) + "expected 'student_id<TAB or ,>text'");
      }
      doc.student_id = unquote(trim(line.substr(0, pos)));
      doc.text = unquote(trim(line.substr(pos + 1)));
      if (lineno == 1 && doc.student_id == "student_id" && doc.text == "text") continue;
    }
    if (doc.student_id.empty()) throw InputError(located(path, lineno) + "empty student_id");
    docs.push_back(std::move(doc));
  }
  if (docs.empty()) throw InputError(path.string() + ": no posts");
  return docs;
}

// `student_id,grade` with a header row.
inline std::vector<corpus::GradeRecord> read_grades(const fs::path& path) {
  auto in = open_in(path);
  std::vector<corpus::GradeRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (lineno == 1) {
      if (f.size() != 2 || f[0] != "student_id" || f[1] != "grade") {
        throw InputError(located(path, lineno) + "expected header 'student_id,grade'");
      }
      continue;
    }
    if (f.size() != 2 || f[0].empty()) {
      throw InputError(located(path, lineno) + "expected 'student_id,grade'");
    }
    const double g = parse_double(f[1], path, lineno);
    if (!(g >= 0.0 && g <= 100.0)) {
      throw InputError(located(path, lineno) + "grade " + f[1] + " outside [0,100]");
    }
    out.push_back({f[0], g});
  }
  return out;
}

inline void write_grades(const fs::path& path, const std::vector<std::string>& ids,
                         const std::vector<double>& grades) {
  std::string s = "student_id,grade\n";
  for (std::size_t j = 0; j < ids.size(); ++j) s += ids[j] + "," + format_double(grades[j]) + "\n";
  write_file(path, s);
}

}  // namespace topicresponse::io

#endif  // TOPICRESPONSE_IO_HPP
