// Subcommand implementations for the topicresponse CLI. Kept out of main.cpp
// so the tests can drive them in-process.

#ifndef TOPICRESPONSE_TOOLS_COMMANDS_HPP
#define TOPICRESPONSE_TOOLS_COMMANDS_HPP

#include "topicresponse/corpus.hpp"
#include "topicresponse/io.hpp"
#include "topicresponse/metrics.hpp"
#include "topicresponse/nmf.hpp"
#include "topicresponse/rasch.hpp"
#include "topicresponse/synthetic.hpp"
#include "topicresponse/topic_response.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <deque>
#include <future>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace topicresponse::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum ExitCode : int { kOk = 0, kInputError = 2, kConsistencyError = 3 };

struct RunConfig {
  // inputs
  std::string posts;
  std::string grades;
  std::string matrix;     // coordinate file with sidecar, or dense CSV for rasch
  std::string input;      // preprocess/simulate output directory
  std::string stopwords;  // one word per line; empty = built-in list
  std::string out = "out";

  std::string algorithm = "topicresponse";
  std::uint64_t seed = 1;
  int jobs = 1;

  joint::Hyperparams hyper;
  int nmf_max_iter = 500;
  double fit_low = 0.7;
  double fit_high = 1.3;
  std::size_t top_t = 10;
  double bin_width = 0.5;
  std::size_t min_token_len = 2;
  bool stem = true;

  // sweep
  std::string sweep_param = "lambda0";
  std::vector<double> sweep_values;
  std::vector<std::string> sweep_algorithms{"topicresponse", "ggnmf"};

  // simulate
  std::string sim_mode = "corpus";
  long sim_students = 300;
  long sim_words = 200;
  double sim_noise = 0.01;
  double sim_overlap = 0.1;
  int sim_tokens_per_topic = 10;
};

// ---------------------------------------------------------------------------
// configuration file: `key = value` lines, '#' comments

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& f : io::split(s, ',')) {
    if (f.empty()) continue;
    out.push_back(io::parse_double(f, "<list>", 0));
  }
  return out;
}

inline std::vector<std::string> parse_words(const std::string& s) {
  std::vector<std::string> out;
  for (auto& f : io::split(s, ',')) {
    if (!f.empty()) out.push_back(f);
  }
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw InputError("expected a boolean, got '" + v + "'");
}

inline joint::Block parse_block(const std::string& s) {
  if (s == "W") return joint::Block::W;
  if (s == "H") return joint::Block::H;
  if (s == "rasch") return joint::Block::Rasch;
  throw InputError("unknown update block '" + s + "' (expected W, H or rasch)");
}

inline std::string block_name(joint::Block b) {
  switch (b) {
    case joint::Block::W: return "W";
    case joint::Block::H: return "H";
    case joint::Block::Rasch: return "rasch";
  }
  return "?";
}

// Applies one setting. Keys match the long flag names with '-' -> '_'.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  const fs::path where = "<config>";
  auto num = [&] { return io::parse_double(value, where, 0); };
  auto integer = [&] { return io::parse_index(value, where, 0); };
  auto& h = c.hyper;
  if (key == "posts") c.posts = value;
  else if (key == "grades") c.grades = value;
  else if (key == "matrix") c.matrix = value;
  else if (key == "input") c.input = value;
  else if (key == "stopwords") c.stopwords = value;
  else if (key == "out") c.out = value;
  else if (key == "algorithm") c.algorithm = value;
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(integer());
  else if (key == "jobs") c.jobs = static_cast<int>(integer());
  else if (key == "lambda0") h.lambda0 = num();
  else if (key == "lambda1") h.lambda1 = num();
  else if (key == "lambda2") h.lambda2 = num();
  else if (key == "lambda3") h.lambda3 = num();
  else if (key == "k") h.k = static_cast<int>(integer());
  else if (key == "max_iter") h.max_iter = static_cast<int>(integer());
  else if (key == "tol") h.tol = num();
  else if (key == "init_iter") h.init_iter = static_cast<int>(integer());
  else if (key == "tau") h.tau = num();
  else if (key == "epsilon") h.epsilon = num();
  else if (key == "h_max") h.h_max = num();
  else if (key == "update_order") {
    const auto parts = parse_words(value);
    if (parts.size() != 3) throw InputError("update_order needs three blocks, e.g. W,H,rasch");
    for (std::size_t i = 0; i < 3; ++i) h.order[i] = parse_block(parts[i]);
  }
  else if (key == "nmf_max_iter") c.nmf_max_iter = static_cast<int>(integer());
  else if (key == "fit_low") c.fit_low = num();
  else if (key == "fit_high") c.fit_high = num();
  else if (key == "top_t") c.top_t = static_cast<std::size_t>(integer());
  else if (key == "bin_width") c.bin_width = num();
  else if (key == "min_token_len") c.min_token_len = static_cast<std::size_t>(integer());
  else if (key == "stem") c.stem = parse_bool(value);
  else if (key == "param") c.sweep_param = value;
  else if (key == "values") c.sweep_values = parse_list(value);
  else if (key == "algorithms") c.sweep_algorithms = parse_words(value);
  else if (key == "mode") c.sim_mode = value;
  else if (key == "students") c.sim_students = integer();
  else if (key == "words") c.sim_words = integer();
  else if (key == "noise") c.sim_noise = num();
  else if (key == "overlap") c.sim_overlap = num();
  else if (key == "tokens_per_topic") c.sim_tokens_per_topic = static_cast<int>(integer());
  else throw InputError("unknown configuration key '" + key + "'");
}

inline void load_config_file(RunConfig& c, const fs::path& path) {
  auto in = io::open_in(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = io::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw InputError(io::located(path, lineno) + "expected key = value");
    std::string key = io::trim(t.substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    try {
      apply_setting(c, key, io::trim(t.substr(eq + 1)));
    } catch (const InputError& e) {
      throw InputError(io::located(path, lineno) + e.what());
    }
  }
}

inline json config_json(const RunConfig& c) {
  const auto& h = c.hyper;
  std::vector<std::string> order;
  for (const auto b : h.order) order.push_back(block_name(b));
  return json{{"posts", c.posts},
              {"grades", c.grades},
              {"matrix", c.matrix},
              {"input", c.input},
              {"algorithm", c.algorithm},
              {"seed", c.seed},
              {"lambda0", h.lambda0},
              {"lambda1", h.lambda1},
              {"lambda2", h.lambda2},
              {"lambda3", h.lambda3},
              {"k", h.k},
              {"max_iter", h.max_iter},
              {"tol", h.tol},
              {"init_iter", h.init_iter},
              {"tau", h.tau},
              {"epsilon", h.epsilon},
              {"h_max", std::isfinite(h.h_max) ? json(h.h_max) : json("inf")},
              {"update_order", order},
              {"nmf_max_iter", c.nmf_max_iter},
              {"fit_low", c.fit_low},
              {"fit_high", c.fit_high},
              {"top_t", c.top_t},
              {"bin_width", c.bin_width}};
}

// ---------------------------------------------------------------------------
// helpers

inline std::string sha256_hex(const std::vector<fs::path>& files) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  for (const auto& f : files) {
    const std::string data = io::read_file(f);
    EVP_DigestUpdate(ctx, data.data(), data.size());
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

inline std::vector<std::string> topic_ids(Index k) {
  std::vector<std::string> ids;
  for (Index i = 0; i < k; ++i) ids.push_back(synthetic::padded_id("topic", i + 1));
  return ids;
}

inline std::vector<std::string> numbered_ids(const char* prefix, Index n) {
  std::vector<std::string> ids;
  for (Index i = 0; i < n; ++i) ids.push_back(synthetic::padded_id(prefix, i + 1));
  return ids;
}

inline void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + "\n"); }

// A word-student matrix together with everything needed to build H_ideal.
struct Dataset {
  corpus::WordStudentMatrix matrix;
  corpus::Vocabulary vocab;
  std::vector<double> grades;  // aligned with matrix columns
  std::vector<fs::path> files;
};

inline Dataset load_dataset(const RunConfig& c) {
  Dataset d;
  fs::path matrix_path = c.matrix;
  fs::path grades_path = c.grades;
  if (!c.input.empty()) {
    if (matrix_path.empty()) matrix_path = fs::path(c.input) / "V.coo.csv";
    if (grades_path.empty()) grades_path = fs::path(c.input) / "grades.csv";
  }
  if (matrix_path.empty()) throw InputError("no input matrix: pass --input DIR or --matrix FILE");
  if (grades_path.empty()) throw InputError("no grades: pass --input DIR or --grades FILE");
  d.matrix = io::read_word_student(matrix_path, &d.vocab);
  d.grades = corpus::align_grades(d.matrix.student_ids, io::read_grades(grades_path));
  d.files = {matrix_path, io::meta_path(matrix_path), grades_path};
  return d;
}

inline void write_hist(const fs::path& path, const metrics::Histogram& h) {
  std::string s = "bin_start,bin_end,count\n";
  for (const auto& b : h) {
    s += io::format_double(b.start) + "," + io::format_double(b.end) + "," + std::to_string(b.count) + "\n";
  }
  io::write_file(path, s);
}

inline void write_fit_stats(const fs::path& dir, const std::string& stem, const rasch::FitStats& stats,
                            const std::vector<std::string>& item_ids) {
  const auto report = metrics::infit_report(stats);
  std::string s = "item,infit,outfit,in_range\n";
  for (Index i = 0; i < stats.item_infit.size(); ++i) {
    s += item_ids[static_cast<std::size_t>(i)] + "," + io::format_double(stats.item_infit(i)) + "," +
         io::format_double(stats.item_outfit(i)) + "," +
         (report.in_range[static_cast<std::size_t>(i)] ? "1" : "0") + "\n";
  }
  io::write_file(dir / (stem + ".csv"), s);
  write_hist(dir / (stem + "_hist.csv"), report.histogram);
}

inline void write_person_fit(const fs::path& path, const rasch::FitStats& stats,
                             const std::vector<std::string>& ids) {
  std::string s = "person,infit,outfit\n";
  for (Index j = 0; j < stats.person_infit.size(); ++j) {
    s += ids[static_cast<std::size_t>(j)] + "," + io::format_double(stats.person_infit(j)) + "," +
         io::format_double(stats.person_outfit(j)) + "\n";
  }
  io::write_file(path, s);
}

inline void write_wright(const fs::path& dir, const rasch::RaschParams& p, double bin_width) {
  const auto wm = metrics::wright_map(p, bin_width);
  write_hist(dir / "wright_abilities.csv", wm.abilities);
  write_hist(dir / "wright_difficulties.csv", wm.difficulties);
}

inline std::string metrics_csv(const metrics::MetricSuite& m) {
  return "metric,value\n"
         "neg_log_likelihood," + io::format_double(m.neg_log_likelihood) + "\n"
         "approx_error," + io::format_double(m.approx_error) + "\n"
         "grade_error," + io::format_double(m.grade_error) + "\n"
         "binary_gap," + io::format_double(m.binary_gap) + "\n"
         "neg_log_likelihood_continuous," + io::format_double(m.neg_log_likelihood_continuous) + "\n";
}

// Metric suite, fit statistics on thresholded (primary) and continuous H,
// topic table and Wright-map histograms for a fitted joint model.
inline metrics::MetricSuite write_reports(const fs::path& dir, const joint::JointModel& model,
                                          const Dataset& data, const corpus::HIdeal& ideal,
                                          const RunConfig& c) {
  const auto suite = metrics::metric_suite(model, data.matrix.values, ideal);
  io::write_file(dir / "metrics.csv", metrics_csv(suite));
  const auto items = topic_ids(model.fact.H.rows());
  const auto binary = joint::threshold_H(model.fact.H, model.hyper.tau);
  const auto stats = rasch::fit_statistics(model.params, binary, c.fit_low, c.fit_high);
  write_fit_stats(dir, "infit", stats, items);
  write_person_fit(dir / "person_fit.csv", stats, data.matrix.student_ids);
  write_fit_stats(dir, "infit_continuous",
                  rasch::fit_statistics(model.params, model.fact.H, c.fit_low, c.fit_high), items);
  if (stats.excluded_cells > 0) {
    std::cerr << "warning: " << stats.excluded_cells
              << " cells excluded from fit statistics (degenerate variance)\n";
  }

  std::string topics = "rank,topic,difficulty,terms\n";
  for (const auto& row : metrics::topic_report(model, data.vocab.terms, c.top_t)) {
    std::string terms;
    for (const auto& t : row.terms) terms += (terms.empty() ? "" : " ") + t;
    topics += std::to_string(row.rank) + "," + items[static_cast<std::size_t>(row.topic)] + "," +
              io::format_double(row.difficulty) + "," + terms + "\n";
  }
  io::write_file(dir / "topics.csv", topics);
  write_wright(dir, model.params, c.bin_width);
  return suite;
}

inline void write_joint_model(const fs::path& dir, const joint::JointModel& model,
                              const Dataset& data) {
  io::write_dense_csv(dir / "W.csv", model.fact.W);
  io::write_dense_csv(dir / "H.csv", model.fact.H);
  io::write_vector_csv(dir / "beta.csv", topic_ids(model.params.beta.size()), model.params.beta);
  io::write_vector_csv(dir / "theta.csv", data.matrix.student_ids, model.params.theta);
}

inline void write_trace(const fs::path& path, const joint::IterationTrace& trace) {
  std::string s = "iteration,total,approx,rasch_negll,w_reg,grade,binary\n";
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const auto& o = trace[t].objective;
    s += std::to_string(t) + "," + io::format_double(o.total) + "," + io::format_double(o.approx) + "," +
         io::format_double(o.rasch_negll) + "," + io::format_double(o.w_reg) + "," +
         io::format_double(o.grade) + "," + io::format_double(o.binary) + "\n";
  }
  io::write_file(path, s);
}

// ---------------------------------------------------------------------------
// fit

struct FitOutcome {
  metrics::MetricSuite suite;
  bool converged = false;
};

inline FitOutcome fit_joint(const Dataset& data, const RunConfig& c, const fs::path& dir) {
  const auto ideal = corpus::build_h_ideal(data.grades, c.hyper.k);
  const bool gg = c.algorithm == "ggnmf";
  const auto result = gg ? joint::gg_nmf_fit(data.matrix.values, ideal, c.hyper, c.seed)
                         : joint::fit(data.matrix.values, ideal, c.hyper, c.seed);
  fs::create_directories(dir);
  write_joint_model(dir, result.model, data);
  write_trace(dir / "trace.csv", result.trace);
  FitOutcome out;
  out.converged = result.converged;
  out.suite = write_reports(dir, result.model, data, ideal, c);

  json manifest{{"command", "fit"},
                {"config", config_json(c)},
                {"dataset_hash", sha256_hex(data.files)},
                {"dimensions", {{"m", data.matrix.words()}, {"n", data.matrix.students()}, {"k", c.hyper.k}}},
                {"iterations", result.iterations},
                {"converged", result.converged},
                {"final_objective", result.trace.back().objective.total},
                {"norm_convention", "squared Frobenius"}};
  if (gg) {
    const auto& phase = *result.rasch_phase;
    std::string s = "iteration,log_likelihood,max_delta\n";
    for (std::size_t t = 0; t < phase.trace.size(); ++t) {
      s += std::to_string(t + 1) + "," + io::format_double(phase.trace[t].log_likelihood) + "," +
           io::format_double(phase.trace[t].max_delta) + "\n";
    }
    io::write_file(dir / "rasch_trace.csv", s);
    manifest["structure"] = "two-phase: factorize (grade-guided NMF), then Rasch JML on thresholded H";
    manifest["rasch_phase"] = {{"iterations", phase.iterations}, {"converged", phase.converged}};
    manifest["converged"] = result.converged && phase.converged;
    out.converged = result.converged && phase.converged;
  } else {
    manifest["structure"] = "joint: W, H, beta, theta updated together";
  }
  write_json(dir / "manifest.json", manifest);
  return out;
}

inline void fit_nmf(const Dataset& data, const RunConfig& c, const fs::path& dir) {
  nmf::NmfOptions opts;
  opts.max_iter = c.nmf_max_iter;
  opts.tol = c.hyper.tol;
  const auto result = nmf::nmf_fit(data.matrix.values, c.hyper.k, c.seed, opts);
  fs::create_directories(dir);
  io::write_dense_csv(dir / "W.csv", result.fact.W);
  io::write_dense_csv(dir / "H.csv", result.fact.H);
  std::string s = "iteration,objective\n";
  for (std::size_t t = 0; t < result.trace.size(); ++t) {
    s += std::to_string(t + 1) + "," + io::format_double(result.trace[t]) + "\n";
  }
  io::write_file(dir / "trace.csv", s);
  write_json(dir / "manifest.json",
             json{{"command", "fit"},
                  {"config", config_json(c)},
                  {"dataset_hash", sha256_hex(data.files)},
                  {"k", c.hyper.k},
                  {"seed", c.seed},
                  {"iterations", result.iterations},
                  {"converged", result.converged},
                  {"final_objective", result.trace.empty() ? 0.0 : result.trace.back()}});
}

inline rasch::ResponseMatrix load_responses(const fs::path& path) {
  rasch::ResponseMatrix x = io::is_coordinate_file(path) ? Matrix(io::read_coordinate(path))
                                                          : io::read_dense_csv(path);
  if (x.size() == 0) throw InputError(path.string() + ": empty response matrix");
  if ((x.array() < 0.0).any() || (x.array() > 1.0).any()) {
    throw InputError(path.string() + ": responses must lie in [0,1]");
  }
  return x;
}

inline void fit_rasch(const RunConfig& c, const fs::path& dir) {
  fs::path path = c.matrix;
  if (path.empty() && !c.input.empty()) path = fs::path(c.input) / "responses.csv";
  if (path.empty()) throw InputError("rasch needs --matrix FILE (k x n responses) or --input DIR");
  const auto x = load_responses(path);
  const auto result = rasch::jml_fit(x, rasch::init_params(x, c.hyper.epsilon),
                                     rasch::JmlOptions{c.hyper.tol, c.hyper.max_iter});
  fs::create_directories(dir);
  const auto items = numbered_ids("item", x.rows());
  const auto persons = numbered_ids("person", x.cols());
  io::write_vector_csv(dir / "beta.csv", items, result.params.beta);
  io::write_vector_csv(dir / "theta.csv", persons, result.params.theta);
  std::string s = "iteration,log_likelihood,max_delta\n";
  for (std::size_t t = 0; t < result.trace.size(); ++t) {
    s += std::to_string(t + 1) + "," + io::format_double(result.trace[t].log_likelihood) + "," +
         io::format_double(result.trace[t].max_delta) + "\n";
  }
  io::write_file(dir / "trace.csv", s);
  const auto stats = rasch::fit_statistics(result.params, x, c.fit_low, c.fit_high);
  write_fit_stats(dir, "infit", stats, items);
  write_person_fit(dir / "person_fit.csv", stats, persons);
  write_wright(dir, result.params, c.bin_width);
  write_json(dir / "manifest.json",
             json{{"command", "fit"},
                  {"config", config_json(c)},
                  {"dataset_hash", sha256_hex({path})},
                  {"items", x.rows()},
                  {"persons", x.cols()},
                  {"iterations", result.iterations},
                  {"converged", result.converged},
                  {"log_likelihood", result.trace.empty() ? 0.0 : result.trace.back().log_likelihood}});
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return kOk;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConsistencyError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConsistencyError;
  }
}

inline int cmd_fit(const RunConfig& c) {
  return guarded([&] {
    const fs::path dir = c.out;
    if (c.algorithm == "rasch") {
      fit_rasch(c, dir);
      return;
    }
    if (c.algorithm != "topicresponse" && c.algorithm != "ggnmf" && c.algorithm != "nmf") {
      throw InputError("unknown algorithm '" + c.algorithm + "'");
    }
    const Dataset data = load_dataset(c);
    if (c.algorithm == "nmf") {
      fit_nmf(data, c, dir);
    } else {
      const auto outcome = fit_joint(data, c, dir);
      std::cout << c.algorithm << ": " << (outcome.converged ? "converged" : "iteration cap reached")
                << ", neg_log_likelihood " << outcome.suite.neg_log_likelihood << "\n";
    }
  });
}

// ---------------------------------------------------------------------------
// preprocess

inline int cmd_preprocess(const RunConfig& c) {
  return guarded([&] {
    if (c.posts.empty() || c.grades.empty()) throw InputError("preprocess needs --posts and --grades");
    corpus::PreprocessOptions opts;
    opts.min_token_len = c.min_token_len;
    opts.stem = c.stem;
    if (c.stopwords.empty()) {
      opts.stopwords = corpus::default_stopwords();
    } else {
      auto in = io::open_in(c.stopwords);
      std::string w;
      while (in >> w) opts.stopwords.insert(w);
    }
    const auto docs = io::read_posts(c.posts);
    const auto records = io::read_grades(c.grades);
    const auto pre = corpus::preprocess(docs, opts);
    const auto grades = corpus::align_grades(pre.matrix.student_ids, records);
    const auto ideal = corpus::build_h_ideal(grades, c.hyper.k);
    const auto stats = corpus::corpus_stats(pre.matrix, pre.vocab, c.top_t);

    const fs::path dir = c.out;
    io::write_word_student(dir / "V.coo.csv", pre.matrix, pre.vocab,
                           json{{"stemmer", c.stem ? "porter" : "none"},
                                {"min_token_len", c.min_token_len},
                                {"dropped_students", pre.dropped_students}});
    std::string vocab = "id,term\n";
    for (std::size_t i = 0; i < pre.vocab.terms.size(); ++i) vocab += std::to_string(i) + "," + pre.vocab.terms[i] + "\n";
    io::write_file(dir / "vocab.csv", vocab);
    io::write_grades(dir / "grades.csv", pre.matrix.student_ids, grades);
    std::string hi = "student_id,h_ideal\n";
    for (std::size_t j = 0; j < grades.size(); ++j) {
      hi += pre.matrix.student_ids[j] + "," + std::to_string(ideal.values(static_cast<Index>(j))) + "\n";
    }
    io::write_file(dir / "h_ideal.csv", hi);

    std::string dominant;
    for (const auto& t : stats.dominant_terms) dominant += (dominant.empty() ? "" : " ") + t;
    char sparsity[32];
    std::snprintf(sparsity, sizeof sparsity, "%.2f%%", stats.sparsity_percent);
    io::write_file(dir / "corpus_stats.csv",
                   "students,words_before,words,nonzeros,sparsity_percent,dominant_words\n" +
                       std::to_string(stats.students) + "," + std::to_string(docs.size()) + "," +
                       std::to_string(stats.words) + "," + std::to_string(stats.nonzeros) + "," +
                       io::format_double(stats.sparsity_percent) + "," + dominant + "\n");
    std::cout << "#Students  #Words  Sparsity  Dominated words\n"
              << stats.students << "  " << stats.words << "  " << sparsity << "  " << dominant << "\n";
    if (!pre.dropped_students.empty()) {
      std::cerr << "warning: " << pre.dropped_students.size()
                << " student(s) dropped, every term they used appears in all documents\n";
    }
  });
}

// ---------------------------------------------------------------------------
// report: regenerate reports from a fit directory

inline int cmd_report(const RunConfig& c) {
  return guarded([&] {
    if (c.input.empty()) throw InputError("report needs --input FIT_DIR");
    const fs::path fit_dir = c.input;
    json manifest;
    try {
      manifest = json::parse(io::read_file(fit_dir / "manifest.json"));
    } catch (const json::parse_error& e) {
      throw InputError((fit_dir / "manifest.json").string() + ": " + e.what());
    }
    const json& saved = manifest.at("config");
    RunConfig base = c;
    base.matrix = saved.value("matrix", "");
    base.grades = saved.value("grades", "");
    base.input = saved.value("input", "");
    base.hyper.k = saved.at("k").get<int>();
    base.hyper.lambda0 = saved.at("lambda0").get<double>();
    base.hyper.lambda1 = saved.at("lambda1").get<double>();
    base.hyper.lambda2 = saved.at("lambda2").get<double>();
    base.hyper.lambda3 = saved.at("lambda3").get<double>();
    const Dataset data = load_dataset(base);

    joint::JointModel model;
    model.hyper = base.hyper;
    model.fact.W = io::read_dense_csv(fit_dir / "W.csv");
    model.fact.H = io::read_dense_csv(fit_dir / "H.csv");
    model.params.beta = io::read_vector_csv(fit_dir / "beta.csv").values;
    model.params.theta = io::read_vector_csv(fit_dir / "theta.csv").values;
    const auto ideal = corpus::build_h_ideal(data.grades, base.hyper.k);
    const fs::path out = c.out.empty() || c.out == "out" ? fit_dir : fs::path(c.out);
    fs::create_directories(out);
    const auto suite = write_reports(out, model, data, ideal, c);
    std::cout << metrics_csv(suite);
  });
}

// ---------------------------------------------------------------------------
// simulate

inline int cmd_simulate(const RunConfig& c) {
  return guarded([&] {
    const fs::path dir = c.out;
    const Index k = c.hyper.k;
    if (c.sim_students < 2 || k < 2) throw InputError("simulate needs --students >= 2 and --k >= 2");
    json manifest{{"command", "simulate"}, {"mode", c.sim_mode}, {"seed", c.seed},
                  {"students", c.sim_students}, {"k", k}};
    if (c.sim_mode == "rasch") {
      const auto s = synthetic::rasch_sample(c.sim_students, k, c.seed);
      io::write_dense_csv(dir / "responses.csv", s.responses);
      io::write_vector_csv(dir / "true_beta.csv", numbered_ids("item", k), s.truth.beta);
      io::write_vector_csv(dir / "true_theta.csv", numbered_ids("person", c.sim_students), s.truth.theta);
      manifest["generator"] = "theta ~ N(0,1), beta evenly spaced on [-2,2], Bernoulli responses";
    } else if (c.sim_mode == "corpus") {
      if (c.sim_words < k) throw InputError("simulate needs --words >= --k");
      if (c.sim_noise < 0 || c.sim_tokens_per_topic < 0) throw InputError("noise and tokens must be >= 0");
      synthetic::CorpusSpec spec;
      spec.words = c.sim_words;
      spec.students = c.sim_students;
      spec.topics = k;
      spec.noise = c.sim_noise;
      spec.overlap = c.sim_overlap;
      spec.tokens_per_topic = c.sim_tokens_per_topic;
      const auto pc = synthetic::planted_corpus(spec, c.seed);
      io::write_word_student(dir / "V.coo.csv", pc.matrix, pc.vocab, json{{"synthetic", true}});
      io::write_grades(dir / "grades.csv", pc.matrix.student_ids, pc.grades);
      io::write_dense_csv(dir / "true_W.csv", pc.W);
      io::write_dense_csv(dir / "true_H.csv", pc.H);
      io::write_vector_csv(dir / "true_beta.csv", topic_ids(k), pc.truth.beta);
      io::write_vector_csv(dir / "true_theta.csv", pc.matrix.student_ids, pc.truth.theta);
      manifest["words"] = c.sim_words;
      manifest["noise"] = c.sim_noise;
      manifest["overlap"] = c.sim_overlap;
      manifest["tokens_per_topic"] = c.sim_tokens_per_topic;
      manifest["grade_model"] = "grade_j = 100 * rank(theta_j) / n";
      manifest["generator"] =
          c.sim_tokens_per_topic > 0
              ? "H*: H_ideal_j topics per student by Gumbel-top-k on theta_j - beta_i; V: tf-idf of tokens sampled from W* columns of active topics, max-rescaled"
              : "H*: H_ideal_j topics per student by Gumbel-top-k on theta_j - beta_i; V = W*H* + noise, max-rescaled";
    } else {
      throw InputError("unknown simulate mode '" + c.sim_mode + "' (expected rasch or corpus)");
    }
    write_json(dir / "manifest.json", manifest);
  });
}

// ---------------------------------------------------------------------------
// sweep

// Default grid explored per parameter.
inline std::vector<double> default_grid(const std::string& param) {
  if (param == "lambda0") return {0.01, 0.1, 0.2, 0.3, 0.4, 0.5};
  if (param == "lambda1" || param == "lambda2" || param == "lambda3") return {1e-3, 1e-2, 1e-1, 1, 10, 100};
  if (param == "k") return {5, 10, 15, 20, 25, 30};
  throw InputError("unknown sweep parameter '" + param + "'");
}

inline std::string cell_name(const std::string& param, double value) {
  return param + "=" + io::format_double(value);
}

inline int cmd_sweep(const RunConfig& c) {
  return guarded([&] {
    const std::vector<double> values = c.sweep_values.empty() ? default_grid(c.sweep_param) : c.sweep_values;
    for (const double v : values) {
      if (!(v > 0)) throw InputError("sweep values must be positive");
      if (c.sweep_param == "k" && (v < 2 || v != std::floor(v))) throw InputError("k values must be integers >= 2");
    }
    default_grid(c.sweep_param);  // validates the name
    for (const auto& a : c.sweep_algorithms) {
      if (a != "topicresponse" && a != "ggnmf") throw InputError("sweep algorithms: topicresponse, ggnmf");
    }
    const Dataset data = load_dataset(c);
    const fs::path root = c.out;

    struct Cell {
      double value;
      std::string algorithm;
      std::string status = "ok";
      metrics::MetricSuite suite;
    };
    std::vector<Cell> cells;
    for (const double v : values) {
      for (const auto& a : c.sweep_algorithms) cells.push_back(Cell{v, a, "ok", {}});
    }

    auto run_cell = [&](Cell& cell) {
      RunConfig cc = c;
      cc.algorithm = cell.algorithm;
      auto& h = cc.hyper;
      if (c.sweep_param == "lambda0") h.lambda0 = cell.value;
      else if (c.sweep_param == "lambda1") h.lambda1 = cell.value;
      else if (c.sweep_param == "lambda2") h.lambda2 = cell.value;
      else if (c.sweep_param == "lambda3") h.lambda3 = cell.value;
      else h.k = static_cast<int>(cell.value);
      cc.out = (root / cell_name(c.sweep_param, cell.value) / cell.algorithm).string();
      try {
        const auto outcome = fit_joint(data, cc, cc.out);
        cell.suite = outcome.suite;
        cell.status = outcome.converged ? "ok" : "not_converged";
      } catch (const std::exception& e) {
        cell.status = std::string("failed: ") + e.what();
        std::replace(cell.status.begin(), cell.status.end(), ',', ';');
        std::replace(cell.status.begin(), cell.status.end(), '\n', ' ');
      }
    };

    // Fixed-size pool; each worker pulls the next cell index.
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&] {
      while (true) {
        std::size_t idx;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= cells.size()) return;
          idx = next++;
        }
        run_cell(cells[idx]);
      }
    };
    const int jobs = std::max(1, std::min<int>(c.jobs, static_cast<int>(cells.size())));
    std::vector<std::future<void>> pool;
    for (int t = 0; t < jobs; ++t) pool.push_back(std::async(std::launch::async, worker));
    for (auto& f : pool) f.get();

    std::string s = "param,value,algorithm,status,neg_log_likelihood,approx_error,grade_error,binary_gap\n";
    for (const auto& cell : cells) {
      s += c.sweep_param + "," + io::format_double(cell.value) + "," + cell.algorithm + "," + cell.status + ",";
      if (cell.status.rfind("failed", 0) == 0) {
        s += ",,,\n";
      } else {
        s += io::format_double(cell.suite.neg_log_likelihood) + "," + io::format_double(cell.suite.approx_error) +
             "," + io::format_double(cell.suite.grade_error) + "," + io::format_double(cell.suite.binary_gap) + "\n";
      }
    }
    io::write_file(root / "sweep.csv", s);
    write_json(root / "manifest.json",
               json{{"command", "sweep"}, {"param", c.sweep_param}, {"values", values},
                    {"algorithms", c.sweep_algorithms}, {"base_config", config_json(c)},
                    {"jobs", c.jobs}, {"dataset_hash", sha256_hex(data.files)}});
    std::size_t failed = 0;
    for (const auto& cell : cells) failed += cell.status.rfind("failed", 0) == 0;
    std::cout << "sweep " << c.sweep_param << ": " << cells.size() << " cells, " << failed << " failed\n";
  });
}

}  // namespace topicresponse::cli

#endif  // TOPICRESPONSE_TOOLS_COMMANDS_HPP
