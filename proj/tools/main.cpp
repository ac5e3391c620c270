#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

struct Flag {
  const char* name;  // long flag, '-' form of the config key
  const char* help;
};

const std::vector<Flag> kFlags = {
    {"posts", "posts file: JSON lines {student_id,text} or id<TAB/,>text"},
    {"grades", "grades CSV with header student_id,grade"},
    {"matrix", "word-student matrix (coordinate CSV) or k x n response CSV for --algorithm rasch"},
    {"input", "directory produced by preprocess/simulate, or a fit directory for report"},
    {"stopwords", "stopword list, one per line (default: built-in English list)"},
    {"out", "output directory"},
    {"algorithm", "topicresponse | ggnmf | nmf | rasch"},
    {"seed", "random seed"},
    {"jobs", "parallel sweep cells"},
    {"lambda0", "Rasch coupling weight"},
    {"lambda1", "W regularization weight"},
    {"lambda2", "grade-guidance weight"},
    {"lambda3", "binary-regularization weight"},
    {"k", "number of topics"},
    {"max-iter", "outer iteration cap"},
    {"tol", "relative objective-change tolerance"},
    {"init-iter", "NMF iterations used for initialization"},
    {"tau", "threshold for binarizing H"},
    {"epsilon", "pseudo-count for Rasch initialization"},
    {"h-max", "upper bound on H entries (inf disables)"},
    {"update-order", "block order, e.g. W,H,rasch"},
    {"nmf-max-iter", "iteration cap for --algorithm nmf"},
    {"fit-low", "lower infit bound"},
    {"fit-high", "upper infit bound"},
    {"top-t", "terms per topic in reports"},
    {"bin-width", "Wright-map bin width (logits)"},
    {"min-token-len", "shortest token kept"},
    {"stem", "apply Porter stemming (true/false)"},
    {"param", "sweep parameter: lambda0..lambda3 or k"},
    {"values", "comma-separated sweep values (default: the standard grid)"},
    {"algorithms", "comma-separated sweep algorithms"},
    {"mode", "simulate mode: corpus | rasch"},
    {"students", "simulated students"},
    {"words", "simulated vocabulary size"},
    {"noise", "simulated noise level"},
    {"overlap", "probability a simulated word loads on a second topic"},
    {"tokens-per-topic", "sampled tokens per active topic (0 = expected matrix)"},
};

}  // namespace

int main(int argc, char** argv) {
  namespace cli = topicresponse::cli;
  CLI::App app{"Joint topic modeling and Rasch estimation over student forum posts"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "flat key = value configuration file");
  std::map<std::string, std::string> given;
  for (const auto& f : kFlags) {
    app.add_option(std::string("--") + f.name, given[f.name], f.help);
  }

  auto* preprocess = app.add_subcommand("preprocess", "build the tf-idf word-student matrix");
  auto* fit = app.add_subcommand("fit", "fit a model and write reports");
  auto* sweep = app.add_subcommand("sweep", "run a hyperparameter grid");
  auto* report = app.add_subcommand("report", "regenerate reports from a fit directory");
  auto* simulate = app.add_subcommand("simulate", "write a synthetic corpus or response matrix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kInputError;
  }

  cli::RunConfig config;
  try {
    if (!config_path.empty()) cli::load_config_file(config, config_path);
    for (const auto& f : kFlags) {
      if (app.count(std::string("--") + f.name) == 0) continue;
      std::string key = f.name;
      std::replace(key.begin(), key.end(), '-', '_');
      cli::apply_setting(config, key, given[f.name]);
    }
    config.hyper.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kInputError;
  }

  if (*preprocess) return cli::cmd_preprocess(config);
  if (*fit) return cli::cmd_fit(config);
  if (*sweep) return cli::cmd_sweep(config);
  if (*report) return cli::cmd_report(config);
  if (*simulate) return cli::cmd_simulate(config);
  return cli::kInputError;
}
