#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "cctree/compositional.hpp"
#include "cctree/flu.hpp"
#include "cctree/io.hpp"
#include "cctree/margins.hpp"
#include "cctree/pruning.hpp"
#include "cctree/simulation.hpp"
#include "cctree/tree.hpp"

namespace cctree::cli {

namespace fs = std::filesystem;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::Schema:
    case ErrorCode::Ingestion:
    case ErrorCode::Input:
    case ErrorCode::NoData:
    case ErrorCode::Boundary: return 2;
    case ErrorCode::Fit:
    case ErrorCode::InsufficientData:
    case ErrorCode::Regression:
    case ErrorCode::Domain: return 3;
    case ErrorCode::Config:
    case ErrorCode::Scenario: return 4;
  }
  return 4;
}

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Input, "cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Config, "cannot open '" + path.string() + "' for writing");
  return out;
}

fs::path make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Config, "cannot create directory '" + dir + "'");
  return fs::path(dir);
}

void report(std::ostream& err, std::string_view code, int status, const std::string& message) {
  std::string escaped;
  for (char c : message) {
    if (c == '"' || c == '\\') escaped += '\\';
    escaped += c == '\n' ? ' ' : c;
  }
  err << "error code=" << code << " exit=" << status << " message=\"" << escaped << "\"\n";
}

struct FitArgs {
  std::string input;
  std::string out_dir = ".";
  std::string family = "clayton";
  std::string pseudo = "empirical";
  double bandwidth = 0.4;
  std::vector<std::string> design;
  Index margin_min_leaf = 20;
  StoppingConfig stopping;
  int folds = 3;
  int repeats = 10;
  std::string rule = "onese";
  std::uint64_t seed = 0;
};

Eigen::MatrixX2d compute_pseudo(const FitArgs& a, const Dataset& data) {
  if (a.pseudo == "empirical") return pseudo_empirical(data).values;
  if (a.pseudo == "kernel") return pseudo_kernel(data, a.bandwidth).values;
  if (a.pseudo == "normal") {
    std::vector<Index> design;
    for (Index j = 0; j < data.num_covariates(); ++j) {
      const auto& c = data.covariates[static_cast<std::size_t>(j)];
      const bool listed = std::find(a.design.begin(), a.design.end(), c.name) != a.design.end();
      if (a.design.empty() ? !c.is_categorical() : listed) design.push_back(j);
    }
    if (design.size() != a.design.size() && !a.design.empty()) {
      throw Error(ErrorCode::Config, "unknown design covariate");
    }
    return pseudo_parametric_normal(data, design).values;
  }
  if (a.pseudo == "margin-tree") {
    MarginTreeConfig mc;
    mc.min_leaf = a.margin_min_leaf;
    mc.folds = a.folds;
    mc.repeats = a.repeats;
    mc.seed = derive_seed(a.seed, 0x6d617267ULL);
    return pseudo_margin_tree(data, mc).pseudo.values;
  }
  if (a.pseudo == "discrete") {
    ModalityGrouping grouping;
    std::vector<int> key(data.covariates.size());
    for (Index i = 0; i < data.rows(); ++i) {
      for (std::size_t j = 0; j < key.size(); ++j) key[j] = data.covariates[j].level(i);
      grouping.emplace(key, static_cast<int>(grouping.size()));
    }
    return pseudo_discrete(data, grouping).values;
  }
  throw Error(ErrorCode::Config, "unknown pseudo-observation method '" + a.pseudo + "'");
}

void cmd_fit(const FitArgs& a) {
  const CopulaSpec spec{parse_family(a.family)};
  const CvConfig cv{a.folds, a.repeats, a.seed, parse_rule(a.rule)};
  auto in = open_in(a.input);
  const Dataset data = read_fit_csv(in);
  const Eigen::MatrixX2d pseudo = compute_pseudo(a, data);
  const ConditionalFit fit = fit_conditional(spec, pseudo, data, a.stopping, cv);

  const fs::path dir = make_dir(a.out_dir);
  auto tree_out = open_out(dir / "tree.json");
  write_tree_json(tree_out, fit.selected);
  auto maximal_out = open_out(dir / "maximal_tree.json");
  write_tree_json(maximal_out, fit.maximal);
  auto path_out = open_out(dir / "prune_path.tsv");
  write_prune_path_tsv(path_out, fit.path);
  auto cv_tsv = open_out(dir / "cv_report.tsv");
  write_cv_report_tsv(cv_tsv, fit.report);
  auto cv_json = open_out(dir / "cv_report.json");
  write_cv_report_json(cv_json, fit.report);
  auto pred_out = open_out(dir / "predictions.csv");
  write_predictions_csv(pred_out, fit.selected, covariate_matrix(data));
}

struct PredictArgs {
  std::string tree;
  std::string input;
  std::string output = "-";
};

void cmd_predict(const PredictArgs& a, std::ostream& out) {
  auto tree_in = open_in(a.tree);
  const CopulaTree tree = read_tree_json(tree_in);
  auto in = open_in(a.input);
  const Eigen::MatrixXd x = read_covariates_csv(in, tree.schema());
  if (a.output == "-") {
    write_predictions_csv(out, tree, x);
  } else {
    auto file = open_out(a.output);
    write_predictions_csv(file, tree, x);
  }
}

struct PruneArgs {
  std::string tree;
  std::string out_dir = ".";
  std::optional<double> lambda;
  std::optional<Index> n;
};

void cmd_prune(const PruneArgs& a, std::ostream& out) {
  auto in = open_in(a.tree);
  const CopulaTree tree = read_tree_json(in);
  const PrunePath path = prune_path(tree);
  const fs::path dir = make_dir(a.out_dir);
  auto path_out = open_out(dir / "prune_path.tsv");
  write_prune_path_tsv(path_out, path);
  if (a.lambda) {
    const std::size_t i = select_penalized(path, *a.lambda, a.n.value_or(tree.root().n_obs));
    auto sub = open_out(dir / "pruned_tree.json");
    write_tree_json(sub, path.subtree(tree, i));
    out << "selected_k=" << path.entries[i].n_leaves << '\n';
  }
}

struct SimulateArgs {
  std::string preset = "desk";
  std::vector<std::string> families{"clayton", "frank", "gumbel"};
  std::vector<std::string> surfaces{"step", "steep-sigmoid", "gentle-sigmoid"};
  std::vector<std::string> sources{"U", "V", "W"};
  std::optional<int> replications;
  std::optional<Index> n;
  std::uint64_t seed = 0;
  int folds = 3;
  int repeats = 2;
  std::string rule = "maxmean";
  Index min_leaf = 50;
  std::string out_dir = ".";
  bool dry_run = false;
};

StudyConfig study_config(const SimulateArgs& a) {
  StudyConfig c;
  if (a.preset == "paper") {
    c = StudyConfig::paper();
  } else if (a.preset != "desk") {
    throw Error(ErrorCode::Config, "unknown preset '" + a.preset + "'");
  }
  if (a.replications) c.replications = *a.replications;
  if (a.n) c.n = *a.n;
  c.seed = a.seed;
  c.families.clear();
  for (const auto& f : a.families) c.families.push_back(parse_family(f));
  c.surfaces.clear();
  for (const auto& s : a.surfaces) c.surfaces.push_back(parse_surface(s));
  c.pipeline.sources.clear();
  for (const auto& s : a.sources) {
    if (s == "U" || s == "u") {
      c.pipeline.sources.push_back(PseudoSource::U);
    } else if (s == "V" || s == "v") {
      c.pipeline.sources.push_back(PseudoSource::V);
    } else if (s == "W" || s == "w") {
      c.pipeline.sources.push_back(PseudoSource::W);
    } else {
      throw Error(ErrorCode::Config, "unknown pseudo-observation source '" + s + "'");
    }
  }
  c.pipeline.cv = {a.folds, a.repeats, 0, parse_rule(a.rule)};
  c.pipeline.stopping.min_leaf = a.min_leaf;
  c.pipeline.stopping.validate();
  if (c.replications < 1 || c.n < 1) throw Error(ErrorCode::Config, "replications and n must be positive");
  return c;
}

void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const StudyConfig c = study_config(a);
  nlohmann::json echo{{"preset", a.preset},     {"replications", c.replications},
                      {"n", c.n},               {"seed", c.seed},
                      {"families", a.families}, {"surfaces", a.surfaces},
                      {"sources", a.sources},   {"cv_folds", a.folds},
                      {"cv_repeats", a.repeats}, {"cv_rule", a.rule},
                      {"min_leaf", a.min_leaf}};
  out << echo.dump() << '\n';
  if (a.dry_run) return;
  const StudyResult result = run_study(c);
  const fs::path dir = make_dir(a.out_dir);
  auto tsv = open_out(dir / "study.tsv");
  write_study_tsv(tsv, result);
  auto summary = open_out(dir / "summary.json");
  write_study_summary_json(summary, result, c);
}

struct FluArgs {
  std::string input;
  std::string out_dir = ".";
  std::string family = "frank";
  std::uint64_t seed = 0;
  Index min_leaf = 20;
  Index margin_min_leaf = 10;
  int folds = 3;
  int repeats = 10;
  std::string rule = "onese";
};

void cmd_flu(const FluArgs& a, std::ostream& out) {
  FluConfig config;
  config.copula = CopulaSpec{parse_family(a.family)};
  config.stopping.min_leaf = a.min_leaf;
  config.margins.min_leaf = a.margin_min_leaf;
  config.margins.folds = a.folds;
  config.margins.repeats = a.repeats;
  config.margins.seed = derive_seed(a.seed, 0x6d617267ULL);
  config.cv = {a.folds, a.repeats, a.seed, parse_rule(a.rule)};
  auto in = open_in(a.input);
  const FluResult result = run_flu(read_weekly_csv(in), config);

  const fs::path dir = make_dir(a.out_dir);
  auto rows = open_out(dir / "unit_seasons.csv");
  write_unit_seasons_csv(rows, result.unit_seasons);
  auto leaves = open_out(dir / "leaf_report.tsv");
  write_leaf_report_tsv(leaves, result.leaves);
  auto summary = open_out(dir / "flu_summary.json");
  write_flu_summary_json(summary, result);
  auto tree = open_out(dir / "tree.json");
  write_tree_json(tree, result.fit.selected);
  out << "leaves=" << result.leaves.size() << " benchmark_loglik=" << result.benchmark_loglik
      << " conditional_loglik=" << result.conditional_loglik << '\n';
}

struct FixtureArgs {
  std::string output;
  FluFixtureConfig config;
};

void cmd_fixture(const FixtureArgs& a) {
  auto out = open_out(a.output);
  write_weekly_csv(out, generate_flu_fixture(a.config));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Regression trees for conditional copulas"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value configuration file; command-line flags take precedence");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit, prune and cross-validate a copula tree");
  fit_cmd->add_option("--input", fit.input, "CSV with y_ responses and x_name:num|cat covariates")->required();
  fit_cmd->add_option("--out-dir", fit.out_dir, "Directory for the output artifacts");
  fit_cmd->add_option("--family", fit.family, "clayton, frank or gumbel");
  fit_cmd->add_option("--pseudo", fit.pseudo, "empirical, kernel, normal, margin-tree or discrete");
  fit_cmd->add_option("--bandwidth", fit.bandwidth, "Kernel bandwidth");
  fit_cmd->add_option("--design", fit.design, "Covariates of the normal margin model");
  fit_cmd->add_option("--margin-min-leaf", fit.margin_min_leaf, "Minimum leaf size of margin trees");
  fit_cmd->add_option("--min-leaf", fit.stopping.min_leaf, "Minimum rows per leaf");
  fit_cmd->add_option("--min-gain", fit.stopping.min_gain, "Minimum log-likelihood gain of a split");
  fit_cmd->add_option("--max-leaves", fit.stopping.max_leaves, "Leaf cap of the maximal tree");
  fit_cmd->add_option("--folds", fit.folds, "Cross-validation folds");
  fit_cmd->add_option("--repeats", fit.repeats, "Cross-validation repeats");
  fit_cmd->add_option("--rule", fit.rule, "onese or maxmean");
  fit_cmd->add_option("--seed", fit.seed, "Seed of the fold assignment")->required();

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "Route covariate rows through a fitted tree");
  predict_cmd->add_option("--tree", predict_args.tree, "Tree JSON")->required();
  predict_cmd->add_option("--input", predict_args.input, "CSV with x_name:num|cat columns")->required();
  predict_cmd->add_option("--output", predict_args.output, "Output CSV, - for stdout");

  PruneArgs prune;
  auto* prune_cmd = app.add_subcommand("prune", "Weakest-link path and penalized subtree of a tree");
  prune_cmd->add_option("--tree", prune.tree, "Tree JSON")->required();
  prune_cmd->add_option("--out-dir", prune.out_dir, "Directory for the output artifacts");
  prune_cmd->add_option("--lambda", prune.lambda, "Penalty per leaf on the mean log-likelihood");
  prune_cmd->add_option("--n", prune.n, "Sample size of the penalty (default: root count)");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the simulation study");
  sim_cmd->add_option("--preset", sim.preset, "desk (50 x 1000) or paper (500 x 1000)");
  sim_cmd->add_option("--families", sim.families, "Copula families");
  sim_cmd->add_option("--surfaces", sim.surfaces, "step, steep-sigmoid, gentle-sigmoid");
  sim_cmd->add_option("--sources", sim.sources, "U, V, W");
  sim_cmd->add_option("--replications", sim.replications, "Override the preset replication count");
  sim_cmd->add_option("--n", sim.n, "Override the preset sample size");
  sim_cmd->add_option("--folds", sim.folds, "Cross-validation folds");
  sim_cmd->add_option("--repeats", sim.repeats, "Cross-validation repeats");
  sim_cmd->add_option("--rule", sim.rule, "onese or maxmean");
  sim_cmd->add_option("--min-leaf", sim.min_leaf, "Minimum rows per leaf");
  sim_cmd->add_option("--seed", sim.seed, "Base seed")->required();
  sim_cmd->add_option("--out-dir", sim.out_dir, "Directory for study.tsv and summary.json");
  sim_cmd->add_flag("--dry-run", sim.dry_run, "Print the resolved configuration only");

  FluArgs flu;
  auto* flu_cmd = app.add_subcommand("flu", "Influenza subtype application pipeline");
  flu_cmd->add_option("--input", flu.input, "Weekly counts CSV")->required();
  flu_cmd->add_option("--out-dir", flu.out_dir, "Directory for the output artifacts");
  flu_cmd->add_option("--family", flu.family, "clayton, frank or gumbel");
  flu_cmd->add_option("--min-leaf", flu.min_leaf, "Minimum rows per copula-tree leaf");
  flu_cmd->add_option("--margin-min-leaf", flu.margin_min_leaf, "Minimum rows per margin-tree leaf");
  flu_cmd->add_option("--folds", flu.folds, "Cross-validation folds");
  flu_cmd->add_option("--repeats", flu.repeats, "Cross-validation repeats");
  flu_cmd->add_option("--rule", flu.rule, "onese or maxmean");
  flu_cmd->add_option("--seed", flu.seed, "Seed of the fold assignments")->required();

  FixtureArgs fixture;
  auto* fixture_cmd = app.add_subcommand("fixture", "Write a synthetic weekly surveillance CSV");
  fixture_cmd->add_option("--output", fixture.output, "Output CSV")->required();
  fixture_cmd->add_option("--seed", fixture.config.seed, "Generator seed")->required();
  fixture_cmd->add_option("--units", fixture.config.units, "Number of units");
  fixture_cmd->add_option("--seasons", fixture.config.seasons, "Number of seasons");
  fixture_cmd->add_option("--first-season", fixture.config.first_season, "First season");
  fixture_cmd->add_option("--shift-season", fixture.config.shift_season, "First season after the shift");
  fixture_cmd->add_option("--tau-before", fixture.config.tau_before, "Kendall tau before the shift");
  fixture_cmd->add_option("--tau-after", fixture.config.tau_after, "Kendall tau from the shift on");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    report(err, "config", 4, e.what());
    return 4;
  }

  try {
    if (*fit_cmd) cmd_fit(fit);
    if (*predict_cmd) cmd_predict(predict_args, out);
    if (*prune_cmd) cmd_prune(prune, out);
    if (*sim_cmd) cmd_simulate(sim, out);
    if (*flu_cmd) cmd_flu(flu, out);
    if (*fixture_cmd) cmd_fixture(fixture);
  } catch (const Error& e) {
    const int status = exit_code(e.code());
    report(err, error_code_name(e.code()), status, e.what());
    return status;
  } catch (const std::exception& e) {
    report(err, "internal", 3, e.what());
    return 3;
  }
  return 0;
}

}  // namespace cctree::cli
