#include "cctree/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "cctree/error.hpp"
#include "cctree/stats.hpp"

namespace cctree {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return *end == '\0' && std::isfinite(out);
}

// Reads the next non-comment, non-blank line.
bool next_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (!t.empty() && t.front() != '#') return true;
  }
  return false;
}

void version_line(std::ostream& out) { out << "# format_version: " << kFormatVersion << '\n'; }

struct ColumnSpec {
  std::string name;
  CovariateKind kind;
};

// Parses "x_<name>:num" or "x_<name>:cat"; false for any other header.
bool parse_covariate_header(const std::string& header, ColumnSpec& spec) {
  if (header.rfind("x_", 0) != 0) return false;
  const auto colon = header.rfind(':');
  if (colon == std::string::npos || colon <= 2) {
    throw Error(ErrorCode::Schema, "covariate column '" + header + "' lacks a :num or :cat suffix");
  }
  const std::string kind = header.substr(colon + 1);
  if (kind != "num" && kind != "cat") {
    throw Error(ErrorCode::Schema, "covariate column '" + header + "' has unknown type '" + kind + "'");
  }
  spec.name = header.substr(2, colon - 2);
  spec.kind = kind == "num" ? CovariateKind::Numeric : CovariateKind::Categorical;
  return true;
}

json rule_to_json(const SplitRule& rule) {
  json j{{"feature", rule.feature}};
  if (rule.kind == SplitKind::Numeric) {
    j["kind"] = "numeric";
    j["threshold"] = rule.threshold;
  } else {
    j["kind"] = "categorical";
    j["left_levels"] = rule.left_levels;
  }
  return j;
}

}  // namespace

void write_tree_json(std::ostream& out, const CopulaTree& tree) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["family"] = std::string(family_name(tree.spec().family));
  const auto& s = tree.stopping();
  doc["stopping"] = {{"min_leaf", s.min_leaf},
                     {"min_gain", s.min_gain},
                     {"max_leaves", s.max_leaves},
                     {"min_fit_n", s.min_fit_n}};
  json covs = json::array();
  for (const auto& c : tree.schema()) {
    json jc{{"name", c.name}, {"kind", c.kind == CovariateKind::Numeric ? "numeric" : "categorical"}};
    if (c.kind == CovariateKind::Categorical) jc["levels"] = c.levels;
    covs.push_back(jc);
  }
  doc["covariates"] = covs;
  json nodes = json::array();
  for (const auto& n : tree.nodes()) {
    json jn{{"id", n.id},         {"n", n.n_obs},         {"theta", n.theta},
            {"tau", n.tau},       {"loglik", n.loglik},   {"depth", n.depth},
            {"parent", n.parent}};
    if (n.rule) {
      jn["rule"] = rule_to_json(*n.rule);
      jn["left"] = n.left;
      jn["right"] = n.right;
    }
    nodes.push_back(jn);
  }
  doc["nodes"] = nodes;
  out << doc.dump(2) << '\n';
}

CopulaTree read_tree_json(std::istream& in) {
  json doc;
  try {
    in >> doc;
    if (doc.at("format_version").get<int>() != kFormatVersion) {
      throw Error(ErrorCode::Schema, "unsupported tree format_version");
    }
    const CopulaSpec spec{parse_family(doc.at("family").get<std::string>())};
    StoppingConfig stopping;
    const auto& js = doc.at("stopping");
    stopping.min_leaf = js.at("min_leaf").get<Index>();
    stopping.min_gain = js.at("min_gain").get<double>();
    stopping.max_leaves = js.at("max_leaves").get<int>();
    stopping.min_fit_n = js.at("min_fit_n").get<Index>();

    std::vector<CovariateSchema> schema;
    for (const auto& jc : doc.at("covariates")) {
      CovariateSchema c;
      c.name = jc.at("name").get<std::string>();
      const auto kind = jc.at("kind").get<std::string>();
      if (kind == "categorical") {
        c.kind = CovariateKind::Categorical;
        c.levels = jc.at("levels").get<std::vector<std::string>>();
      } else if (kind != "numeric") {
        throw Error(ErrorCode::Schema, "unknown covariate kind '" + kind + "'");
      }
      schema.push_back(std::move(c));
    }
    std::vector<TreeNode> nodes;
    for (const auto& jn : doc.at("nodes")) {
      TreeNode n;
      n.id = jn.at("id").get<int>();
      n.n_obs = jn.at("n").get<Index>();
      n.theta = jn.at("theta").get<double>();
      n.tau = jn.at("tau").get<double>();
      n.loglik = jn.at("loglik").get<double>();
      n.depth = jn.value("depth", 0);
      n.parent = jn.value("parent", -1);
      if (jn.contains("rule")) {
        const auto& jr = jn.at("rule");
        SplitRule r;
        r.feature = jr.at("feature").get<Index>();
        if (r.feature < 0 || r.feature >= static_cast<Index>(schema.size())) {
          throw Error(ErrorCode::Schema, "split feature out of range");
        }
        if (jr.at("kind").get<std::string>() == "numeric") {
          r.threshold = jr.at("threshold").get<double>();
        } else {
          r.kind = SplitKind::Categorical;
          r.left_levels = jr.at("left_levels").get<std::vector<int>>();
        }
        n.rule = std::move(r);
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
      }
      nodes.push_back(std::move(n));
    }
    return CopulaTree(spec, std::move(nodes), std::move(schema), stopping);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("malformed tree JSON: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config || e.code() == ErrorCode::Input) {
      throw Error(ErrorCode::Schema, e.what());
    }
    throw;
  }
}

Dataset read_fit_csv(std::istream& in) {
  std::string line;
  if (!next_line(in, line)) throw Error(ErrorCode::Schema, "input has no header");
  const auto header = split(line, ',');
  std::vector<std::size_t> y_cols;
  std::vector<std::string> y_names;
  std::vector<std::pair<std::size_t, ColumnSpec>> x_cols;
  for (std::size_t k = 0; k < header.size(); ++k) {
    ColumnSpec spec;
    if (header[k].rfind("y_", 0) == 0) {
      y_cols.push_back(k);
      y_names.push_back(header[k].substr(2));
    } else if (parse_covariate_header(header[k], spec)) {
      x_cols.push_back({k, spec});
    }
  }
  if (y_cols.size() != 2) {
    throw Error(ErrorCode::Schema, "expected exactly two y_ response columns, found " +
                                       std::to_string(y_cols.size()));
  }

  std::vector<std::array<double, 2>> responses;
  std::vector<std::vector<std::string>> raw(x_cols.size());
  std::size_t row = 0;
  while (next_line(in, line)) {
    ++row;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::Schema, "row " + std::to_string(row) + " has " +
                                         std::to_string(cells.size()) + " fields, expected " +
                                         std::to_string(header.size()));
    }
    std::array<double, 2> y{};
    for (int j = 0; j < 2; ++j) {
      if (!parse_double(cells[y_cols[static_cast<std::size_t>(j)]], y[static_cast<std::size_t>(j)])) {
        throw Error(ErrorCode::Schema, "row " + std::to_string(row) + ": bad or missing response");
      }
    }
    responses.push_back(y);
    for (std::size_t c = 0; c < x_cols.size(); ++c) {
      const std::string& cell = cells[x_cols[c].first];
      if (cell.empty() || cell == "NA") {
        throw Error(ErrorCode::Schema, "row " + std::to_string(row) + ": missing value in x_" +
                                           x_cols[c].second.name);
      }
      raw[c].push_back(cell);
    }
  }
  if (responses.empty()) throw Error(ErrorCode::Schema, "input has no data rows");

  Dataset d;
  d.response_names = y_names;
  d.responses.resize(static_cast<Index>(responses.size()), 2);
  for (std::size_t i = 0; i < responses.size(); ++i) {
    d.responses(static_cast<Index>(i), 0) = responses[i][0];
    d.responses(static_cast<Index>(i), 1) = responses[i][1];
  }
  for (std::size_t c = 0; c < x_cols.size(); ++c) {
    const auto& spec = x_cols[c].second;
    if (spec.kind == CovariateKind::Categorical) {
      d.covariates.push_back(Covariate::categorical(spec.name, raw[c]));
      continue;
    }
    Eigen::VectorXd v(static_cast<Index>(raw[c].size()));
    for (std::size_t i = 0; i < raw[c].size(); ++i) {
      if (!parse_double(raw[c][i], v[static_cast<Index>(i)])) {
        throw Error(ErrorCode::Schema, "row " + std::to_string(i + 1) + ": '" + raw[c][i] +
                                           "' is not a number in x_" + spec.name);
      }
    }
    d.covariates.push_back(Covariate::numeric(spec.name, std::move(v)));
  }
  d.validate();
  return d;
}

Eigen::MatrixXd read_covariates_csv(std::istream& in, const std::vector<CovariateSchema>& schema) {
  std::string line;
  if (!next_line(in, line)) throw Error(ErrorCode::Schema, "input has no header");
  const auto header = split(line, ',');
  std::vector<std::size_t> cols;
  for (const auto& s : schema) {
    bool found = false;
    for (std::size_t k = 0; k < header.size(); ++k) {
      ColumnSpec spec;
      if (parse_covariate_header(header[k], spec) && spec.name == s.name) {
        if (spec.kind != s.kind) {
          throw Error(ErrorCode::Schema, "column x_" + s.name + " has the wrong type");
        }
        cols.push_back(k);
        found = true;
        break;
      }
    }
    if (!found) throw Error(ErrorCode::Schema, "missing covariate column x_" + s.name);
  }

  std::vector<Eigen::VectorXd> rows;
  std::size_t row = 0;
  while (next_line(in, line)) {
    ++row;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::Schema, "row " + std::to_string(row) + " has the wrong field count");
    }
    Eigen::VectorXd x(static_cast<Index>(schema.size()));
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const std::string& cell = cells[cols[j]];
      if (schema[j].kind == CovariateKind::Numeric) {
        if (!parse_double(cell, x[static_cast<Index>(j)])) {
          throw Error(ErrorCode::Schema, "row " + std::to_string(row) + ": bad value in x_" +
                                             schema[j].name);
        }
      } else {
        const auto& levels = schema[j].levels;
        const auto it = std::find(levels.begin(), levels.end(), cell);
        x[static_cast<Index>(j)] = it != levels.end() ? static_cast<double>(it - levels.begin()) : -1.0;
      }
    }
    rows.push_back(std::move(x));
  }
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(schema.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = rows[i].transpose();
  return out;
}

Eigen::MatrixXd covariate_matrix(const Dataset& data) {
  Eigen::MatrixXd out(data.rows(), data.num_covariates());
  for (Index j = 0; j < data.num_covariates(); ++j) {
    out.col(j) = data.covariates[static_cast<std::size_t>(j)].values;
  }
  return out;
}

void write_prune_path_tsv(std::ostream& out, const PrunePath& path) {
  version_line(out);
  out << "K\ttrain_loglik\tfrontier\n";
  for (const auto& e : path.entries) {
    out << e.n_leaves << '\t' << num(e.train_loglik) << '\t';
    for (std::size_t k = 0; k < e.frontier.size(); ++k) out << (k ? ";" : "") << e.frontier[k];
    out << '\n';
  }
}

PrunePath read_prune_path_tsv(std::istream& in) {
  std::string line;
  if (!next_line(in, line) || split(line, '\t').size() != 3) {
    throw Error(ErrorCode::Schema, "prune path needs the K, train_loglik, frontier header");
  }
  PrunePath path;
  while (next_line(in, line)) {
    const auto cells = split(line, '\t');
    PruneEntry e;
    double k = 0.0;
    if (cells.size() != 3 || !parse_double(cells[0], k) || !parse_double(cells[1], e.train_loglik)) {
      throw Error(ErrorCode::Schema, "malformed prune path row");
    }
    e.n_leaves = static_cast<int>(k);
    for (const auto& id : split(cells[2], ';')) e.frontier.push_back(std::stoi(id));
    path.entries.push_back(std::move(e));
  }
  return path;
}

void write_cv_report_tsv(std::ostream& out, const CvReport& report) {
  version_line(out);
  out << "K\tmean_val_loglik\tse\tn_folds\n";
  for (const auto& s : report.per_k) {
    out << s.n_leaves << '\t' << num(s.mean) << '\t' << num(s.se) << '\t' << s.count << '\n';
  }
}

void write_cv_report_json(std::ostream& out, const CvReport& report) {
  json per_k = json::array();
  for (const auto& s : report.per_k) {
    per_k.push_back({{"K", s.n_leaves}, {"mean_val_loglik", s.mean}, {"se", s.se}, {"n_folds", s.count}});
  }
  json lambda{{"lo", report.lambda.lo}};
  lambda["hi"] = std::isfinite(report.lambda.hi) ? json(report.lambda.hi) : json("inf");
  const json doc{{"format_version", kFormatVersion},
                 {"chosen_k", report.chosen_k},
                 {"lambda_interval", lambda},
                 {"seed", report.seed},
                 {"folds", report.folds},
                 {"repeats", report.repeats},
                 {"rule", std::string(rule_name(report.rule))},
                 {"per_k", per_k}};
  out << doc.dump(2) << '\n';
}

void write_predictions_csv(std::ostream& out, const CopulaTree& tree, const Eigen::MatrixXd& x) {
  version_line(out);
  out << "row_id,leaf_id,theta,tau\n";
  for (Index i = 0; i < x.rows(); ++i) {
    const Prediction p = predict(tree, x.row(i).transpose());
    out << i << ',' << p.leaf << ',' << num(p.theta) << ',' << num(p.tau) << '\n';
  }
}

namespace {

const char* const kMetricNames[] = {"mse_tau", "mse_copula", "loglik", "n_splits"};

double metric_value(const ModelMetrics& m, int k) {
  switch (k) {
    case 0: return m.mse_tau;
    case 1: return m.mse_copula;
    case 2: return m.loglik;
    default: return m.n_splits;
  }
}

}  // namespace

void write_study_tsv(std::ostream& out, const StudyResult& result) {
  version_line(out);
  out << "scenario\tfamily\tsource\tmodel\tmetric\tvalue\trep\n";
  for (const auto& r : result.records) {
    for (int k = 0; k < 4; ++k) {
      out << surface_name(r.surface) << '\t' << family_name(r.family) << '\t'
          << source_name(r.source) << '\t' << model_name(r.model) << '\t' << kMetricNames[k] << '\t'
          << num(metric_value(r.metrics, k)) << '\t' << r.rep << '\n';
    }
  }
}

void write_study_summary_json(std::ostream& out, const StudyResult& result,
                              const StudyConfig& config) {
  using Key = std::tuple<int, int, int, int, int>;  // family, surface, source, model, metric
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : result.records) {
    for (int k = 0; k < 4; ++k) {
      groups[{static_cast<int>(r.family), static_cast<int>(r.surface), static_cast<int>(r.source),
              static_cast<int>(r.model), k}]
          .push_back(metric_value(r.metrics, k));
    }
  }
  json cells = json::array();
  for (auto& [key, values] : groups) {
    const auto [family, surface, source, model, metric] = key;
    cells.push_back({{"scenario", std::string(surface_name(static_cast<TauSurface>(surface)))},
                     {"family", std::string(family_name(static_cast<Family>(family)))},
                     {"source", std::string(source_name(static_cast<PseudoSource>(source)))},
                     {"model", std::string(model_name(static_cast<ModelKind>(model)))},
                     {"metric", kMetricNames[metric]},
                     {"median", median(values)},
                     {"q1", quantile(values, 0.25)},
                     {"q3", quantile(values, 0.75)},
                     {"count", values.size()}});
  }
  const json doc{{"format_version", kFormatVersion},
                 {"replications", config.replications},
                 {"n", config.n},
                 {"seed", config.seed},
                 {"cv_folds", config.pipeline.cv.folds},
                 {"cv_repeats", config.pipeline.cv.repeats},
                 {"cv_rule", std::string(rule_name(config.pipeline.cv.rule))},
                 {"min_leaf", config.pipeline.stopping.min_leaf},
                 {"clamped_rows", result.clamped_rows},
                 {"metrics", {"mse_tau", "mse_copula", "loglik", "n_splits"}},
                 {"cells", cells}};
  out << doc.dump(2) << '\n';
}

void write_unit_seasons_csv(std::ostream& out, const std::vector<UnitSeason>& rows) {
  version_line(out);
  out << "unit_id,season,y1,y2,itz\n";
  for (const auto& r : rows) {
    const IlrPoint p = ilr_forward(r.composition);
    out << r.unit_id << ',' << r.season << ',' << num(p.y1) << ',' << num(p.y2) << ',' << r.itz
        << '\n';
  }
}

void write_leaf_report_tsv(std::ostream& out, const std::vector<LeafReport>& leaves) {
  version_line(out);
  out << "leaf\tn\ttau\ttheta\trules\n";
  for (const auto& l : leaves) {
    out << l.leaf << '\t' << l.n << '\t' << num(l.tau) << '\t' << num(l.theta) << '\t' << l.rules
        << '\n';
  }
}

void write_flu_summary_json(std::ostream& out, const FluResult& result) {
  json leaves = json::array();
  for (const auto& l : result.leaves) {
    leaves.push_back({{"leaf", l.leaf}, {"n", l.n}, {"tau", l.tau}, {"theta", l.theta}, {"rules", l.rules}});
  }
  const json doc{{"format_version", kFormatVersion},
                 {"family", std::string(family_name(result.fit.maximal.spec().family))},
                 {"unit_seasons", result.unit_seasons.size()},
                 {"benchmark_loglik", result.benchmark_loglik},
                 {"conditional_loglik", result.conditional_loglik},
                 {"chosen_k", result.fit.report.chosen_k},
                 {"margin_fallback", result.margins.pseudo.fallback},
                 {"leaves", leaves}};
  out << doc.dump(2) << '\n';
}

}  // namespace cctree
