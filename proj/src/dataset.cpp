#include "cctree/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cctree/error.hpp"

namespace cctree {

Covariate Covariate::numeric(std::string name, Eigen::VectorXd values) {
  Covariate c;
  c.name = std::move(name);
  c.kind = CovariateKind::Numeric;
  c.values = std::move(values);
  return c;
}

Covariate Covariate::categorical(std::string name, const std::vector<int>& codes,
                                 std::vector<std::string> levels) {
  Covariate c;
  c.name = std::move(name);
  c.kind = CovariateKind::Categorical;
  c.levels = std::move(levels);
  c.values.resize(static_cast<Index>(codes.size()));
  for (std::size_t i = 0; i < codes.size(); ++i) {
    c.values[static_cast<Index>(i)] = codes[i];
  }
  return c;
}

Covariate Covariate::categorical(std::string name, const std::vector<std::string>& labels) {
  std::vector<std::string> levels(labels);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < levels.size(); ++i) index[levels[i]] = static_cast<int>(i);
  std::vector<int> codes;
  codes.reserve(labels.size());
  for (const auto& label : labels) codes.push_back(index.at(label));
  return categorical(std::move(name), codes, std::move(levels));
}

void Dataset::validate() const {
  const Index n = rows();
  if (n < 1) throw Error(ErrorCode::Schema, "dataset has no rows");
  if (!responses.allFinite()) throw Error(ErrorCode::Schema, "responses contain missing values");
  for (const auto& c : covariates) {
    if (c.values.size() != n) {
      throw Error(ErrorCode::Schema, "covariate '" + c.name + "' has " +
                                         std::to_string(c.values.size()) + " rows, expected " +
                                         std::to_string(n));
    }
    if (!c.values.allFinite()) {
      throw Error(ErrorCode::Schema, "covariate '" + c.name + "' contains missing values");
    }
    if (c.is_categorical()) {
      if (c.levels.empty()) {
        throw Error(ErrorCode::Schema, "categorical covariate '" + c.name + "' has no levels");
      }
      const auto m = static_cast<double>(c.levels.size());
      for (Index i = 0; i < n; ++i) {
        const double code = c.values[i];
        if (code < 0.0 || code >= m || code != std::floor(code)) {
          throw Error(ErrorCode::Schema,
                      "covariate '" + c.name + "' has an invalid level code at row " +
                          std::to_string(i));
        }
      }
    }
  }
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  Dataset out;
  out.response_names = response_names;
  out.responses.resize(static_cast<Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.responses.row(static_cast<Index>(i)) = responses.row(rows[i]);
  }
  out.covariates.reserve(covariates.size());
  for (const auto& c : covariates) {
    Covariate s = c;
    s.values.resize(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) s.values[static_cast<Index>(i)] = c.values[rows[i]];
    out.covariates.push_back(std::move(s));
  }
  return out;
}

Eigen::VectorXd Dataset::covariate_row(Index row) const {
  Eigen::VectorXd x(num_covariates());
  for (Index j = 0; j < num_covariates(); ++j) {
    x[j] = covariates[static_cast<std::size_t>(j)].values[row];
  }
  return x;
}

std::vector<CovariateSchema> Dataset::schema() const {
  std::vector<CovariateSchema> out;
  out.reserve(covariates.size());
  for (const auto& c : covariates) out.push_back({c.name, c.kind, c.levels});
  return out;
}

}  // namespace cctree
