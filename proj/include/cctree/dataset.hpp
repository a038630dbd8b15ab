#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cctree {

using Eigen::Index;

enum class CovariateKind { Numeric, Categorical };

/// One covariate column. Categorical columns store level indices (as doubles)
/// into `levels`.
struct Covariate {
  std::string name;
  CovariateKind kind = CovariateKind::Numeric;
  Eigen::VectorXd values;
  std::vector<std::string> levels;

  bool is_categorical() const { return kind == CovariateKind::Categorical; }
  int level(Index row) const { return static_cast<int>(values[row]); }

  static Covariate numeric(std::string name, Eigen::VectorXd values);
  static Covariate categorical(std::string name, const std::vector<int>& codes,
                               std::vector<std::string> levels);
  /// Levels are the distinct labels in lexicographic order.
  static Covariate categorical(std::string name, const std::vector<std::string>& labels);
};

/// Name, kind and level table of a covariate; what a fitted model needs to
/// route new observations.
struct CovariateSchema {
  std::string name;
  CovariateKind kind = CovariateKind::Numeric;
  std::vector<std::string> levels;
};

/// n rows of a bivariate response and d covariates.
struct Dataset {
  Eigen::MatrixX2d responses;
  std::vector<Covariate> covariates;
  std::vector<std::string> response_names{"y1", "y2"};

  Index rows() const { return responses.rows(); }
  Index num_covariates() const { return static_cast<Index>(covariates.size()); }

  /// Throws Error(Schema) on size mismatches, missing values or bad level codes.
  void validate() const;

  Dataset subset(std::span<const Index> rows) const;

  /// Covariate vector of one row (level indices for categorical columns).
  Eigen::VectorXd covariate_row(Index row) const;

  std::vector<CovariateSchema> schema() const;
};

}  // namespace cctree
