#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cctree/dataset.hpp"
#include "cctree/flu.hpp"
#include "cctree/pruning.hpp"
#include "cctree/simulation.hpp"
#include "cctree/tree.hpp"

namespace cctree {

inline constexpr int kFormatVersion = 1;

/// JSON document {format_version, family, stopping, covariates, nodes}.
void write_tree_json(std::ostream& out, const CopulaTree& tree);
CopulaTree read_tree_json(std::istream& in);

/// Fit input: a header with exactly two `y_<name>` response columns and any
/// number of `x_<name>:num` / `x_<name>:cat` covariates. Throws Error(Schema).
Dataset read_fit_csv(std::istream& in);

/// Covariate rows laid out by the schema, looked up by column name. Categorical
/// labels outside the level table map to index -1, which every split routes right.
Eigen::MatrixXd read_covariates_csv(std::istream& in, const std::vector<CovariateSchema>& schema);

/// Rows of covariates laid out by the schema, from a dataset with the same names.
Eigen::MatrixXd covariate_matrix(const Dataset& data);

void write_prune_path_tsv(std::ostream& out, const PrunePath& path);
PrunePath read_prune_path_tsv(std::istream& in);

void write_cv_report_tsv(std::ostream& out, const CvReport& report);
void write_cv_report_json(std::ostream& out, const CvReport& report);

/// row_id, leaf_id, theta, tau for each row of x.
void write_predictions_csv(std::ostream& out, const CopulaTree& tree, const Eigen::MatrixXd& x);

/// Long format: scenario, family, source, model, metric, value, rep.
void write_study_tsv(std::ostream& out, const StudyResult& result);

/// Median and quartiles per (scenario, family, source, model, metric).
void write_study_summary_json(std::ostream& out, const StudyResult& result,
                              const StudyConfig& config);

/// unit_id, season, y1, y2, itz.
void write_unit_seasons_csv(std::ostream& out, const std::vector<UnitSeason>& rows);

/// leaf, n, tau, theta, rules.
void write_leaf_report_tsv(std::ostream& out, const std::vector<LeafReport>& leaves);
void write_flu_summary_json(std::ostream& out, const FluResult& result);

}  // namespace cctree
