#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cctree/compositional.hpp"
#include "cctree/copula.hpp"
#include "cctree/dataset.hpp"
#include "cctree/margins.hpp"
#include "cctree/pruning.hpp"
#include "cctree/tree.hpp"

namespace cctree {

/// Synthetic surveillance data with the ingestion schema. Each unit-season
/// draws an ILR point whose means depend on the unit's zone and whose two
/// coordinates are Frank-coupled with tau_before for seasons before
/// shift_season and tau_after from it on; the season's cases are spread over
/// its weeks.
struct FluFixtureConfig {
  int units = 80;
  int first_season = 2010;
  int seasons = 9;
  int zones = 18;
  double tau_before = -0.2;
  double tau_after = 0.45;
  int shift_season = 2014;
  double sparse_fraction = 0.05;  // unit-seasons given fewer than 50 cases
  std::uint64_t seed = 0;
};

std::vector<WeeklyRecord> generate_flu_fixture(const FluFixtureConfig& config);

struct FluConfig {
  CopulaSpec copula{Family::Frank};
  AggregationOptions aggregation;
  MarginTreeConfig margins{10, 32, 3, 10, 0, SelectionRule::OneSE};
  StoppingConfig stopping{20, 0.0, 32, 10};
  CvConfig cv{3, 10, 0, SelectionRule::OneSE};
};

struct LeafReport {
  int leaf = 0;
  Index n = 0;
  double tau = 0.0;
  double theta = 0.0;
  std::string rules;  // conjunction of the conditions leading to the leaf
};

struct FluResult {
  std::vector<UnitSeason> unit_seasons;
  Dataset data;  // ILR responses; covariates season and itz (categorical)
  MarginTreeFit margins;
  ConditionalFit fit;
  double benchmark_loglik = 0.0;
  double conditional_loglik = 0.0;
  std::vector<LeafReport> leaves;
};

/// Unit-seasons as a dataset of ILR coordinates with categorical season and
/// zone covariates. Throws Error(NoData) when the list is empty.
Dataset flu_dataset(const std::vector<UnitSeason>& rows);

/// Aggregation, ILR, margin-tree pseudo-observations, copula tree and
/// cross-validated pruning.
FluResult run_flu(const std::vector<WeeklyRecord>& records, const FluConfig& config);

/// Human-readable conditions from the root to a node, joined by " & ".
std::string describe_path(const CopulaTree& tree, int node);

/// True when any internal node of the tree splits on the named covariate.
bool splits_on(const CopulaTree& tree, const std::string& covariate);

}  // namespace cctree
