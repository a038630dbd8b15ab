#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cctree/dataset.hpp"
#include "cctree/weakest_link.hpp"

namespace cctree {

enum class PseudoMethod {
  Empirical,
  Kernel,
  ParametricNormal,
  MarginTree,
  DiscreteModality,
  Oracle,  // true copula sample, used by the simulation study
};

std::string_view pseudo_method_name(PseudoMethod method);

/// Estimated probability-integral transforms of the responses, row-aligned
/// with the source dataset; every entry lies strictly inside (0, 1).
struct PseudoObservations {
  Eigen::MatrixX2d values;
  PseudoMethod method = PseudoMethod::Empirical;
  double bandwidth = 0.0;  // kernel estimator only
  bool fallback = false;   // margin trees fell back to the global ECDF
};

/// Column-wise average rank / (n + 1), ignoring covariates.
PseudoObservations pseudo_empirical(const Dataset& data);

/// Covariate-weighted ECDF with a product Gaussian kernel of bandwidth h
/// (self-term included), clamped to [eps, 1 - eps]; eps defaults to 1/(2n).
PseudoObservations pseudo_kernel(const Dataset& data, double h,
                                 std::optional<double> clamp_eps = std::nullopt);

/// Normal margins with unit variance and a linear mean in the design
/// covariates: U = Phi(Y - mu_hat), clamped to [1/(2n), 1 - 1/(2n)].
PseudoObservations pseudo_parametric_normal(const Dataset& data, std::span<const Index> design);

/// Class-of-modalities estimator. Keys are tuples of level indices, one per
/// (categorical) covariate; values are class labels.
using ModalityGrouping = std::map<std::vector<int>, int>;

PseudoObservations pseudo_discrete(const Dataset& data, const ModalityGrouping& grouping);

struct MarginTreeConfig {
  Index min_leaf = 20;
  int max_leaves = 32;
  int folds = 3;
  int repeats = 10;
  std::uint64_t seed = 0;
  SelectionRule rule = SelectionRule::OneSE;
};

struct MarginSplit {
  Index feature = 0;
  bool categorical = false;
  double threshold = 0.0;        // numeric: left iff x <= threshold
  std::vector<int> left_levels;  // categorical: left iff level in set; unseen levels go right

  bool goes_left(double x) const;
};

struct MarginNode {
  int id = 0;
  int left = -1;
  int right = -1;
  int depth = 0;
  Index n_obs = 0;
  double mean = 0.0;
  double sse = 0.0;
  std::optional<MarginSplit> split;

  bool is_leaf() const { return left < 0; }
};

/// Least-squares regression tree of one response column with the sorted
/// training responses of each leaf, giving a mixture of leaf-wise ECDFs.
class MarginTree {
 public:
  MarginTree() = default;
  MarginTree(std::vector<MarginNode> nodes, std::vector<CovariateSchema> schema,
             std::vector<std::vector<double>> leaf_values);

  const std::vector<MarginNode>& nodes() const { return nodes_; }
  const std::vector<CovariateSchema>& schema() const { return schema_; }
  int n_leaves() const;
  int leaf_of(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Within-leaf mid-rank ECDF, (#less + (#equal + 1)/2) / (n_leaf + 1).
  double cdf(const Eigen::Ref<const Eigen::VectorXd>& x, double y) const;

 private:
  std::vector<MarginNode> nodes_;
  std::vector<CovariateSchema> schema_;
  std::vector<std::vector<double>> leaf_values_;  // indexed by node id
};

struct MarginTreeFit {
  PseudoObservations pseudo;
  std::vector<MarginTree> trees;  // one per response column; empty on fallback
};

/// Per response column: grow a least-squares tree, prune it by cross-validated
/// squared error, and use leaf-wise average ranks / (n_leaf + 1).
MarginTreeFit pseudo_margin_tree(const Dataset& data, const MarginTreeConfig& config);

}  // namespace cctree
