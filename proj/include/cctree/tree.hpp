#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cctree/copula.hpp"
#include "cctree/dataset.hpp"

namespace cctree {

namespace detail {
class LikelihoodGrid;
}

struct StoppingConfig {
  Index min_leaf = 50;
  double min_gain = 0.0;
  int max_leaves = 32;
  Index min_fit_n = 10;

  /// Throws Error(Config) unless min_leaf >= min_fit_n >= 2, max_leaves >= 1 and min_gain >= 0.
  void validate() const;
};

enum class SplitKind { Numeric, Categorical };

struct SplitRule {
  Index feature = 0;
  SplitKind kind = SplitKind::Numeric;
  double threshold = 0.0;        // numeric: left iff x <= threshold
  std::vector<int> left_levels;  // categorical, ascending; levels outside go right

  bool goes_left(double x) const;
  bool operator==(const SplitRule&) const = default;
};

struct TreeNode {
  int id = 0;
  Index n_obs = 0;
  double theta = 0.0;
  double tau = 0.0;
  double loglik = 0.0;
  std::optional<SplitRule> rule;
  int left = -1;
  int right = -1;
  int parent = -1;
  int depth = 0;

  bool is_leaf() const { return !rule.has_value(); }
};

/// Binary tree with a fitted copula parameter at every node. The root has id 0;
/// ids need not be dense (pruned copies keep the ids of the tree they came from).
class CopulaTree {
 public:
  CopulaTree() = default;
  CopulaTree(CopulaSpec spec, std::vector<TreeNode> nodes, std::vector<CovariateSchema> schema,
             StoppingConfig stopping);

  const CopulaSpec& spec() const { return spec_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::vector<CovariateSchema>& schema() const { return schema_; }
  const StoppingConfig& stopping() const { return stopping_; }

  const TreeNode& root() const { return nodes_.front(); }
  const TreeNode& node(int id) const;
  bool contains(int id) const;

  int n_leaves() const;
  std::vector<int> leaf_ids() const;

  /// Leaf reached by a covariate vector (categorical entries are level indices;
  /// indices outside the schema's level table are routed right).
  int leaf_of(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Node ids from the root down to the leaf of x.
  std::vector<int> path_of(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  CopulaSpec spec_;
  std::vector<TreeNode> nodes_;  // ascending id
  std::vector<CovariateSchema> schema_;
  StoppingConfig stopping_;
};

struct Prediction {
  double theta = 0.0;
  double tau = 0.0;
  int leaf = 0;
};

/// Maximum-likelihood fit of the copula to the pseudo-observations at a node.
FitResult node_fit(const CopulaSpec& spec, const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                   Index min_fit_n = 10);

/// Groups of levels of a categorical feature ordered by increasing per-group
/// theta_hat (ties by lowest level). Each observed level is its own group
/// unless it has fewer than min_fit_n rows, in which case it joins the
/// well-populated level whose mean of (u - 1/2)(v - 1/2) is closest.
std::vector<std::vector<int>> order_modalities(const CopulaSpec& spec,
                                               const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                                               const Dataset& data, Index feature,
                                               Index min_fit_n = 10);

struct SplitCandidate {
  SplitRule rule;
  double gain = 0.0;
  FitResult left;
  FitResult right;
};

/// Best admissible split of all rows of (pseudo, data), or nothing when no
/// candidate beats stopping.min_gain. Ties go to the lowest feature index, then
/// the lowest threshold or the shortest left set.
std::optional<SplitCandidate> find_optimal_split(const CopulaSpec& spec,
                                                 const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                                                 const Dataset& data,
                                                 const StoppingConfig& stopping);

/// Grows the maximal tree breadth-first until no node can be split or the
/// leaf cap is reached.
CopulaTree build_maximal_tree(const CopulaSpec& spec,
                              const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                              const Dataset& data, const StoppingConfig& stopping);

/// Same, on a subset of rows, reusing a likelihood grid built on all rows.
CopulaTree build_maximal_tree(const CopulaSpec& spec,
                              const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                              const Dataset& data, const StoppingConfig& stopping,
                              std::span<const Index> rows, const detail::LikelihoodGrid& grid);

Prediction predict(const CopulaTree& tree, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Sum over rows of the log-density at the parameter of each row's leaf.
double tree_loglik(const CopulaTree& tree, const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                   const Dataset& data);

struct MinGainCalibration {
  double min_gain = 0.0;
  std::vector<double> null_gains;  // best root gain per permutation, ascending
};

/// Null distribution of the root split gain obtained by permuting the
/// pseudo-observation rows against the covariates; min_gain is its (1 - alpha)
/// quantile.
MinGainCalibration calibrate_min_gain(const CopulaSpec& spec,
                                      const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                                      const Dataset& data, const StoppingConfig& stopping,
                                      int permutations, double alpha, std::uint64_t seed);

}  // namespace cctree
