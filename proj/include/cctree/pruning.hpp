#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cctree/tree.hpp"
#include "cctree/weakest_link.hpp"

namespace cctree {

struct PruneEntry {
  int n_leaves = 0;
  double train_loglik = 0.0;
  std::vector<int> frontier;  // leaf ids of the pruned subtree, ascending
};

/// Nested subtrees of one maximal tree, from the full tree (largest K) down to
/// the root alone.
struct PrunePath {
  std::vector<PruneEntry> entries;

  /// Materializes entry i as a tree that keeps the original node ids.
  CopulaTree subtree(const CopulaTree& tree, std::size_t i) const;
};

/// Weakest-link collapse driven by the stored training log-likelihoods: the
/// internal node with the smallest gain per extra leaf goes first.
PrunePath prune_path(const CopulaTree& tree);

/// Copy of `tree` in which every node of `frontier` becomes a leaf.
CopulaTree prune_to(const CopulaTree& tree, std::span<const int> frontier);

/// Index of the entry maximizing train_loglik / n - lambda * K; ties go to the smaller K.
std::size_t select_penalized(const PrunePath& path, double lambda, Index n);

struct LambdaInterval {
  double lo = 0.0;
  double hi = 0.0;  // +inf for the root entry
  bool empty() const { return lo > hi; }
};

/// Range of lambda values for which select_penalized returns entry i.
LambdaInterval penalty_interval(const PrunePath& path, std::size_t i, Index n);

struct CvConfig {
  int folds = 3;
  int repeats = 10;
  std::uint64_t seed = 0;
  SelectionRule rule = SelectionRule::OneSE;
};

struct CvReport {
  std::vector<LeafCountSummary> per_k;  // ascending K; mean validation log-likelihood per fold
  int chosen_k = 1;
  LambdaInterval lambda;  // derived from the full-data path at chosen_k
  std::uint64_t seed = 0;
  int folds = 0;
  int repeats = 0;
  SelectionRule rule = SelectionRule::OneSE;
};

/// Everything produced by fitting the conditional model on one dataset.
struct ConditionalFit {
  CopulaTree maximal;
  PrunePath path;
  CvReport report;
  CopulaTree selected;
};

/// Repeated k-fold cross-validation of the pruning path. Each fold grows a
/// maximal tree on its training rows and scores every stage of its own path
/// by held-out log-likelihood; stages are matched to the full-data path by
/// leaf count (nearest smaller K when a fold lacks one).
CvReport cross_validate(const CopulaSpec& spec, const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                        const Dataset& data, const StoppingConfig& stopping,
                        const CvConfig& cv);

/// Maximal tree, pruning path, cross-validation and the selected subtree.
ConditionalFit fit_conditional(const CopulaSpec& spec,
                               const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                               const Dataset& data, const StoppingConfig& stopping,
                               const CvConfig& cv);

}  // namespace cctree
