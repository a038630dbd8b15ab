#pragma once

#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace cctree {

/// Model selection rule applied to cross-validated scores (higher is better).
enum class SelectionRule {
  MaxMean,  // best mean validation score
  OneSE,    // Breiman: smallest tree within one standard error of the best
};

SelectionRule parse_rule(std::string_view name);
std::string_view rule_name(SelectionRule rule);

/// Minimal view of a binary tree for pruning. Ids are dense (0..N-1, the index
/// in the span); `score` is the node's fit quality as a leaf, higher is better.
struct ScoredNode {
  int id = 0;
  int left = -1;
  int right = -1;
  int depth = 0;
  double score = 0.0;
};

/// A pruned subtree, identified by its leaves.
struct PruneStage {
  int n_leaves = 0;
  double score = 0.0;         // sum of frontier scores
  std::vector<int> frontier;  // leaf ids, ascending
};

/// Weakest-link collapse sequence from the full tree down to the root.
/// At each step the internal node minimizing
///   (score(subtree at t) - score(t)) / (leaves(t) - 1)
/// is collapsed; ties go to the deepest node, then the lowest id.
std::vector<PruneStage> weakest_link_path(std::span<const ScoredNode> nodes);

/// Sum of scores over the given ids in ascending-id order.
double frontier_score(std::span<const ScoredNode> nodes, std::span<const int> frontier);

struct LeafCountSummary {
  int n_leaves = 0;
  double mean = 0.0;
  double se = 0.0;
  int count = 0;
};

/// Validation curve of one fold: (leaf count, validation score) per path stage.
using FoldCurve = std::vector<std::pair<int, double>>;

struct CvSelection {
  std::vector<LeafCountSummary> per_k;  // ascending leaf count
  int chosen_k = 1;
};

/// Aggregates fold curves at the requested leaf counts. A fold lacking a
/// given count contributes its stage with the nearest smaller count.
CvSelection aggregate_cv(std::span<const int> leaf_counts, std::span<const FoldCurve> folds,
                         SelectionRule rule);

}  // namespace cctree
