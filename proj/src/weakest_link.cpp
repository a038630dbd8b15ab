#include "cctree/weakest_link.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "cctree/detail/compensated_sum.hpp"
#include "cctree/error.hpp"
#include "cctree/stats.hpp"

namespace cctree {

SelectionRule parse_rule(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "maxmean" || lower == "max-mean" || lower == "max_mean") {
    return SelectionRule::MaxMean;
  }
  if (lower == "onese" || lower == "one-se" || lower == "one_se" || lower == "1se") {
    return SelectionRule::OneSE;
  }
  throw Error(ErrorCode::Config, "unknown selection rule '" + std::string(name) + "'");
}

std::string_view rule_name(SelectionRule rule) {
  return rule == SelectionRule::MaxMean ? "maxmean" : "onese";
}

double frontier_score(std::span<const ScoredNode> nodes, std::span<const int> frontier) {
  std::vector<int> ids(frontier.begin(), frontier.end());
  std::sort(ids.begin(), ids.end());
  detail::CompensatedSum sum;
  for (int id : ids) sum.add(nodes[static_cast<std::size_t>(id)].score);
  return sum.value();
}

namespace {

struct SubtreeStats {
  double score = 0.0;
  int leaves = 0;
};

// Post-order pass over the live subtree; fills stats for every live node.
SubtreeStats collect(std::span<const ScoredNode> nodes, const std::vector<char>& is_leaf, int id,
                     std::vector<SubtreeStats>& stats) {
  const auto& node = nodes[static_cast<std::size_t>(id)];
  SubtreeStats s;
  if (is_leaf[static_cast<std::size_t>(id)]) {
    s = {node.score, 1};
  } else {
    const SubtreeStats l = collect(nodes, is_leaf, node.left, stats);
    const SubtreeStats r = collect(nodes, is_leaf, node.right, stats);
    s = {l.score + r.score, l.leaves + r.leaves};
  }
  stats[static_cast<std::size_t>(id)] = s;
  return s;
}

void gather_frontier(std::span<const ScoredNode> nodes, const std::vector<char>& is_leaf,
                     int id, std::vector<int>& out) {
  if (is_leaf[static_cast<std::size_t>(id)]) {
    out.push_back(id);
    return;
  }
  const auto& node = nodes[static_cast<std::size_t>(id)];
  gather_frontier(nodes, is_leaf, node.left, out);
  gather_frontier(nodes, is_leaf, node.right, out);
}

PruneStage make_stage(std::span<const ScoredNode> nodes, const std::vector<char>& is_leaf) {
  PruneStage stage;
  gather_frontier(nodes, is_leaf, 0, stage.frontier);
  std::sort(stage.frontier.begin(), stage.frontier.end());
  stage.n_leaves = static_cast<int>(stage.frontier.size());
  stage.score = frontier_score(nodes, stage.frontier);
  return stage;
}

}  // namespace

std::vector<PruneStage> weakest_link_path(std::span<const ScoredNode> nodes) {
  std::vector<PruneStage> path;
  if (nodes.empty()) return path;
  std::vector<char> is_leaf(nodes.size(), 0);
  for (const auto& n : nodes) {
    is_leaf[static_cast<std::size_t>(n.id)] = n.left < 0 ? 1 : 0;
  }
  path.push_back(make_stage(nodes, is_leaf));

  std::vector<SubtreeStats> stats(nodes.size());
  while (!is_leaf[0]) {
    std::fill(stats.begin(), stats.end(), SubtreeStats{});
    collect(nodes, is_leaf, 0, stats);
    int weakest = -1;
    double weakest_g = std::numeric_limits<double>::infinity();
    for (const auto& n : nodes) {
      const auto id = static_cast<std::size_t>(n.id);
      if (is_leaf[id] || stats[id].leaves == 0) continue;
      const double g = (stats[id].score - n.score) / (stats[id].leaves - 1);
      bool better = weakest < 0 || g < weakest_g;
      if (!better && g == weakest_g) {
        const auto& w = nodes[static_cast<std::size_t>(weakest)];
        better = n.depth > w.depth || (n.depth == w.depth && n.id < w.id);
      }
      if (better) {
        weakest = n.id;
        weakest_g = g;
      }
    }
    is_leaf[static_cast<std::size_t>(weakest)] = 1;
    path.push_back(make_stage(nodes, is_leaf));
  }
  return path;
}

CvSelection aggregate_cv(std::span<const int> leaf_counts, std::span<const FoldCurve> folds,
                         SelectionRule rule) {
  if (leaf_counts.empty()) throw Error(ErrorCode::Config, "no leaf counts to aggregate");
  std::vector<int> ks(leaf_counts.begin(), leaf_counts.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  CvSelection out;
  for (int k : ks) {
    std::vector<double> values;
    values.reserve(folds.size());
    for (const auto& curve : folds) {
      int best_k = 0;
      double value = 0.0;
      for (const auto& [fk, score] : curve) {
        if (fk <= k && fk > best_k) {
          best_k = fk;
          value = score;
        }
      }
      if (best_k > 0) values.push_back(value);
    }
    LeafCountSummary s;
    s.n_leaves = k;
    s.count = static_cast<int>(values.size());
    s.mean = mean(values);
    s.se = values.size() > 1 ? stddev(values) / std::sqrt(static_cast<double>(values.size()))
                             : 0.0;
    out.per_k.push_back(s);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < out.per_k.size(); ++i) {
    if (out.per_k[i].mean > out.per_k[best].mean) best = i;
  }
  out.chosen_k = out.per_k[best].n_leaves;
  if (rule == SelectionRule::OneSE) {
    const double threshold = out.per_k[best].mean - out.per_k[best].se;
    for (const auto& s : out.per_k) {
      if (s.mean >= threshold) {
        out.chosen_k = s.n_leaves;
        break;
      }
    }
  }
  return out;
}

}  // namespace cctree
