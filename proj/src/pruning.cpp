#include "cctree/pruning.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "cctree/detail/compensated_sum.hpp"
#include "cctree/detail/likelihood_grid.hpp"
#include "cctree/error.hpp"
#include "cctree/random.hpp"

namespace cctree {

CopulaTree prune_to(const CopulaTree& tree, std::span<const int> frontier) {
  std::vector<int> cut(frontier.begin(), frontier.end());
  std::sort(cut.begin(), cut.end());
  for (int id : cut) {
    if (!tree.contains(id)) {
      throw Error(ErrorCode::Input, "frontier node " + std::to_string(id) + " is not in the tree");
    }
  }
  std::vector<TreeNode> nodes;
  std::deque<int> work{0};
  while (!work.empty()) {
    TreeNode n = tree.node(work.front());
    work.pop_front();
    if (std::binary_search(cut.begin(), cut.end(), n.id)) {
      n.rule.reset();
      n.left = n.right = -1;
    } else if (!n.is_leaf()) {
      work.push_back(n.left);
      work.push_back(n.right);
    }
    nodes.push_back(std::move(n));
  }
  return CopulaTree(tree.spec(), std::move(nodes), tree.schema(), tree.stopping());
}

CopulaTree PrunePath::subtree(const CopulaTree& tree, std::size_t i) const {
  return prune_to(tree, entries.at(i).frontier);
}

PrunePath prune_path(const CopulaTree& tree) {
  const auto& nodes = tree.nodes();
  std::map<int, int> dense;
  for (std::size_t i = 0; i < nodes.size(); ++i) dense[nodes[i].id] = static_cast<int>(i);

  std::vector<ScoredNode> scored;
  scored.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    scored.push_back({static_cast<int>(i), n.is_leaf() ? -1 : dense.at(n.left),
                      n.is_leaf() ? -1 : dense.at(n.right), n.depth, n.loglik});
  }
  PrunePath path;
  for (const auto& stage : weakest_link_path(scored)) {
    PruneEntry e;
    e.n_leaves = stage.n_leaves;
    e.train_loglik = stage.score;
    for (int k : stage.frontier) e.frontier.push_back(nodes[static_cast<std::size_t>(k)].id);
    std::sort(e.frontier.begin(), e.frontier.end());
    path.entries.push_back(std::move(e));
  }
  return path;
}

std::size_t select_penalized(const PrunePath& path, double lambda, Index n) {
  if (path.entries.empty()) throw Error(ErrorCode::Input, "empty pruning path");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::Config, "lambda must be non-negative");
  const auto nn = static_cast<double>(n);
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < path.entries.size(); ++i) {
    const auto& e = path.entries[i];
    const double score = e.train_loglik / nn - lambda * e.n_leaves;
    if (score > best_score ||
        (score == best_score && e.n_leaves < path.entries[best].n_leaves)) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

LambdaInterval penalty_interval(const PrunePath& path, std::size_t i, Index n) {
  const auto nn = static_cast<double>(n);
  const auto& ei = path.entries.at(i);
  LambdaInterval out{0.0, std::numeric_limits<double>::infinity()};
  for (const auto& ej : path.entries) {
    const double dk = ej.n_leaves - ei.n_leaves;
    if (dk == 0.0) continue;
    const double slope = (ej.train_loglik - ei.train_loglik) / (nn * dk);
    if (dk > 0.0) {
      out.lo = std::max(out.lo, slope);
    } else {
      out.hi = std::min(out.hi, slope);
    }
  }
  return out;
}

namespace {

void check_cv(const Dataset& data, const StoppingConfig& stopping, const CvConfig& cv) {
  if (cv.folds < 2) throw Error(ErrorCode::Config, "cross-validation needs at least 2 folds");
  if (cv.repeats < 1) throw Error(ErrorCode::Config, "cross-validation needs at least 1 repeat");
  if (data.rows() < cv.folds * 2 * stopping.min_leaf) {
    throw Error(ErrorCode::InsufficientData,
                "cross-validation needs at least folds * 2 * min_leaf = " +
                    std::to_string(cv.folds * 2 * stopping.min_leaf) + " rows, got " +
                    std::to_string(data.rows()));
  }
}

// Held-out log-likelihood of every stage of the fold tree's pruning path.
FoldCurve score_fold(const CopulaTree& tree, const PrunePath& path,
                     const Eigen::Ref<const Eigen::MatrixX2d>& pseudo, const Dataset& data,
                     std::span<const Index> valid) {
  const auto& nodes = tree.nodes();
  const int max_id = nodes.back().id;
  std::vector<LogDensity> density;
  density.reserve(static_cast<std::size_t>(max_id) + 1);
  for (int id = 0; id <= max_id; ++id) {
    density.emplace_back(tree.spec(), tree.contains(id) ? tree.node(id).theta
                                                        : tree.spec().independence_theta());
  }
  // Per validation row: the (node id, log-density) pairs along its root-to-leaf path.
  std::vector<std::vector<std::pair<int, double>>> trails;
  trails.reserve(valid.size());
  for (Index r : valid) {
    std::vector<std::pair<int, double>> trail;
    for (int id : tree.path_of(data.covariate_row(r))) {
      trail.push_back({id, density[static_cast<std::size_t>(id)](pseudo(r, 0), pseudo(r, 1))});
    }
    trails.push_back(std::move(trail));
  }

  FoldCurve curve;
  std::vector<char> in_frontier(static_cast<std::size_t>(max_id) + 1);
  for (const auto& e : path.entries) {
    std::fill(in_frontier.begin(), in_frontier.end(), 0);
    for (int id : e.frontier) in_frontier[static_cast<std::size_t>(id)] = 1;
    detail::CompensatedSum sum;
    for (const auto& trail : trails) {
      for (const auto& [id, value] : trail) {
        if (in_frontier[static_cast<std::size_t>(id)]) {
          sum.add(value);
          break;
        }
      }
    }
    curve.push_back({e.n_leaves, sum.value()});
  }
  return curve;
}

CvReport run_cv(const CopulaSpec& spec, const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                const Dataset& data, const StoppingConfig& stopping, const CvConfig& cv,
                const detail::LikelihoodGrid& grid, const PrunePath& full_path) {
  const Index n = data.rows();
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});

  std::vector<FoldCurve> curves;
  for (int rep = 0; rep < cv.repeats; ++rep) {
    std::vector<Index> perm(all);
    Rng rng(derive_seed(cv.seed, static_cast<std::uint64_t>(rep)));
    rng.shuffle(std::span<Index>(perm));
    for (int f = 0; f < cv.folds; ++f) {
      const Index begin = n * f / cv.folds;
      const Index end = n * (f + 1) / cv.folds;
      std::vector<Index> valid(perm.begin() + begin, perm.begin() + end);
      std::vector<Index> train(perm.begin(), perm.begin() + begin);
      train.insert(train.end(), perm.begin() + end, perm.end());
      std::sort(valid.begin(), valid.end());
      std::sort(train.begin(), train.end());

      const CopulaTree tree = build_maximal_tree(spec, pseudo, data, stopping, train, grid);
      curves.push_back(score_fold(tree, prune_path(tree), pseudo, data, valid));
    }
  }

  std::vector<int> ks;
  for (const auto& e : full_path.entries) ks.push_back(e.n_leaves);
  const CvSelection sel = aggregate_cv(ks, curves, cv.rule);

  CvReport report;
  report.per_k = sel.per_k;
  report.chosen_k = sel.chosen_k;
  report.seed = cv.seed;
  report.folds = cv.folds;
  report.repeats = cv.repeats;
  report.rule = cv.rule;
  for (std::size_t i = 0; i < full_path.entries.size(); ++i) {
    if (full_path.entries[i].n_leaves == sel.chosen_k) {
      report.lambda = penalty_interval(full_path, i, n);
    }
  }
  return report;
}

}  // namespace

CvReport cross_validate(const CopulaSpec& spec, const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                        const Dataset& data, const StoppingConfig& stopping,
                        const CvConfig& cv) {
  return fit_conditional(spec, pseudo, data, stopping, cv).report;
}

ConditionalFit fit_conditional(const CopulaSpec& spec,
                               const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                               const Dataset& data, const StoppingConfig& stopping,
                               const CvConfig& cv) {
  data.validate();
  stopping.validate();
  check_cv(data, stopping, cv);
  if (pseudo.rows() != data.rows()) {
    throw Error(ErrorCode::Input, "pseudo-observations and covariates differ in row count");
  }
  const detail::LikelihoodGrid grid(spec, pseudo);
  std::vector<Index> all(static_cast<std::size_t>(data.rows()));
  std::iota(all.begin(), all.end(), Index{0});

  ConditionalFit fit;
  fit.maximal = build_maximal_tree(spec, pseudo, data, stopping, all, grid);
  fit.path = prune_path(fit.maximal);
  fit.report = run_cv(spec, pseudo, data, stopping, cv, grid, fit.path);
  for (std::size_t i = 0; i < fit.path.entries.size(); ++i) {
    if (fit.path.entries[i].n_leaves == fit.report.chosen_k) {
      fit.selected = fit.path.subtree(fit.maximal, i);
    }
  }
  return fit;
}

}  // namespace cctree
