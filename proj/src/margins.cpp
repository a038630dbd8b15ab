#include "cctree/margins.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

#include <Eigen/QR>

#include "cctree/error.hpp"
#include "cctree/random.hpp"
#include "cctree/special.hpp"
#include "cctree/stats.hpp"

namespace cctree {

std::string_view pseudo_method_name(PseudoMethod method) {
  switch (method) {
    case PseudoMethod::Empirical: return "empirical";
    case PseudoMethod::Kernel: return "kernel";
    case PseudoMethod::ParametricNormal: return "normal";
    case PseudoMethod::MarginTree: return "margin-tree";
    case PseudoMethod::DiscreteModality: return "discrete";
    case PseudoMethod::Oracle: return "oracle";
  }
  return "unknown";
}

PseudoObservations pseudo_empirical(const Dataset& data) {
  data.validate();
  const double denom = static_cast<double>(data.rows()) + 1.0;
  PseudoObservations out;
  out.method = PseudoMethod::Empirical;
  out.values.resize(data.rows(), 2);
  for (int j = 0; j < 2; ++j) {
    out.values.col(j) = average_ranks(data.responses.col(j)) / denom;
  }
  return out;
}

PseudoObservations pseudo_kernel(const Dataset& data, double h, std::optional<double> clamp_eps) {
  data.validate();
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw Error(ErrorCode::Config, "kernel bandwidth must be positive");
  }
  for (const auto& c : data.covariates) {
    if (c.is_categorical()) {
      throw Error(ErrorCode::Config,
                  "kernel margins need numeric covariates; '" + c.name + "' is categorical");
    }
  }
  const Index n = data.rows();
  const Index d = data.num_covariates();
  const double eps = clamp_eps.value_or(0.5 / static_cast<double>(n));

  Eigen::MatrixXd x(n, d);
  for (Index j = 0; j < d; ++j) x.col(j) = data.covariates[static_cast<std::size_t>(j)].values / h;

  PseudoObservations out;
  out.method = PseudoMethod::Kernel;
  out.bandwidth = h;
  out.values.resize(n, 2);
  Eigen::VectorXd w(n);
  for (Index i = 0; i < n; ++i) {
    for (Index l = 0; l < n; ++l) {
      w[l] = std::exp(-0.5 * (x.row(l) - x.row(i)).squaredNorm());
    }
    const double total = w.sum();
    for (int j = 0; j < 2; ++j) {
      const double yi = data.responses(i, j);
      double below = 0.0;
      for (Index l = 0; l < n; ++l) {
        if (data.responses(l, j) <= yi) below += w[l];
      }
      out.values(i, j) = std::clamp(below / total, eps, 1.0 - eps);
    }
  }
  return out;
}

PseudoObservations pseudo_parametric_normal(const Dataset& data, std::span<const Index> design) {
  data.validate();
  const Index n = data.rows();
  const auto p = static_cast<Index>(design.size()) + 1;
  if (n <= p) {
    throw Error(ErrorCode::InsufficientData,
                "normal margins need more rows than design columns plus one");
  }
  Eigen::MatrixXd x(n, p);
  x.col(0).setOnes();
  for (std::size_t k = 0; k < design.size(); ++k) {
    const Index j = design[k];
    if (j < 0 || j >= data.num_covariates()) {
      throw Error(ErrorCode::Config, "design column " + std::to_string(j) + " out of range");
    }
    const auto& c = data.covariates[static_cast<std::size_t>(j)];
    if (c.is_categorical()) {
      throw Error(ErrorCode::Config, "design covariate '" + c.name + "' is categorical");
    }
    x.col(static_cast<Index>(k) + 1) = c.values;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);  // rounding in the reflections leaves exact collinearity near 1e-14
  if (qr.rank() < p) throw Error(ErrorCode::Regression, "design matrix is rank deficient");

  const double eps = 0.5 / static_cast<double>(n);
  PseudoObservations out;
  out.method = PseudoMethod::ParametricNormal;
  out.values.resize(n, 2);
  for (int j = 0; j < 2; ++j) {
    const Eigen::VectorXd y = data.responses.col(j);
    const Eigen::VectorXd mu = x * qr.solve(y);
    for (Index i = 0; i < n; ++i) {
      out.values(i, j) = std::clamp(normal_cdf(y[i] - mu[i]), eps, 1.0 - eps);
    }
  }
  return out;
}

namespace {

// Average rank / (n_group + 1) within each group of rows.
void groupwise_ranks(const Dataset& data, const std::vector<std::vector<Index>>& groups,
                     Eigen::MatrixX2d& out) {
  for (const auto& rows : groups) {
    if (rows.empty()) continue;
    const double denom = static_cast<double>(rows.size()) + 1.0;
    for (int j = 0; j < 2; ++j) {
      Eigen::VectorXd y(static_cast<Index>(rows.size()));
      for (std::size_t k = 0; k < rows.size(); ++k) y[static_cast<Index>(k)] = data.responses(rows[k], j);
      const Eigen::VectorXd r = average_ranks(y);
      for (std::size_t k = 0; k < rows.size(); ++k) out(rows[k], j) = r[static_cast<Index>(k)] / denom;
    }
  }
}

}  // namespace

PseudoObservations pseudo_discrete(const Dataset& data, const ModalityGrouping& grouping) {
  data.validate();
  for (const auto& c : data.covariates) {
    if (!c.is_categorical()) {
      throw Error(ErrorCode::Config,
                  "discrete margins need categorical covariates; '" + c.name + "' is numeric");
    }
  }
  std::map<int, std::vector<Index>> classes;
  std::vector<int> key(data.covariates.size());
  for (Index i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < key.size(); ++j) key[j] = data.covariates[j].level(i);
    const auto it = grouping.find(key);
    if (it == grouping.end()) {
      throw Error(ErrorCode::Config,
                  "modality of row " + std::to_string(i) + " is not covered by the grouping");
    }
    classes[it->second].push_back(i);
  }
  std::vector<std::vector<Index>> groups;
  for (auto& [label, rows] : classes) groups.push_back(std::move(rows));

  PseudoObservations out;
  out.method = PseudoMethod::DiscreteModality;
  out.values.resize(data.rows(), 2);
  groupwise_ranks(data, groups, out.values);
  return out;
}

bool MarginSplit::goes_left(double x) const {
  if (!categorical) return x <= threshold;
  const int level = static_cast<int>(x);
  return std::binary_search(left_levels.begin(), left_levels.end(), level);
}

MarginTree::MarginTree(std::vector<MarginNode> nodes, std::vector<CovariateSchema> schema,
                       std::vector<std::vector<double>> leaf_values)
    : nodes_(std::move(nodes)), schema_(std::move(schema)), leaf_values_(std::move(leaf_values)) {}

int MarginTree::n_leaves() const {
  return static_cast<int>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const MarginNode& n) { return n.is_leaf(); }));
}

int MarginTree::leaf_of(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != static_cast<Index>(schema_.size())) {
    throw Error(ErrorCode::Input, "covariate vector does not match the margin tree schema");
  }
  int id = 0;
  while (!nodes_[static_cast<std::size_t>(id)].is_leaf()) {
    const auto& node = nodes_[static_cast<std::size_t>(id)];
    id = node.split->goes_left(x[node.split->feature]) ? node.left : node.right;
  }
  return id;
}

double MarginTree::cdf(const Eigen::Ref<const Eigen::VectorXd>& x, double y) const {
  const auto& values = leaf_values_[static_cast<std::size_t>(leaf_of(x))];
  const auto lo = std::lower_bound(values.begin(), values.end(), y);
  const auto hi = std::upper_bound(values.begin(), values.end(), y);
  const double less = static_cast<double>(lo - values.begin());
  const double equal = static_cast<double>(hi - lo);
  return (less + 0.5 * (equal + 1.0)) / (static_cast<double>(values.size()) + 1.0);
}

namespace {

struct LsSplit {
  MarginSplit split;
  double gain = 0.0;
  std::vector<Index> left_rows;
  std::vector<Index> right_rows;
};

struct LsGrown {
  std::vector<MarginNode> nodes;
  std::vector<std::vector<Index>> rows;  // training rows per node id
};

double sse_of(const Eigen::VectorXd& y, const std::vector<Index>& rows, double* mean_out) {
  double m = 0.0;
  for (Index r : rows) m += y[r];
  m /= static_cast<double>(rows.size());
  double sse = 0.0;
  for (Index r : rows) sse += (y[r] - m) * (y[r] - m);
  if (mean_out) *mean_out = m;
  return sse;
}

std::optional<LsSplit> best_ls_split(const Dataset& data, const Eigen::VectorXd& y,
                                     const std::vector<Index>& rows, double parent_mean,
                                     double parent_sse, Index min_leaf) {
  const auto n = static_cast<Index>(rows.size());
  std::optional<LsSplit> best;
  double best_gain = 1e-12 * std::max(parent_sse, 1e-300);

  for (Index f = 0; f < data.num_covariates(); ++f) {
    const auto& cov = data.covariates[static_cast<std::size_t>(f)];
    std::vector<Index> order(rows);
    std::vector<std::vector<int>> group_levels;  // categorical: levels per position group
    std::vector<double> key(static_cast<std::size_t>(n));

    if (!cov.is_categorical()) {
      std::stable_sort(order.begin(), order.end(),
                       [&](Index a, Index b) { return cov.values[a] < cov.values[b]; });
      for (Index k = 0; k < n; ++k) key[static_cast<std::size_t>(k)] = cov.values[order[static_cast<std::size_t>(k)]];
    } else {
      std::map<int, std::pair<double, Index>> stats;
      for (Index r : rows) {
        auto& s = stats[cov.level(r)];
        s.first += y[r];
        s.second += 1;
      }
      std::vector<std::pair<double, int>> ranked;
      for (const auto& [level, s] : stats) ranked.push_back({s.first / static_cast<double>(s.second), level});
      std::sort(ranked.begin(), ranked.end());
      std::map<int, int> position;
      for (std::size_t p = 0; p < ranked.size(); ++p) position[ranked[p].second] = static_cast<int>(p);
      std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return position[cov.level(a)] < position[cov.level(b)];
      });
      for (Index k = 0; k < n; ++k) {
        key[static_cast<std::size_t>(k)] = position[cov.level(order[static_cast<std::size_t>(k)])];
      }
      for (const auto& [m, level] : ranked) group_levels.push_back({level});
    }

    double sum_left = 0.0;
    double sq_left = 0.0;
    double sum_total = 0.0;
    double sq_total = 0.0;
    for (Index r : rows) {
      const double c = y[r] - parent_mean;
      sum_total += c;
      sq_total += c * c;
    }
    for (Index k = 1; k < n; ++k) {
      const double c = y[order[static_cast<std::size_t>(k - 1)]] - parent_mean;
      sum_left += c;
      sq_left += c * c;
      if (k < min_leaf || n - k < min_leaf) continue;
      if (key[static_cast<std::size_t>(k - 1)] == key[static_cast<std::size_t>(k)]) continue;
      const double nl = static_cast<double>(k);
      const double nr = static_cast<double>(n - k);
      const double sse_l = sq_left - sum_left * sum_left / nl;
      const double sum_r = sum_total - sum_left;
      const double sse_r = (sq_total - sq_left) - sum_r * sum_r / nr;
      const double gain = parent_sse - sse_l - sse_r;
      if (gain > best_gain) {
        best_gain = gain;
        LsSplit s;
        s.gain = gain;
        s.split.feature = f;
        s.split.categorical = cov.is_categorical();
        if (s.split.categorical) {
          const auto cut = static_cast<std::size_t>(key[static_cast<std::size_t>(k)]);
          for (std::size_t p = 0; p < cut; ++p) s.split.left_levels.push_back(group_levels[p][0]);
          std::sort(s.split.left_levels.begin(), s.split.left_levels.end());
        } else {
          s.split.threshold = 0.5 * (key[static_cast<std::size_t>(k - 1)] + key[static_cast<std::size_t>(k)]);
        }
        s.left_rows.assign(order.begin(), order.begin() + k);
        s.right_rows.assign(order.begin() + k, order.end());
        std::sort(s.left_rows.begin(), s.left_rows.end());
        std::sort(s.right_rows.begin(), s.right_rows.end());
        best = std::move(s);
      }
    }
  }
  return best;
}

LsGrown grow_ls_tree(const Dataset& data, const Eigen::VectorXd& y, std::vector<Index> rows,
                     const MarginTreeConfig& config) {
  LsGrown g;
  MarginNode root;
  root.n_obs = static_cast<Index>(rows.size());
  root.sse = sse_of(y, rows, &root.mean);
  g.nodes.push_back(root);
  g.rows.push_back(std::move(rows));

  std::deque<int> work{0};
  int leaves = 1;
  while (!work.empty()) {
    const int id = work.front();
    work.pop_front();
    const auto& node_rows = g.rows[static_cast<std::size_t>(id)];
    if (leaves >= config.max_leaves ||
        static_cast<Index>(node_rows.size()) < 2 * config.min_leaf) {
      continue;
    }
    const MarginNode parent = g.nodes[static_cast<std::size_t>(id)];
    auto split = best_ls_split(data, y, node_rows, parent.mean, parent.sse, config.min_leaf);
    if (!split) continue;

    for (int side = 0; side < 2; ++side) {
      MarginNode child;
      child.id = static_cast<int>(g.nodes.size());
      child.depth = parent.depth + 1;
      auto& child_rows = side == 0 ? split->left_rows : split->right_rows;
      child.n_obs = static_cast<Index>(child_rows.size());
      child.sse = sse_of(y, child_rows, &child.mean);
      if (side == 0) {
        g.nodes[static_cast<std::size_t>(id)].left = child.id;
      } else {
        g.nodes[static_cast<std::size_t>(id)].right = child.id;
      }
      g.nodes.push_back(child);
      g.rows.push_back(std::move(child_rows));
      work.push_back(child.id);
    }
    g.nodes[static_cast<std::size_t>(id)].split = std::move(split->split);
    ++leaves;
  }
  return g;
}

std::vector<ScoredNode> scored(const std::vector<MarginNode>& nodes) {
  std::vector<ScoredNode> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) out.push_back({n.id, n.left, n.right, n.depth, -n.sse});
  return out;
}

// Node ids visited from the root to the leaf of x.
std::vector<int> route(const std::vector<MarginNode>& nodes, const Eigen::VectorXd& x) {
  std::vector<int> path{0};
  while (!nodes[static_cast<std::size_t>(path.back())].is_leaf()) {
    const auto& node = nodes[static_cast<std::size_t>(path.back())];
    path.push_back(node.split->goes_left(x[node.split->feature]) ? node.left : node.right);
  }
  return path;
}

int stage_leaf(const std::vector<int>& path, const std::vector<char>& in_frontier) {
  for (int id : path) {
    if (in_frontier[static_cast<std::size_t>(id)]) return id;
  }
  return path.back();
}

MarginTree materialize(const LsGrown& grown, const PruneStage& stage, const Dataset& data,
                       const Eigen::VectorXd& y) {
  std::vector<char> in_frontier(grown.nodes.size(), 0);
  for (int id : stage.frontier) in_frontier[static_cast<std::size_t>(id)] = 1;

  std::vector<MarginNode> nodes;
  std::vector<std::vector<double>> leaf_values;
  std::deque<std::pair<int, int>> work{{0, -1}};  // (old id, new parent slot)
  std::vector<int> remap(grown.nodes.size(), -1);
  while (!work.empty()) {
    const auto [old_id, parent] = work.front();
    work.pop_front();
    MarginNode n = grown.nodes[static_cast<std::size_t>(old_id)];
    n.id = static_cast<int>(nodes.size());
    remap[static_cast<std::size_t>(old_id)] = n.id;
    const int old_left = n.left;
    const int old_right = n.right;
    n.left = n.right = -1;
    std::vector<double> values;
    if (in_frontier[static_cast<std::size_t>(old_id)] || old_left < 0) {
      n.split.reset();
      for (Index r : grown.rows[static_cast<std::size_t>(old_id)]) values.push_back(y[r]);
      std::sort(values.begin(), values.end());
    } else {
      work.push_back({old_left, n.id});
      work.push_back({old_right, n.id});
    }
    if (parent >= 0) {
      auto& p = nodes[static_cast<std::size_t>(parent)];
      (p.left < 0 ? p.left : p.right) = n.id;
    }
    nodes.push_back(std::move(n));
    leaf_values.push_back(std::move(values));
  }
  return MarginTree(std::move(nodes), data.schema(), std::move(leaf_values));
}

MarginTree fit_margin_tree(const Dataset& data, int column, const MarginTreeConfig& config) {
  const Eigen::VectorXd y = data.responses.col(column);
  const Index n = data.rows();
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});

  const LsGrown full = grow_ls_tree(data, y, all, config);
  const auto full_scored = scored(full.nodes);
  const auto full_path = weakest_link_path(full_scored);

  std::vector<int> ks;
  for (const auto& s : full_path) ks.push_back(s.n_leaves);

  std::vector<FoldCurve> curves;
  const int folds = std::max(config.folds, 2);
  for (int rep = 0; rep < config.repeats && full_path.size() > 1; ++rep) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(rep) + 0x4d41524731ULL));
    std::vector<Index> perm(all);
    rng.shuffle(std::span<Index>(perm));
    for (int f = 0; f < folds; ++f) {
      const Index begin = n * f / folds;
      const Index end = n * (f + 1) / folds;
      std::vector<Index> train;
      std::vector<Index> valid(perm.begin() + begin, perm.begin() + end);
      train.insert(train.end(), perm.begin(), perm.begin() + begin);
      train.insert(train.end(), perm.begin() + end, perm.end());
      std::sort(train.begin(), train.end());
      std::sort(valid.begin(), valid.end());

      const LsGrown g = grow_ls_tree(data, y, train, config);
      const auto path = weakest_link_path(scored(g.nodes));
      std::vector<std::vector<int>> routes;
      routes.reserve(valid.size());
      for (Index r : valid) routes.push_back(route(g.nodes, data.covariate_row(r)));

      FoldCurve curve;
      std::vector<char> in_frontier(g.nodes.size());
      for (const auto& stage : path) {
        std::fill(in_frontier.begin(), in_frontier.end(), 0);
        for (int id : stage.frontier) in_frontier[static_cast<std::size_t>(id)] = 1;
        double sse = 0.0;
        for (std::size_t k = 0; k < valid.size(); ++k) {
          const int leaf = stage_leaf(routes[k], in_frontier);
          const double e = y[valid[k]] - g.nodes[static_cast<std::size_t>(leaf)].mean;
          sse += e * e;
        }
        curve.push_back({stage.n_leaves, -sse});
      }
      curves.push_back(std::move(curve));
    }
  }

  int chosen_k = ks.front();
  if (!curves.empty()) chosen_k = aggregate_cv(ks, curves, config.rule).chosen_k;
  const auto stage = std::find_if(full_path.begin(), full_path.end(),
                                  [&](const PruneStage& s) { return s.n_leaves == chosen_k; });
  return materialize(full, *stage, data, y);
}

}  // namespace

MarginTreeFit pseudo_margin_tree(const Dataset& data, const MarginTreeConfig& config) {
  data.validate();
  MarginTreeFit out;
  if (data.rows() < 2 * config.min_leaf) {
    out.pseudo = pseudo_empirical(data);
    out.pseudo.fallback = true;
    return out;
  }
  out.pseudo.method = PseudoMethod::MarginTree;
  out.pseudo.values.resize(data.rows(), 2);
  for (int j = 0; j < 2; ++j) {
    MarginTree tree = fit_margin_tree(data, j, config);
    std::vector<std::vector<Index>> groups(tree.nodes().size());
    for (Index i = 0; i < data.rows(); ++i) {
      groups[static_cast<std::size_t>(tree.leaf_of(data.covariate_row(i)))].push_back(i);
    }
    Eigen::MatrixX2d ranks(data.rows(), 2);
    groupwise_ranks(data, groups, ranks);
    out.pseudo.values.col(j) = ranks.col(j);
    out.trees.push_back(std::move(tree));
  }
  return out;
}

}  // namespace cctree
