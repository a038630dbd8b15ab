#include "cctree/tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "cctree/detail/compensated_sum.hpp"
#include "cctree/detail/likelihood_grid.hpp"
#include "cctree/detail/prepared_sample.hpp"
#include "cctree/error.hpp"
#include "cctree/random.hpp"
#include "cctree/stats.hpp"

namespace cctree {

namespace detail {

LikelihoodGrid::LikelihoodGrid(const CopulaSpec& spec,
                               const Eigen::Ref<const Eigen::MatrixX2d>& pseudo, double spacing) {
  const Interval range = spec.fit_tau_range();
  const auto g = static_cast<Index>(std::ceil((range.hi - range.lo) / spacing)) + 1;
  tau_.resize(static_cast<std::size_t>(g));
  for (Index k = 0; k < g; ++k) {
    tau_[static_cast<std::size_t>(k)] =
        range.lo + (range.hi - range.lo) * static_cast<double>(k) / static_cast<double>(g - 1);
  }
  // Keeps sums finite so that right-hand profiles can be taken as differences.
  constexpr double kFloor = -1e12;
  const PreparedSample prep(spec, pseudo);
  values_.resize(pseudo.rows(), g);
  Eigen::VectorXd column(pseudo.rows());
  for (Index k = 0; k < g; ++k) {
    prep.log_densities(tau_to_theta(spec, tau(k)), column);
    for (Index i = 0; i < column.size(); ++i) {
      const double v = column[i];
      values_(i, k) = std::isfinite(v) ? std::max(v, kFloor) : kFloor;
    }
  }
}

ProfilePeak profile_peak(const Eigen::Ref<const Eigen::RowVectorXd>& profile) {
  ProfilePeak peak;
  peak.value = profile.maxCoeff(&peak.index);
  const Index g = peak.index;
  if (g > 0 && g + 1 < profile.size()) {
    const double y0 = profile[g - 1];
    const double y2 = profile[g + 1];
    const double a = 0.5 * (y0 + y2) - peak.value;
    const double b = 0.5 * (y2 - y0);
    if (a < 0.0) peak.value -= b * b / (4.0 * a);
  }
  return peak;
}

}  // namespace detail

void StoppingConfig::validate() const {
  if (min_fit_n < 2) throw Error(ErrorCode::Config, "min_fit_n must be at least 2");
  if (min_leaf < min_fit_n) {
    throw Error(ErrorCode::Config, "min_leaf (" + std::to_string(min_leaf) +
                                       ") must be at least min_fit_n (" +
                                       std::to_string(min_fit_n) + ")");
  }
  if (max_leaves < 1) throw Error(ErrorCode::Config, "max_leaves must be at least 1");
  if (!(min_gain >= 0.0)) throw Error(ErrorCode::Config, "min_gain must be non-negative");
}

bool SplitRule::goes_left(double x) const {
  if (kind == SplitKind::Numeric) return x <= threshold;
  const int level = static_cast<int>(x);
  return std::binary_search(left_levels.begin(), left_levels.end(), level);
}

CopulaTree::CopulaTree(CopulaSpec spec, std::vector<TreeNode> nodes,
                       std::vector<CovariateSchema> schema, StoppingConfig stopping)
    : spec_(spec), nodes_(std::move(nodes)), schema_(std::move(schema)), stopping_(stopping) {
  std::sort(nodes_.begin(), nodes_.end(),
            [](const TreeNode& a, const TreeNode& b) { return a.id < b.id; });
  if (nodes_.empty() || nodes_.front().id != 0) {
    throw Error(ErrorCode::Input, "a copula tree needs a root with id 0");
  }
  for (const auto& n : nodes_) {
    if (n.is_leaf() != (n.left < 0) || (!n.is_leaf() && (!contains(n.left) || !contains(n.right)))) {
      throw Error(ErrorCode::Input, "node " + std::to_string(n.id) + " has inconsistent children");
    }
  }
}

bool CopulaTree::contains(int id) const {
  const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                                   [](const TreeNode& n, int v) { return n.id < v; });
  return it != nodes_.end() && it->id == id;
}

const TreeNode& CopulaTree::node(int id) const {
  const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                                   [](const TreeNode& n, int v) { return n.id < v; });
  if (it == nodes_.end() || it->id != id) {
    throw Error(ErrorCode::Input, "no node with id " + std::to_string(id));
  }
  return *it;
}

int CopulaTree::n_leaves() const {
  return static_cast<int>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::vector<int> CopulaTree::leaf_ids() const {
  std::vector<int> out;
  for (const auto& n : nodes_) {
    if (n.is_leaf()) out.push_back(n.id);
  }
  return out;
}

std::vector<int> CopulaTree::path_of(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != static_cast<Index>(schema_.size())) {
    throw Error(ErrorCode::Input, "covariate vector has " + std::to_string(x.size()) +
                                      " entries, the tree expects " +
                                      std::to_string(schema_.size()));
  }
  std::vector<int> path{0};
  const TreeNode* n = &nodes_.front();
  while (!n->is_leaf()) {
    const int next = n->rule->goes_left(x[n->rule->feature]) ? n->left : n->right;
    path.push_back(next);
    n = &node(next);
  }
  return path;
}

int CopulaTree::leaf_of(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return path_of(x).back();
}

FitResult node_fit(const CopulaSpec& spec, const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                   Index min_fit_n) {
  FitOptions options;
  options.min_fit_n = min_fit_n;
  return fit_mle(spec, pseudo, options);
}

namespace {

Eigen::MatrixX2d gather(const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                        std::span<const Index> rows) {
  Eigen::MatrixX2d out(static_cast<Index>(rows.size()), 2);
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = pseudo.row(rows[k]);
  return out;
}

struct LevelGroup {
  std::vector<int> levels;  // ascending
  std::vector<Index> rows;  // ascending
  double theta = 0.0;
};

std::vector<LevelGroup> group_levels(const CopulaSpec& spec,
                                     const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                                     const Covariate& cov, std::span<const Index> rows,
                                     Index min_fit_n) {
  std::map<int, std::vector<Index>> by_level;
  for (Index r : rows) by_level[cov.level(r)].push_back(r);

  auto dependence_mean = [&](const std::vector<Index>& rs) {
    double s = 0.0;
    for (Index r : rs) s += (pseudo(r, 0) - 0.5) * (pseudo(r, 1) - 0.5);
    return s / static_cast<double>(rs.size());
  };

  std::vector<LevelGroup> groups;
  std::vector<double> anchor_stat;
  std::vector<std::pair<int, double>> sparse;
  for (const auto& [level, rs] : by_level) {
    if (static_cast<Index>(rs.size()) >= min_fit_n) {
      groups.push_back({{level}, rs, 0.0});
      anchor_stat.push_back(dependence_mean(rs));
    } else {
      sparse.push_back({level, dependence_mean(rs)});
    }
  }
  if (groups.empty()) return {};
  for (const auto& [level, stat] : sparse) {
    std::size_t best = 0;
    for (std::size_t g = 1; g < groups.size(); ++g) {
      if (std::abs(anchor_stat[g] - stat) < std::abs(anchor_stat[best] - stat)) best = g;
    }
    auto& target = groups[best];
    target.levels.push_back(level);
    const auto& extra = by_level[level];
    target.rows.insert(target.rows.end(), extra.begin(), extra.end());
  }
  FitOptions options;
  options.min_fit_n = min_fit_n;
  for (auto& g : groups) {
    std::sort(g.levels.begin(), g.levels.end());
    std::sort(g.rows.begin(), g.rows.end());
    g.theta = fit_mle(spec, gather(pseudo, g.rows), options).theta_hat;
  }
  std::stable_sort(groups.begin(), groups.end(), [](const LevelGroup& a, const LevelGroup& b) {
    return a.theta < b.theta || (a.theta == b.theta && a.levels.front() < b.levels.front());
  });
  return groups;
}

// Gridded estimate of a candidate, kept until the exact refinement.
struct Screened {
  double approx_gain = 0.0;
  SplitRule rule;
  Index left_peak = 0;
  Index right_peak = 0;
};

bool precedes(const SplitRule& a, const SplitRule& b) {
  if (a.feature != b.feature) return a.feature < b.feature;
  if (a.kind == SplitKind::Numeric) return a.threshold < b.threshold;
  if (a.left_levels.size() != b.left_levels.size()) {
    return a.left_levels.size() < b.left_levels.size();
  }
  return a.left_levels < b.left_levels;
}

bool better(const SplitCandidate& a, const SplitCandidate& b) {
  if (a.gain != b.gain) return a.gain > b.gain;
  return precedes(a.rule, b.rule);
}

class SplitSearcher {
 public:
  // Candidates whose gridded gain is within this many nats of the best are
  // refined exactly; the parabolic peak error is orders of magnitude smaller.
  static constexpr double kScreenMargin = 0.25;

  SplitSearcher(const CopulaSpec& spec, const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                const Dataset& data, const StoppingConfig& stopping,
                const detail::LikelihoodGrid& grid)
      : spec_(spec), pseudo_(pseudo), data_(data), stopping_(stopping), grid_(grid),
        in_node_(static_cast<std::size_t>(data.rows()), 0) {
    if (pseudo.rows() != data.rows() || grid.rows() != data.rows()) {
      throw Error(ErrorCode::Input, "pseudo-observations and covariates differ in row count");
    }
    sorted_.resize(data.covariates.size());
    for (std::size_t f = 0; f < data.covariates.size(); ++f) {
      const auto& cov = data.covariates[f];
      if (cov.is_categorical()) continue;
      auto& order = sorted_[f];
      order.resize(static_cast<std::size_t>(data.rows()));
      std::iota(order.begin(), order.end(), Index{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](Index a, Index b) { return cov.values[a] < cov.values[b]; });
    }
  }

  FitOptions fit_options() const {
    FitOptions o;
    o.min_fit_n = stopping_.min_fit_n;
    return o;
  }

  FitResult fit_rows(std::span<const Index> rows) const {
    return fit_mle(spec_, gather(pseudo_, rows), fit_options());
  }

  std::optional<SplitCandidate> search(std::span<const Index> rows, double parent_loglik) {
    const auto m = static_cast<Index>(rows.size());
    if (m < 2 * stopping_.min_leaf) return std::nullopt;
    for (Index r : rows) in_node_[static_cast<std::size_t>(r)] = 1;
    std::vector<Screened> screened = screen(rows, parent_loglik);
    for (Index r : rows) in_node_[static_cast<std::size_t>(r)] = 0;
    if (screened.empty()) return std::nullopt;

    std::stable_sort(screened.begin(), screened.end(), [](const Screened& a, const Screened& b) {
      return a.approx_gain > b.approx_gain;
    });
    const double cutoff = screened.front().approx_gain - kScreenMargin;
    if (cutoff + 2.0 * kScreenMargin <= stopping_.min_gain) return std::nullopt;

    std::optional<SplitCandidate> best;
    for (const auto& s : screened) {
      if (s.approx_gain < cutoff) break;
      SplitCandidate c = refine(rows, s, parent_loglik);
      if (!best || better(c, *best)) best = std::move(c);
    }
    if (!(best->gain > stopping_.min_gain)) return std::nullopt;
    return best;
  }

  std::vector<LevelGroup> groups(std::span<const Index> rows, Index feature) const {
    return group_levels(spec_, pseudo_, data_.covariates[static_cast<std::size_t>(feature)], rows,
                        stopping_.min_fit_n);
  }

 private:
  std::vector<Screened> screen(std::span<const Index> rows, double parent_loglik) const {
    const Index g = grid_.points();
    const auto m = static_cast<Index>(rows.size());
    const Index min_leaf = stopping_.min_leaf;
    Eigen::RowVectorXd total = Eigen::RowVectorXd::Zero(g);
    for (Index r : rows) total += grid_.row(r);

    std::vector<Screened> out;
    Eigen::RowVectorXd left(g);
    for (std::size_t f = 0; f < data_.covariates.size(); ++f) {
      const auto& cov = data_.covariates[f];
      const auto feature = static_cast<Index>(f);
      left.setZero();
      if (!cov.is_categorical()) {
        std::vector<Index> order;
        order.reserve(rows.size());
        for (Index r : sorted_[f]) {
          if (in_node_[static_cast<std::size_t>(r)]) order.push_back(r);
        }
        for (Index k = 1; k < m; ++k) {
          const Index prev = order[static_cast<std::size_t>(k - 1)];
          left += grid_.row(prev);
          if (k < min_leaf || m - k < min_leaf) continue;
          const double a = cov.values[prev];
          const double b = cov.values[order[static_cast<std::size_t>(k)]];
          if (!(a < b)) continue;
          Screened s;
          s.rule.feature = feature;
          s.rule.kind = SplitKind::Numeric;
          s.rule.threshold = a + 0.5 * (b - a);
          if (!(s.rule.threshold < b)) s.rule.threshold = a;
          fill_peaks(s, left, total, parent_loglik);
          out.push_back(std::move(s));
        }
      } else {
        const auto gs = groups(rows, feature);
        Index count = 0;
        std::vector<int> levels;
        for (std::size_t c = 0; c + 1 < gs.size(); ++c) {
          for (Index r : gs[c].rows) left += grid_.row(r);
          count += static_cast<Index>(gs[c].rows.size());
          levels.insert(levels.end(), gs[c].levels.begin(), gs[c].levels.end());
          if (count < min_leaf || m - count < min_leaf) continue;
          Screened s;
          s.rule.feature = feature;
          s.rule.kind = SplitKind::Categorical;
          s.rule.left_levels = levels;
          std::sort(s.rule.left_levels.begin(), s.rule.left_levels.end());
          fill_peaks(s, left, total, parent_loglik);
          out.push_back(std::move(s));
        }
      }
    }
    return out;
  }

  static void fill_peaks(Screened& s, const Eigen::RowVectorXd& left,
                         const Eigen::RowVectorXd& total, double parent_loglik) {
    const auto pl = detail::profile_peak(left);
    const auto pr = detail::profile_peak(total - left);
    s.left_peak = pl.index;
    s.right_peak = pr.index;
    s.approx_gain = pl.value + pr.value - parent_loglik;
  }

  FitResult refine_side(std::span<const Index> rows, Index peak) const {
    const Index last = grid_.points() - 1;
    return fit_mle_within(spec_, gather(pseudo_, rows), grid_.tau(std::max<Index>(peak - 1, 0)),
                          grid_.tau(std::min(peak + 1, last)), fit_options());
  }

  SplitCandidate refine(std::span<const Index> rows, const Screened& s,
                        double parent_loglik) const {
    std::vector<Index> left_rows;
    std::vector<Index> right_rows;
    const auto& cov = data_.covariates[static_cast<std::size_t>(s.rule.feature)];
    for (Index r : rows) (s.rule.goes_left(cov.values[r]) ? left_rows : right_rows).push_back(r);
    SplitCandidate c;
    c.rule = s.rule;
    c.left = refine_side(left_rows, s.left_peak);
    c.right = refine_side(right_rows, s.right_peak);
    c.gain = c.left.loglik + c.right.loglik - parent_loglik;
    return c;
  }

  const CopulaSpec& spec_;
  Eigen::Ref<const Eigen::MatrixX2d> pseudo_;
  const Dataset& data_;
  StoppingConfig stopping_;
  const detail::LikelihoodGrid& grid_;
  std::vector<std::vector<Index>> sorted_;
  std::vector<char> in_node_;
};

std::vector<Index> all_rows(Index n) {
  std::vector<Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Index{0});
  return rows;
}

}  // namespace

std::vector<std::vector<int>> order_modalities(const CopulaSpec& spec,
                                               const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                                               const Dataset& data, Index feature,
                                               Index min_fit_n) {
  if (feature < 0 || feature >= data.num_covariates() ||
      !data.covariates[static_cast<std::size_t>(feature)].is_categorical()) {
    throw Error(ErrorCode::Config, "feature " + std::to_string(feature) + " is not categorical");
  }
  const auto rows = all_rows(data.rows());
  const auto groups = group_levels(spec, pseudo, data.covariates[static_cast<std::size_t>(feature)],
                                   rows, min_fit_n);
  std::vector<std::vector<int>> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(g.levels);
  return out;
}

std::optional<SplitCandidate> find_optimal_split(const CopulaSpec& spec,
                                                 const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                                                 const Dataset& data,
                                                 const StoppingConfig& stopping) {
  stopping.validate();
  data.validate();
  const detail::LikelihoodGrid grid(spec, pseudo);
  SplitSearcher searcher(spec, pseudo, data, stopping, grid);
  const auto rows = all_rows(data.rows());
  if (static_cast<Index>(rows.size()) < 2 * stopping.min_leaf) return std::nullopt;
  const FitResult parent = searcher.fit_rows(rows);
  return searcher.search(rows, parent.loglik);
}

CopulaTree build_maximal_tree(const CopulaSpec& spec,
                              const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                              const Dataset& data, const StoppingConfig& stopping) {
  data.validate();
  const detail::LikelihoodGrid grid(spec, pseudo);
  const auto rows = all_rows(data.rows());
  return build_maximal_tree(spec, pseudo, data, stopping, rows, grid);
}

CopulaTree build_maximal_tree(const CopulaSpec& spec,
                              const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                              const Dataset& data, const StoppingConfig& stopping,
                              std::span<const Index> rows, const detail::LikelihoodGrid& grid) {
  stopping.validate();
  SplitSearcher searcher(spec, pseudo, data, stopping, grid);

  std::vector<std::vector<Index>> node_rows;
  node_rows.emplace_back(rows.begin(), rows.end());
  std::sort(node_rows.front().begin(), node_rows.front().end());

  std::vector<TreeNode> nodes(1);
  const FitResult root = searcher.fit_rows(node_rows.front());
  nodes[0].n_obs = root.n_obs;
  nodes[0].theta = root.theta_hat;
  nodes[0].tau = root.tau_hat;
  nodes[0].loglik = root.loglik;

  std::deque<int> work{0};
  int leaves = 1;
  while (!work.empty() && leaves < stopping.max_leaves) {
    const int id = work.front();
    work.pop_front();
    auto split = searcher.search(node_rows[static_cast<std::size_t>(id)],
                                 nodes[static_cast<std::size_t>(id)].loglik);
    if (!split) continue;

    std::vector<Index> left_rows;
    std::vector<Index> right_rows;
    const auto& cov = data.covariates[static_cast<std::size_t>(split->rule.feature)];
    for (Index r : node_rows[static_cast<std::size_t>(id)]) {
      (split->rule.goes_left(cov.values[r]) ? left_rows : right_rows).push_back(r);
    }
    const int depth = nodes[static_cast<std::size_t>(id)].depth + 1;
    auto add_child = [&](const FitResult& fit, std::vector<Index> child_rows) {
      TreeNode child;
      child.id = static_cast<int>(nodes.size());
      child.n_obs = fit.n_obs;
      child.theta = fit.theta_hat;
      child.tau = fit.tau_hat;
      child.loglik = fit.loglik;
      child.parent = id;
      child.depth = depth;
      nodes.push_back(child);
      node_rows.push_back(std::move(child_rows));
      work.push_back(child.id);
      return child.id;
    };
    const int l = add_child(split->left, std::move(left_rows));
    const int r = add_child(split->right, std::move(right_rows));
    auto& parent = nodes[static_cast<std::size_t>(id)];
    parent.left = l;
    parent.right = r;
    parent.rule = std::move(split->rule);
    ++leaves;
  }
  return CopulaTree(spec, std::move(nodes), data.schema(), stopping);
}

Prediction predict(const CopulaTree& tree, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const TreeNode& leaf = tree.node(tree.leaf_of(x));
  return {leaf.theta, leaf.tau, leaf.id};
}

double tree_loglik(const CopulaTree& tree, const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                   const Dataset& data) {
  if (pseudo.rows() != data.rows()) {
    throw Error(ErrorCode::Input, "pseudo-observations and covariates differ in row count");
  }
  std::map<int, LogDensity> densities;
  detail::CompensatedSum sum;
  for (Index i = 0; i < data.rows(); ++i) {
    const int leaf = tree.leaf_of(data.covariate_row(i));
    auto it = densities.find(leaf);
    if (it == densities.end()) {
      it = densities.emplace(leaf, LogDensity(tree.spec(), tree.node(leaf).theta)).first;
    }
    sum.add(it->second(pseudo(i, 0), pseudo(i, 1)));
  }
  return sum.value();
}

MinGainCalibration calibrate_min_gain(const CopulaSpec& spec,
                                      const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                                      const Dataset& data, const StoppingConfig& stopping,
                                      int permutations, double alpha, std::uint64_t seed) {
  stopping.validate();
  data.validate();
  if (permutations < 1) throw Error(ErrorCode::Config, "need at least one permutation");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::Config, "alpha must lie in (0, 1)");

  StoppingConfig open = stopping;
  open.min_gain = -std::numeric_limits<double>::infinity();
  const auto rows = all_rows(data.rows());
  MinGainCalibration out;
  for (int b = 0; b < permutations; ++b) {
    std::vector<Index> perm(rows);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    rng.shuffle(std::span<Index>(perm));
    const Eigen::MatrixX2d shuffled = gather(pseudo, perm);
    const detail::LikelihoodGrid grid(spec, shuffled);
    SplitSearcher searcher(spec, shuffled, data, open, grid);
    double gain = 0.0;
    if (static_cast<Index>(rows.size()) >= 2 * stopping.min_leaf) {
      const FitResult parent = searcher.fit_rows(rows);
      if (auto c = searcher.search(rows, parent.loglik)) gain = std::max(c->gain, 0.0);
    }
    out.null_gains.push_back(gain);
  }
  std::sort(out.null_gains.begin(), out.null_gains.end());
  out.min_gain = quantile(out.null_gains, 1.0 - alpha);
  return out;
}

}  // namespace cctree
