#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "cctree/error.hpp"
#include "cctree/pruning.hpp"
#include "cctree/random.hpp"
#include "cctree/simulation.hpp"
#include "oracles.hpp"

using namespace cctree;
using Catch::Matchers::WithinAbs;

namespace {

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Config;
}

std::set<int> node_ids(const CopulaTree& tree) {
  std::set<int> ids;
  for (const TreeNode& n : tree.nodes()) ids.insert(n.id);
  return ids;
}

CopulaTree step_tree(Index n, std::uint64_t seed, int max_leaves = 32, Index min_leaf = 50) {
  const SimulatedDataset sim = generate({CopulaSpec{Family::Clayton}, TauSurface::Step, n, seed});
  return build_maximal_tree(CopulaSpec{Family::Clayton}, sim.u, sim.dataset(),
                            {min_leaf, 0.0, max_leaves, 10});
}

// Signal-free data: constant Clayton tau = 0.5 and two uniform covariates.
std::pair<Eigen::MatrixX2d, Dataset> null_data(Index n, std::uint64_t seed) {
  const CopulaSpec clayton{Family::Clayton};
  Rng rng(derive_seed(seed, 1));
  Eigen::MatrixX2d x(n, 2);
  for (auto& v : x.reshaped()) v = rng.uniform();
  const Eigen::MatrixX2d u = sample(clayton, 2.0, n, derive_seed(seed, 2));
  Dataset d;
  d.responses = u;
  d.covariates = {Covariate::numeric("x1", x.col(0)), Covariate::numeric("x2", x.col(1))};
  return {u, d};
}

}  // namespace

TEST_CASE("single-leaf trees have a one-entry path") {
  const CopulaTree tree = step_tree(80, 1);
  REQUIRE(tree.n_leaves() == 1);
  const PrunePath path = prune_path(tree);
  REQUIRE(path.entries.size() == 1);
  CHECK(path.entries[0].n_leaves == 1);
  CHECK(path.entries[0].train_loglik == tree.root().loglik);
}

TEST_CASE("path structure") {
  const CopulaTree tree = step_tree(1000, 2);
  const PrunePath path = prune_path(tree);
  REQUIRE(path.entries.size() >= 2);
  CHECK(path.entries.front().n_leaves == tree.n_leaves());
  CHECK(path.entries.back().n_leaves == 1);
  CHECK(path.entries.back().train_loglik == tree.root().loglik);
  for (std::size_t i = 1; i < path.entries.size(); ++i) {
    CHECK(path.entries[i].n_leaves < path.entries[i - 1].n_leaves);
    CHECK(path.entries[i].train_loglik <= path.entries[i - 1].train_loglik);
  }
  SECTION("subtrees are nested and keep ids") {
    std::set<int> previous = node_ids(tree);
    for (std::size_t i = 0; i < path.entries.size(); ++i) {
      const CopulaTree sub = path.subtree(tree, i);
      const std::set<int> ids = node_ids(sub);
      CHECK(std::includes(previous.begin(), previous.end(), ids.begin(), ids.end()));
      CHECK(sub.leaf_ids() == path.entries[i].frontier);
      CHECK(sub.n_leaves() == path.entries[i].n_leaves);
      for (int id : ids) CHECK(sub.node(id).theta == tree.node(id).theta);
      previous = ids;
    }
  }
  SECTION("prune_to collapses the frontier") {
    const CopulaTree root_only = prune_to(tree, std::vector<int>{0});
    CHECK(root_only.n_leaves() == 1);
    CHECK(root_only.root().is_leaf());
  }
}

TEST_CASE("path entries are the best prunings of their size") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const CopulaTree tree = step_tree(1000, 40 + seed, 10, 30);
    const PrunePath path = prune_path(tree);
    for (const PruneEntry& e : path.entries) {
      const auto best = oracle::best_pruning_loglik(tree, e.n_leaves);
      REQUIRE(best.has_value());
      CHECK(e.train_loglik == *best);
    }
  }
}

TEST_CASE("penalized selection") {
  PrunePath path;
  // Concave log-likelihood curve over K = 6, 5, 4, 3, 1.
  path.entries = {{6, -100.0, {}}, {5, -101.0, {}}, {4, -103.0, {}}, {3, -107.0, {}}, {1, -120.0, {}}};
  const Index n = 100;
  CHECK(select_penalized(path, 0.0, n) == 0);
  CHECK(path.entries[select_penalized(path, 1.0, n)].n_leaves == 1);

  const double l45 = (-101.0 + 103.0) / n;
  const double l34 = (-103.0 + 107.0) / n;
  CHECK(path.entries[select_penalized(path, 0.5 * (l45 + l34), n)].n_leaves == 4);
  const LambdaInterval iv = penalty_interval(path, 2, n);
  CHECK_THAT(iv.lo, WithinAbs(l45, 1e-15));
  CHECK_THAT(iv.hi, WithinAbs(l34, 1e-15));
  CHECK(path.entries[select_penalized(path, l45, n)].n_leaves == 4);  // tie favors the smaller tree

  SECTION("K is non-increasing in lambda") {
    const CopulaTree tree = step_tree(1000, 3);
    const PrunePath real = prune_path(tree);
    int previous = 1 << 30;
    for (int k = 0; k <= 400; ++k) {
      const double lambda = 0.0005 * k;
      const int kk = real.entries[select_penalized(real, lambda, 1000)].n_leaves;
      CHECK(kk <= previous);
      previous = kk;
    }
    CHECK(penalty_interval(real, 0, 1000).lo == 0.0);
    CHECK(std::isinf(penalty_interval(real, real.entries.size() - 1, 1000).hi));
    for (std::size_t i = 0; i < real.entries.size(); ++i) {
      const LambdaInterval iv2 = penalty_interval(real, i, 1000);
      if (iv2.empty() || std::isinf(iv2.hi)) continue;
      CHECK(select_penalized(real, 0.5 * (iv2.lo + iv2.hi), 1000) == i);
    }
  }
}

TEST_CASE("cross-validation") {
  const CopulaSpec clayton{Family::Clayton};
  const SimulatedDataset sim = generate({clayton, TauSurface::Step, 1000, 5});
  const Dataset d = sim.dataset();
  const CvConfig cv{3, 2, 17, SelectionRule::OneSE};

  SECTION("deterministic given the seed") {
    const CvReport a = cross_validate(clayton, sim.u, d, StoppingConfig{}, cv);
    const CvReport b = cross_validate(clayton, sim.u, d, StoppingConfig{}, cv);
    REQUIRE(a.per_k.size() == b.per_k.size());
    for (std::size_t i = 0; i < a.per_k.size(); ++i) {
      CHECK(a.per_k[i].mean == b.per_k[i].mean);
      CHECK(a.per_k[i].se == b.per_k[i].se);
    }
    CHECK(a.chosen_k == b.chosen_k);
    CHECK(a.seed == 17);
  }
  SECTION("chosen K lies on the full-data path") {
    const ConditionalFit fit = fit_conditional(clayton, sim.u, d, StoppingConfig{}, cv);
    bool found = false;
    for (const PruneEntry& e : fit.path.entries) found = found || e.n_leaves == fit.report.chosen_k;
    CHECK(found);
    CHECK(fit.selected.n_leaves() == fit.report.chosen_k);
    for (const auto& s : fit.report.per_k) {
      CHECK(s.se >= 0.0);
      CHECK(s.count == 6);
      CHECK(std::isfinite(s.mean));
    }
    CHECK(!fit.report.lambda.empty());
  }
  SECTION("minimal configuration") {
    const Index n = 3 * 2 * 50;
    const CvReport r = cross_validate(clayton, sim.u.topRows(n), d.subset([&] {
      std::vector<Index> rows(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
      return rows;
    }()), StoppingConfig{}, {3, 1, 1, SelectionRule::OneSE});
    for (const auto& s : r.per_k) CHECK(std::isfinite(s.se));
  }
  SECTION("too few rows") {
    const std::vector<Index> rows{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    CHECK(code_of([&] {
            cross_validate(clayton, sim.u.topRows(10), d.subset(rows), StoppingConfig{}, cv);
          }) == ErrorCode::InsufficientData);
    CHECK(code_of([&] {
            cross_validate(clayton, sim.u, d, StoppingConfig{}, {1, 1, 0, SelectionRule::OneSE});
          }) == ErrorCode::Config);
  }
}

TEST_CASE("Breiman's rule keeps the root on signal-free data") {
  const CopulaSpec clayton{Family::Clayton};
  int root = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto [u, d] = null_data(600, 300 + seed);
    const CvReport r = cross_validate(clayton, u, d, StoppingConfig{}, {3, 10, seed, SelectionRule::OneSE});
    if (r.chosen_k == 1) ++root;
  }
  CHECK(root >= 9);
}

TEST_CASE("step scenario cross-validation recovers five or six groups") {
  const CopulaSpec clayton{Family::Clayton};
  int hits = 0;
  std::vector<int> chosen;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SimulatedDataset sim = generate({clayton, TauSurface::Step, 1000, 700 + seed});
    const CvReport r = cross_validate(clayton, sim.u, sim.dataset(), StoppingConfig{},
                                      {3, 10, seed, SelectionRule::OneSE});
    chosen.push_back(r.chosen_k);
    if (r.chosen_k >= 4 && r.chosen_k <= 6) ++hits;
  }
  std::ostringstream ks;
  for (int k : chosen) ks << k << ' ';
  INFO("chosen K: " << ks.str());
  CHECK(hits >= 16);
}
