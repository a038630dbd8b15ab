#include "cctree/flu.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cctree/error.hpp"
#include "cctree/random.hpp"
#include "cctree/special.hpp"

namespace cctree {

namespace {

std::string label(const char* fmt, int value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, value);
  return buf;
}

// Integer allocation of `total` proportionally to `weights` (largest remainder,
// ties to the earlier index), so the parts add up exactly.
std::vector<long> allocate(long total, const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<long> parts(weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  long assigned = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double exact = static_cast<double>(total) * weights[k] / sum;
    parts[k] = static_cast<long>(std::floor(exact));
    assigned += parts[k];
    remainders.push_back({exact - static_cast<double>(parts[k]), k});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (long r = 0; r < total - assigned; ++r) ++parts[remainders[static_cast<std::size_t>(r)].second];
  return parts;
}

}  // namespace

std::vector<WeeklyRecord> generate_flu_fixture(const FluFixtureConfig& config) {
  if (config.units < 1 || config.seasons < 1 || config.zones < 1) {
    throw Error(ErrorCode::Config, "fixture needs at least one unit, season and zone");
  }
  const CopulaSpec frank{Family::Frank};
  const double theta_before = tau_to_theta(frank, config.tau_before);
  const double theta_after = tau_to_theta(frank, config.tau_after);
  constexpr double kSpread = 0.6;
  constexpr int kHalfWidth = 10;  // weeks either side of the seasonal peak

  Rng rng(config.seed);
  std::vector<WeeklyRecord> out;
  for (int u = 0; u < config.units; ++u) {
    const int zone = u % config.zones;
    const std::string unit = label("unit%02d", u + 1);
    const std::string itz = label("ITZ%02d", zone + 1);
    const double z = config.zones > 1 ? static_cast<double>(zone) / (config.zones - 1) : 0.5;
    const double mu1 = -0.8 + 1.6 * z;
    const double mu2 = 0.6 * std::sin(2.0 * M_PI * z);

    for (int s = 0; s < config.seasons; ++s) {
      const int season = config.first_season + s;
      const double theta = season < config.shift_season ? theta_before : theta_after;
      const UnitPair p = sample_pair(frank, theta, rng);
      const Composition3 c = ilr_inverse({mu1 + kSpread * normal_quantile(p.u),
                                          mu2 + kSpread * normal_quantile(p.v)});
      const bool sparse = rng.uniform() < config.sparse_fraction;
      const long total = sparse ? 10 + static_cast<long>(rng.below(39))
                                : 200 + static_cast<long>(rng.below(1800));
      const std::vector<long> by_type = allocate(total, {c.p1, c.p2, c.p3});

      const auto start = season_start(season);
      const auto end = season_start(season + 1);
      const auto n_weeks = static_cast<int>((end - start).count() / 7);
      const int peak = kHalfWidth + static_cast<int>(rng.below(
                                        static_cast<std::uint64_t>(n_weeks - 2 * kHalfWidth)));
      std::vector<double> weights;
      for (int k = peak - kHalfWidth; k <= peak + kHalfWidth; ++k) {
        const double d = (k - peak) / 4.0;
        weights.push_back(std::exp(-d * d) + 0.01);
      }
      std::vector<long> weekly[3];
      for (int t = 0; t < 3; ++t) weekly[t] = allocate(by_type[static_cast<std::size_t>(t)], weights);
      for (std::size_t k = 0; k < weights.size(); ++k) {
        const auto date = start + std::chrono::days{7 * (peak - kHalfWidth + static_cast<int>(k))};
        const auto [iso_year, iso_week] = iso_week_of(date);
        WeeklyRecord r{unit, iso_year, iso_week, static_cast<double>(weekly[0][k]),
                       static_cast<double>(weekly[1][k]), static_cast<double>(weekly[2][k]), itz};
        if (r.count_h1 + r.count_h3 + r.count_b > 0.0) out.push_back(std::move(r));
      }
    }
  }
  return out;
}

Dataset flu_dataset(const std::vector<UnitSeason>& rows) {
  if (rows.empty()) {
    throw Error(ErrorCode::NoData, "no unit-season reaches the minimum case count");
  }
  const auto n = static_cast<Index>(rows.size());
  Dataset d;
  d.response_names = {"ilr_y1", "ilr_y2"};
  d.responses.resize(n, 2);
  std::vector<std::string> seasons;
  std::vector<std::string> zones;
  bool any_zone = false;
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    const IlrPoint p = ilr_forward(r.composition);
    d.responses.row(i) << p.y1, p.y2;
    seasons.push_back(std::to_string(r.season));
    zones.push_back(r.itz.empty() ? "NA" : r.itz);
    any_zone = any_zone || !r.itz.empty();
  }
  d.covariates.push_back(Covariate::categorical("season", seasons));
  if (any_zone) d.covariates.push_back(Covariate::categorical("itz", zones));
  return d;
}

std::string describe_path(const CopulaTree& tree, int node) {
  std::vector<int> chain;
  for (int id = node; id >= 0; id = tree.node(id).parent) chain.push_back(id);
  std::reverse(chain.begin(), chain.end());
  std::string out;
  for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
    const TreeNode& parent = tree.node(chain[k]);
    const bool left = parent.left == chain[k + 1];
    const SplitRule& rule = *parent.rule;
    const auto& schema = tree.schema()[static_cast<std::size_t>(rule.feature)];
    std::string cond = schema.name;
    if (rule.kind == SplitKind::Numeric) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " %s %.6g", left ? "<=" : ">", rule.threshold);
      cond += buf;
    } else {
      cond += " in {";
      bool first = true;
      for (int level = 0; level < static_cast<int>(schema.levels.size()); ++level) {
        const bool in_left = std::binary_search(rule.left_levels.begin(), rule.left_levels.end(), level);
        if (in_left != left) continue;
        if (!first) cond += ", ";
        cond += schema.levels[static_cast<std::size_t>(level)];
        first = false;
      }
      cond += "}";
    }
    if (!out.empty()) out += " & ";
    out += cond;
  }
  return out.empty() ? "(all)" : out;
}

bool splits_on(const CopulaTree& tree, const std::string& covariate) {
  for (const auto& n : tree.nodes()) {
    if (n.rule && tree.schema()[static_cast<std::size_t>(n.rule->feature)].name == covariate) {
      return true;
    }
  }
  return false;
}

FluResult run_flu(const std::vector<WeeklyRecord>& records, const FluConfig& config) {
  FluResult result;
  result.unit_seasons = aggregate_counts(records, config.aggregation);
  result.data = flu_dataset(result.unit_seasons);
  result.margins = pseudo_margin_tree(result.data, config.margins);
  const Eigen::MatrixX2d& pseudo = result.margins.pseudo.values;
  result.fit = fit_conditional(config.copula, pseudo, result.data, config.stopping, config.cv);
  result.benchmark_loglik = result.fit.maximal.root().loglik;
  result.conditional_loglik = tree_loglik(result.fit.selected, pseudo, result.data);
  for (int id : result.fit.selected.leaf_ids()) {
    const TreeNode& leaf = result.fit.selected.node(id);
    result.leaves.push_back({id, leaf.n_obs, leaf.tau, leaf.theta, describe_path(result.fit.selected, id)});
  }
  return result;
}

}  // namespace cctree
