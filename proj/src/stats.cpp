#include "cctree/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cctree/error.hpp"

namespace cctree {

Eigen::VectorXd average_ranks(const Eigen::Ref<const Eigen::VectorXd>& values) {
  const Index n = values.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values[a] < values[b]; });
  Eigen::VectorXd ranks(n);
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double kendall_tau(const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y) {
  const Index n = x.size();
  if (y.size() != n || n < 2) {
    throw Error(ErrorCode::InsufficientData, "kendall_tau needs two equal-length samples");
  }
  double concordant = 0.0;
  double ties_x = 0.0;
  double ties_y = 0.0;
  double pairs = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      pairs += 1.0;
      if (dx == 0.0) ties_x += 1.0;
      if (dy == 0.0) ties_y += 1.0;
      const double s = dx * dy;
      if (s > 0.0) {
        concordant += 1.0;
      } else if (s < 0.0) {
        concordant -= 1.0;
      }
    }
  }
  const double denom = std::sqrt((pairs - ties_x) * (pairs - ties_y));
  return denom > 0.0 ? concordant / denom : 0.0;
}

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::InsufficientData, "quantile of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

KsResult ks_uniform(const Eigen::Ref<const Eigen::VectorXd>& values) {
  const Index n = values.size();
  if (n < 1) throw Error(ErrorCode::InsufficientData, "ks_uniform of an empty sample");
  std::vector<double> sorted(values.data(), values.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double nd = static_cast<double>(n);
  double d = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double f = std::clamp(sorted[static_cast<std::size_t>(i)], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / nd - f, f - static_cast<double>(i) / nd});
  }
  // Kolmogorov limiting distribution with the Stephens small-sample correction.
  const double sqrt_n = std::sqrt(nd);
  const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
  double p = 0.0;
  if (lambda < 0.2) {
    p = 1.0;
  } else {
    for (int k = 1; k <= 100; ++k) {
      const double term = std::exp(-2.0 * k * k * lambda * lambda);
      p += (k % 2 == 1 ? 2.0 : -2.0) * term;
      if (term < 1e-16) break;
    }
  }
  return {d, std::clamp(p, 0.0, 1.0)};
}

}  // namespace cctree
