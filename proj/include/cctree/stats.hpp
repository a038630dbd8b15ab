#pragma once

#include <span>

#include <Eigen/Core>

namespace cctree {

using Eigen::Index;

/// Ranks 1..n with ties sharing their average rank.
Eigen::VectorXd average_ranks(const Eigen::Ref<const Eigen::VectorXd>& values);

/// Empirical Kendall tau-b.
double kendall_tau(const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y);

/// Sample quantile with linear interpolation between order statistics (R type 7).
double quantile(std::span<const double> values, double p);
double median(std::span<const double> values);

double mean(std::span<const double> values);

/// Sample standard deviation (denominator n - 1); 0 for fewer than two values.
double stddev(std::span<const double> values);

struct KsResult {
  double statistic;
  double p_value;
};

/// One-sample Kolmogorov-Smirnov test against Uniform(0, 1), asymptotic p-value.
KsResult ks_uniform(const Eigen::Ref<const Eigen::VectorXd>& values);

}  // namespace cctree
