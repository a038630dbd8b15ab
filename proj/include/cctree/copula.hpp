#pragma once

#include <cstdint>
#include <string_view>

#include <Eigen/Core>

#include "cctree/random.hpp"

namespace cctree {

using Eigen::Index;

enum class Family { Clayton, Frank, Gumbel };

std::string_view family_name(Family family);

/// Case-insensitive; throws Error(Config) on unknown names.
Family parse_family(std::string_view name);

struct Interval {
  double lo;
  double hi;
};

/// A point strictly inside the unit square.
struct UnitPair {
  double u;
  double v;
};

/// One-parameter Archimedean family together with its parameter domains.
///
/// Domains are open intervals. The independence point (Clayton theta = 0,
/// Frank theta = 0, Gumbel theta = 1) is accepted as a limit everywhere and is
/// evaluated exactly as the product copula.
struct CopulaSpec {
  Family family = Family::Clayton;

  Interval theta_domain() const;
  Interval tau_domain() const;

  /// Kendall tau range searched by maximum likelihood: tau_domain shrunk by 1e-4.
  Interval fit_tau_range() const;

  double independence_theta() const;

  /// True when |tau(theta)| < 1e-7.
  bool is_independence(double theta) const;

  void check_theta(double theta) const;
  void check_tau(double tau) const;
};

struct FitResult {
  double theta_hat = 0.0;
  double tau_hat = 0.0;
  double loglik = 0.0;  // summed, natural log
  Index n_obs = 0;
  bool converged = false;
};

struct FitOptions {
  Index min_fit_n = 10;
  int scan_points = 41;
};

double log_density(const CopulaSpec& spec, double theta, UnitPair p);

/// C_theta(u, v); accepts the closed unit square so that margins can be
/// checked at the boundary.
double cdf(const CopulaSpec& spec, double theta, UnitPair p);

/// dC/du at (u, v): the conditional distribution of V given U = u.
double conditional_cdf(const CopulaSpec& spec, double theta, UnitPair p);

/// Solves conditional_cdf(u, v) = w for v.
double conditional_quantile(const CopulaSpec& spec, double theta, double u, double w);

double theta_to_tau(const CopulaSpec& spec, double theta);
double tau_to_theta(const CopulaSpec& spec, double tau);

/// Sum of log-densities over the rows of an n x 2 matrix of interior points.
double log_likelihood(const CopulaSpec& spec, double theta,
                      const Eigen::Ref<const Eigen::MatrixX2d>& data);

/// Maximum-likelihood fit in Kendall-tau space: a uniform scan over
/// fit_tau_range() brackets the maximum, Brent's method refines it.
FitResult fit_mle(const CopulaSpec& spec, const Eigen::Ref<const Eigen::MatrixX2d>& data,
                  const FitOptions& options = {});

/// Brent refinement only, on [tau_lo, tau_hi] (clipped to fit_tau_range()).
FitResult fit_mle_within(const CopulaSpec& spec,
                         const Eigen::Ref<const Eigen::MatrixX2d>& data, double tau_lo,
                         double tau_hi, const FitOptions& options = {});

/// One draw by conditional inversion: u ~ U(0,1), v = conditional_quantile(u, w).
UnitPair sample_pair(const CopulaSpec& spec, double theta, Rng& rng);

Eigen::MatrixX2d sample(const CopulaSpec& spec, double theta, Index n, std::uint64_t seed);

/// Log-density at a fixed parameter, without argument validation. Used by the
/// hot loops of tree building and evaluation.
class LogDensity {
 public:
  LogDensity(const CopulaSpec& spec, double theta);

  double operator()(double u, double v) const;

 private:
  Family family_;
  double theta_;
  bool independent_;
  double log_norm_;  // theta-only term of the log-density
};

}  // namespace cctree
