#pragma once

// Independent reference computations used to check the library. None of these
// call into the code paths they are compared against.

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "cctree/copula.hpp"
#include "cctree/dataset.hpp"
#include "cctree/tree.hpp"

namespace oracle {

struct Quadrature {
  std::vector<double> nodes;  // on [-1, 1]
  std::vector<double> weights;
};

/// Gauss-Legendre rule from Newton iteration on the Legendre recurrence.
Quadrature gauss_legendre(int n);

/// Tensor-product rule over [a1, b1] x [a2, b2].
double integrate_2d(const std::function<double(double, double)>& f, double a1, double b1,
                    double a2, double b2, int n = 64);

/// n x n Gauss-Legendre over (0,1)^2 after the substitution u = (1 - cos(pi s)) / 2
/// on each axis. Resolves the corner ridges of strongly dependent densities.
double integrate_unit_square_clustered(const std::function<double(double, double)>& f, int n = 64);

/// Adaptive Simpson on [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol);

/// D1(x) by adaptive Simpson of t / (e^t - 1) with absolute tolerance 1e-12.
double debye1(double x);

double frank_tau(double theta);

/// Bisection of frank_tau on [-50, 50]; expanded outward when tau is extreme.
double frank_theta(double tau);

/// Central second mixed difference of the CDF, a density estimate.
double fd_density(const cctree::CopulaSpec& spec, double theta, double u, double v,
                  double h = 1e-4);

struct BruteSplit {
  cctree::SplitRule rule;
  double gain = 0.0;
};

/// Exhaustive split search: every numeric midpoint and every contiguous cut of
/// the categorical ordering, each child refit from scratch with fit_mle.
std::optional<BruteSplit> brute_force_split(const cctree::CopulaSpec& spec,
                                            const Eigen::Ref<const Eigen::MatrixX2d>& pseudo,
                                            const cctree::Dataset& data,
                                            const cctree::StoppingConfig& stopping);

/// All prunings of a tree, as ascending frontiers of node ids.
std::vector<std::vector<int>> all_prunings(const cctree::CopulaTree& tree);

/// Largest summed leaf log-likelihood over all prunings with k leaves, summed
/// in ascending id order; nothing if no pruning has k leaves.
std::optional<double> best_pruning_loglik(const cctree::CopulaTree& tree, int k);

/// Kendall tau by direct O(n^2) pair counting (no ties).
double kendall_tau_pairs(const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& y);

}  // namespace oracle
