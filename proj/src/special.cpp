#include "cctree/special.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

namespace cctree {

namespace {

// Even Bernoulli numbers B_2 .. B_24.
constexpr std::array<double, 12> kBernoulliEven = {
    1.0 / 6.0,           -1.0 / 30.0,          1.0 / 42.0,
    -1.0 / 30.0,         5.0 / 66.0,           -691.0 / 2730.0,
    7.0 / 6.0,           -3617.0 / 510.0,      43867.0 / 798.0,
    -174611.0 / 330.0,   854513.0 / 138.0,     -236364091.0 / 2730.0};

// Taylor series of D1 about 0; radius of convergence is 2*pi, used for x <= 1
// where twelve terms reach double precision.
double debye1_series(double x) {
  double sum = 1.0 - x / 4.0;
  const double x2 = x * x;
  double power = 1.0;
  double factorial = 1.0;
  for (std::size_t k = 1; k <= kBernoulliEven.size(); ++k) {
    power *= x2;
    factorial *= static_cast<double>((2 * k - 1) * (2 * k));
    const double term = kBernoulliEven[k - 1] * power /
                        (static_cast<double>(2 * k + 1) * factorial);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

// integral_0^x t/(e^t - 1) dt = pi^2/6 - sum_k e^{-kx} (x/k + 1/k^2), x > 0.
double debye1_exponential(double x) {
  const double q = std::exp(-x);
  double qk = 1.0;
  double tail = 0.0;
  for (int k = 1; k < 200; ++k) {
    qk *= q;
    const double kd = static_cast<double>(k);
    const double term = qk * (x / kd + 1.0 / (kd * kd));
    tail += term;
    if (term < 1e-18) break;
  }
  return (std::numbers::pi * std::numbers::pi / 6.0 - tail) / x;
}

}  // namespace

double debye1(double x) {
  if (x < 0.0) return debye1(-x) - x / 2.0;
  if (x < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x / 4.0 + x2 / 36.0 - x2 * x2 / 3600.0;
  }
  if (x <= 1.0) return debye1_series(x);
  return debye1_exponential(x);
}

double debye1_derivative(double x) {
  if (std::abs(x) < 1e-4) return -0.25 + x / 18.0 - x * x * x / 900.0;
  return 1.0 / std::expm1(x) - debye1(x) / x;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double log_sum_exp(double a, double b) {
  const double hi = std::max(a, b);
  if (hi == -INFINITY) return -INFINITY;
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace cctree
