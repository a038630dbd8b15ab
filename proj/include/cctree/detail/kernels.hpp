#pragma once

// Numerically stable log-densities of the three families, written in terms of
// per-point transforms so that callers evaluating many parameters on the same
// data can precompute them once.

#include <algorithm>
#include <cmath>

namespace cctree::detail {

// log(u^-theta + v^-theta - 1) with a = -theta log u, b = -theta log v.
inline double clayton_log_s(double a, double b) {
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  if (hi < 30.0) return std::log1p(std::expm1(a) + std::expm1(b));
  return hi + std::log1p(std::exp(lo - hi) - std::exp(-hi));
}

struct ClaytonConstants {
  explicit ClaytonConstants(double theta)
      : theta(theta), log1p_theta(std::log1p(theta)), exponent(2.0 + 1.0 / theta) {}
  double theta;
  double log1p_theta;
  double exponent;
};

inline double clayton_log_density(const ClaytonConstants& k, double log_u, double log_v) {
  const double ls = clayton_log_s(-k.theta * log_u, -k.theta * log_v);
  return k.log1p_theta - (1.0 + k.theta) * (log_u + log_v) - k.exponent * ls;
}

// Gumbel in terms of x = -log u, y = -log v and their logs.
inline double gumbel_log_s(double theta, double log_x, double log_y) {
  const double hi = std::max(log_x, log_y);
  const double lo = std::min(log_x, log_y);
  return theta * hi + std::log1p(std::exp(theta * (lo - hi)));
}

inline double gumbel_log_density(double theta, double x, double y, double log_x,
                                 double log_y) {
  const double log_s = gumbel_log_s(theta, log_x, log_y);
  const double a = std::exp(log_s / theta);
  return -a + x + y + (theta - 1.0) * (log_x + log_y) + (2.0 / theta - 2.0) * log_s +
         std::log1p((theta - 1.0) / a);
}

// -log u, accurate near u = 1.
inline double neg_log(double u) { return u > 0.5 ? -std::log1p(u - 1.0) : -std::log(u); }

// Frank for theta > 0; negative parameters use c_{-t}(u, v) = c_t(u, 1 - v).
inline double frank_log_norm(double theta) {
  return std::log(theta) + std::log(-std::expm1(-theta));
}

// log of D / e^{-theta m} where D = (1-e^-t) - (1-e^-tu)(1-e^-tv), m = min(u,v).
inline double frank_log_b(double theta, double lo, double hi) {
  const double b = -std::expm1(-theta * hi) +
                   std::exp(-theta * (hi - lo)) * -std::expm1(-theta * (1.0 - hi));
  return std::log(b);
}

inline double frank_log_density_pos(double theta, double log_norm, double u, double v) {
  const double lo = std::min(u, v);
  const double hi = std::max(u, v);
  return log_norm - theta * (hi - lo) - 2.0 * frank_log_b(theta, lo, hi);
}

}  // namespace cctree::detail
