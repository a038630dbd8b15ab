#include "cctree/copula.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "cctree/detail/compensated_sum.hpp"
#include "cctree/detail/kernels.hpp"
#include "cctree/detail/prepared_sample.hpp"
#include "cctree/error.hpp"
#include "cctree/special.hpp"

namespace cctree {

namespace {

constexpr double kIndependenceTau = 1e-7;
constexpr double kTauMargin = 1e-4;
constexpr double kUnitFloor = 0x1.0p-53;

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void check_interior(UnitPair p) {
  if (!(p.u > 0.0 && p.u < 1.0 && p.v > 0.0 && p.v < 1.0)) {
    throw Error(ErrorCode::Boundary, "pseudo-observation (" + fmt_double(p.u) + ", " +
                                         fmt_double(p.v) + ") is not interior to (0,1)^2");
  }
}

double frank_tau_positive(double theta) {
  if (theta < 1e-4) return theta / 9.0 - theta * theta * theta / 900.0;
  return 1.0 - 4.0 / theta * (1.0 - debye1(theta));
}

double frank_theta_positive(double tau) {
  if (tau < 1e-10) return 9.0 * tau;
  auto f = [tau](double t) { return frank_tau_positive(t) - tau; };
  double hi = 50.0;
  while (f(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e9) {
      throw Error(ErrorCode::Domain, "Frank tau " + fmt_double(tau) + " too close to 1");
    }
  }
  std::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      f, 0.0, hi, -tau, f(hi), boost::math::tools::eps_tolerance<double>(50), max_iter);
  return 0.5 * (a + b);
}

double clayton_log_conditional(double theta, double u, double v) {
  const double lu = std::log(u);
  const double ls = detail::clayton_log_s(-theta * lu, -theta * std::log(v));
  return (-theta - 1.0) * lu - (1.0 / theta + 1.0) * ls;
}

double gumbel_log_conditional(double theta, double u, double v) {
  const double x = detail::neg_log(u);
  const double y = detail::neg_log(v);
  const double lx = std::log(x);
  const double log_s = detail::gumbel_log_s(theta, lx, std::log(y));
  const double a = std::exp(log_s / theta);
  return -a + x + (theta - 1.0) * lx + (1.0 / theta - 1.0) * log_s;
}

double frank_cdf_positive(double theta, double u, double v) {
  const double lo = std::min(u, v);
  const double hi = std::max(u, v);
  return lo - (detail::frank_log_b(theta, lo, hi) - std::log(-std::expm1(-theta))) / theta;
}

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::Clayton: return "clayton";
    case Family::Frank: return "frank";
    case Family::Gumbel: return "gumbel";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "clayton") return Family::Clayton;
  if (lower == "frank") return Family::Frank;
  if (lower == "gumbel") return Family::Gumbel;
  throw Error(ErrorCode::Config, "unknown copula family '" + std::string(name) + "'");
}

Interval CopulaSpec::theta_domain() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (family) {
    case Family::Clayton: return {0.0, inf};
    case Family::Frank: return {-inf, inf};
    case Family::Gumbel: return {1.0, inf};
  }
  return {0.0, 0.0};
}

Interval CopulaSpec::tau_domain() const {
  return family == Family::Frank ? Interval{-1.0, 1.0} : Interval{0.0, 1.0};
}

Interval CopulaSpec::fit_tau_range() const {
  const Interval d = tau_domain();
  return {d.lo + kTauMargin, d.hi - kTauMargin};
}

double CopulaSpec::independence_theta() const { return family == Family::Gumbel ? 1.0 : 0.0; }

bool CopulaSpec::is_independence(double theta) const {
  switch (family) {
    case Family::Clayton: return theta / (theta + 2.0) < kIndependenceTau;
    case Family::Frank: return std::abs(theta) < 9.0 * kIndependenceTau;
    case Family::Gumbel: return (theta - 1.0) / theta < kIndependenceTau;
  }
  return false;
}

void CopulaSpec::check_theta(double theta) const {
  const Interval d = theta_domain();
  const bool ok = std::isfinite(theta) && theta >= d.lo;
  if (!ok) {
    throw Error(ErrorCode::Domain, "theta " + fmt_double(theta) + " outside the " +
                                       std::string(family_name(family)) + " domain");
  }
}

void CopulaSpec::check_tau(double tau) const {
  const Interval d = tau_domain();
  const bool ok = std::isfinite(tau) && tau < d.hi &&
                  (family == Family::Frank ? tau > d.lo : tau >= d.lo);
  if (!ok) {
    throw Error(ErrorCode::Domain, "tau " + fmt_double(tau) + " outside the " +
                                       std::string(family_name(family)) + " domain");
  }
}

LogDensity::LogDensity(const CopulaSpec& spec, double theta)
    : family_(spec.family),
      theta_(theta),
      independent_(spec.is_independence(theta)),
      log_norm_(0.0) {
  if (!independent_ && family_ == Family::Frank) {
    log_norm_ = detail::frank_log_norm(std::abs(theta));
  }
}

double LogDensity::operator()(double u, double v) const {
  if (independent_) return 0.0;
  switch (family_) {
    case Family::Clayton:
      return detail::clayton_log_density(detail::ClaytonConstants(theta_), std::log(u),
                                         std::log(v));
    case Family::Gumbel: {
      const double x = detail::neg_log(u);
      const double y = detail::neg_log(v);
      return detail::gumbel_log_density(theta_, x, y, std::log(x), std::log(y));
    }
    case Family::Frank:
      return theta_ > 0.0
                 ? detail::frank_log_density_pos(theta_, log_norm_, u, v)
                 : detail::frank_log_density_pos(-theta_, log_norm_, u, 1.0 - v);
  }
  return 0.0;
}

double log_density(const CopulaSpec& spec, double theta, UnitPair p) {
  spec.check_theta(theta);
  check_interior(p);
  return LogDensity(spec, theta)(p.u, p.v);
}

double cdf(const CopulaSpec& spec, double theta, UnitPair p) {
  spec.check_theta(theta);
  const double u = p.u;
  const double v = p.v;
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
    throw Error(ErrorCode::Boundary, "cdf argument outside [0,1]^2");
  }
  if (u == 0.0 || v == 0.0) return 0.0;
  if (u == 1.0) return v;
  if (v == 1.0) return u;
  double c = u * v;
  if (!spec.is_independence(theta)) {
    switch (spec.family) {
      case Family::Clayton:
        c = std::exp(-detail::clayton_log_s(-theta * std::log(u), -theta * std::log(v)) /
                     theta);
        break;
      case Family::Gumbel: {
        const double log_s = detail::gumbel_log_s(theta, std::log(detail::neg_log(u)),
                                                  std::log(detail::neg_log(v)));
        c = std::exp(-std::exp(log_s / theta));
        break;
      }
      case Family::Frank:
        c = theta > 0.0 ? frank_cdf_positive(theta, u, v)
                        : u - frank_cdf_positive(-theta, u, 1.0 - v);
        break;
    }
  }
  return std::clamp(c, std::max(u + v - 1.0, 0.0), std::min(u, v));
}

double conditional_cdf(const CopulaSpec& spec, double theta, UnitPair p) {
  spec.check_theta(theta);
  check_interior(p);
  if (spec.is_independence(theta)) return p.v;
  switch (spec.family) {
    case Family::Clayton: return std::exp(clayton_log_conditional(theta, p.u, p.v));
    case Family::Gumbel: return std::exp(gumbel_log_conditional(theta, p.u, p.v));
    case Family::Frank: {
      const double a = std::expm1(-theta * p.u);
      const double b = std::expm1(-theta * p.v);
      return std::exp(-theta * p.u) * b / (std::expm1(-theta) + a * b);
    }
  }
  return p.v;
}

double conditional_quantile(const CopulaSpec& spec, double theta, double u, double w) {
  spec.check_theta(theta);
  check_interior({u, w});
  double v = w;
  if (!spec.is_independence(theta)) {
    switch (spec.family) {
      case Family::Clayton: {
        // v^-theta = (w^{-theta/(1+theta)} - 1) u^-theta + 1
        const double a = std::expm1(-theta / (1.0 + theta) * std::log(w));
        const double t = std::log(a) - theta * std::log(u);
        const double log_term = t < 30.0 ? std::log1p(std::exp(t)) : t + std::log1p(std::exp(-t));
        v = std::exp(-log_term / theta);
        break;
      }
      case Family::Frank: {
        const double lw = std::log(w);
        const double l1w = std::log1p(-w);
        const double num = log_sum_exp(l1w - theta * u, lw - theta);
        const double den = log_sum_exp(lw, l1w - theta * u);
        v = -(num - den) / theta;
        break;
      }
      case Family::Gumbel: {
        const double target = std::log(w);
        double lo = 0.0;
        double hi = 1.0;
        while (hi - lo > 1e-10) {
          const double mid = 0.5 * (lo + hi);
          if (gumbel_log_conditional(theta, u, mid) < target) {
            lo = mid;
          } else {
            hi = mid;
          }
        }
        v = 0.5 * (lo + hi);
        break;
      }
    }
  }
  return std::clamp(v, kUnitFloor, 1.0 - kUnitFloor);
}

double theta_to_tau(const CopulaSpec& spec, double theta) {
  spec.check_theta(theta);
  switch (spec.family) {
    case Family::Clayton: return theta / (theta + 2.0);
    case Family::Gumbel: return 1.0 - 1.0 / theta;
    case Family::Frank:
      return theta >= 0.0 ? frank_tau_positive(theta) : -frank_tau_positive(-theta);
  }
  return 0.0;
}

double tau_to_theta(const CopulaSpec& spec, double tau) {
  spec.check_tau(tau);
  switch (spec.family) {
    case Family::Clayton: return 2.0 * tau / (1.0 - tau);
    case Family::Gumbel: return 1.0 / (1.0 - tau);
    case Family::Frank:
      return tau >= 0.0 ? frank_theta_positive(tau) : -frank_theta_positive(-tau);
  }
  return 0.0;
}

namespace detail {

PreparedSample::PreparedSample(const CopulaSpec& spec,
                               const Eigen::Ref<const Eigen::MatrixX2d>& data)
    : spec_(spec), cols_(data.rows(), 4) {
  for (Index i = 0; i < data.rows(); ++i) {
    const double u = data(i, 0);
    const double v = data(i, 1);
    switch (spec.family) {
      case Family::Clayton:
        cols_.row(i) << std::log(u), std::log(v), 0.0, 0.0;
        break;
      case Family::Gumbel: {
        const double x = neg_log(u);
        const double y = neg_log(v);
        cols_.row(i) << x, y, std::log(x), std::log(y);
        break;
      }
      case Family::Frank:
        cols_.row(i) << u, v, 1.0 - v, 0.0;
        break;
    }
  }
}

void PreparedSample::log_densities(double theta, Eigen::Ref<Eigen::VectorXd> out) const {
  const Index n = rows();
  if (spec_.is_independence(theta)) {
    out.setZero();
    return;
  }
  switch (spec_.family) {
    case Family::Clayton: {
      const ClaytonConstants k(theta);
      for (Index i = 0; i < n; ++i) out[i] = clayton_log_density(k, cols_(i, 0), cols_(i, 1));
      break;
    }
    case Family::Gumbel:
      for (Index i = 0; i < n; ++i) {
        out[i] = gumbel_log_density(theta, cols_(i, 0), cols_(i, 1), cols_(i, 2), cols_(i, 3));
      }
      break;
    case Family::Frank: {
      const double t = std::abs(theta);
      const double norm = frank_log_norm(t);
      const int vcol = theta > 0.0 ? 1 : 2;
      for (Index i = 0; i < n; ++i) {
        out[i] = frank_log_density_pos(t, norm, cols_(i, 0), cols_(i, vcol));
      }
      break;
    }
  }
}

double PreparedSample::loglik(double theta) const {
  Eigen::VectorXd values(rows());
  log_densities(theta, values);
  CompensatedSum sum;
  for (Index i = 0; i < values.size(); ++i) sum.add(values[i]);
  return sum.value();
}

}  // namespace detail

double log_likelihood(const CopulaSpec& spec, double theta,
                      const Eigen::Ref<const Eigen::MatrixX2d>& data) {
  spec.check_theta(theta);
  for (Index i = 0; i < data.rows(); ++i) check_interior({data(i, 0), data(i, 1)});
  return detail::PreparedSample(spec, data).loglik(theta);
}

namespace {

void check_fit_input(const Eigen::Ref<const Eigen::MatrixX2d>& data, const FitOptions& options) {
  if (data.rows() < options.min_fit_n) {
    throw Error(ErrorCode::InsufficientData,
                "maximum likelihood needs at least " + std::to_string(options.min_fit_n) +
                    " rows, got " + std::to_string(data.rows()));
  }
  for (Index i = 0; i < data.rows(); ++i) check_interior({data(i, 0), data(i, 1)});
}

double safe_loglik(const CopulaSpec& spec, const detail::PreparedSample& prep, double tau) {
  const double value = prep.loglik(tau_to_theta(spec, tau));
  return std::isfinite(value) ? value : -std::numeric_limits<double>::infinity();
}

FitResult refine(const CopulaSpec& spec, const detail::PreparedSample& prep, double lo,
                 double hi) {
  const Interval range = spec.fit_tau_range();
  lo = std::max(lo, range.lo);
  hi = std::min(hi, range.hi);
  constexpr std::uintmax_t kMaxIter = 200;
  std::uintmax_t iters = kMaxIter;
  const auto [tau, neg] = boost::math::tools::brent_find_minima(
      [&](double t) { return -safe_loglik(spec, prep, t); }, lo, hi,
      std::numeric_limits<double>::digits / 2, iters);
  if (!std::isfinite(neg)) {
    throw Error(ErrorCode::Fit, "log-likelihood is not finite anywhere in the search range");
  }
  FitResult fit;
  fit.tau_hat = tau;
  fit.theta_hat = tau_to_theta(spec, tau);
  fit.loglik = prep.loglik(fit.theta_hat);
  fit.n_obs = prep.rows();
  fit.converged = iters < kMaxIter;
  return fit;
}

}  // namespace

FitResult fit_mle(const CopulaSpec& spec, const Eigen::Ref<const Eigen::MatrixX2d>& data,
                  const FitOptions& options) {
  check_fit_input(data, options);
  const detail::PreparedSample prep(spec, data);
  const Interval range = spec.fit_tau_range();
  const int k = std::max(options.scan_points, 3);
  const double step = (range.hi - range.lo) / (k - 1);

  int best = -1;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < k; ++i) {
    const double value = safe_loglik(spec, prep, range.lo + i * step);
    if (value > best_value) {
      best_value = value;
      best = i;
    }
  }
  if (best < 0) {
    throw Error(ErrorCode::Fit, "log-likelihood is not finite anywhere in the search range");
  }
  const double lo = range.lo + std::max(best - 1, 0) * step;
  const double hi = range.lo + std::min(best + 1, k - 1) * step;
  return refine(spec, prep, lo, hi);
}

FitResult fit_mle_within(const CopulaSpec& spec,
                         const Eigen::Ref<const Eigen::MatrixX2d>& data, double tau_lo,
                         double tau_hi, const FitOptions& options) {
  check_fit_input(data, options);
  return refine(spec, detail::PreparedSample(spec, data), tau_lo, tau_hi);
}

UnitPair sample_pair(const CopulaSpec& spec, double theta, Rng& rng) {
  const double u = rng.uniform();
  const double w = rng.uniform();
  return {u, conditional_quantile(spec, theta, u, w)};
}

Eigen::MatrixX2d sample(const CopulaSpec& spec, double theta, Index n, std::uint64_t seed) {
  spec.check_theta(theta);
  if (n < 1) throw Error(ErrorCode::Config, "sample size must be at least 1");
  Rng rng(seed);
  Eigen::MatrixX2d out(n, 2);
  for (Index i = 0; i < n; ++i) {
    const UnitPair p = sample_pair(spec, theta, rng);
    out(i, 0) = p.u;
    out(i, 1) = p.v;
  }
  return out;
}

}  // namespace cctree
