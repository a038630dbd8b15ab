#pragma once

namespace cctree {

/// First-order Debye function D1(x) = (1/x) * integral_0^x t / (e^t - 1) dt.
/// Defined for all real x with D1(0) = 1.
double debye1(double x);

/// Derivative of D1 with respect to x.
double debye1_derivative(double x);

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile; p must lie in (0, 1).
double normal_quantile(double p);

/// log(exp(a) + exp(b)) without overflow.
double log_sum_exp(double a, double b);

}  // namespace cctree
