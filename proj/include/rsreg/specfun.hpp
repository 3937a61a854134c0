#pragma once
// Scalar special functions: standard normal CDF/quantile, integer-argument
// regularized incomplete beta, binomial tails.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include "rsreg/error.hpp"

namespace rsreg::specfun {

namespace detail {

inline void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError(std::string(what) + ": probability outside [0,1]");
  }
}

// ln(n!) without touching the global signgam that std::lgamma writes.
inline double log_factorial(std::int64_t n) {
  if (n < 0) throw DomainError("log_factorial: negative argument");
  if (n < 2) return 0.0;
  if (n < 40) {
    double s = 0.0;
    for (std::int64_t i = 2; i <= n; ++i) s += std::log(static_cast<double>(i));
    return s;
  }
  // Stirling series for ln Gamma(x), x = n + 1 >= 41; truncation error < 1e-19.
  const double x = static_cast<double>(n) + 1.0;
  const double x2 = x * x;
  const double series =
      1.0 / (12.0 * x) - 1.0 / (360.0 * x * x2) + 1.0 / (1260.0 * x * x2 * x2) -
      1.0 / (1680.0 * x * x2 * x2 * x2);
  return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) + series;
}

inline double log_choose(std::int64_t n, std::int64_t k) {
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// Sum of binomial pmf terms starting at `start` and walking in direction
// `step` (+1 or -1) up to and including `stop`. Terms are accumulated
// relative to the first one so nothing underflows before the final scale.
inline double binomial_pmf_run(std::int64_t n, double p, std::int64_t start,
                               std::int64_t stop, int step) {
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_first = log_choose(n, start) + static_cast<double>(start) * log_p +
                           static_cast<double>(n - start) * log_q;
  const double odds = p / (1.0 - p);
  double term = 1.0;
  double sum = 0.0;
  double comp = 0.0;  // Neumaier compensation
  for (std::int64_t j = start;; j += step) {
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    if (j == stop) break;
    if (step > 0) {
      term *= static_cast<double>(n - j) / static_cast<double>(j + 1) * odds;
    } else {
      term *= static_cast<double>(j) / static_cast<double>(n - j + 1) / odds;
    }
    if (term < 1e-20 * sum) break;
  }
  return std::exp(log_first) * sum;
}

}  // namespace detail

/// Standard normal CDF. Throws DomainError on non-finite input.
inline double std_normal_cdf(double z) {
  if (!std::isfinite(z)) throw DomainError("std_normal_cdf: non-finite argument");
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// Standard normal quantile. Returns -inf / +inf for p = 0 / p = 1.
///
/// Acklam's rational approximation (relative error ~1e-9) followed by Halley
/// steps against std_normal_cdf. Upper half is mirrored so the refinement
/// always works in the lower tail where erfc is accurate in relative terms.
inline double std_normal_quantile(double p) {
  detail::require_probability(p, "std_normal_quantile");
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  if (p > 0.5) return -std_normal_quantile(1.0 - p);
  if (p == 0.5) return 0.0;

  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }

  constexpr double sqrt_2pi = 2.5066282746310005024;
  for (int iter = 0; iter < 3; ++iter) {
    const double err = std_normal_cdf(x) - p;
    const double u = err * sqrt_2pi * std::exp(0.5 * x * x);
    const double nx = x - u / (1.0 + 0.5 * x * u);
    if (!std::isfinite(nx)) break;
    if (nx == x) break;
    x = nx;
  }
  return x;
}

/// P(Binomial(n, p) >= k), 0 <= k <= n.
inline double binomial_tail(std::int64_t n, std::int64_t k, double p) {
  if (n < 0 || k < 0 || k > n) {
    throw DomainError("binomial_tail: need 0 <= k <= n, got n=" + std::to_string(n) +
                      " k=" + std::to_string(k));
  }
  detail::require_probability(p, "binomial_tail");
  if (k == 0) return 1.0;
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;

  const double mean = static_cast<double>(n) * p;
  double value;
  if (static_cast<double>(k) > mean) {
    value = detail::binomial_pmf_run(n, p, k, n, +1);
  } else {
    value = 1.0 - detail::binomial_pmf_run(n, p, k - 1, 0, -1);
  }
  return std::clamp(value, 0.0, 1.0);
}

/// Regularized incomplete beta I_p(a, b) for non-negative integer a, b.
///
/// Evaluated as P(Binomial(a+b-1, p) >= a). Conventions for clamped
/// arguments: I_p(0, b) = 1 and I_p(a, 0) = 0 for a >= 1.
inline double reg_inc_beta(double p, std::int64_t a, std::int64_t b) {
  if (a < 0 || b < 0) throw DomainError("reg_inc_beta: negative shape parameter");
  detail::require_probability(p, "reg_inc_beta");
  if (a == 0) return 1.0;
  if (b == 0) return 0.0;
  return binomial_tail(a + b - 1, a, p);
}

/// Smallest p with I_p(a, b) >= q, by bisection on [0, 1].
inline double reg_inc_beta_inv(double q, std::int64_t a, std::int64_t b) {
  if (a < 0 || b < 0) throw DomainError("reg_inc_beta_inv: negative shape parameter");
  detail::require_probability(q, "reg_inc_beta_inv");
  if (q == 0.0 || a == 0) return 0.0;
  if (q == 1.0 || b == 0) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (reg_inc_beta(mid, a, b) >= q) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace rsreg::specfun
