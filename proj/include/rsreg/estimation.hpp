#pragma once
// One-sided Clopper-Pearson lower bounds on acceptance probabilities.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rsreg/error.hpp"
#include "rsreg/sampling.hpp"
#include "rsreg/specfun.hpp"

namespace rsreg::estimation {

struct BinomialObservation {
  std::size_t successes = 0;
  std::size_t trials = 1;

  void check() const {
    if (trials < 1) throw DomainError("BinomialObservation: trials must be >= 1");
    if (successes > trials) throw DomainError("BinomialObservation: successes > trials");
  }
};

struct ConfidenceSpec {
  double alpha = 0.001;

  void check() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("ConfidenceSpec: alpha must lie in (0,1)");
  }
};

/// p solving P(Binomial(n, p) >= X) = alpha/2; 0 when X = 0.
///
/// The bracket [0, X/n] is widened towards 1 if needed and bisected to a
/// width of 1e-12; the lower end is returned so the bound never overshoots.
inline double clopper_pearson_lower(const BinomialObservation& obs, const ConfidenceSpec& conf) {
  obs.check();
  conf.check();
  if (obs.successes == 0) return 0.0;
  const auto n = static_cast<std::int64_t>(obs.trials);
  const auto x = static_cast<std::int64_t>(obs.successes);
  const double target = 0.5 * conf.alpha;
  if (x == n) return std::pow(target, 1.0 / static_cast<double>(n));

  double lo = 0.0;
  double hi = static_cast<double>(x) / static_cast<double>(n);
  while (specfun::binomial_tail(n, x, hi) < target) hi = 0.5 * (hi + 1.0);
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (specfun::binomial_tail(n, x, mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

/// Per-output Clopper-Pearson bound at a shared alpha (no multiplicity
/// correction across outputs).
inline std::vector<double> estimate_pa(const sampling::SmoothedEval& eval,
                                       const ConfidenceSpec& conf) {
  std::vector<double> pa;
  pa.reserve(eval.accept_counts.size());
  for (std::size_t c : eval.accept_counts) {
    pa.push_back(clopper_pearson_lower({c, eval.n}, conf));
  }
  return pa;
}

}  // namespace rsreg::estimation
