#pragma once
// Certified l2 radii for base and smoothed regressors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsreg/error.hpp"
#include "rsreg/estimation.hpp"
#include "rsreg/gaussian_rect.hpp"
#include "rsreg/models.hpp"
#include "rsreg/region.hpp"
#include "rsreg/sampling.hpp"
#include "rsreg/specfun.hpp"

namespace rsreg::certify {

using estimation::ConfidenceSpec;
using sampling::ExecPolicy;
using sampling::NoiseConfig;

enum class CertMode { base, smoothed_asymptotic, smoothed_discounted };

/// What to do when the discounted region leaves [l, u].
enum class Containment {
  strict,  // DomainError naming the coordinate
  clip,    // clamp the discounted region to [l, u]
};

inline const char* to_string(CertMode m) {
  switch (m) {
    case CertMode::base: return "base";
    case CertMode::smoothed_asymptotic: return "smoothed-asymptotic";
    case CertMode::smoothed_discounted: return "smoothed-discounted";
  }
  return "?";
}

inline CertMode parse_mode(const std::string& s) {
  if (s == "base") return CertMode::base;
  if (s == "smoothed-asymptotic") return CertMode::smoothed_asymptotic;
  if (s == "smoothed-discounted") return CertMode::smoothed_discounted;
  throw DomainError("unknown certification mode '" + s + "'");
}

struct CertRequest {
  Vector x;
  AcceptRegion region;
  std::optional<OutputBounds> bounds;
  NoiseConfig noise;
  double target_p = 0.8;
  ConfidenceSpec conf;
  double tau = 0.0;
  double beta = 0.0;
  CertMode mode = CertMode::base;
  Containment containment = Containment::strict;
  ExecPolicy exec;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double alpha = 0.0;
  double sigma = 0.0;
};

struct Certificate {
  CertMode mode = CertMode::base;
  bool abstain = true;
  double radius = 0.0;  // 0 when abstaining; may be +inf
  Vector per_output_radii;
  Vector pa_lower;
  std::optional<Vector> phat;
  std::optional<double> lower_bound_prob;
  std::optional<double> asymptotic_prob;
  Provenance provenance;

  Vector fx;
  std::vector<std::size_t> accept_counts;
  std::optional<AcceptRegion> certified_region;  // discounted region, if any
  bool unbounded = false;           // some output has an infinite radius
  bool q_below_half = false;        // inversion target outside [1/2, 1]
  bool covariance_degenerate = false;
};

/// Integer arguments (a, b) of I_p(a, b) produced by a worst-case geometry.
struct BetaArgs {
  std::int64_t a = 0;
  std::int64_t b = 1;
  double rho = 0.0;
  bool upper_branch = true;
};

namespace detail {

// ceil(v) clamped to [0, n]; values within 1e-9 of an integer count as that
// integer so 10 * 0.3 stays 3.
inline std::int64_t ceil_clamped(double v, std::size_t n) {
  if (std::isnan(v)) throw UndefinedBoundError("worst-case ratio is NaN");
  const double cap = static_cast<double>(n);
  if (v <= 0.0) return 0;
  if (v >= cap) return static_cast<std::int64_t>(n);
  const double r = std::round(v);
  if (std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v))) v = r;
  return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::ceil(v)), 0,
                                  static_cast<std::int64_t>(n));
}

inline BetaArgs args_from_rho(double rho, bool upper, std::size_t n) {
  BetaArgs out;
  out.rho = rho;
  out.upper_branch = upper;
  const double dn = static_cast<double>(n);
  out.a = std::isinf(rho) ? 0 : ceil_clamped(dn * (1.0 - rho), n);
  out.b = (std::isinf(rho) ? static_cast<std::int64_t>(n) : ceil_clamped(dn * rho, n)) + 1;
  return out;
}

inline void check_ordering(double l, double lb, double ub, double u, std::size_t i) {
  if (!(l <= lb && lb <= ub && ub <= u)) {
    throw DomainError("need l <= l_b <= u_b <= u at output " + std::to_string(i));
  }
}

inline const OutputBounds& require_bounds(const CertRequest& req) {
  if (!req.bounds) throw DomainError("bounded-output certificate requires output bounds [l, u]");
  req.bounds->check(req.region.dim());
  if (!req.region.is_interval()) {
    throw DomainError("bounded-output certificates need an abs-diff (interval) region");
  }
  return *req.bounds;
}

inline void check_probabilities(std::span<const double> p, std::size_t t, const char* what) {
  if (p.size() != t) throw DomainError(std::string(what) + ": expected one probability per output");
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError(std::string(what) + ": probability outside [0,1]");
  }
}

inline Certificate radius_from_required(std::span<const double> pa, std::span<const double> required,
                                        double sigma) {
  Certificate c;
  c.pa_lower.assign(pa.begin(), pa.end());
  c.per_output_radii.resize(pa.size());
  double min_r = std::numeric_limits<double>::infinity();
  bool abstain = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double zp = specfun::std_normal_quantile(pa[i]);
    const double zq = specfun::std_normal_quantile(required[i]);
    const double r = zp == zq ? 0.0 : sigma * (zp - zq);
    if (required[i] >= pa[i] || !(r > 0.0)) abstain = true;
    c.per_output_radii[i] = r;
    min_r = std::min(min_r, r);
  }
  c.abstain = abstain || pa.empty();
  c.unbounded = !c.abstain && std::isinf(min_r);
  c.radius = c.abstain ? 0.0 : min_r;
  return c;
}

}  // namespace detail

/// Per-output radius sigma * (inv_Phi(pa_i) - inv_Phi(P)); certificate radius
/// is the minimum. Abstains when the minimum is <= 0; pa_i = 0 gives -inf for
/// that output, pa_i = 1 gives +inf (unbounded).
inline Certificate theorem1_radius(std::span<const double> pa, double target_p, double sigma) {
  if (!(target_p > 0.0 && target_p < 1.0)) throw DomainError("theorem1_radius: P must lie in (0,1)");
  if (!(sigma > 0.0)) throw DomainError("theorem1_radius: sigma must be > 0");
  detail::check_probabilities(pa, pa.size(), "theorem1_radius");
  Certificate c;
  c.pa_lower.assign(pa.begin(), pa.end());
  c.per_output_radii.resize(pa.size());
  const double zp = specfun::std_normal_quantile(target_p);
  double min_r = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double r = sigma * (specfun::std_normal_quantile(pa[i]) - zp);
    c.per_output_radii[i] = r;
    min_r = std::min(min_r, r);
  }
  c.abstain = pa.empty() || !(min_r > 0.0);
  c.unbounded = !c.abstain && std::isinf(min_r);
  c.radius = c.abstain ? 0.0 : min_r;
  return c;
}

/// Worst-case (a, b) for output i under the mean-proximity assumption tau.
/// The branch inequality is evaluated exactly as stated, signs included.
inline BetaArgs theorem3_args(double fx, double l, double u, double lb, double ub, double tau,
                              std::size_t n, std::size_t i = 0) {
  detail::check_ordering(l, lb, ub, u, i);
  if (!(tau >= 0.0) || tau > std::min(fx - lb, ub - fx)) {
    throw DomainError("need 0 <= tau <= min(f(x) - l_b, u_b - f(x)) at output " + std::to_string(i));
  }
  if (ub == u || lb == l) {
    throw UndefinedBoundError("accepted region touches the output bound at output " + std::to_string(i));
  }
  const double den_u = u - fx - tau;
  const double den_l = fx - tau - l;
  if (!(den_u > 0.0) || !(den_l > 0.0)) {
    throw UndefinedBoundError("f(x) -/+ tau reaches the output bound at output " + std::to_string(i));
  }
  const bool upper = (u - ub) / den_u >= (l - lb) / den_l;
  const double rho = upper ? (ub - fx - tau) / den_u : (fx - tau - lb) / den_l;
  return detail::args_from_rho(rho, upper, n);
}

inline std::vector<BetaArgs> theorem3_args(std::span<const double> fx, const CertRequest& req) {
  const auto& bounds = detail::require_bounds(req);
  const auto& r = req.region;
  if (fx.size() != r.dim()) throw DomainError("theorem3: f(x) dimension mismatch");
  std::vector<BetaArgs> out;
  for (std::size_t i = 0; i < r.dim(); ++i) {
    out.push_back(theorem3_args(fx[i], bounds.lower[i], bounds.upper[i], r.lower[i], r.upper[i],
                                req.tau, req.noise.n, i));
  }
  return out;
}

/// Worst-case (a, b) for output i when the accepted samples sit on the
/// region boundary and the region is widened by beta.
inline BetaArgs discounted_args(double fx, double l, double u, double lb, double ub, double beta,
                                std::size_t n, Containment containment = Containment::strict,
                                std::size_t i = 0) {
  detail::check_ordering(l, lb, ub, u, i);
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("discount beta must be >= 0");
  if (containment == Containment::strict) {
    if (lb - beta * std::abs(lb - fx) < l) {
      throw DomainError("discounted lower bound falls below l at output " + std::to_string(i));
    }
    if (ub + beta * std::abs(ub - fx) > u) {
      throw DomainError("discounted upper bound exceeds u at output " + std::to_string(i));
    }
  }
  const auto ratio = [&](double num, double den) {
    if (den > 0.0) return num / den;
    if (num > 0.0) return std::numeric_limits<double>::infinity();
    throw UndefinedBoundError("degenerate discounted geometry at output " + std::to_string(i));
  };
  const double ru = ratio(std::abs(ub - fx), u - ub);
  const double rl = ratio(std::abs(lb - fx), lb - l);
  const bool upper = ru <= rl;
  const double base = upper ? ru : rl;
  const double rho = beta == 0.0 ? 0.0 : beta * base;
  return detail::args_from_rho(rho, upper, n);
}

inline std::vector<BetaArgs> discounted_args(std::span<const double> fx, const CertRequest& req) {
  const auto& bounds = detail::require_bounds(req);
  const auto& r = req.region;
  if (fx.size() != r.dim()) throw DomainError("discounted: f(x) dimension mismatch");
  std::vector<BetaArgs> out;
  for (std::size_t i = 0; i < r.dim(); ++i) {
    out.push_back(discounted_args(fx[i], bounds.lower[i], bounds.upper[i], r.lower[i], r.upper[i],
                                  req.beta, req.noise.n, req.containment, i));
  }
  return out;
}

/// [l_b - beta|l_b - f(x)|, u_b + beta|u_b - f(x)|], clamped to [l, u] under
/// Containment::clip.
inline AcceptRegion discounted_region(std::span<const double> fx, const CertRequest& req) {
  const auto& bounds = detail::require_bounds(req);
  discounted_args(fx, req);  // validates geometry / containment
  AcceptRegion out = req.region;
  for (std::size_t i = 0; i < out.dim(); ++i) {
    out.lower[i] = req.region.lower[i] - req.beta * std::abs(req.region.lower[i] - fx[i]);
    out.upper[i] = req.region.upper[i] + req.beta * std::abs(req.region.upper[i] - fx[i]);
    if (req.containment == Containment::clip) {
      out.lower[i] = std::max(out.lower[i], bounds.lower[i]);
      out.upper[i] = std::min(out.upper[i], bounds.upper[i]);
    }
  }
  return out;
}

inline double min_beta_bound(const std::vector<BetaArgs>& args, std::span<const double> p) {
  double m = 1.0;
  for (std::size_t i = 0; i < args.size(); ++i) {
    m = std::min(m, specfun::reg_inc_beta(p[i], args[i].a, args[i].b));
  }
  return m;
}

/// min_i I_{p_i}(a_i, b_i) with the bounded-output worst case (asymptotic).
inline double theorem3_lower_bound(std::span<const double> fx, const CertRequest& req,
                                   std::span<const double> p) {
  const auto args = theorem3_args(fx, req);
  detail::check_probabilities(p, args.size(), "theorem3_lower_bound");
  return min_beta_bound(args, p);
}

/// min_i I_{p_i}(a_i, b_i) for the discounted finite-sample worst case.
inline double discounted_lower_bound(std::span<const double> fx, const CertRequest& req,
                                     std::span<const double> p) {
  const auto args = discounted_args(fx, req);
  detail::check_probabilities(p, args.size(), "discounted_lower_bound");
  return min_beta_bound(args, p);
}

/// Required base acceptance p_hat_i = I^{-1}(q; a_i, b_i), then the base
/// radius with p_hat_i in place of P.
inline Certificate radius_via_inversion(const std::vector<BetaArgs>& args, std::span<const double> pa,
                                        double q, double sigma) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("inversion target q must lie in (0,1)");
  detail::check_probabilities(pa, args.size(), "radius_via_inversion");
  Vector phat(args.size());
  for (std::size_t i = 0; i < args.size(); ++i) {
    phat[i] = specfun::reg_inc_beta_inv(q, args[i].a, args[i].b);
  }
  Certificate c = detail::radius_from_required(pa, phat, sigma);
  c.phat = std::move(phat);
  c.q_below_half = q <= 0.5;
  return c;
}

inline Certificate smoothed_radius_via_inversion(std::span<const double> fx, const CertRequest& req,
                                                 std::span<const double> pa, double q) {
  return radius_via_inversion(theorem3_args(fx, req), pa, q, req.noise.sigma);
}

inline Certificate discounted_radius_via_inversion(std::span<const double> fx, const CertRequest& req,
                                                   std::span<const double> pa, double q) {
  return radius_via_inversion(discounted_args(fx, req), pa, q, req.noise.sigma);
}

struct AsymptoticProb {
  double value = 0.0;
  double error = 0.0;
  bool degenerate = false;
  bool regularized = false;
};

/// Probability that g_n lands in the interval region under the normal
/// approximation Normal(g_n, Sigma_hat / n). Refers to the sampled point only.
inline AsymptoticProb asymptotic_accept_prob(const sampling::SmoothedEval& eval,
                                             const AcceptRegion& region) {
  if (!region.is_interval()) throw DomainError("asymptotic_accept_prob needs an interval region");
  if (eval.n < 2 || !eval.covariance_defined) {
    throw DomainError("asymptotic_accept_prob needs n >= 2 samples");
  }
  if (eval.mean.size() != region.dim()) throw DomainError("asymptotic_accept_prob: dimension mismatch");
  specfun::GaussianRect rect{region.lower, region.upper, eval.mean, eval.covariance};
  const auto r = specfun::gaussian_rect_prob(rect, static_cast<double>(eval.n));
  return {r.value, r.error, r.degenerate, r.regularized};
}

inline void check_request(const models::Model& model, const CertRequest& req) {
  if (req.x.size() != model.input_dim()) {
    throw DomainError("certify: point has " + std::to_string(req.x.size()) +
                      " components, model expects " + std::to_string(model.input_dim()));
  }
  if (req.region.dim() != model.output_dim()) throw DomainError("certify: region dimension mismatch");
  req.noise.check();
  req.conf.check();
  if (!(req.target_p > 0.0 && req.target_p < 1.0)) throw DomainError("certify: P must lie in (0,1)");
  if (!(req.tau >= 0.0)) throw DomainError("certify: tau must be >= 0");
  if (!(req.beta >= 0.0)) throw DomainError("certify: beta must be >= 0");
}

/// smooth_eval -> Clopper-Pearson -> mode-specific radius.
inline Certificate certify_point(const models::Model& model, const CertRequest& req) {
  check_request(model, req);
  const Vector fx = model.evaluate(req.x);
  const auto eval = sampling::smooth_eval(model, req.x, req.noise, req.region, req.exec);
  const auto pa = estimation::estimate_pa(eval, req.conf);

  Certificate cert;
  const AcceptRegion* prob_region = &req.region;
  switch (req.mode) {
    case CertMode::base:
      cert = theorem1_radius(pa, req.target_p, req.noise.sigma);
      break;
    case CertMode::smoothed_asymptotic:
      cert = smoothed_radius_via_inversion(fx, req, pa, req.target_p);
      cert.lower_bound_prob = theorem3_lower_bound(fx, req, pa);
      break;
    case CertMode::smoothed_discounted:
      cert = discounted_radius_via_inversion(fx, req, pa, req.target_p);
      cert.lower_bound_prob = discounted_lower_bound(fx, req, pa);
      cert.certified_region = discounted_region(fx, req);
      prob_region = &*cert.certified_region;
      break;
  }
  if (prob_region->is_interval() && eval.n >= 2) {
    const auto ap = asymptotic_accept_prob(eval, *prob_region);
    cert.asymptotic_prob = ap.value;
    cert.covariance_degenerate = ap.degenerate;
  }
  cert.mode = req.mode;
  cert.fx = fx;
  cert.accept_counts = eval.accept_counts;
  cert.provenance = {req.noise.seed, req.noise.n, req.conf.alpha, req.noise.sigma};
  return cert;
}

}  // namespace rsreg::certify
