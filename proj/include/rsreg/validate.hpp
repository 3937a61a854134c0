#pragma once
// Empirical checks of certificates by random probing on l2 spheres.
//
// Probing is random sampling, not an attack: it can only under-detect
// violations of a certificate, never prove one sound.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rsreg/certify.hpp"
#include "rsreg/error.hpp"
#include "rsreg/models.hpp"
#include "rsreg/region.hpp"
#include "rsreg/rng.hpp"
#include "rsreg/sampling.hpp"

namespace rsreg::validate {

using certify::Certificate;
using certify::CertMode;
using certify::CertRequest;
using sampling::ExecPolicy;
using sampling::NoiseConfig;

/// base: each trial is one draw of f(x + delta + e).
/// smoothed: each trial recomputes g_n(x + delta) from fresh noise.
enum class EvalKind { base, smoothed };

inline constexpr std::uint64_t kTrialTag = 0x747269616cull;     // "trial"
inline constexpr std::uint64_t kCurveTag = 0x6375727665ull;     // "curve"
inline constexpr std::uint64_t kSphereTag = 0x7370686572ull;    // "spher"

/// Uniform point on the sphere ||delta||_2 = radius, a function of (seed, index).
inline Vector sample_boundary_delta(std::size_t d, double radius, std::uint64_t seed,
                                    std::uint64_t index) {
  if (!(radius >= 0.0) || !std::isfinite(radius)) {
    throw DomainError("sample_boundary_delta: radius must be finite and >= 0");
  }
  Vector v(d, 0.0);
  if (radius == 0.0 || d == 0) return v;
  for (std::uint32_t attempt = 0;; ++attempt) {
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      v[j] = rng::standard_normal(seed, rng::Stream::sphere_direction, index,
                                  static_cast<std::uint32_t>(j + attempt * d));
      ss += v[j] * v[j];
    }
    if (ss > 1e-300) {
      const double scale = radius / std::sqrt(ss);
      for (double& c : v) c *= scale;
      return v;
    }
  }
}

struct EmpiricalResult {
  double frequency = 0.0;  // min over outputs
  Vector per_output;
  std::size_t trials = 0;
};

namespace detail {

using DeltaFn = std::function<Vector(std::size_t trial)>;

inline EmpiricalResult run_trials(const models::Model& model, std::span<const double> x,
                                  const AcceptRegion& region, const NoiseConfig& noise,
                                  const DeltaFn& delta_for, std::size_t trials, EvalKind kind,
                                  const ExecPolicy& exec) {
  noise.check();
  if (trials < 1) throw DomainError("empirical_accept_prob: trials must be >= 1");
  const std::size_t d = model.input_dim();
  const std::size_t t = model.output_dim();
  if (x.size() != d) throw DomainError("empirical_accept_prob: point dimension mismatch");
  if (region.dim() != t) throw DomainError("empirical_accept_prob: region dimension mismatch");

  std::vector<std::size_t> hits(t, 0);
  const auto tally = [&](std::span<const double> y) {
    const auto ok = region.accepts(y);
    for (std::size_t j = 0; j < t; ++j) hits[j] += ok[j] ? 1 : 0;
  };

  if (kind == EvalKind::base) {
    const NoiseConfig trial_cfg{noise.sigma, trials, rng::derive_seed(noise.seed, kTrialTag, 0)};
    std::vector<Vector> inputs;
    inputs.reserve(trials);
    for (std::size_t k = 0; k < trials; ++k) {
      Vector z = sampling::draw_noise(trial_cfg, d, k);
      const Vector delta = delta_for(k);
      for (std::size_t j = 0; j < d; ++j) z[j] += x[j] + delta[j];
      inputs.push_back(std::move(z));
    }
    for (const auto& y : model.batch_evaluate(inputs)) tally(y);
  } else {
    for (std::size_t k = 0; k < trials; ++k) {
      const NoiseConfig cfg{noise.sigma, noise.n, rng::derive_seed(noise.seed, kTrialTag, k + 1)};
      Vector z(x.begin(), x.end());
      const Vector delta = delta_for(k);
      for (std::size_t j = 0; j < d; ++j) z[j] += delta[j];
      tally(sampling::smoothed_mean(model, z, cfg, exec));
    }
  }

  EmpiricalResult res;
  res.trials = trials;
  res.per_output.resize(t);
  res.frequency = 1.0;
  for (std::size_t j = 0; j < t; ++j) {
    res.per_output[j] = static_cast<double>(hits[j]) / static_cast<double>(trials);
    res.frequency = std::min(res.frequency, res.per_output[j]);
  }
  return res;
}

}  // namespace detail

/// Acceptance frequency at the fixed perturbation x + delta.
inline EmpiricalResult empirical_accept_prob(const models::Model& model, std::span<const double> x,
                                             const AcceptRegion& region, const NoiseConfig& noise,
                                             std::span<const double> delta, std::size_t trials,
                                             EvalKind kind = EvalKind::base,
                                             const ExecPolicy& exec = {}) {
  if (delta.size() != model.input_dim()) throw DomainError("empirical_accept_prob: delta dimension mismatch");
  const Vector fixed(delta.begin(), delta.end());
  return detail::run_trials(model, x, region, noise, [&](std::size_t) { return fixed; }, trials,
                            kind, exec);
}

/// Acceptance frequency where trial k probes a fresh direction on the
/// sphere of the given radius.
inline EmpiricalResult empirical_accept_prob_sphere(const models::Model& model,
                                                    std::span<const double> x,
                                                    const AcceptRegion& region,
                                                    const NoiseConfig& noise, double radius,
                                                    std::size_t trials, EvalKind kind,
                                                    std::uint64_t direction_seed,
                                                    const ExecPolicy& exec = {}) {
  const std::size_t d = model.input_dim();
  return detail::run_trials(
      model, x, region, noise,
      [&](std::size_t k) { return sample_boundary_delta(d, radius, direction_seed, k); }, trials,
      kind, exec);
}

enum class RadiusPolicy { at_certificate, fraction_of_certificate, fixed };

struct ValidationSpec {
  std::size_t trials = 20;
  std::size_t directions = 20;  // per grid radius, error curves only
  RadiusPolicy radius_policy = RadiusPolicy::at_certificate;
  double radius_value = 1.0;    // fraction, or the fixed radius
  double penalty_k = 150.0;
  std::vector<double> radius_grid;
  std::size_t smooth_n = 10;    // g used by error curves; 0 means the base model
  double infinite_probe_radius = 10.0;

  void check() const {
    if (trials < 1) throw DomainError("ValidationSpec: trials must be >= 1");
    if (directions < 1) throw DomainError("ValidationSpec: directions must be >= 1");
    if (radius_policy == RadiusPolicy::fraction_of_certificate &&
        !(radius_value > 0.0 && radius_value <= 1.0)) {
      throw DomainError("ValidationSpec: fraction must lie in (0,1]");
    }
    if (radius_policy == RadiusPolicy::fixed && !(radius_value >= 0.0)) {
      throw DomainError("ValidationSpec: fixed radius must be >= 0");
    }
    if (!(penalty_k > 0.0)) throw DomainError("ValidationSpec: penalty K must be > 0");
    for (double r : radius_grid) {
      if (!(r >= 0.0)) throw DomainError("ValidationSpec: radius grid entries must be >= 0");
    }
  }
};

/// P - 3 sqrt(P(1-P)/trials).
inline double pass_threshold(double target_p, std::size_t trials) {
  return target_p - 3.0 * std::sqrt(target_p * (1.0 - target_p) / static_cast<double>(trials));
}

struct PointCheck {
  bool evaluated = false;  // false for ABSTAIN
  double probe_radius = 0.0;
  std::size_t trials = 0;
  double frequency = 0.0;
  double threshold = 0.0;
  bool pass = true;
  std::uint64_t seed = 0;
};

inline double probe_radius(const Certificate& cert, const ValidationSpec& spec) {
  double r = cert.radius;
  switch (spec.radius_policy) {
    case RadiusPolicy::at_certificate: break;
    case RadiusPolicy::fraction_of_certificate: r *= spec.radius_value; break;
    case RadiusPolicy::fixed: r = spec.radius_value; break;
  }
  return std::isinf(r) ? spec.infinite_probe_radius : r;
}

/// Empirical acceptance at the certificate's radius against the region the
/// certificate refers to (the discounted region in discounted mode).
inline PointCheck check_certificate(const models::Model& model, const CertRequest& req,
                                    const Certificate& cert, const ValidationSpec& spec,
                                    std::uint64_t seed) {
  spec.check();
  PointCheck out;
  out.seed = seed;
  out.threshold = pass_threshold(req.target_p, spec.trials);
  if (cert.abstain) return out;
  out.evaluated = true;
  out.probe_radius = probe_radius(cert, spec);
  const AcceptRegion& region = cert.certified_region ? *cert.certified_region : req.region;
  const EvalKind kind = cert.mode == CertMode::base ? EvalKind::base : EvalKind::smoothed;
  const NoiseConfig noise{req.noise.sigma, req.noise.n, seed};
  const auto res = empirical_accept_prob_sphere(model, req.x, region, noise, out.probe_radius,
                                                spec.trials, kind,
                                                rng::derive_seed(seed, kSphereTag, 0), req.exec);
  out.trials = res.trials;
  out.frequency = res.frequency;
  out.pass = res.frequency >= out.threshold;
  return out;
}

struct ErrorCurve {
  std::vector<double> radius_grid;
  std::vector<double> median;
  std::vector<double> mean;
  std::vector<std::vector<double>> per_point;  // [point][grid]
  std::vector<double> certified_radius;        // -inf for ABSTAIN
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Certified median/mean error: e_K(r) = max over sampled ||delta|| <= r of
/// ||g(x + delta) - p*||_2, plus K when r exceeds the certified radius.
/// The sampled delta set at r contains every set at smaller grid radii, plus
/// delta = 0, so each per-point curve is non-decreasing in r.
inline ErrorCurve certified_error_curve(const models::Model& model, std::span<const Vector> points,
                                        std::span<const Vector> truths,
                                        std::span<const Certificate> certs,
                                        const ValidationSpec& spec, double sigma,
                                        std::uint64_t seed, const ExecPolicy& exec = {}) {
  spec.check();
  if (points.size() != truths.size() || points.size() != certs.size()) {
    throw DomainError("certified_error_curve: points, truths and certificates must align");
  }
  std::vector<double> grid = spec.radius_grid;
  std::sort(grid.begin(), grid.end());

  ErrorCurve out;
  out.radius_grid = grid;
  const std::size_t d = model.input_dim();
  for (std::size_t p = 0; p < points.size(); ++p) {
    if (truths[p].size() != model.output_dim()) {
      throw DomainError("certified_error_curve: truth " + std::to_string(p) + " has wrong dimension");
    }
    const NoiseConfig g_noise{sigma, std::max<std::size_t>(spec.smooth_n, 1),
                              rng::derive_seed(seed, kCurveTag, p)};
    const auto g = [&](const Vector& z) {
      return spec.smooth_n == 0 ? model.evaluate(z) : sampling::smoothed_mean(model, z, g_noise, exec);
    };
    const auto error_at = [&](const Vector& delta) {
      Vector z = points[p];
      for (std::size_t j = 0; j < d; ++j) z[j] += delta[j];
      const Vector y = g(z);
      double ss = 0.0;
      for (std::size_t j = 0; j < y.size(); ++j) ss += (y[j] - truths[p][j]) * (y[j] - truths[p][j]);
      return std::sqrt(ss);
    };

    const double eps = certs[p].abstain ? -std::numeric_limits<double>::infinity() : certs[p].radius;
    out.certified_radius.push_back(eps);
    double worst = error_at(Vector(d, 0.0));
    std::vector<double> curve;
    const std::uint64_t dir_seed = rng::derive_seed(seed, kSphereTag, p + 1);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (grid[k] > 0.0) {
        for (std::size_t j = 0; j < spec.directions; ++j) {
          worst = std::max(worst, error_at(sample_boundary_delta(d, grid[k], dir_seed,
                                                                 k * spec.directions + j)));
        }
      }
      curve.push_back(worst + (grid[k] > eps ? spec.penalty_k : 0.0));
    }
    out.per_point.push_back(std::move(curve));
  }

  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::vector<double> col;
    double sum = 0.0;
    for (const auto& c : out.per_point) {
      col.push_back(c[k]);
      sum += c[k];
    }
    out.mean.push_back(col.empty() ? 0.0 : sum / static_cast<double>(col.size()));
    out.median.push_back(median_of(std::move(col)));
  }
  return out;
}

}  // namespace rsreg::validate
