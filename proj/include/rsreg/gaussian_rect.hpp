#pragma once
// Rectangle probabilities of a multivariate normal.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "rsreg/error.hpp"
#include "rsreg/rng.hpp"
#include "rsreg/specfun.hpp"

namespace rsreg::specfun {

/// P(lower <= X <= upper) for X ~ Normal(mean, covariance / scale).
struct GaussianRect {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> mean;
  Eigen::MatrixXd covariance;

  std::size_t dim() const { return mean.size(); }
};

struct RectProb {
  double value = 0.0;
  double error = 0.0;        // absolute error estimate (0 when exact)
  bool regularized = false;  // ridge added to a near-singular covariance
  bool degenerate = false;   // zero covariance: value is an indicator
};

struct RectOptions {
  double abs_tol = 2.5e-5;
  std::size_t initial_points = 1024;
  std::size_t max_points = std::size_t{1} << 18;
  std::size_t shifts = 12;
};

namespace detail {

// P(a <= Z <= b), Z standard normal, evaluated on the tail that avoids
// cancellation.
inline double normal_interval(double a, double b) {
  if (!(a < b)) return 0.0;
  const auto cdf = [](double z) {
    if (z == -std::numeric_limits<double>::infinity()) return 0.0;
    if (z == std::numeric_limits<double>::infinity()) return 1.0;
    return std_normal_cdf(z);
  };
  if (a > 0.0) return cdf(-a) - cdf(-b);
  return cdf(b) - cdf(a);
}

inline void check_rect(const GaussianRect& rect) {
  const std::size_t t = rect.dim();
  if (t == 0) throw DomainError("gaussian_rect_prob: empty rectangle");
  if (rect.lower.size() != t || rect.upper.size() != t ||
      static_cast<std::size_t>(rect.covariance.rows()) != t ||
      static_cast<std::size_t>(rect.covariance.cols()) != t) {
    throw DomainError("gaussian_rect_prob: dimension mismatch");
  }
  for (std::size_t i = 0; i < t; ++i) {
    if (!(rect.lower[i] <= rect.upper[i])) {
      throw DomainError("gaussian_rect_prob: lower > upper at coordinate " + std::to_string(i));
    }
  }
  const double scale = rect.covariance.cwiseAbs().maxCoeff();
  if ((rect.covariance - rect.covariance.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(scale, 1.0)) {
    throw DomainError("gaussian_rect_prob: covariance not symmetric");
  }
}

inline constexpr std::array<double, 24> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19,
                                                   23, 29, 31, 37, 41, 43, 47, 53,
                                                   59, 61, 67, 71, 73, 79, 83, 89};

// Genz separation of variables over a lower-triangular factor L with the
// rectangle already centred. One integrand evaluation at w in [0,1)^(t-1).
inline double genz_integrand(const Eigen::MatrixXd& L, const std::vector<double>& a,
                             const std::vector<double>& b, const double* w,
                             std::vector<double>& y) {
  const std::size_t t = a.size();
  double f = 1.0;
  for (std::size_t i = 0; i < t; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < i; ++j) s += L(i, j) * y[j];
    const double lii = L(i, i);
    const double za = (a[i] - s) / lii;
    const double zb = (b[i] - s) / lii;
    const double da = std::isfinite(za) ? std_normal_cdf(za) : (za > 0 ? 1.0 : 0.0);
    const double eb = std::isfinite(zb) ? std_normal_cdf(zb) : (zb > 0 ? 1.0 : 0.0);
    const double width = normal_interval(za, zb);
    f *= width;
    if (f <= 0.0) return 0.0;
    if (i + 1 < t) {
      double u = da + w[i] * (eb - da);
      u = std::clamp(u, 1e-300, 1.0 - 1e-16);
      y[i] = std_normal_quantile(u);
    }
  }
  return f;
}

}  // namespace detail

/// Rectangle probability for Normal(mean, covariance / scale).
///
/// Diagonal covariance takes the exact product of univariate terms. Otherwise
/// the Genz transform is integrated with randomly shifted Richtmyer lattice
/// rules; `error` is three standard errors across the shifts. A covariance
/// whose smallest eigenvalue falls below 1e-12 * trace gets a ridge of
/// 1e-10 * trace / t, and `regularized` is set.
inline RectProb gaussian_rect_prob(const GaussianRect& rect, double scale,
                                   const RectOptions& opts = {}) {
  detail::check_rect(rect);
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw DomainError("gaussian_rect_prob: scale must be positive");
  }
  const std::size_t t = rect.dim();
  Eigen::MatrixXd cov = rect.covariance / scale;
  RectProb out;

  const double trace = cov.trace();
  if (trace <= 0.0) {
    bool inside = true;
    for (std::size_t i = 0; i < t; ++i) {
      inside = inside && rect.lower[i] <= rect.mean[i] && rect.mean[i] <= rect.upper[i];
    }
    out.value = inside ? 1.0 : 0.0;
    out.degenerate = true;
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < -1e-9 * trace) {
    throw DomainError("gaussian_rect_prob: covariance not positive semidefinite");
  }
  if (min_eig < 1e-12 * trace) {
    cov.diagonal().array() += 1e-10 * trace / static_cast<double>(t);
    out.regularized = true;
  }

  std::vector<double> a(t), b(t);
  for (std::size_t i = 0; i < t; ++i) {
    a[i] = rect.lower[i] - rect.mean[i];
    b[i] = rect.upper[i] - rect.mean[i];
  }

  bool diagonal = true;
  for (std::size_t i = 0; i < t && diagonal; ++i) {
    for (std::size_t j = 0; j < t; ++j) {
      if (i != j && cov(i, j) != 0.0) {
        diagonal = false;
        break;
      }
    }
  }
  if (diagonal) {
    double value = 1.0;
    for (std::size_t i = 0; i < t; ++i) {
      const double sd = std::sqrt(cov(i, i));
      value *= detail::normal_interval(a[i] / sd, b[i] / sd);
    }
    out.value = std::clamp(value, 0.0, 1.0);
    return out;
  }

  if (t > detail::kPrimes.size() + 1) {
    throw DomainError("gaussian_rect_prob: dimension too large for lattice rule");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw DomainError("gaussian_rect_prob: Cholesky factorisation failed");
  }
  const Eigen::MatrixXd L = llt.matrixL();

  const std::size_t dims = t - 1;
  std::vector<double> gen(dims), shift(dims), w(dims), y(t);
  for (std::size_t j = 0; j < dims; ++j) gen[j] = std::sqrt(detail::kPrimes[j]);

  constexpr std::uint64_t kLatticeSeed = 0x5EED0F6A055ull;
  double mean_est = 0.0;
  double err_est = 1.0;
  for (std::size_t npts = opts.initial_points;; npts *= 2) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t s = 0; s < opts.shifts; ++s) {
      for (std::size_t j = 0; j < dims; ++j) {
        shift[j] = rng::uniform01(kLatticeSeed, rng::Stream::lattice_shift, npts * 64 + s,
                                  static_cast<std::uint32_t>(j));
      }
      double acc = 0.0;
      for (std::size_t k = 1; k <= npts; ++k) {
        for (std::size_t j = 0; j < dims; ++j) {
          double v = static_cast<double>(k) * gen[j] + shift[j];
          v -= std::floor(v);
          w[j] = std::abs(2.0 * v - 1.0);  // tent periodisation
        }
        acc += detail::genz_integrand(L, a, b, w.data(), y);
      }
      const double est = acc / static_cast<double>(npts);
      sum += est;
      sum_sq += est * est;
    }
    const double m = static_cast<double>(opts.shifts);
    mean_est = sum / m;
    const double var = std::max(0.0, (sum_sq - m * mean_est * mean_est) / (m - 1.0));
    err_est = 3.0 * std::sqrt(var / m);
    if (err_est <= opts.abs_tol || npts >= opts.max_points) break;
  }
  out.value = std::clamp(mean_est, 0.0, 1.0);
  out.error = err_est;
  return out;
}

}  // namespace rsreg::specfun
