#pragma once
// Gaussian perturbation engine: g_n(x) = (1/n) sum_i f(x + e_i), e_i ~ N(0, sigma^2 I).

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "rsreg/error.hpp"
#include "rsreg/models.hpp"
#include "rsreg/region.hpp"
#include "rsreg/rng.hpp"

namespace rsreg::sampling {

struct NoiseConfig {
  double sigma = 0.23;
  std::size_t n = 10000;
  std::uint64_t seed = 0;

  void check() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("NoiseConfig: sigma must be > 0");
    if (n < 1) throw DomainError("NoiseConfig: n must be >= 1");
  }
};

struct ExecPolicy {
  std::size_t workers = 1;
  std::size_t chunk = 512;
};

struct SmoothedEval {
  Vector mean;                               // g_n
  Eigen::MatrixXd covariance;                // unbiased, zero when n == 1
  std::vector<std::size_t> accept_counts;    // per output
  std::size_t n = 0;
  bool covariance_defined = false;           // false when n == 1
};

/// index-th noise vector in R^dim; a function of (seed, index) only.
inline Vector draw_noise(const NoiseConfig& cfg, std::size_t dim, std::size_t index) {
  cfg.check();
  if (index >= cfg.n) {
    throw DomainError("draw_noise: index " + std::to_string(index) + " outside [0, " +
                      std::to_string(cfg.n) + ")");
  }
  Vector e(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    e[j] = cfg.sigma *
           rng::standard_normal(cfg.seed, rng::Stream::input_noise, index, static_cast<std::uint32_t>(j));
  }
  return e;
}

/// Raw outputs f(x + e_i), i < n, row-major n x t. Row i depends only on
/// (seed, i), never on how the work is split across workers.
inline std::vector<double> sample_outputs(const models::Model& model, std::span<const double> x,
                                          const NoiseConfig& cfg, const ExecPolicy& exec = {}) {
  cfg.check();
  const std::size_t d = model.input_dim();
  const std::size_t t = model.output_dim();
  if (x.size() != d) {
    throw DomainError("smooth_eval: point has " + std::to_string(x.size()) +
                      " components, model expects " + std::to_string(d));
  }
  const std::size_t chunk = std::max<std::size_t>(exec.chunk, 1);
  const std::size_t n_chunks = (cfg.n + chunk - 1) / chunk;
  std::vector<double> out(cfg.n * t);

  const auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    const std::size_t end = std::min(cfg.n, begin + chunk);
    std::vector<Vector> inputs;
    inputs.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      Vector z = draw_noise(cfg, d, i);
      for (std::size_t j = 0; j < d; ++j) z[j] += x[j];
      inputs.push_back(std::move(z));
    }
    const auto ys = model.batch_evaluate(inputs);
    for (std::size_t k = 0; k < ys.size(); ++k) {
      if (ys[k].size() != t) throw DomainError("smooth_eval: model returned wrong output size");
      std::copy(ys[k].begin(), ys[k].end(), out.begin() + static_cast<std::ptrdiff_t>((begin + k) * t));
    }
  };

  const std::size_t workers =
      model.concurrent() ? std::min(std::max<std::size_t>(exec.workers, 1), n_chunks) : 1;
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n_chunks);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) {
        try {
          run_chunk(c);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

/// Moments and acceptance counts of the n noisy outputs; reduction is in
/// sample order so results are bit-identical for any worker count.
inline SmoothedEval summarize(std::span<const double> outputs, std::size_t n, std::size_t t,
                              const AcceptRegion* region) {
  SmoothedEval ev;
  ev.n = n;
  ev.mean.assign(t, 0.0);
  for (std::size_t j = 0; j < t; ++j) {
    double sum = 0.0;
    double comp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = outputs[i * t + j];
      const double s = sum + v;
      comp += std::abs(sum) >= std::abs(v) ? (sum - s) + v : (v - s) + sum;
      sum = s;
    }
    ev.mean[j] = (sum + comp) / static_cast<double>(n);
  }

  ev.covariance = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t));
  ev.covariance_defined = n >= 2;
  if (ev.covariance_defined) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < t; ++a) {
        const double da = outputs[i * t + a] - ev.mean[a];
        for (std::size_t b = a; b < t; ++b) {
          ev.covariance(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +=
              da * (outputs[i * t + b] - ev.mean[b]);
        }
      }
    }
    ev.covariance /= static_cast<double>(n - 1);
    ev.covariance.triangularView<Eigen::StrictlyLower>() = ev.covariance.transpose();
  }

  ev.accept_counts.assign(t, 0);
  if (region) {
    if (region->dim() != t) throw DomainError("smooth_eval: region dimension mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      const auto ok = region->accepts(outputs.subspan(i * t, t));
      for (std::size_t j = 0; j < t; ++j) ev.accept_counts[j] += ok[j] ? 1 : 0;
    }
  }
  return ev;
}

inline SmoothedEval smooth_eval(const models::Model& model, std::span<const double> x,
                                const NoiseConfig& cfg, const AcceptRegion& region,
                                const ExecPolicy& exec = {}) {
  if (region.dim() != model.output_dim()) {
    throw DomainError("smooth_eval: region has " + std::to_string(region.dim()) +
                      " outputs, model has " + std::to_string(model.output_dim()));
  }
  const auto outputs = sample_outputs(model, x, cfg, exec);
  return summarize(outputs, cfg.n, model.output_dim(), &region);
}

/// g_n(x) only.
inline Vector smoothed_mean(const models::Model& model, std::span<const double> x,
                            const NoiseConfig& cfg, const ExecPolicy& exec = {}) {
  const auto outputs = sample_outputs(model, x, cfg, exec);
  return summarize(outputs, cfg.n, model.output_dim(), nullptr).mean;
}

}  // namespace rsreg::sampling
