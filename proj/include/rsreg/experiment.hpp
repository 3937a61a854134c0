#pragma once
// Batch experiments behind the CLI verbs: certify, validate, sweep.
//
// Every point uses the run seed for its smoothing noise, so each row is
// reproducible from (x, seed, n, sigma, alpha, P, ...) alone. Validation and
// error-curve seeds are derived from the run seed and the row index.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "rsreg/certify.hpp"
#include "rsreg/config.hpp"
#include "rsreg/models.hpp"
#include "rsreg/report.hpp"
#include "rsreg/rng.hpp"
#include "rsreg/validate.hpp"

namespace rsreg::cli {

using report::CertRow;
using report::Cell;
using report::Table;

inline constexpr std::uint64_t kValidateTag = 0x76616c6964ull;  // "valid"

/// Runs job(i) for i < count on up to `workers` threads; the exception of
/// the lowest failing index is rethrown.
inline void parallel_for(std::size_t count, std::size_t workers,
                         const std::function<void(std::size_t)>& job) {
  workers = std::min(std::max<std::size_t>(workers, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          job(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline AcceptRegion make_region(const RunConfig& cfg, Vector y) {
  return cfg.diss == Dissimilarity::grouped_l2 ? AcceptRegion::grouped(std::move(y), cfg.eps_y, cfg.groups)
                                               : AcceptRegion::interval(std::move(y), cfg.eps_y);
}

inline certify::CertRequest make_request(const RunConfig& cfg, const Vector& x, const Vector& y,
                                         CertMode mode) {
  certify::CertRequest req;
  req.x = x;
  req.region = make_region(cfg, y);
  req.bounds = cfg.bounds;
  req.noise = {cfg.sigma, cfg.n, cfg.seed};
  req.target_p = cfg.target_p;
  req.conf.alpha = cfg.alpha;
  req.tau = cfg.tau;
  req.beta = cfg.beta;
  req.mode = mode;
  req.containment = cfg.containment;
  return req;
}

struct CertifyRun {
  std::vector<CertRow> rows;  // ordered by (point, mode)
  std::vector<certify::Certificate> certs;
};

inline CertRow to_row(const RunConfig& cfg, std::size_t point, const certify::CertRequest& req,
                      const certify::Certificate& c) {
  CertRow r;
  r.point = point;
  r.mode = c.mode;
  r.x = req.x;
  r.y = req.region.y;
  r.eps = req.region.eps_y;
  r.fx = c.fx;
  r.counts = c.accept_counts;
  r.pa = c.pa_lower;
  r.phat = c.phat;
  r.radii = c.per_output_radii;
  r.abstain = c.abstain;
  r.radius = c.radius;
  r.lower_bound_prob = c.lower_bound_prob;
  r.asymptotic_prob = c.asymptotic_prob;
  r.seed = c.provenance.seed;
  r.n = c.provenance.n;
  r.alpha = c.provenance.alpha;
  r.sigma = c.provenance.sigma;
  r.target_p = cfg.target_p;
  r.beta = cfg.beta;
  r.tau = cfg.tau;
  return r;
}

/// Spreads points over workers when there are enough of them, otherwise
/// gives the workers to the sampler of each point. Results do not depend on
/// the split.
inline void run_jobs(const models::Model& model, std::size_t jobs, std::size_t workers,
                     const std::function<void(std::size_t, const sampling::ExecPolicy&)>& job) {
  if (!model.concurrent()) workers = 1;
  if (jobs >= workers) {
    parallel_for(jobs, workers, [&](std::size_t i) { job(i, sampling::ExecPolicy{1, 512}); });
  } else {
    for (std::size_t i = 0; i < jobs; ++i) job(i, sampling::ExecPolicy{workers, 512});
  }
}

inline Vector reference_output(const RunConfig& cfg, const models::Model& model, std::size_t i) {
  return cfg.reference ? (*cfg.reference)[i] : model.evaluate(cfg.points[i]);
}

inline CertifyRun certify_all(const RunConfig& cfg, const models::Model& model) {
  const std::size_t m = cfg.modes.size();
  const std::size_t jobs = cfg.points.size() * m;
  CertifyRun run;
  run.rows.resize(jobs);
  run.certs.resize(jobs);
  run_jobs(model, jobs, cfg.workers, [&](std::size_t j, const sampling::ExecPolicy& exec) {
    const std::size_t p = j / m;
    auto req = make_request(cfg, cfg.points[p], reference_output(cfg, model, p), cfg.modes[j % m]);
    req.exec = exec;
    try {
      run.certs[j] = certify::certify_point(model, req);
    } catch (const TransportError&) {
      throw;
    } catch (const std::exception& e) {
      throw DomainError("point " + std::to_string(p) + " (" + certify::to_string(req.mode) +
                        "): " + e.what());
    }
    run.rows[j] = to_row(cfg, p, req, run.certs[j]);
  });
  return run;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
}

inline std::string join(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

inline void write_table(const Table& t, const std::string& dir, const std::string& stem) {
  ensure_dir(dir);
  report::write_file(join(dir, stem + ".csv"), report::to_csv(t));
  report::write_file(join(dir, stem + ".json"), report::to_json(t).dump(2) + "\n");
}

inline CertifyRun run_certify(const RunConfig& cfg) {
  const auto model = models::make_model(cfg.model);
  auto run = certify_all(cfg, *model);
  write_table(report::cert_table(run.rows), cfg.out, "certificates");
  return run;
}

// ---------------------------------------------------------------------------

struct ValidateRun {
  std::vector<CertRow> rows;
  std::vector<validate::PointCheck> checks;
  std::vector<std::pair<CertMode, validate::ErrorCurve>> curves;
  bool all_pass = true;
};

namespace detail {

inline void require_same(double row, double cfg, const char* name, std::size_t i) {
  if (row != cfg) {
    throw ConfigError("certificate row " + std::to_string(i) + " was made with " + name + " = " +
                      format_double(row) + ", config has " + format_double(cfg));
  }
}

inline void check_row_matches(const RunConfig& cfg, const CertRow& r, std::size_t i) {
  require_same(r.sigma, cfg.sigma, "sigma", i);
  require_same(static_cast<double>(r.n), static_cast<double>(cfg.n), "n", i);
  require_same(r.alpha, cfg.alpha, "alpha", i);
  require_same(r.target_p, cfg.target_p, "P", i);
  require_same(static_cast<double>(r.seed), static_cast<double>(cfg.seed), "seed", i);
  if (r.mode != CertMode::base) {
    require_same(r.beta, cfg.beta, "beta", i);
    require_same(r.tau, cfg.tau, "tau", i);
  }
  if (r.x.size() != cfg.model.input_dim || r.fx.size() != cfg.model.output_dim) {
    throw ConfigError("certificate row " + std::to_string(i) + " has dimensions (" +
                      std::to_string(r.x.size()) + "," + std::to_string(r.fx.size()) +
                      "), config model has (" + std::to_string(cfg.model.input_dim) + "," +
                      std::to_string(cfg.model.output_dim) + ")");
  }
  for (std::size_t k = 0; k < r.eps.size(); ++k) require_same(r.eps[k], cfg.eps_y[k], "eps_y", i);
}

}  // namespace detail

inline Table validation_table(const ValidateRun& v) {
  Table t;
  t.columns = {"point", "mode", "radius", "probe_radius", "trials", "frequency", "threshold",
               "status", "seed"};
  for (std::size_t i = 0; i < v.rows.size(); ++i) {
    const auto& r = v.rows[i];
    const auto& c = v.checks[i];
    const char* status = !c.evaluated ? "abstain" : c.pass ? "pass" : "fail";
    t.rows.push_back({std::uint64_t{r.point}, std::string(certify::to_string(r.mode)),
                      report::radius_text(r.abstain, r.radius),
                      c.evaluated ? Cell{c.probe_radius} : Cell{},
                      c.evaluated ? Cell{std::uint64_t{c.trials}} : Cell{},
                      c.evaluated ? Cell{c.frequency} : Cell{}, Cell{c.threshold},
                      std::string(status), std::uint64_t{c.seed}});
  }
  return t;
}

inline Table error_curve_table(const ValidateRun& v) {
  Table t;
  std::size_t width = 0;
  for (const auto& [_, c] : v.curves) width = std::max(width, c.per_point.size());
  t.columns = {"mode", "radius", "median", "mean"};
  for (std::size_t p = 0; p < width; ++p) t.columns.push_back("e_" + std::to_string(p));
  for (const auto& [mode, c] : v.curves) {
    for (std::size_t k = 0; k < c.radius_grid.size(); ++k) {
      std::vector<Cell> row{std::string(certify::to_string(mode)), c.radius_grid[k], c.median[k],
                            c.mean[k]};
      for (std::size_t p = 0; p < width; ++p) {
        row.push_back(p < c.per_point.size() ? Cell{c.per_point[p][k]} : Cell{});
      }
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

/// Probes each certificate at its radius and, when the config has a radius
/// grid, builds certified error curves per mode.
inline ValidateRun validate_rows(const RunConfig& cfg, const models::Model& model,
                                 std::vector<CertRow> rows) {
  if (rows.empty()) throw ConfigError("certificates: no rows to validate");
  for (std::size_t i = 0; i < rows.size(); ++i) detail::check_row_matches(cfg, rows[i], i);

  ValidateRun v;
  v.rows = std::move(rows);
  const std::size_t count = v.rows.size();
  v.checks.resize(count);
  std::vector<certify::Certificate> certs(count);
  std::vector<certify::CertRequest> reqs(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& r = v.rows[i];
    reqs[i] = make_request(cfg, r.x, r.y, r.mode);
    auto& c = certs[i];
    c.mode = r.mode;
    c.abstain = r.abstain;
    c.radius = r.radius;
    c.fx = r.fx;
    if (r.mode == CertMode::smoothed_discounted && !r.abstain) {
      c.certified_region = certify::discounted_region(r.fx, reqs[i]);
    }
  }

  run_jobs(model, count, cfg.workers, [&](std::size_t i, const sampling::ExecPolicy& exec) {
    reqs[i].exec = exec;
    v.checks[i] = validate::check_certificate(model, reqs[i], certs[i], cfg.validation,
                                              rng::derive_seed(cfg.seed, kValidateTag, i));
  });
  for (const auto& c : v.checks) v.all_pass = v.all_pass && c.pass;

  if (!cfg.validation.radius_grid.empty()) {
    for (CertMode mode : cfg.modes) {
      std::vector<Vector> pts, truths;
      std::vector<certify::Certificate> mc;
      for (std::size_t i = 0; i < count; ++i) {
        if (v.rows[i].mode != mode) continue;
        pts.push_back(v.rows[i].x);
        const std::size_t p = v.rows[i].point;
        if (cfg.truth && p >= cfg.truth->size()) {
          throw ConfigError("config field 'truth': no entry for point " + std::to_string(p));
        }
        truths.push_back(cfg.truth ? (*cfg.truth)[p] : model.evaluate(v.rows[i].x));
        mc.push_back(certs[i]);
      }
      if (pts.empty()) continue;
      sampling::ExecPolicy exec{model.concurrent() ? cfg.workers : 1, 512};
      v.curves.emplace_back(
          mode, validate::certified_error_curve(model, pts, truths, mc, cfg.validation, cfg.sigma,
                                                rng::derive_seed(cfg.seed, validate::kCurveTag,
                                                                 static_cast<std::uint64_t>(mode)),
                                                exec));
    }
  }
  return v;
}

inline ValidateRun run_validate(const RunConfig& cfg, const std::string& certificates_path) {
  auto rows = report::read_certificates(certificates_path);
  const auto model = models::make_model(cfg.model);
  auto v = validate_rows(cfg, *model, std::move(rows));
  write_table(validation_table(v), cfg.out, "validation");
  if (!v.curves.empty()) write_table(error_curve_table(v), cfg.out, "error_curve");
  return v;
}

// ---------------------------------------------------------------------------

enum class SweepParam { P, beta, sigma, n };

inline SweepParam parse_sweep_param(const std::string& s) {
  if (s == "P") return SweepParam::P;
  if (s == "beta") return SweepParam::beta;
  if (s == "sigma") return SweepParam::sigma;
  if (s == "n") return SweepParam::n;
  throw ConfigError("sweep: unknown parameter '" + s + "' (expected P, beta, sigma or n)");
}

inline const char* to_string(SweepParam p) {
  switch (p) {
    case SweepParam::P: return "P";
    case SweepParam::beta: return "beta";
    case SweepParam::sigma: return "sigma";
    case SweepParam::n: return "n";
  }
  return "?";
}

inline RunConfig with_value(RunConfig cfg, SweepParam p, double v) {
  const std::string name = std::string("sweep ") + to_string(p) + " = " + format_double(v);
  switch (p) {
    case SweepParam::P:
      if (!(v > 0.0 && v < 1.0)) throw ConfigError(name + ": P must lie in (0,1)");
      cfg.target_p = v;
      break;
    case SweepParam::beta:
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(name + ": beta must be >= 0");
      cfg.beta = v;
      break;
    case SweepParam::sigma:
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(name + ": sigma must be > 0");
      cfg.sigma = v;
      break;
    case SweepParam::n:
      if (!(v >= 1.0) || v != std::floor(v) || v > 1e12) {
        throw ConfigError(name + ": n must be a positive integer");
      }
      cfg.n = static_cast<std::size_t>(v);
      break;
  }
  return cfg;
}

/// One row per (value, mode): the minimum radius over points (ABSTAIN
/// counts as 0), the minimum lower-bound probability over points (empty in
/// base mode) and each point's radius.
inline Table run_sweep_table(const RunConfig& cfg, const models::Model& model, SweepParam param,
                             const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  Table t;
  const std::size_t np = cfg.points.size();
  t.columns = {"parameter", "value", "mode", "min_radius", "min_bound"};
  for (std::size_t p = 0; p < np; ++p) t.columns.push_back("radius_" + std::to_string(p));
  for (double value : values) {
    const RunConfig c = with_value(cfg, param, value);
    const auto run = certify_all(c, model);
    for (std::size_t mi = 0; mi < c.modes.size(); ++mi) {
      double min_r = std::numeric_limits<double>::infinity();
      std::optional<double> min_b;
      std::vector<Cell> radii;
      for (std::size_t p = 0; p < np; ++p) {
        const auto& r = run.rows[p * c.modes.size() + mi];
        min_r = std::min(min_r, r.abstain ? 0.0 : r.radius);
        if (r.lower_bound_prob) min_b = std::min(min_b.value_or(1.0), *r.lower_bound_prob);
        radii.emplace_back(report::radius_text(r.abstain, r.radius));
      }
      std::vector<Cell> row{std::string(to_string(param)), value,
                            std::string(certify::to_string(c.modes[mi])), min_r,
                            min_b ? Cell{*min_b} : Cell{}};
      row.insert(row.end(), radii.begin(), radii.end());
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

inline Table run_sweep(const RunConfig& cfg, SweepParam param, const std::vector<double>& values) {
  const auto model = models::make_model(cfg.model);
  auto t = run_sweep_table(cfg, *model, param, values);
  ensure_dir(cfg.out);
  report::write_file(join(cfg.out, "sweep.csv"), report::to_csv(t));
  return t;
}

}  // namespace rsreg::cli
