// rsreg: certify, validate and sweep regression models from a JSON config,
// plus one-shot probability and Clopper-Pearson evaluations.
//
// Exit status: 0 success, 1 validation found a failing point, 2 bad config
// or arguments, 3 model process failure, 4 numeric domain error.

#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rsreg/certify.hpp"
#include "rsreg/config.hpp"
#include "rsreg/estimation.hpp"
#include "rsreg/experiment.hpp"
#include "rsreg/format.hpp"
#include "rsreg/gaussian_rect.hpp"

namespace {

using rsreg::Vector;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> mode;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "override the config seed");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--mode", f.mode, "base | smoothed-asymptotic | smoothed-discounted");
  app->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
}

rsreg::cli::RunConfig load(const CommonFlags& f) {
  auto cfg = rsreg::cli::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  if (f.workers) cfg.workers = *f.workers;
  if (f.mode) {
    try {
      cfg.modes = {rsreg::certify::parse_mode(*f.mode)};
    } catch (const rsreg::DomainError& e) {
      throw rsreg::ConfigError(std::string("--mode: ") + e.what());
    }
    if (cfg.modes.front() != rsreg::certify::CertMode::base && !cfg.bounds) {
      throw rsreg::ConfigError("--mode: bounded-output modes need 'bounds' in the config");
    }
  }
  return cfg;
}

Vector parse_list(const std::string& s, const char* flag) {
  Vector v;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      v.push_back(rsreg::parse_double(item));
    } catch (const std::invalid_argument&) {
      throw rsreg::ConfigError(std::string(flag) + ": '" + item + "' is not a number");
    }
  }
  if (v.empty()) throw rsreg::ConfigError(std::string(flag) + ": empty list");
  return v;
}

Vector sized(const std::string& s, const char* flag, std::size_t t) {
  Vector v = parse_list(s, flag);
  if (v.size() == 1 && t > 1) v.assign(t, v.front());
  if (v.size() != t) {
    throw rsreg::ConfigError(std::string(flag) + ": expected " + std::to_string(t) + " values");
  }
  return v;
}

nlohmann::json json_list(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) {
    if (std::isfinite(x)) {
      a.push_back(x);
    } else {
      a.push_back(rsreg::format_double(x));
    }
  }
  return a;
}

struct ProbFlags {
  std::string fx, l, u, lb, ub, p, mean, cov;
  double tau = 0.0;
  double beta = 1.0;
  std::size_t n = 0;
  bool clip = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified robustness radii for black-box regression models"};
  app.require_subcommand(1);

  CommonFlags cert_flags, val_flags, sweep_flags;
  auto* certify_cmd = app.add_subcommand("certify", "certify every configured point");
  add_common(certify_cmd, cert_flags);

  auto* validate_cmd = app.add_subcommand("validate", "probe certificates empirically");
  add_common(validate_cmd, val_flags);
  std::string cert_path;
  validate_cmd->add_option("--certificates", cert_path,
                           "certificates.csv or .json (default: <out>/certificates.csv)");

  auto* sweep_cmd = app.add_subcommand("sweep", "re-certify over a range of one parameter");
  add_common(sweep_cmd, sweep_flags);
  std::string sweep_param, sweep_values;
  sweep_cmd->add_option("--param", sweep_param, "P | beta | sigma | n")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();

  auto* prob_cmd = app.add_subcommand("prob", "evaluate one acceptance probability or bound");
  prob_cmd->require_subcommand(1);
  ProbFlags pf;
  auto* t2 = prob_cmd->add_subcommand("normal", "normal-approximation rectangle probability");
  t2->add_option("--mean", pf.mean, "g_n, comma-separated")->required();
  t2->add_option("--cov", pf.cov, "sample covariance, row-major t*t")->required();
  t2->add_option("--lb", pf.lb, "accepted lower ends")->required();
  t2->add_option("--ub", pf.ub, "accepted upper ends")->required();
  t2->add_option("--n", pf.n, "sample count")->required()->check(CLI::PositiveNumber);
  auto* t3 = prob_cmd->add_subcommand("bounded", "bounded-output worst-case bound");
  auto* pd = prob_cmd->add_subcommand("discounted", "discounted finite-sample bound");
  for (auto* sub : {t3, pd}) {
    sub->add_option("--fx", pf.fx, "f(x), comma-separated")->required();
    sub->add_option("--l", pf.l, "hard lower bounds")->required();
    sub->add_option("--u", pf.u, "hard upper bounds")->required();
    sub->add_option("--lb", pf.lb, "accepted lower ends")->required();
    sub->add_option("--ub", pf.ub, "accepted upper ends")->required();
    sub->add_option("--p", pf.p, "base acceptance probabilities")->required();
    sub->add_option("--n", pf.n, "sample count")->required()->check(CLI::PositiveNumber);
  }
  t3->add_option("--tau", pf.tau, "mean drift slack");
  pd->add_option("--beta", pf.beta, "discount factor");
  pd->add_flag("--clip", pf.clip, "clamp the discounted region into [l, u]");

  auto* cp_cmd = app.add_subcommand("cp-bound", "one-sided Clopper-Pearson lower bound");
  std::size_t successes = 0, trials = 0;
  double alpha = 0.001;
  cp_cmd->add_option("--successes", successes)->required();
  cp_cmd->add_option("--trials", trials)->required()->check(CLI::PositiveNumber);
  cp_cmd->add_option("--alpha", alpha);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and friends exit 0; every usage error maps onto the config exit code
    return app.exit(e) == 0 ? 0 : 2;
  }

  using namespace rsreg;
  try {
    if (*certify_cmd) {
      const auto cfg = load(cert_flags);
      const auto run = cli::run_certify(cfg);
      std::size_t abstain = 0;
      for (const auto& r : run.rows) abstain += r.abstain ? 1 : 0;
      std::cerr << "certified " << run.rows.size() << " rows (" << abstain << " ABSTAIN) -> "
                << cli::join(cfg.out, "certificates.csv") << '\n';
      return 0;
    }
    if (*validate_cmd) {
      const auto cfg = load(val_flags);
      const std::string path = cert_path.empty() ? cli::join(cfg.out, "certificates.csv") : cert_path;
      const auto v = cli::run_validate(cfg, path);
      std::size_t fails = 0;
      for (const auto& c : v.checks) fails += c.pass ? 0 : 1;
      std::cerr << "validated " << v.checks.size() << " rows, " << fails << " failing -> "
                << cli::join(cfg.out, "validation.csv") << '\n';
      std::cerr << "note: random sphere probing can miss violations; a pass is evidence, not proof\n";
      return v.all_pass ? 0 : 1;
    }
    if (*sweep_cmd) {
      const auto cfg = load(sweep_flags);
      const auto param = cli::parse_sweep_param(sweep_param);
      cli::run_sweep(cfg, param, parse_list(sweep_values, "--values"));
      std::cerr << "sweep -> " << cli::join(cfg.out, "sweep.csv") << '\n';
      return 0;
    }
    if (*cp_cmd) {
      std::cout << format_double(estimation::clopper_pearson_lower({successes, trials}, {alpha}))
                << '\n';
      return 0;
    }
    if (*t2) {
      const Vector mean = parse_list(pf.mean, "--mean");
      const std::size_t t = mean.size();
      const Vector cov = parse_list(pf.cov, "--cov");
      if (cov.size() != t * t) throw ConfigError("--cov: expected " + std::to_string(t * t) + " values");
      specfun::GaussianRect rect{sized(pf.lb, "--lb", t), sized(pf.ub, "--ub", t), mean,
                                 Eigen::Map<const Eigen::MatrixXd>(cov.data(),
                                                                   static_cast<Eigen::Index>(t),
                                                                   static_cast<Eigen::Index>(t))};
      const auto r = specfun::gaussian_rect_prob(rect, static_cast<double>(pf.n));
      nlohmann::json j{{"probability", r.value}, {"error", r.error}, {"regularized", r.regularized},
                       {"degenerate", r.degenerate}};
      std::cout << j.dump() << '\n';
      return 0;
    }
    if (*t3 || *pd) {
      const Vector fx = parse_list(pf.fx, "--fx");
      const std::size_t t = fx.size();
      const Vector lb = sized(pf.lb, "--lb", t), ub = sized(pf.ub, "--ub", t);
      const Vector p = sized(pf.p, "--p", t);
      certify::CertRequest req;
      req.region = AcceptRegion::interval(fx, Vector(t, 1.0));
      req.region.lower = lb;
      req.region.upper = ub;
      req.bounds = OutputBounds{sized(pf.l, "--l", t), sized(pf.u, "--u", t)};
      req.noise.n = pf.n;
      req.tau = pf.tau;
      req.beta = pf.beta;
      req.containment = pf.clip ? certify::Containment::clip : certify::Containment::strict;
      const auto args = *t3 ? certify::theorem3_args(fx, req) : certify::discounted_args(fx, req);
      const double bound = *t3 ? certify::theorem3_lower_bound(fx, req, p)
                               : certify::discounted_lower_bound(fx, req, p);
      Vector a, b, rho;
      for (const auto& x : args) {
        a.push_back(static_cast<double>(x.a));
        b.push_back(static_cast<double>(x.b));
        rho.push_back(x.rho);
      }
      nlohmann::json j{{"bound", bound}, {"a", json_list(a)}, {"b", json_list(b)},
                       {"rho", json_list(rho)}};
      if (*pd) {
        const auto region = certify::discounted_region(fx, req);
        j["region_lower"] = json_list(region.lower);
        j["region_upper"] = json_list(region.upper);
      }
      std::cout << j.dump() << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const TransportError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return 3;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
