#pragma once
// Run configuration: a JSON document, every field optional except the model.
//
// Defaults mirror the synthetic experiment: sigma 0.23, eps_y 6, bounds
// [0, 35], tau 0, n 10000, P 0.8, alpha 0.001.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rsreg/certify.hpp"
#include "rsreg/error.hpp"
#include "rsreg/models.hpp"
#include "rsreg/region.hpp"
#include "rsreg/validate.hpp"

namespace rsreg::cli {

using Json = nlohmann::json;
using certify::CertMode;
using certify::Containment;

struct RunConfig {
  models::ModelSpec model;
  std::vector<Vector> points;
  std::optional<std::vector<Vector>> reference;  // y per point; default f(x)
  std::optional<std::vector<Vector>> truth;      // p* per point; default f(x)
  Vector eps_y;
  Dissimilarity diss = Dissimilarity::abs_diff;
  std::vector<std::vector<std::size_t>> groups;
  std::optional<OutputBounds> bounds;
  double sigma = 0.23;
  std::size_t n = 10000;
  double target_p = 0.8;
  double alpha = 0.001;
  double tau = 0.0;
  double beta = 1.0;
  std::vector<CertMode> modes{CertMode::base};
  Containment containment = Containment::strict;
  validate::ValidationSpec validation;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out = "out";

  std::size_t output_dim() const { return model.output_dim; }
};

namespace detail {

[[noreturn]] inline void bad(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

inline double number(const Json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
  }
  bad(field, "expected a number");
}

inline std::uint64_t count(const Json& j, const std::string& field, std::uint64_t min = 0) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) bad(field, "expected an integer");
  if (j.is_number_integer() && j.get<std::int64_t>() < 0) bad(field, "must be >= 0");
  const auto v = j.get<std::uint64_t>();
  if (v < min) bad(field, "must be >= " + std::to_string(min));
  return v;
}

inline std::string text(const Json& j, const std::string& field) {
  if (!j.is_string()) bad(field, "expected a string");
  return j.get<std::string>();
}

inline Vector vec(const Json& j, const std::string& field) {
  if (!j.is_array()) bad(field, "expected an array of numbers");
  Vector v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], field + "[" + std::to_string(i) + "]"));
  return v;
}

/// A scalar broadcasts to all t components.
inline Vector per_output(const Json& j, const std::string& field, std::size_t t) {
  if (j.is_array()) {
    Vector v = vec(j, field);
    if (v.size() != t) bad(field, "expected " + std::to_string(t) + " values");
    return v;
  }
  return Vector(t, number(j, field));
}

inline std::vector<Vector> vec_list(const Json& j, const std::string& field, std::size_t dim) {
  if (!j.is_array()) bad(field, "expected an array of vectors");
  std::vector<Vector> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string f = field + "[" + std::to_string(i) + "]";
    Vector v = vec(j[i], f);
    if (v.size() != dim) bad(f, "expected " + std::to_string(dim) + " components");
    out.push_back(std::move(v));
  }
  return out;
}

/// Cartesian grid start + k*step <= stop, first coordinate slowest.
inline std::vector<Vector> grid_points(const Vector& start, const Vector& stop, const Vector& step) {
  std::vector<std::vector<double>> axes;
  for (std::size_t j = 0; j < start.size(); ++j) {
    if (!(step[j] > 0.0)) bad("grid.step", "must be positive");
    if (!(stop[j] >= start[j])) bad("grid.stop", "must be >= grid.start");
    std::vector<double> axis;
    const auto k_max = static_cast<std::size_t>(std::floor((stop[j] - start[j]) / step[j] + 1e-9));
    for (std::size_t k = 0; k <= k_max; ++k) axis.push_back(start[j] + static_cast<double>(k) * step[j]);
    axes.push_back(std::move(axis));
  }
  std::vector<Vector> pts{Vector{}};
  for (const auto& axis : axes) {
    std::vector<Vector> next;
    for (const auto& p : pts) {
      for (double v : axis) {
        Vector q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    }
    pts = std::move(next);
  }
  return pts;
}

inline models::ModelKind parse_kind(const std::string& s) {
  if (s == "synthetic-sine") return models::ModelKind::synthetic_sine;
  if (s == "linear") return models::ModelKind::linear;
  if (s == "constant") return models::ModelKind::constant;
  if (s == "subprocess") return models::ModelKind::subprocess;
  bad("model.kind", "unknown kind '" + s + "' (synthetic-sine, linear, constant, subprocess)");
}

inline void check_command_exists(const std::string& command) {
  std::istringstream in(command);
  std::string program;
  in >> program;
  if (program.find('/') != std::string::npos && !std::filesystem::exists(program)) {
    bad("model.command", "program '" + program + "' does not exist");
  }
}

inline void reject_unknown(const Json& obj, const std::string& prefix,
                           std::initializer_list<const char*> known) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) bad(prefix + key, "unknown field");
  }
}

}  // namespace detail

inline RunConfig parse_config(const Json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(j, "", {"model", "points", "grid", "reference", "truth", "region", "bounds",
                         "sigma", "n", "P", "alpha", "tau", "beta", "modes", "containment",
                         "validation", "seed", "workers", "out"});
  RunConfig c;

  if (!j.contains("model") || !j["model"].is_object()) bad("model", "required object");
  const Json& m = j["model"];
  reject_unknown(m, "model.", {"kind", "input_dim", "output_dim", "parameters", "command",
                               "timeout_ms", "clip"});
  c.model.kind = parse_kind(m.contains("kind") ? text(m["kind"], "model.kind") : "synthetic-sine");
  if (m.contains("input_dim")) c.model.input_dim = count(m["input_dim"], "model.input_dim", 1);
  if (m.contains("output_dim")) c.model.output_dim = count(m["output_dim"], "model.output_dim", 1);
  if (m.contains("parameters")) c.model.parameters = vec(m["parameters"], "model.parameters");
  if (c.model.kind == models::ModelKind::subprocess) {
    if (!m.contains("command")) bad("model.command", "required for a subprocess model");
    c.model.command = text(m["command"], "model.command");
    if (c.model.command.empty()) bad("model.command", "must not be empty");
    check_command_exists(c.model.command);
    if (!m.contains("input_dim") || !m.contains("output_dim")) {
      bad("model.input_dim", "subprocess models must declare input_dim and output_dim");
    }
  }
  if (m.contains("timeout_ms")) {
    c.model.timeout = std::chrono::milliseconds(count(m["timeout_ms"], "model.timeout_ms", 1));
  }
  const std::size_t d = c.model.input_dim;
  const std::size_t t = c.model.output_dim;

  if (j.contains("points") == j.contains("grid")) bad("points", "give exactly one of 'points' or 'grid'");
  if (j.contains("points")) {
    c.points = vec_list(j["points"], "points", d);
  } else {
    const Json& g = j["grid"];
    if (!g.is_object()) bad("grid", "expected an object");
    reject_unknown(g, "grid.", {"start", "stop", "step"});
    for (const char* k : {"start", "stop"}) {
      if (!g.contains(k)) bad(std::string("grid.") + k, "required");
    }
    const Vector start = per_output(g["start"], "grid.start", d);
    const Vector stop = per_output(g["stop"], "grid.stop", d);
    const Vector step = g.contains("step") ? per_output(g["step"], "grid.step", d) : Vector(d, 1.0);
    c.points = grid_points(start, stop, step);
  }
  if (c.points.empty()) bad("points", "at least one point is required");

  const auto per_point = [&](const char* field) -> std::optional<std::vector<Vector>> {
    if (!j.contains(field)) return std::nullopt;
    if (j[field].is_string() && j[field].get<std::string>() == "model") return std::nullopt;
    auto v = vec_list(j[field], field, t);
    if (v.size() != c.points.size()) bad(field, "needs one entry per point");
    return v;
  };
  c.reference = per_point("reference");
  c.truth = per_point("truth");

  c.eps_y.assign(t, 6.0);
  if (j.contains("region")) {
    const Json& r = j["region"];
    if (!r.is_object()) bad("region", "expected an object");
    reject_unknown(r, "region.", {"eps_y", "dissimilarity", "groups"});
    if (r.contains("eps_y")) c.eps_y = per_output(r["eps_y"], "region.eps_y", t);
    if (r.contains("dissimilarity")) {
      const auto s = text(r["dissimilarity"], "region.dissimilarity");
      if (s == "abs-diff") {
        c.diss = Dissimilarity::abs_diff;
      } else if (s == "grouped-l2") {
        c.diss = Dissimilarity::grouped_l2;
      } else {
        bad("region.dissimilarity", "expected 'abs-diff' or 'grouped-l2'");
      }
    }
    if (r.contains("groups")) {
      if (!r["groups"].is_array()) bad("region.groups", "expected an array of index arrays");
      for (std::size_t g = 0; g < r["groups"].size(); ++g) {
        const std::string f = "region.groups[" + std::to_string(g) + "]";
        if (!r["groups"][g].is_array()) bad(f, "expected an array of indices");
        std::vector<std::size_t> idx;
        for (const auto& e : r["groups"][g]) idx.push_back(count(e, f));
        c.groups.push_back(std::move(idx));
      }
    }
  }
  if (c.diss == Dissimilarity::grouped_l2 && c.groups.empty()) {
    std::vector<std::size_t> all(t);
    for (std::size_t i = 0; i < t; ++i) all[i] = i;
    c.groups.push_back(std::move(all));
  }
  for (std::size_t i = 0; i < t; ++i) {
    if (!(c.eps_y[i] > 0.0)) bad("region.eps_y", "must be positive");
  }

  OutputBounds b{Vector(t, 0.0), Vector(t, 35.0)};
  bool have_bounds = true;
  if (j.contains("bounds")) {
    const Json& bj = j["bounds"];
    if (bj.is_null()) {
      have_bounds = false;
    } else {
      if (!bj.is_object()) bad("bounds", "expected an object or null");
      reject_unknown(bj, "bounds.", {"lower", "upper"});
      if (bj.contains("lower")) b.lower = per_output(bj["lower"], "bounds.lower", t);
      if (bj.contains("upper")) b.upper = per_output(bj["upper"], "bounds.upper", t);
    }
  }
  if (have_bounds) {
    for (std::size_t i = 0; i < t; ++i) {
      if (!(b.lower[i] < b.upper[i])) bad("bounds", "lower must be < upper");
    }
    c.bounds = b;
  }
  if (m.contains("clip") && !m["clip"].is_boolean()) bad("model.clip", "expected a boolean");
  if (m.contains("clip") && m["clip"].get<bool>()) {
    if (!c.bounds) bad("model.clip", "clipping needs bounds");
    c.model.clip = *c.bounds;
  }

  if (j.contains("sigma")) c.sigma = number(j["sigma"], "sigma");
  if (!(c.sigma > 0.0) || !std::isfinite(c.sigma)) bad("sigma", "must be a positive finite number");
  if (j.contains("n")) c.n = count(j["n"], "n", 1);
  if (j.contains("P")) c.target_p = number(j["P"], "P");
  if (!(c.target_p > 0.0 && c.target_p < 1.0)) bad("P", "must lie in (0,1)");
  if (j.contains("alpha")) c.alpha = number(j["alpha"], "alpha");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) bad("alpha", "must lie in (0,1)");
  if (j.contains("tau")) c.tau = number(j["tau"], "tau");
  if (!(c.tau >= 0.0)) bad("tau", "must be >= 0");
  if (j.contains("beta")) c.beta = number(j["beta"], "beta");
  if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) bad("beta", "must be finite and >= 0");

  if (j.contains("modes")) {
    const Json& mj = j["modes"];
    c.modes.clear();
    const auto add = [&](const Json& e, const std::string& f) {
      try {
        c.modes.push_back(certify::parse_mode(text(e, f)));
      } catch (const DomainError& err) {
        bad(f, err.what());
      }
    };
    if (mj.is_array()) {
      for (std::size_t i = 0; i < mj.size(); ++i) add(mj[i], "modes[" + std::to_string(i) + "]");
    } else {
      add(mj, "modes");
    }
    if (c.modes.empty()) bad("modes", "at least one mode is required");
  }
  for (CertMode mode : c.modes) {
    if (mode != CertMode::base && !c.bounds) {
      bad("bounds", std::string("mode ") + certify::to_string(mode) + " needs output bounds");
    }
    if (mode != CertMode::base && c.diss != Dissimilarity::abs_diff) {
      bad("region.dissimilarity", "bounded-output modes need the abs-diff region");
    }
  }
  if (j.contains("containment")) {
    const auto s = text(j["containment"], "containment");
    if (s == "strict") {
      c.containment = Containment::strict;
    } else if (s == "clip") {
      c.containment = Containment::clip;
    } else {
      bad("containment", "expected 'strict' or 'clip'");
    }
  }

  if (j.contains("validation")) {
    const Json& v = j["validation"];
    if (!v.is_object()) bad("validation", "expected an object");
    reject_unknown(v, "validation.", {"trials", "directions", "radius_policy", "radius_value",
                                      "penalty_K", "radius_grid", "smooth_n",
                                      "infinite_probe_radius"});
    auto& vs = c.validation;
    if (v.contains("trials")) vs.trials = count(v["trials"], "validation.trials", 1);
    if (v.contains("directions")) vs.directions = count(v["directions"], "validation.directions", 1);
    if (v.contains("radius_policy")) {
      const auto s = text(v["radius_policy"], "validation.radius_policy");
      if (s == "at-certificate") {
        vs.radius_policy = validate::RadiusPolicy::at_certificate;
      } else if (s == "fraction-of-certificate") {
        vs.radius_policy = validate::RadiusPolicy::fraction_of_certificate;
      } else if (s == "fixed") {
        vs.radius_policy = validate::RadiusPolicy::fixed;
      } else {
        bad("validation.radius_policy", "expected at-certificate, fraction-of-certificate or fixed");
      }
    }
    if (v.contains("radius_value")) vs.radius_value = number(v["radius_value"], "validation.radius_value");
    if (v.contains("penalty_K")) vs.penalty_k = number(v["penalty_K"], "validation.penalty_K");
    if (v.contains("radius_grid")) vs.radius_grid = vec(v["radius_grid"], "validation.radius_grid");
    if (v.contains("smooth_n")) vs.smooth_n = count(v["smooth_n"], "validation.smooth_n");
    if (v.contains("infinite_probe_radius")) {
      vs.infinite_probe_radius = number(v["infinite_probe_radius"], "validation.infinite_probe_radius");
    }
    try {
      vs.check();
    } catch (const DomainError& e) {
      bad("validation", e.what());
    }
  }

  if (j.contains("seed")) c.seed = count(j["seed"], "seed");
  if (j.contains("workers")) c.workers = count(j["workers"], "workers", 1);
  if (j.contains("out")) c.out = text(j["out"], "out");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw ConfigError("config '" + path + "': malformed JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace rsreg::cli
