#pragma once
// Report tables: fixed CSV columns with a 1:1 JSON mirror (array of objects
// keyed by column name). Numbers use the shortest round-trip form so files
// are byte-stable and every value reads back exactly.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rsreg/certify.hpp"
#include "rsreg/error.hpp"
#include "rsreg/format.hpp"
#include "rsreg/region.hpp"

namespace rsreg::report {

using OJson = nlohmann::ordered_json;
using Cell = std::variant<std::monostate, double, std::uint64_t, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

inline std::string cell_text(const Cell& c) {
  if (std::holds_alternative<double>(c)) return format_double(std::get<double>(c));
  if (std::holds_alternative<std::uint64_t>(c)) return std::to_string(std::get<std::uint64_t>(c));
  if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
  return "";
}

inline std::string to_csv(const Table& t) {
  std::string s;
  for (std::size_t i = 0; i < t.columns.size(); ++i) s += (i ? "," : "") + t.columns[i];
  s += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + cell_text(row[i]);
    s += '\n';
  }
  return s;
}

inline OJson to_json(const Table& t) {
  OJson arr = OJson::array();
  for (const auto& row : t.rows) {
    OJson obj = OJson::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      const Cell& c = row[i];
      if (std::holds_alternative<double>(c) && std::isfinite(std::get<double>(c))) {
        obj[t.columns[i]] = std::get<double>(c);
      } else if (std::holds_alternative<std::uint64_t>(c)) {
        obj[t.columns[i]] = std::get<std::uint64_t>(c);
      } else if (std::holds_alternative<std::monostate>(c)) {
        obj[t.columns[i]] = nullptr;
      } else {
        obj[t.columns[i]] = cell_text(c);
      }
    }
    arr.push_back(std::move(obj));
  }
  return arr;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

/// Rows as column -> text, the common form of CSV and JSON input.
using TextRow = std::map<std::string, std::string>;

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::vector<TextRow> parse_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  std::vector<std::string> header;
  std::vector<TextRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (header.empty()) {
      header = std::move(fields);
      continue;
    }
    if (fields.size() != header.size()) {
      throw ConfigError("report: row " + std::to_string(rows.size() + 1) + " has " +
                        std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(header.size()));
    }
    TextRow r;
    for (std::size_t i = 0; i < header.size(); ++i) r[header[i]] = fields[i];
    rows.push_back(std::move(r));
  }
  if (header.empty()) throw ConfigError("report: file is empty");
  return rows;
}

inline std::vector<TextRow> parse_json_rows(const std::string& content) {
  OJson j;
  try {
    j = OJson::parse(content);
  } catch (const OJson::parse_error& e) {
    throw ConfigError(std::string("report: malformed JSON: ") + e.what());
  }
  if (!j.is_array()) throw ConfigError("report: JSON report must be an array of rows");
  std::vector<TextRow> rows;
  for (const auto& obj : j) {
    if (!obj.is_object()) throw ConfigError("report: JSON rows must be objects");
    TextRow r;
    for (const auto& [k, v] : obj.items()) {
      if (v.is_null()) {
        r[k] = "";
      } else if (v.is_number_unsigned() || v.is_number_integer()) {
        r[k] = v.dump();
      } else if (v.is_number()) {
        r[k] = format_double(v.get<double>());
      } else if (v.is_string()) {
        r[k] = v.get<std::string>();
      } else {
        throw ConfigError("report: unsupported value for column '" + k + "'");
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Reads .json as JSON and anything else as CSV.
inline std::vector<TextRow> read_rows(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("report: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();
  if (content.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ConfigError("report: '" + path + "' is empty");
  }
  const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  return json ? parse_json_rows(content) : parse_csv(content);
}

// ---------------------------------------------------------------------------
// Certificate rows.
//
// point, mode, x_j, y_i, eps_i, fx_i, count_i, pa_i, phat_i, radius_i,
// radius ("ABSTAIN" | "inf" | number), lower_bound_prob, asymptotic_prob,
// seed, n, alpha, sigma, P, beta, tau

struct CertRow {
  std::size_t point = 0;
  certify::CertMode mode = certify::CertMode::base;
  Vector x, y, eps, fx;
  std::vector<std::size_t> counts;
  Vector pa;
  std::optional<Vector> phat;
  Vector radii;
  bool abstain = true;
  double radius = 0.0;
  std::optional<double> lower_bound_prob;
  std::optional<double> asymptotic_prob;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double alpha = 0.0, sigma = 0.0, target_p = 0.0, beta = 0.0, tau = 0.0;
};

inline std::vector<std::string> cert_columns(std::size_t d, std::size_t t) {
  std::vector<std::string> c{"point", "mode"};
  const auto add = [&](const std::string& stem, std::size_t k) {
    for (std::size_t i = 0; i < k; ++i) c.push_back(stem + "_" + std::to_string(i));
  };
  add("x", d);
  for (const char* s : {"y", "eps", "fx", "count", "pa", "phat", "radius"}) add(s, t);
  for (const char* s : {"radius", "lower_bound_prob", "asymptotic_prob", "seed", "n", "alpha",
                        "sigma", "P", "beta", "tau"}) {
    c.emplace_back(s);
  }
  return c;
}

inline std::string radius_text(bool abstain, double r) {
  return abstain ? "ABSTAIN" : format_double(r);
}

inline Table cert_table(const std::vector<CertRow>& rows) {
  Table t;
  if (rows.empty()) return t;
  const std::size_t d = rows.front().x.size();
  const std::size_t k = rows.front().fx.size();
  t.columns = cert_columns(d, k);
  const auto opt = [](const std::optional<double>& v) -> Cell {
    return v ? Cell{*v} : Cell{};
  };
  for (const auto& r : rows) {
    std::vector<Cell> c{std::uint64_t{r.point}, std::string(certify::to_string(r.mode))};
    for (double v : r.x) c.emplace_back(v);
    for (double v : r.y) c.emplace_back(v);
    for (double v : r.eps) c.emplace_back(v);
    for (double v : r.fx) c.emplace_back(v);
    for (std::size_t v : r.counts) c.emplace_back(std::uint64_t{v});
    for (double v : r.pa) c.emplace_back(v);
    for (std::size_t i = 0; i < k; ++i) c.push_back(r.phat ? Cell{(*r.phat)[i]} : Cell{});
    for (double v : r.radii) c.emplace_back(v);
    c.emplace_back(radius_text(r.abstain, r.radius));
    c.push_back(opt(r.lower_bound_prob));
    c.push_back(opt(r.asymptotic_prob));
    c.emplace_back(std::uint64_t{r.seed});
    c.emplace_back(std::uint64_t{r.n});
    for (double v : {r.alpha, r.sigma, r.target_p, r.beta, r.tau}) c.emplace_back(v);
    t.rows.push_back(std::move(c));
  }
  return t;
}

namespace detail {

inline const std::string& field(const TextRow& r, const std::string& key, std::size_t row) {
  const auto it = r.find(key);
  if (it == r.end()) {
    throw ConfigError("certificates row " + std::to_string(row) + ": missing column '" + key + "'");
  }
  return it->second;
}

inline double num(const TextRow& r, const std::string& key, std::size_t row) {
  try {
    return parse_double(field(r, key, row));
  } catch (const std::invalid_argument&) {
    throw ConfigError("certificates row " + std::to_string(row) + ": column '" + key +
                      "' is not a number");
  }
}

inline std::uint64_t uint(const TextRow& r, const std::string& key, std::size_t row) {
  const std::string& s = field(r, key, row);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError("certificates row " + std::to_string(row) + ": column '" + key +
                      "' is not a non-negative integer");
  }
  return v;
}

inline std::size_t count_stem(const TextRow& r, const std::string& stem) {
  std::size_t k = 0;
  while (r.count(stem + "_" + std::to_string(k))) ++k;
  return k;
}

}  // namespace detail

inline std::vector<CertRow> parse_cert_rows(const std::vector<TextRow>& rows) {
  using namespace detail;
  if (rows.empty()) throw ConfigError("certificates: no rows");
  std::vector<CertRow> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TextRow& r = rows[i];
    CertRow c;
    const std::size_t d = count_stem(r, "x");
    const std::size_t t = count_stem(r, "fx");
    if (d == 0 || t == 0) throw ConfigError("certificates row " + std::to_string(i) + ": no x_/fx_ columns");
    c.point = uint(r, "point", i);
    try {
      c.mode = certify::parse_mode(field(r, "mode", i));
    } catch (const DomainError& e) {
      throw ConfigError("certificates row " + std::to_string(i) + ": " + e.what());
    }
    const auto vecs = [&](const std::string& stem, std::size_t k) {
      Vector v;
      for (std::size_t j = 0; j < k; ++j) v.push_back(num(r, stem + "_" + std::to_string(j), i));
      return v;
    };
    c.x = vecs("x", d);
    c.y = vecs("y", t);
    c.eps = vecs("eps", t);
    c.fx = vecs("fx", t);
    for (std::size_t j = 0; j < t; ++j) c.counts.push_back(uint(r, "count_" + std::to_string(j), i));
    c.pa = vecs("pa", t);
    if (!field(r, "phat_0", i).empty()) c.phat = vecs("phat", t);
    c.radii = vecs("radius", t);
    const std::string& rad = field(r, "radius", i);
    c.abstain = rad == "ABSTAIN";
    c.radius = c.abstain ? 0.0 : num(r, "radius", i);
    if (!c.abstain && !(c.radius >= 0.0)) {
      throw ConfigError("certificates row " + std::to_string(i) + ": radius must be >= 0");
    }
    if (!field(r, "lower_bound_prob", i).empty()) c.lower_bound_prob = num(r, "lower_bound_prob", i);
    if (!field(r, "asymptotic_prob", i).empty()) c.asymptotic_prob = num(r, "asymptotic_prob", i);
    c.seed = uint(r, "seed", i);
    c.n = uint(r, "n", i);
    c.alpha = num(r, "alpha", i);
    c.sigma = num(r, "sigma", i);
    c.target_p = num(r, "P", i);
    c.beta = num(r, "beta", i);
    c.tau = num(r, "tau", i);
    out.push_back(std::move(c));
  }
  return out;
}

inline std::vector<CertRow> read_certificates(const std::string& path) {
  return parse_cert_rows(read_rows(path));
}

}  // namespace rsreg::report
