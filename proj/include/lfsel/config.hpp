#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "trig.hpp"

namespace lfsel {

// values of the key-value config format: a TOML subset with single-line arrays
using ConfigValue = std::variant<bool, double, std::string, std::vector<double>, std::vector<std::string>>;

namespace toml {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

inline double parse_number(const std::string& tok, const std::string& where) {
  const std::string t = trim(tok);
  if (t == "nan" || t == "+nan" || t == "-nan") return std::nan("");
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  std::string clean;
  for (char ch : t) if (ch != '_') clean += ch;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(clean, &used);
  } catch (const std::exception&) {
    throw SchemaError(where + ": not a number: " + t);
  }
  if (used != clean.size()) throw SchemaError(where + ": not a number: " + t);
  return v;
}

inline std::string parse_string(const std::string& tok, const std::string& where) {
  const std::string t = trim(tok);
  if (t.size() < 2 || t.front() != '"' || t.back() != '"') throw SchemaError(where + ": expected a quoted string");
  return t.substr(1, t.size() - 2);
}

inline ConfigValue parse_value(const std::string& raw, const std::string& where) {
  const std::string t = trim(raw);
  if (t.empty()) throw SchemaError(where + ": missing value");
  if (t == "true") return true;
  if (t == "false") return false;
  if (t.front() == '"') return parse_string(t, where);
  if (t.front() == '[') {
    if (t.back() != ']') throw SchemaError(where + ": unterminated array");
    const std::string body = trim(t.substr(1, t.size() - 2));
    std::vector<std::string> items;
    std::string cur;
    bool quoted = false;
    for (char ch : body) {
      if (ch == '"') quoted = !quoted;
      if (ch == ',' && !quoted) {
        items.push_back(trim(cur));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    if (!trim(cur).empty()) items.push_back(trim(cur));
    if (!items.empty() && items.front().front() == '"') {
      std::vector<std::string> out;
      for (const auto& it : items) out.push_back(parse_string(it, where));
      return out;
    }
    std::vector<double> out;
    for (const auto& it : items) out.push_back(parse_number(it, where));
    return out;
  }
  return parse_number(t, where);
}

// section.key -> value
inline std::map<std::string, ConfigValue> parse(const std::string& text) {
  std::map<std::string, ConfigValue> out;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw SchemaError("line " + std::to_string(lineno) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SchemaError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = (section.empty() ? "" : section + ".") + trim(line.substr(0, eq));
    if (out.count(key)) throw SchemaError(key + ": duplicate key");
    out[key] = parse_value(line.substr(eq + 1), key);
  }
  return out;
}

inline std::string format(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  return fmt17(v);
}

inline std::string format(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format(v[i]);
  return s + "]";
}

inline std::string format(const std::vector<std::string>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", \"" : "\"") + v[i] + "\"";
  return s + "]";
}

}  // namespace toml

struct ModelConfig {
  std::string family = "FREE";
  std::vector<double> F_cos;
  std::vector<double> F_sin;
  double eps = 0.0;
  std::vector<double> G_coef;
  std::vector<double> G_jx;
  std::vector<double> G_jt;
  std::vector<std::string> G_wx;
  std::vector<std::string> G_wt;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct RunConfig {
  ModelConfig model;
  // numerics
  double c = 0.0;
  double lambda = 0.5;
  double lambda0 = 0.0;
  double lambda1 = 1.0;
  std::vector<double> Ns{32, 64, 128, 256};
  double tol = -1.0;
  double max_periods = 20000;
  double seed = 20240101;
  double threads = 0;
  double h_ref = std::nan("");
  // experiment
  std::string kind = "ladder";
  std::vector<double> lambdas{0.2, 0.3, 0.4};
  std::vector<double> nus{0.02, 0.01};
  double nu_N = 128;
  // detect
  double delta = 0.15;
  double tol_fit = -1.0;
  double slice_stride = 0;
  // peierls
  bool peierls = true;
  double peierls_velocities = 129;
  double peierls_max_periods = 200;
  double peierls_tol = 1e-6;
  // output
  std::string out_dir = "out";

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    auto same = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
    return a.model == b.model && same(a.c, b.c) && same(a.lambda, b.lambda) && same(a.lambda0, b.lambda0) &&
           same(a.lambda1, b.lambda1) && a.Ns == b.Ns && same(a.tol, b.tol) && same(a.max_periods, b.max_periods) &&
           same(a.seed, b.seed) && same(a.threads, b.threads) && same(a.h_ref, b.h_ref) && a.kind == b.kind &&
           a.lambdas == b.lambdas && a.nus == b.nus && same(a.nu_N, b.nu_N) && same(a.delta, b.delta) &&
           same(a.tol_fit, b.tol_fit) && same(a.slice_stride, b.slice_stride) && a.peierls == b.peierls &&
           same(a.peierls_velocities, b.peierls_velocities) && same(a.peierls_max_periods, b.peierls_max_periods) &&
           same(a.peierls_tol, b.peierls_tol) && a.out_dir == b.out_dir;
  }
};

namespace detail {

struct Binder {
  std::map<std::string, ConfigValue>& kv;

  template <class T>
  void bind(const std::string& key, T& dst) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    if constexpr (std::is_same_v<T, double>) {
      if (!std::holds_alternative<double>(it->second)) throw SchemaError(key + ": expected a number");
      dst = std::get<double>(it->second);
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!std::holds_alternative<bool>(it->second)) throw SchemaError(key + ": expected true or false");
      dst = std::get<bool>(it->second);
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!std::holds_alternative<std::string>(it->second)) throw SchemaError(key + ": expected a string");
      dst = std::get<std::string>(it->second);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (std::holds_alternative<std::vector<std::string>>(it->second) &&
          std::get<std::vector<std::string>>(it->second).empty()) {
        dst.clear();
      } else {
        if (!std::holds_alternative<std::vector<double>>(it->second)) throw SchemaError(key + ": expected an array of numbers");
        dst = std::get<std::vector<double>>(it->second);
      }
    } else {
      if (std::holds_alternative<std::vector<double>>(it->second) && std::get<std::vector<double>>(it->second).empty()) {
        dst.clear();
      } else {
        if (!std::holds_alternative<std::vector<std::string>>(it->second)) throw SchemaError(key + ": expected an array of strings");
        dst = std::get<std::vector<std::string>>(it->second);
      }
    }
    kv.erase(it);
  }
};

template <class F>
void visit_fields(RunConfig& c, F&& f) {
  f("model.family", c.model.family);
  f("model.F_cos", c.model.F_cos);
  f("model.F_sin", c.model.F_sin);
  f("model.eps", c.model.eps);
  f("model.G_coef", c.model.G_coef);
  f("model.G_jx", c.model.G_jx);
  f("model.G_jt", c.model.G_jt);
  f("model.G_wx", c.model.G_wx);
  f("model.G_wt", c.model.G_wt);
  f("numerics.c", c.c);
  f("numerics.lambda", c.lambda);
  f("numerics.lambda0", c.lambda0);
  f("numerics.lambda1", c.lambda1);
  f("numerics.Ns", c.Ns);
  f("numerics.tol", c.tol);
  f("numerics.max_periods", c.max_periods);
  f("numerics.seed", c.seed);
  f("numerics.threads", c.threads);
  f("numerics.h_ref", c.h_ref);
  f("experiment.kind", c.kind);
  f("experiment.lambdas", c.lambdas);
  f("experiment.nus", c.nus);
  f("experiment.nu_N", c.nu_N);
  f("detect.delta", c.delta);
  f("detect.tol_fit", c.tol_fit);
  f("detect.slice_stride", c.slice_stride);
  f("peierls.enabled", c.peierls);
  f("peierls.velocities", c.peierls_velocities);
  f("peierls.max_periods", c.peierls_max_periods);
  f("peierls.tol", c.peierls_tol);
  f("output.dir", c.out_dir);
}

inline bool is_integer(double v) { return std::isfinite(v) && v == std::floor(v); }

}  // namespace detail

inline void validate(const RunConfig& c) {
  const auto& fam = c.model.family;
  if (fam != "FREE" && fam != "MECH" && fam != "MECH_T") throw SchemaError("model.family: unknown family " + fam);
  const std::size_t ng = c.model.G_coef.size();
  if (c.model.G_jx.size() != ng || c.model.G_jt.size() != ng || c.model.G_wx.size() != ng ||
      c.model.G_wt.size() != ng)
    throw SchemaError("model.G_*: arrays must have equal length");
  for (const auto& w : c.model.G_wx)
    if (w != "sin" && w != "cos") throw SchemaError("model.G_wx: expected \"sin\" or \"cos\"");
  for (const auto& w : c.model.G_wt)
    if (w != "sin" && w != "cos") throw SchemaError("model.G_wt: expected \"sin\" or \"cos\"");
  for (double v : c.model.G_jx) if (!detail::is_integer(v)) throw SchemaError("model.G_jx: integers required");
  for (double v : c.model.G_jt) if (!detail::is_integer(v)) throw SchemaError("model.G_jt: integers required");
  for (double v : c.Ns)
    if (!detail::is_integer(v) || v < 1) throw SchemaError("numerics.Ns: positive integers required");
  for (const char* k : {"max_periods", "threads", "seed"}) (void)k;
  if (!detail::is_integer(c.max_periods) || c.max_periods < 1) throw SchemaError("numerics.max_periods: positive integer required");
  if (!detail::is_integer(c.threads) || c.threads < 0) throw SchemaError("numerics.threads: nonnegative integer required");
  if (!detail::is_integer(c.seed) || c.seed < 0) throw SchemaError("numerics.seed: nonnegative integer required");
  const std::string kind = c.kind;
  if (kind != "ladder" && kind != "sweep" && kind != "compare") throw SchemaError("experiment.kind: unknown kind " + kind);
  if (!(c.lambda0 >= 0.0 && c.lambda1 <= 1.0 && c.lambda0 < c.lambda1))
    throw RangeError("numerics.lambda0/lambda1 must satisfy 0 <= lambda0 < lambda1 <= 1");
  auto check_lambda = [&](double lam, const std::string& key) {
    if (!(lam >= c.lambda0 && lam < c.lambda1))
      throw RangeError(key + ": lambda=" + fmt17(lam) + " outside [" + fmt17(c.lambda0) + ", " + fmt17(c.lambda1) + ")");
  };
  check_lambda(c.lambda, "numerics.lambda");
  for (double lam : c.lambdas) check_lambda(lam, "experiment.lambdas");
  for (double nu : c.nus) if (!(nu > 0.0)) throw RangeError("experiment.nus: viscosities must be positive");
  if (!(c.delta > 0.0 && c.delta < 0.5)) throw RangeError("detect.delta must lie in (0, 0.5)");
}

inline RunConfig parse_config(const std::string& text) {
  auto kv = toml::parse(text);
  RunConfig c;
  detail::Binder b{kv};
  detail::visit_fields(c, [&](const std::string& key, auto& dst) { b.bind(key, dst); });
  if (!kv.empty()) throw SchemaError(kv.begin()->first + ": unknown key");
  validate(c);
  return c;
}

// every field with its resolved value, in a fixed order
inline std::string emit_manifest(const RunConfig& cfg) {
  RunConfig c = cfg;
  std::ostringstream os;
  std::string section;
  detail::visit_fields(c, [&](const std::string& key, auto& v) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot), name = key.substr(dot + 1);
    if (sec != section) {
      if (!section.empty()) os << "\n";
      os << "[" << sec << "]\n";
      section = sec;
    }
    using T = std::decay_t<decltype(v)>;
    os << name << " = ";
    if constexpr (std::is_same_v<T, std::string>) os << '"' << v << '"';
    else if constexpr (std::is_same_v<T, bool>) os << (v ? "true" : "false");
    else os << toml::format(v);
    os << "\n";
  });
  return os.str();
}

inline QuadraticModel build_model(const ModelConfig& mc) {
  TrigPoly F{mc.F_cos, mc.F_sin};
  if (mc.family == "FREE") return QuadraticModel::free_particle();
  if (mc.family == "MECH") return QuadraticModel::mech(F);
  TrigPoly2 G;
  for (std::size_t i = 0; i < mc.G_coef.size(); ++i)
    G.terms.push_back({mc.G_coef[i], static_cast<int>(mc.G_jx[i]), static_cast<int>(mc.G_jt[i]),
                       mc.G_wx[i] == "sin" ? Wave::sin : Wave::cos, mc.G_wt[i] == "sin" ? Wave::sin : Wave::cos});
  return QuadraticModel::mech_t(F, G, mc.eps);
}

}  // namespace lfsel
