#pragma once

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "experiment.hpp"
#include "orbits.hpp"

namespace lfsel {

using json = nlohmann::ordered_json;

inline constexpr const char* version_string = "0.1.0";

inline json num(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline json to_json(const Selection& s) {
  return {{"i_star", s.i_star}, {"margin", num(s.margin)}, {"tie", s.tie}};
}

inline json orbit_json(const OrbitData& o, const std::vector<double>& lambdas) {
  json g = json::array();
  for (double lam : lambdas) g.push_back({{"lambda", num(lam)}, {"gamma", num(o.gamma(lam))}});
  return {{"i", o.index},
          {"q", o.q},
          {"x0", num(o.x0())},
          {"p0", num(o.p0())},
          {"multipliers", {num(o.mu_u), num(o.mu_s)}},
          {"monodromy_det", num(o.monodromy[0] * o.monodromy[3] - o.monodromy[1] * o.monodromy[2])},
          {"action", num(o.action)},
          {"Gamma", g},
          {"Gamma_tilde", num(o.gamma_tilde)},
          {"zeta_tt_integral", num(o.zeta_tt_integral)},
          {"closure_defect", num(o.closure_defect)},
          {"riccati_defect", num(o.riccati_defect)}};
}

inline json orbits_json(const OrbitSearch& os, const std::vector<double>& lambdas) {
  json arr = json::array();
  for (const auto& o : os.orbits) arr.push_back(orbit_json(o, lambdas));
  json fails = json::array();
  for (const auto& f : os.failures) fails.push_back({{"x", num(f.seed.x)}, {"p", num(f.seed.p)}, {"error", f.reason}});
  return {{"orbits", arr}, {"failures", fails}, {"excluded", os.excluded.size()}};
}

inline json to_json(const TransitionReport& r) {
  json fits = json::array();
  for (const auto& f : r.fits)
    fits.push_back({{"orbit", f.orbit},
                    {"left", num(f.left)},
                    {"right", num(f.right)},
                    {"left_status", fit_name(f.left_status)},
                    {"right_status", fit_name(f.right_status)},
                    {"transition", f.transition},
                    {"ambiguous", f.ambiguous},
                    {"theta", num(f.theta)}});
  return {{"delta", num(r.delta)}, {"tol_fit", num(r.tol_fit)}, {"slices", r.slices}, {"fits", fits},
          {"transitions", r.transitions}};
}

inline json to_json(const LadderEntry& e) {
  return {{"N", e.N},
          {"K", e.K},
          {"lambda", num(e.lambda)},
          {"nu", num(e.nu)},
          {"h_delta", num(e.h_delta)},
          {"periods", e.periods},
          {"detected", e.detected},
          {"detection", to_json(e.detection)},
          {"anchor_value", num(e.anchor_value)},
          {"sup_peierls", num(e.sup_peierls)},
          {"peierls_stabilized", e.peierls_stabilized},
          {"theta_hat", num(e.theta_hat)},
          {"error", e.error}};
}

inline json to_json(const SelectionReport& r) {
  json entries = json::array();
  for (const auto& e : r.entries) entries.push_back(to_json(e));
  return {{"model", r.model_id},
          {"scaling", r.scaling},
          {"c", num(r.c)},
          {"lambda", num(r.lambda)},
          {"predicted", to_json(r.predicted)},
          {"anchor_x", num(r.anchor_x)},
          {"entries", entries},
          {"verdict", verdict_name(r.verdict)},
          {"cause", r.cause},
          {"peierls_decreasing", r.peierls_decreasing}};
}

inline json to_json(const SweepReport& r) {
  json pts = json::array();
  for (const auto& p : r.points)
    pts.push_back({{"lambda", num(p.lambda)},
                   {"predicted", to_json(p.predicted)},
                   {"detected", p.detected},
                   {"ladder", to_json(p.ladder)}});
  json out{{"model", r.model_id}, {"c", num(r.c)}, {"viscous", to_json(r.viscous)}, {"points", pts}};
  out["lambda_crit"] = r.lambda_crit ? num(*r.lambda_crit) : json(nullptr);
  out["bracket"] = r.bracket ? json{num(r.bracket->first), num(r.bracket->second)} : json(nullptr);
  out["bracket_contains_crit"] = r.bracket_contains_crit;
  out["small_lambda_matches_viscous"] = r.small_lambda_matches_viscous;
  return out;
}

inline json to_json(const ViscosityComparison& v) {
  json out{{"model", v.model_id},
           {"c", num(v.c)},
           {"viscous", to_json(v.viscous)},
           {"diffusive", to_json(v.diffusive)},
           {"diffusive_detected", v.diffusive_detected},
           {"nu_stable", v.nu_stable}};
  out["hyperbolic"] = v.hyperbolic ? to_json(*v.hyperbolic) : json(nullptr);
  out["agree"] = v.agree;
  return out;
}

// output file writer that surfaces the OS error text
inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + ": " + std::strerror(errno));
  os << bytes;
  os.flush();
  if (!os) throw std::runtime_error("cannot write " + path.string() + ": " + std::strerror(errno));
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

inline std::string field_csv(const GridField& f) {
  std::ostringstream os;
  f.write_csv(os);
  return os.str();
}

namespace detail {

inline void dump17(const json& j, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' '), inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  if (j.is_object()) {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) out += ",\n";
      first = false;
      out += inner + json(it.key()).dump() + ": ";
      dump17(it.value(), out, indent + 1);
    }
    out += "\n" + pad + "}";
  } else if (j.is_array()) {
    if (j.empty()) {
      out += "[]";
      return;
    }
    out += "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) out += ",\n";
      out += inner;
      dump17(j[i], out, indent + 1);
    }
    out += "\n" + pad + "]";
  } else if (j.is_number_float()) {
    out += fmt17(j.get<double>());
  } else {
    out += j.dump();
  }
}

}  // namespace detail

// pretty JSON with every float at 17 significant digits
inline std::string dump(const json& j) {
  std::string out;
  detail::dump17(j, out, 0);
  return out + "\n";
}

inline std::string manifest_text(const RunConfig& cfg) {
  std::string s = "# lfsel " + std::string(version_string) + "\n";
#ifdef __VERSION__
  s += "# compiler " + std::string(__VERSION__) + "\n";
#endif
  s += "# seed " + fmt17(cfg.seed) + "\n\n";
  return s + emit_manifest(cfg);
}

namespace detail {

inline std::string d17(double v) { return std::isnan(v) ? "nan" : fmt17(v); }

inline std::string ladder_dat(const SelectionReport& r) {
  std::ostringstream os;
  os << "# N K lambda nu h_delta sup_peierls theta_hat detected\n";
  for (const auto& e : r.entries) {
    std::string det;
    for (std::size_t i = 0; i < e.detected.size(); ++i) det += (i ? "," : "") + std::to_string(e.detected[i]);
    os << e.N << ' ' << e.K << ' ' << d17(e.lambda) << ' ' << d17(e.nu) << ' ' << d17(e.h_delta) << ' '
       << d17(e.sup_peierls) << ' ' << d17(e.theta_hat) << ' ' << (det.empty() ? "-" : det) << '\n';
  }
  return os.str();
}

inline void emit_fields(const SelectionReport& r, const std::filesystem::path& dir) {
  for (const auto& e : r.entries) {
    const std::string tag = "N" + std::to_string(e.N) + "_K" + std::to_string(e.K);
    if (e.solution) {
      write_file(dir / ("v_" + tag + ".csv"), field_csv(e.solution->v_field));
      write_file(dir / ("u_" + tag + ".csv"), field_csv(e.solution->u_field));
    }
    if (e.barrier) write_file(dir / ("peierls_" + tag + ".csv"), field_csv(e.barrier->odd_field()));
  }
}

}  // namespace detail

inline void emit_report(const SelectionReport& r, const RunConfig& cfg, const std::filesystem::path& dir) {
  ensure_dir(dir);
  write_file(dir / "report.json", dump(to_json(r)));
  write_file(dir / "ladder.dat", detail::ladder_dat(r));
  detail::emit_fields(r, dir);
  write_file(dir / "manifest.toml", manifest_text(cfg));
}

inline void emit_report(const SweepReport& r, const std::vector<OrbitData>& orbits, const RunConfig& cfg,
                        const std::filesystem::path& dir) {
  ensure_dir(dir);
  write_file(dir / "report.json", dump(to_json(r)));
  std::ostringstream sw;
  sw << "# lambda predicted detected\n";
  for (const auto& p : r.points) {
    std::string det;
    for (std::size_t i = 0; i < p.detected.size(); ++i) det += (i ? "," : "") + std::to_string(p.detected[i]);
    sw << fmt17(p.lambda) << ' ' << p.predicted.i_star << ' ' << (det.empty() ? "-" : det) << '\n';
  }
  write_file(dir / "sweep.dat", sw.str());
  std::ostringstream gc;
  gc << "# lambda";
  for (const auto& o : orbits) gc << " Gamma_" << o.index;
  gc << '\n';
  const int n = 200;
  for (int i = 0; i <= n; ++i) {
    const double lam = cfg.lambda0 + (cfg.lambda1 - cfg.lambda0) * i / n;
    gc << fmt17(lam);
    for (const auto& o : orbits) gc << ' ' << fmt17(o.gamma(lam));
    gc << '\n';
  }
  write_file(dir / "gamma.dat", gc.str());
  for (std::size_t i = 0; i < r.points.size(); ++i)
    write_file(dir / ("ladder_" + std::to_string(i) + ".dat"), detail::ladder_dat(r.points[i].ladder));
  write_file(dir / "manifest.toml", manifest_text(cfg));
}

inline void emit_report(const ViscosityComparison& v, const RunConfig& cfg, const std::filesystem::path& dir) {
  ensure_dir(dir);
  write_file(dir / "report.json", dump(to_json(v)));
  write_file(dir / "diffusive.dat", detail::ladder_dat(v.diffusive));
  if (v.hyperbolic) {
    write_file(dir / "hyperbolic.dat", detail::ladder_dat(*v.hyperbolic));
    detail::emit_fields(*v.hyperbolic, dir);
  }
  write_file(dir / "manifest.toml", manifest_text(cfg));
}

}  // namespace lfsel
