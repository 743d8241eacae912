#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "experiment.hpp"
#include "orbits.hpp"
#include "report.hpp"

namespace lfsel {

enum class ExitCode { ok = 0, refuted = 1, error = 2 };

// built-in models addressable by name from the command line
inline ModelConfig preset_model(const std::string& name) {
  ModelConfig m;
  if (name == "FREE") {
    m.family = "FREE";
  } else if (name == "MECH" || name == "MECH2") {
    // sin²(2πx)(1 + 0.3 cos 2πx)²: wells at 0 and 1/2 with distinct curvature
    m.family = "MECH";
    m.F_cos = {0.51125, 0.15, -0.5, -0.15, -0.01125};
  } else if (name == "MECH1") {
    m.family = "MECH";
    m.F_cos = {0.05, -0.05};
  } else if (name == "MECH_T") {
    m.family = "MECH_T";
    m.F_cos = {0.48789899972667955, -0.14698439880012715, -0.359690201930299, -0.0045268975975235526,
               0.02248063762064374, 0.0008218609667192534};
    m.eps = 15.431159590013289;
    m.G_coef = {0.08952465548919102, -0.053051647697298455, -0.0033157279810811504, 0.006631455962162307};
    m.G_jx = {1, 2, 3, 4};
    m.G_jt = {2, 2, 2, 2};
    m.G_wx = {"sin", "sin", "sin", "sin"};
    m.G_wt = {"cos", "cos", "cos", "cos"};
  } else {
    throw SchemaError("model: unknown preset " + name);
  }
  return m;
}

inline LadderOptions ladder_options(const RunConfig& cfg) {
  LadderOptions o;
  o.Ns.clear();
  for (double n : cfg.Ns) o.Ns.push_back(static_cast<int>(n));
  o.solve.tol = cfg.tol;
  o.solve.max_periods = static_cast<long>(cfg.max_periods);
  o.detect.delta = cfg.delta;
  o.detect.tol_fit = cfg.tol_fit;
  o.detect.slice_stride = static_cast<long>(cfg.slice_stride);
  o.compare_peierls = cfg.peierls;
  o.peierls.velocities = static_cast<int>(cfg.peierls_velocities);
  o.peierls.max_periods = static_cast<long>(cfg.peierls_max_periods);
  o.peierls.tol = cfg.peierls_tol;
  o.peierls.xi_max = 1.0 / cfg.lambda1;
  o.peierls.threads = static_cast<unsigned>(cfg.threads);
  o.h_ref = cfg.h_ref;
  o.lambda0 = cfg.lambda0;
  o.lambda1 = cfg.lambda1;
  return o;
}

inline ViscosityOptions viscosity_options(const RunConfig& cfg) {
  ViscosityOptions v;
  v.N = static_cast<int>(cfg.nu_N);
  v.nus = cfg.nus;
  v.solve.tol = cfg.tol;
  v.solve.max_periods = static_cast<long>(cfg.max_periods);
  v.detect.delta = cfg.delta;
  v.detect.tol_fit = cfg.tol_fit;
  v.detect.slice_stride = static_cast<long>(cfg.slice_stride);
  return v;
}

struct RunResult {
  ExitCode code = ExitCode::ok;
  std::string summary;
};

inline bool sweep_refuted(const SweepReport& r) {
  if (r.lambda_crit && r.bracket && !r.bracket_contains_crit) return true;
  if (!r.points.empty() && !r.points.front().detected.empty() && !r.small_lambda_matches_viscous) return true;
  return false;
}

// runs the experiment named by kind and writes the report into dir
inline RunResult run_selection(const RunConfig& cfg, const std::string& kind, const std::filesystem::path& dir) {
  const auto model = build_model(cfg.model);
  const auto search = find_model_orbits(model);
  const auto& orbits = search.orbits;
  RunResult res;
  if (kind == "run" || kind == "ladder") {
    const auto rep = run_hyperbolic_ladder(model, orbits, cfg.c, cfg.lambda, ladder_options(cfg));
    emit_report(rep, cfg, dir);
    res.code = rep.verdict == Verdict::refuted ? ExitCode::refuted : ExitCode::ok;
    res.summary = std::string("verdict ") + verdict_name(rep.verdict) + (rep.cause.empty() ? "" : " (" + rep.cause + ")");
  } else if (kind == "sweep") {
    auto opt = ladder_options(cfg);
    opt.compare_peierls = false;
    const auto rep = lambda_sweep(model, orbits, cfg.c, cfg.lambdas, opt);
    emit_report(rep, orbits, cfg, dir);
    res.code = sweep_refuted(rep) ? ExitCode::refuted : ExitCode::ok;
    res.summary = std::string("bracket ") +
                  (rep.bracket ? fmt17(rep.bracket->first) + ".." + fmt17(rep.bracket->second) : "none") +
                  ", lambda_crit " + (rep.lambda_crit ? fmt17(*rep.lambda_crit) : "none");
  } else if (kind == "compare") {
    auto opt = ladder_options(cfg);
    opt.compare_peierls = false;
    const auto hyp = run_hyperbolic_ladder(model, orbits, cfg.c, cfg.lambda, opt);
    const auto cmp = compare_viscosity(model, orbits, cfg.c, viscosity_options(cfg), hyp);
    emit_report(cmp, cfg, dir);
    res.code = cmp.diffusive.verdict == Verdict::refuted ? ExitCode::refuted : ExitCode::ok;
    res.summary = std::string("diffusive ") + verdict_name(cmp.diffusive.verdict) + ", hyperbolic " +
                  verdict_name(hyp.verdict) + (cmp.agree ? ", agree" : ", differ");
  } else {
    throw SchemaError("experiment.kind: unknown kind " + kind);
  }
  return res;
}

}  // namespace lfsel
