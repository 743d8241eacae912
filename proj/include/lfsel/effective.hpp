#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "scheme.hpp"

namespace lfsel {

struct SolveOptions {
  double tol = -1.0;  // negative: 1e-9 (1 + |c|)
  long max_periods = 20000;
  CflPolicy transient_cfl = CflPolicy::warn;
  std::optional<Row> seed;  // v at level 0
  double one_sided_bound = std::numeric_limits<double>::infinity();
};

struct PeriodicSolution {
  MeshSpec mesh;
  double c = 0.0;
  double h_delta = 0.0;
  GridField v_field;  // odd, levels 0..2K-1
  GridField u_field;  // even, = D_x v
  double residual_periodicity = 0.0;
  double scheme_residual = 0.0;
  double final_defect = 0.0;
  long iterations_used = 0;  // periods
  GridIndex anchor{1, 0};
  double cfl_margin = 0.0;
  double max_one_sided_slope = 0.0;
  long transient_cfl_violations = 0;
};

inline double default_tol(double c) { return 1e-9 * (1.0 + std::abs(c)); }

// fills u_field = D_x v_field
inline GridField derive_u(const GridField& v) {
  const auto& mesh = v.mesh();
  GridField u(mesh, Parity::even, v.levels(), v.time_periodic(), v.c());
  for (long k = 0; k < v.levels(); ++k) u.set_row(k, dx_row(v.row(k), k, mesh));
  return u;
}

inline double one_sided_slope(const GridField& u) {
  const auto& mesh = u.mesh();
  double s = -std::numeric_limits<double>::infinity();
  for (long k = 0; k < u.levels(); ++k)
    for (long m = wrap_index(k, 2); m < mesh.cols(); m += 2)
      s = std::max(s, (u.at(k, m + 2) - u.at(k, m)) / (2.0 * mesh.dx()));
  return s;
}

// v at level 0 = 0 at the anchor after shifting
inline void anchor_field(GridField& v, GridIndex at) { v.add_constant(-v.at(at.k, at.m)); }

template <Hamiltonian M>
double scheme_residual(const M& model, const PeriodicSolution& sol);

template <Hamiltonian M>
PeriodicSolution solve_periodic(const M& model, const MeshSpec& mesh, double c, const SolveOptions& opt = {}) {
  mesh.validate();
  const double tol = opt.tol > 0 ? opt.tol : default_tol(c);
  const long n = mesh.cols(), steps = mesh.steps_per_period();
  Stepper<M> st(model, mesh, c, 0.0);
  Row v(n, nan_value), w;
  for (long m = 1; m < n; m += 2) v[m] = opt.seed ? (*opt.seed)[m] : 0.0;

  double shift = 0.0, defect = std::numeric_limits<double>::infinity(), best = defect;
  long periods = 0;
  bool converged = false;
  while (periods < opt.max_periods) {
    const Row start = v;
    for (long k = 0; k < steps; ++k) {
      st.hj_step_v(v, k, w, opt.transient_cfl);
      v.swap(w);
    }
    ++periods;
    double sum = 0.0;
    long cnt = 0;
    for (long m = 1; m < n; m += 2) {
      sum += v[m] - start[m];
      ++cnt;
    }
    shift = sum / cnt;
    defect = 0.0;
    for (long m = 1; m < n; m += 2) defect = std::max(defect, std::abs(v[m] - start[m] - shift));
    if (!std::isfinite(defect)) break;
    best = std::min(best, defect);
    if (defect < tol) {
      converged = true;
      break;
    }
    // keep magnitudes bounded during long transients
    const double mean0 = v[1];
    for (long m = 1; m < n; m += 2) v[m] -= mean0;
  }
  if (!converged)
    throw NoConvergence("no periodic solution within " + std::to_string(opt.max_periods) +
                        " periods; best defect " + fmt17(best));

  PeriodicSolution sol;
  sol.mesh = mesh;
  sol.c = c;
  sol.h_delta = -shift;
  sol.iterations_used = periods;
  sol.final_defect = defect;
  sol.transient_cfl_violations = st.monitor.violations;

  st.set_h_trial(sol.h_delta);
  st.monitor = {};
  sol.v_field = GridField(mesh, Parity::odd, static_cast<int>(steps), true, c);
  for (long k = 0; k < steps; ++k) {
    sol.v_field.set_row(k, v);
    st.hj_step_v(v, k, w, CflPolicy::ignore);
    v.swap(w);
  }
  for (long m = 1; m < n; m += 2)
    sol.residual_periodicity = std::max(sol.residual_periodicity, std::abs(v[m] - sol.v_field.at(0, m)));
  anchor_field(sol.v_field, sol.anchor);
  sol.u_field = derive_u(sol.v_field);

  double margin = std::numeric_limits<double>::infinity();
  for (long k = 0; k < steps; ++k) margin = std::min(margin, st.cfl_margin(sol.u_field.row(k), k));
  sol.cfl_margin = margin;
  if (!(margin > 0.0)) throw CflViolation("accepted periodic field has CFL margin " + fmt17(margin));
  sol.max_one_sided_slope = one_sided_slope(sol.u_field);
  if (sol.max_one_sided_slope > opt.one_sided_bound)
    throw BoundViolation("one-sided slope " + fmt17(sol.max_one_sided_slope) + " exceeds M=" +
                         fmt17(opt.one_sided_bound));
  sol.scheme_residual = scheme_residual(model, sol);
  return sol;
}

// sup over stencils of |v^{k+1}_m - (avg - Δt (H - h))| including the wrap from 2K-1 to 0
template <Hamiltonian M>
double scheme_residual(const M& model, const PeriodicSolution& sol) {
  Stepper<M> st(model, sol.mesh, sol.c, sol.h_delta);
  Row w;
  double r = 0.0;
  const long steps = sol.mesh.steps_per_period();
  for (long k = 0; k < steps; ++k) {
    st.hj_step_v(sol.v_field.row(k), k, w, CflPolicy::ignore);
    const Row next = sol.v_field.row(k + 1);
    for (long m = wrap_index(k + 1, 2); m < sol.mesh.cols(); m += 2) r = std::max(r, std::abs(w[m] - next[m]));
  }
  return r;
}

struct RateEntry {
  int N = 0;
  int K = 0;
  double h_delta = 0.0;
  double error = 0.0;
};

struct RateStudy {
  std::vector<RateEntry> entries;
  double alpha = 0.0;
  double constant = 0.0;
  bool exact = false;
  bool monotone = true;
};

// least-squares fit of log err = log C + alpha log Δx
inline void fit_rate(RateStudy& rs) {
  rs.exact = true;
  for (const auto& e : rs.entries) if (e.error > 1e-12) rs.exact = false;
  for (std::size_t i = 1; i < rs.entries.size(); ++i)
    if (rs.entries[i].error > rs.entries[i - 1].error) rs.monotone = false;
  if (rs.exact) {
    rs.alpha = std::numeric_limits<double>::infinity();
    return;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& e : rs.entries) {
    if (!(e.error > 0)) continue;
    const double lx = std::log(1.0 / (2.0 * e.N)), ly = std::log(e.error);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly; ++n;
  }
  if (n < 2) return;
  rs.alpha = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  rs.constant = std::exp((sy - rs.alpha * sx) / n);
}

template <Hamiltonian M>
RateStudy rate_study(const M& model, double c, double lambda, const std::vector<int>& Ns, double h_ref,
                     const SolveOptions& opt = {}, double lambda0 = 0.0, double lambda1 = 1.0) {
  RateStudy rs;
  for (int N : Ns) {
    const auto mesh = MeshSpec::from_lambda(N, lambda, lambda0, lambda1);
    const auto sol = solve_periodic(model, mesh, c, opt);
    rs.entries.push_back({N, mesh.K, sol.h_delta, std::abs(sol.h_delta - h_ref)});
  }
  fit_rate(rs);
  return rs;
}

struct RotationEstimate {
  double characteristic = 0.0;  // mean slope of the discrete backward characteristic
  double centered = 0.0;        // (h(c+dc) - h(c-dc)) / (2 dc)
};

// backward tracing x <- x - H_p(x, t, c + ū) Δt over whole periods
template <Hamiltonian M>
double characteristic_rotation(const M& model, const PeriodicSolution& sol, double x0, long periods) {
  const auto& mesh = sol.mesh;
  const long steps = mesh.steps_per_period();
  double x = x0;
  for (long p = 0; p < periods; ++p) {
    for (long k = steps - 1; k >= 0; --k) {
      const double t = mesh.t(k);
      const double xr = x - std::floor(x);
      const double u = step_interpolant(sol.u_field, xr, t);
      x -= hp(model, xr, t, sol.c + u) * mesh.dt();
    }
  }
  return (x0 - x) / static_cast<double>(periods);
}

template <Hamiltonian M>
RotationEstimate rotation_number(const M& model, const PeriodicSolution& sol, double dc, long periods = 50,
                                 const SolveOptions& opt = {}) {
  RotationEstimate r;
  r.characteristic = characteristic_rotation(model, sol, 0.5 * sol.mesh.dx(), periods);
  const auto hi = solve_periodic(model, sol.mesh, sol.c + dc, opt);
  const auto lo = solve_periodic(model, sol.mesh, sol.c - dc, opt);
  r.centered = (hi.h_delta - lo.h_delta) / (2.0 * dc);
  return r;
}

struct DiffusiveRun {
  PeriodicSolution solution;
  double nu = 0.0;  // effective Δx^2 / (2 Δt)
};

// Δx^2/Δt = 2ν held fixed: K = 4 ν N^2
template <Hamiltonian M>
DiffusiveRun diffusive_lf_run(const M& model, double c, int N, double nu, const SolveOptions& opt = {}) {
  const long K = std::lround(4.0 * nu * N * static_cast<double>(N));
  if (K < N) throw RangeError("diffusive mesh needs N >= 1/(4 nu); N=" + std::to_string(N));
  MeshSpec mesh{N, static_cast<int>(K), 0.0, 1.0};
  mesh.validate();
  DiffusiveRun r;
  r.solution = solve_periodic(model, mesh, c, opt);
  r.nu = mesh.dx() * mesh.dx() / (2.0 * mesh.dt());
  return r;
}

}  // namespace lfsel
