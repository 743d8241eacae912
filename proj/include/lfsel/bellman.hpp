#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "effective.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "scheme.hpp"

namespace lfsel {

enum class BellmanMode { closed_form, grid_search, checked };

struct BellmanConfig {
  double c = 0.0;
  double h = 0.0;
  int control_grid = 257;
  BellmanMode mode = BellmanMode::closed_form;
  double tol_duality = -1.0;  // negative: 1e-7 (1 + |v|_inf)
};

template <class M> concept HasLxi = requires(const M& m, double a) { { m.L_xi(a, a, a) } -> std::convertible_to<double>; };

// L_xi = p*, L_xixi = 1 / H_pp(p*)
template <Hamiltonian M>
std::pair<double, double> lagrangian_derivatives(const M& m, double x, double t, double xi) {
  if constexpr (HasLxi<M>) {
    return {m.L_xi(x, t, xi), m.L_xixi(x, t, xi)};
  } else {
    const auto lr = legendre(m, x, t, xi, default_momentum_bound(0.0, std::abs(xi)));
    return {lr.p_star, 1.0 / hpp(m, x, t, lr.p_star)};
  }
}

struct OneStepResult {
  Row value;     // level l + 1
  Row argmin;    // minimizing ξ at level l + 1 sites (grid modes), NaN otherwise
  double worst_gap = 0.0;
};

namespace detail {

// min over ξ in [-1/λ, 1/λ] of L^{(c)} Δt + ρ̿ v_r + ρ̄ v_l by Chebyshev scan and Newton polish
template <Hamiltonian M>
std::pair<double, double> grid_minimize(const M& model, double x, double t, double vl, double vr, const MeshSpec& mesh,
                                        double c, int G) {
  const double lam = mesh.lambda(), dt = mesh.dt(), bound = 1.0 / lam;
  auto f = [&](double xi) {
    const double up = 0.5 - 0.5 * lam * xi;
    return (lagrangian(model, x, t, xi) - c * xi) * dt + up * vr + (1.0 - up) * vl;
  };
  double best_xi = 0.0, best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < G; ++i) {
    const double xi = bound * std::cos(std::numbers::pi * i / (G - 1));
    const double v = f(xi);
    if (v < best) {
      best = v;
      best_xi = xi;
    }
  }
  double xi = best_xi;
  for (int it = 0; it < 20; ++it) {
    const auto [lx, lxx] = lagrangian_derivatives(model, x, t, xi);
    const double g = (lx - c) * dt - 0.5 * lam * (vr - vl);
    const double h2 = lxx * dt;
    const double next = std::clamp(xi - g / h2, -bound, bound);
    if (std::abs(next - xi) < 1e-15 * (1.0 + std::abs(xi))) {
      xi = next;
      break;
    }
    xi = next;
  }
  const double polished = f(xi);
  if (polished < best) return {polished, xi};
  return {best, best_xi};
}

}  // namespace detail

// v at level l to level l + 1
template <Hamiltonian M>
OneStepResult bellman_one_step(const M& model, const MeshSpec& mesh, const Row& v, long l, const BellmanConfig& cfg) {
  const long n = mesh.cols();
  OneStepResult r;
  r.argmin.assign(n, nan_value);
  Row closed;
  if (cfg.mode != BellmanMode::grid_search) {
    Stepper<M> st(model, mesh, cfg.c, cfg.h);
    st.hj_step_v(v, l, closed, CflPolicy::ignore);
    if (cfg.mode == BellmanMode::closed_form) {
      r.value = std::move(closed);
      return r;
    }
  }
  Row grid(n, nan_value);
  const double t = mesh.t(l), dt = mesh.dt();
  double vmax = 0.0;
  for (double a : v) if (!std::isnan(a)) vmax = std::max(vmax, std::abs(a));
  for (long m = wrap_index(l, 2); m < n; m += 2) {
    const auto [val, xi] = detail::grid_minimize(model, mesh.x(m), t, v[wrap_index(m - 1, n)], v[wrap_index(m + 1, n)],
                                                 mesh, cfg.c, cfg.control_grid);
    grid[m] = val + cfg.h * dt;
    r.argmin[m] = xi;
  }
  if (cfg.mode == BellmanMode::checked) {
    const double tol = cfg.tol_duality > 0 ? cfg.tol_duality : 1e-7 * (1.0 + vmax);
    for (long m = wrap_index(l, 2); m < n; m += 2) {
      const double gap = std::abs(grid[m] - closed[m]);
      r.worst_gap = std::max(r.worst_gap, gap);
      if (gap > tol)
        throw DualityMismatch("closed form and grid search differ by " + fmt17(gap) + " at m=" + std::to_string(m) +
                              " (minimizer at the control bound)");
    }
  }
  r.value = std::move(grid);
  return r;
}

// iterated one-step updates from level lp to level top
template <Hamiltonian M>
Row value_multistep(const M& model, const MeshSpec& mesh, const Row& terminal, long lp, long top,
                    const BellmanConfig& cfg) {
  Row v = terminal;
  for (long l = lp; l < top; ++l) v = bellman_one_step(model, mesh, v, l, cfg).value;
  return v;
}

struct MinimizingControl {
  GridField xi;  // odd grid, entry (k+1, m) = H_p(x_m, t_k, c + u^k_m)
  double max_abs = 0.0;
};

template <Hamiltonian M>
MinimizingControl minimizing_control(const M& model, const PeriodicSolution& sol) {
  const auto& mesh = sol.mesh;
  MinimizingControl mc;
  mc.xi = GridField(mesh, Parity::odd, mesh.steps_per_period(), true, sol.c);
  const double bound = 1.0 / mesh.lambda();
  for (long k = 0; k < mesh.steps_per_period(); ++k) {
    const double t = mesh.t(k);
    for (long m = wrap_index(k, 2); m < mesh.cols(); m += 2) {
      const double xi = hp(model, mesh.x(m), t, sol.c + sol.u_field.at(k, m));
      if (!(std::abs(xi) < bound))
        throw BoundViolation("|xi*| = " + fmt17(std::abs(xi)) + " >= 1/lambda at (k,m)=(" + std::to_string(k + 1) +
                             "," + std::to_string(m) + ")");
      mc.xi.set(k + 1, m, xi);
      mc.max_abs = std::max(mc.max_abs, std::abs(xi));
    }
  }
  return mc;
}

struct LaxOleinikCheck {
  double residual = 0.0;         // max of the two below
  double inf_residual = 0.0;     // iterated minimization vs v̄
  double policy_residual = 0.0;  // expectation under ξ* vs v̄
};

// right side of the stochastic Lax-Oleinik identity over horizons of 1..depth periods ending at level 0
template <Hamiltonian M>
LaxOleinikCheck verify_lax_oleinik(const M& model, const PeriodicSolution& sol, int depth, double h_shift = 0.0) {
  const auto& mesh = sol.mesh;
  const long n = mesh.cols(), steps = mesh.steps_per_period();
  const double h = sol.h_delta + h_shift, lam = mesh.lambda(), dt = mesh.dt();
  const auto mc = minimizing_control(model, sol);
  const Row target = sol.v_field.row(0);
  const auto xs = grid_abscissae(mesh);
  auto kernel = make_row_kernel(model, std::span<const double>(xs));
  Stepper<M> st(model, mesh, sol.c, h);
  LaxOleinikCheck out;
  Row inf_v = target, pol_v = target, w(n), tmp;
  for (int P = 1; P <= depth; ++P) {
    for (long k = 0; k < steps; ++k) {
      st.hj_step_v(inf_v, k, tmp, CflPolicy::ignore);
      inf_v.swap(tmp);
      kernel.set_time(mesh.t(k));
      w.assign(n, nan_value);
      for (long m = wrap_index(k, 2); m < n; m += 2) {
        const double xi = mc.xi.at(k + 1, m);
        const double up = 0.5 - 0.5 * lam * xi;
        w[m] = (kernel.L(m, xi) - sol.c * xi) * dt + up * pol_v[wrap_index(m + 1, n)] +
               (1.0 - up) * pol_v[wrap_index(m - 1, n)] + h * dt;
      }
      pol_v.swap(w);
    }
    for (long m = 1; m < n; m += 2) {
      out.inf_residual = std::max(out.inf_residual, std::abs(inf_v[m] - target[m]));
      out.policy_residual = std::max(out.policy_residual, std::abs(pol_v[m] - target[m]));
    }
  }
  out.residual = std::max(out.inf_residual, out.policy_residual);
  return out;
}

}  // namespace lfsel
