#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"

namespace lfsel {

namespace odeint = boost::numeric::odeint;

struct FlowOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  double initial_step = 1e-3;
};

using Mat2 = std::array<double, 4>;  // row-major a b / c d

struct FlowResult {
  double x = 0.0;
  double p = 0.0;
  Mat2 jac{1, 0, 0, 1};
};

// Hamiltonian flow x' = H_p, p' = -H_x with its variational equation
template <Hamiltonian M>
struct HamiltonianSystem {
  const M* model;
  using state = std::array<double, 6>;
  void operator()(const state& y, state& dy, double t) const {
    const double x = y[0], p = y[1];
    const double a = hpp(*model, x, t, p), b = hpx(*model, x, t, p), cxx = hxx(*model, x, t, p);
    dy[0] = hp(*model, x, t, p);
    dy[1] = -hx(*model, x, t, p);
    // columns (y2,y4) and (y3,y5) of the Jacobian
    dy[2] = b * y[2] + a * y[4];
    dy[3] = b * y[3] + a * y[5];
    dy[4] = -cxx * y[2] - b * y[4];
    dy[5] = -cxx * y[3] - b * y[5];
  }
};

template <Hamiltonian M>
FlowResult flow(const M& model, double x, double p, double t0, double t1, const FlowOptions& opt = {}) {
  using S = typename HamiltonianSystem<M>::state;
  S y{x, p, 1, 0, 0, 1};
  auto stepper = odeint::make_controlled(opt.abs_tol, opt.rel_tol, odeint::runge_kutta_dopri5<S>());
  const double h0 = (t1 >= t0 ? 1.0 : -1.0) * opt.initial_step;
  odeint::integrate_adaptive(stepper, HamiltonianSystem<M>{&model}, y, t0, t1, h0);
  return {y[0], y[1], {y[2], y[3], y[4], y[5]}};
}

// (x, p) only, sampled at the given increasing times
template <Hamiltonian M>
std::vector<std::array<double, 2>> flow_samples(const M& model, double x, double p, const std::vector<double>& times,
                                                const FlowOptions& opt = {}) {
  using S = std::array<double, 2>;
  auto rhs = [&](const S& y, S& dy, double t) {
    dy[0] = hp(model, y[0], t, y[1]);
    dy[1] = -hx(model, y[0], t, y[1]);
  };
  // repeated times are integrated once
  std::vector<double> uniq;
  std::vector<std::size_t> slot(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (uniq.empty() || times[i] != uniq.back()) uniq.push_back(times[i]);
    slot[i] = uniq.size() - 1;
  }
  std::vector<S> got;
  got.reserve(uniq.size());
  S y{x, p};
  if (uniq.size() == 1) {
    got.push_back(y);
  } else {
    auto obs = [&](const S& s, double) { got.push_back(s); };
    const bool backward = uniq.back() < uniq.front();
    auto stepper = odeint::make_dense_output(opt.abs_tol, opt.rel_tol, odeint::runge_kutta_dopri5<S>());
    odeint::integrate_times(stepper, rhs, y, uniq.begin(), uniq.end(),
                            backward ? -opt.initial_step : opt.initial_step, obs);
  }
  std::vector<S> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) out[i] = got[slot[i]];
  return out;
}

inline Mat2 mat_mul(const Mat2& A, const Mat2& B) {
  return {A[0] * B[0] + A[1] * B[2], A[0] * B[1] + A[1] * B[3], A[2] * B[0] + A[3] * B[2],
          A[2] * B[1] + A[3] * B[3]};
}

struct Floquet {
  double mu_u = 0.0;
  double mu_s = 0.0;
  double det = 0.0;
  double slope_u = 0.0;  // dp/dx of the unstable eigenvector
  double slope_s = 0.0;
};

inline double eigen_slope(const Mat2& M, double mu) {
  // (a - mu) vx + b vp = 0 or c vx + (d - mu) vp = 0, whichever is better conditioned
  const double a = M[0], b = M[1], c = M[2], d = M[3];
  if (std::abs(b) >= std::abs(d - mu)) return (mu - a) / b;
  return c / (mu - d);
}

inline Floquet floquet(const Mat2& M) {
  Floquet f;
  const double tr = M[0] + M[3];
  f.det = M[0] * M[3] - M[1] * M[2];
  const double disc = tr * tr - 4.0 * f.det;
  if (!(disc > 0.0)) throw NotHyperbolic("monodromy trace " + fmt17(tr) + " gives complex multipliers");
  const double sq = std::sqrt(disc);
  const double big = tr >= 0 ? 0.5 * (tr + sq) : 0.5 * (tr - sq);
  f.mu_u = big;
  f.mu_s = f.det / big;
  f.slope_u = eigen_slope(M, f.mu_u);
  f.slope_s = eigen_slope(M, f.mu_s);
  return f;
}

struct OrbitData {
  int index = 0;
  int q = 1;
  int winding = 0;
  std::vector<double> s;  // s-grid on [0, q], last sample at q
  std::vector<double> x;
  std::vector<double> p;
  Mat2 monodromy{1, 0, 0, 1};
  double mu_u = 0.0;
  double mu_s = 0.0;
  double b1 = 0.0;
  double closure_defect = 0.0;
  double action = 0.0;  // integral of L along the orbit
  std::vector<double> w;
  std::vector<double> w_stable;
  std::vector<double> zeta_tt;
  double riccati_defect = 0.0;
  double gamma_tilde = 0.0;
  double zeta_tt_integral = 0.0;

  // Γ(λ) = ∫ (ζ_xx − λ² ζ_tt) ds
  [[nodiscard]] double gamma(double lambda) const { return gamma_tilde - lambda * lambda * zeta_tt_integral; }
  [[nodiscard]] double x0() const { return x.empty() ? nan_value : x.front(); }
  [[nodiscard]] double p0() const { return p.empty() ? nan_value : p.front(); }
  [[nodiscard]] bool fixed_point(double tol = 1e-9) const {
    for (std::size_t i = 0; i < x.size(); ++i)
      if (std::abs(x[i] - x[0]) > tol || std::abs(p[i]) > tol) return false;
    return true;
  }
  // position and momentum at time t by linear interpolation on the samples
  [[nodiscard]] std::array<double, 2> at(double t) const {
    const double tq = t - q * std::floor(t / q);
    const auto it = std::upper_bound(s.begin(), s.end(), tq);
    const std::size_t j = std::clamp<std::size_t>(static_cast<std::size_t>(it - s.begin()), 1, s.size() - 1);
    const double r = (tq - s[j - 1]) / (s[j] - s[j - 1]);
    return {x[j - 1] + r * (x[j] - x[j - 1]), p[j - 1] + r * (p[j] - p[j - 1])};
  }
  [[nodiscard]] double w_at(double t) const {
    const double tq = t - q * std::floor(t / q);
    const auto it = std::upper_bound(s.begin(), s.end(), tq);
    const std::size_t j = std::clamp<std::size_t>(static_cast<std::size_t>(it - s.begin()), 1, s.size() - 1);
    const double r = (tq - s[j - 1]) / (s[j] - s[j - 1]);
    return w[j - 1] + r * (w[j] - w[j - 1]);
  }
};

struct OrbitSeed {
  double x = 0.0;
  double p = 0.0;
  int winding = 0;
  std::vector<std::array<double, 2>> states;  // optional multiple-shooting states at s = k q / S
};

struct OrbitOptions {
  int segments = 16;
  int max_newton = 40;
  double newton_tol = 1e-11;
  int samples_per_period = 2048;
  double hyperbolic_margin = 1e-6;
  double dedup_tol = 1e-6;
  double riccati_tol = 1e-8;
  double action_tol = 1e-8;
  bool keep_minimal_action = true;
  int continuation_steps = 20;
  FlowOptions flow;
};

struct SeedFailure {
  OrbitSeed seed;
  std::string reason;
};

struct OrbitSearch {
  std::vector<OrbitData> orbits;
  std::vector<SeedFailure> failures;
  std::vector<OrbitData> excluded;  // hyperbolic orbits above the minimal action
};

// Newton on the time-q map by multiple shooting; returns states at s_k = k q / S
template <Hamiltonian M>
std::vector<std::array<double, 2>> shoot_orbit(const M& model, int q, int winding,
                                               std::vector<std::array<double, 2>> z, const OrbitOptions& opt) {
  const int S = static_cast<int>(z.size());
  const double h = static_cast<double>(q) / S;
  Eigen::MatrixXd J(2 * S, 2 * S);
  Eigen::VectorXd r(2 * S);
  for (int it = 0; it < opt.max_newton; ++it) {
    J.setZero();
    double res = 0.0;
    for (int k = 0; k < S; ++k) {
      const auto f = flow(model, z[k][0], z[k][1], k * h, (k + 1) * h, opt.flow);
      const int kn = (k + 1) % S;
      const double shift = k == S - 1 ? winding : 0.0;
      r(2 * k) = f.x - (z[kn][0] + shift);
      r(2 * k + 1) = f.p - z[kn][1];
      res = std::max({res, std::abs(r(2 * k)), std::abs(r(2 * k + 1))});
      J(2 * k, 2 * k) = f.jac[0];
      J(2 * k, 2 * k + 1) = f.jac[1];
      J(2 * k + 1, 2 * k) = f.jac[2];
      J(2 * k + 1, 2 * k + 1) = f.jac[3];
      J(2 * k, 2 * kn) -= 1.0;
      J(2 * k + 1, 2 * kn + 1) -= 1.0;
    }
    if (!std::isfinite(res)) throw NewtonDiverged("non-finite residual at iteration " + std::to_string(it));
    if (res < opt.newton_tol) return z;
    const Eigen::VectorXd dz = J.partialPivLu().solve(-r);
    for (int k = 0; k < S; ++k) {
      z[k][0] += dz(2 * k);
      z[k][1] += dz(2 * k + 1);
      if (!std::isfinite(z[k][0]) || std::abs(z[k][1]) > 1e6)
        throw NewtonDiverged("iterate left the phase domain at iteration " + std::to_string(it));
    }
  }
  throw NewtonDiverged("no convergence in " + std::to_string(opt.max_newton) + " iterations");
}

// w' = -(H_pp w^2 + 2 H_px w + H_xx) along the orbit, forward from w0 (unstable) or backward from w0 (stable)
template <Hamiltonian M>
std::vector<double> transport_riccati(const M& model, const OrbitData& orb, double w0, bool backward,
                                      const FlowOptions& fo = {}) {
  using S = std::array<double, 3>;
  auto rhs = [&](const S& y, S& dy, double t) {
    const double x = y[0], p = y[1], w = y[2];
    dy[0] = hp(model, x, t, p);
    dy[1] = -hx(model, x, t, p);
    dy[2] = -(hpp(model, x, t, p) * w * w + 2.0 * hpx(model, x, t, p) * w + hxx(model, x, t, p));
    if (!(std::abs(w) < 1e8)) throw RiccatiBlowup("|w| exceeded 1e8 at s=" + fmt17(t));
  };
  const std::size_t n = orb.s.size();
  std::vector<double> out(n);
  std::vector<double> times(orb.s);
  S y{orb.x.front(), orb.p.front(), w0};
  if (backward) {
    std::reverse(times.begin(), times.end());
    y = {orb.x.back(), orb.p.back(), w0};
  }
  std::size_t idx = 0;
  auto obs = [&](const S& st, double) {
    out[backward ? n - 1 - idx : idx] = st[2];
    ++idx;
  };
  auto stepper = odeint::make_dense_output(fo.abs_tol, fo.rel_tol, odeint::runge_kutta_dopri5<S>());
  odeint::integrate_times(stepper, rhs, y, times.begin(), times.end(), backward ? -fo.initial_step : fo.initial_step,
                          obs);
  return out;
}

inline double periodic_trapezoid(const std::vector<double>& s, const std::vector<double>& f) {
  double acc = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) acc += 0.5 * (f[i] + f[i - 1]) * (s[i] - s[i - 1]);
  return acc;
}

// unstable-branch w with periodicity check; a blow-up is retried after pre-transport over a few periods
template <Hamiltonian M>
std::vector<double> riccati_unstable(const M& model, OrbitData& orb, const OrbitOptions& opt = {}) {
  const auto fq = floquet(orb.monodromy);
  std::vector<double> w;
  try {
    w = transport_riccati(model, orb, fq.slope_u, false, opt.flow);
  } catch (const RiccatiBlowup&) {
    double w0 = fq.slope_u;
    for (int rep = 0; rep < 4; ++rep) w0 = transport_riccati(model, orb, w0, false, opt.flow).back();
    w = transport_riccati(model, orb, w0, false, opt.flow);
  }
  orb.riccati_defect = std::abs(w.back() - w.front());
  if (orb.riccati_defect > opt.riccati_tol * (1.0 + std::abs(w.front())))
    throw NotPeriodic("Riccati defect " + fmt17(orb.riccati_defect));
  return w;
}

template <Hamiltonian M>
std::vector<double> riccati_stable(const M& model, const OrbitData& orb, const OrbitOptions& opt = {}) {
  const auto fq = floquet(orb.monodromy);
  auto w = transport_riccati(model, orb, fq.slope_s, true, opt.flow);
  if (std::abs(w.back() - w.front()) > opt.riccati_tol * (1.0 + std::abs(w.back())))
    throw NotPeriodic("stable Riccati defect " + fmt17(std::abs(w.back() - w.front())));
  return w;
}

// ζ_xt = -H_x - H_p ζ_xx, ζ_tt = -H_t - H_p ζ_xt on the orbit, with c + ζ_x = p
template <Hamiltonian M>
std::vector<double> zeta_tt_samples(const M& model, const OrbitData& orb) {
  std::vector<double> out(orb.s.size());
  for (std::size_t i = 0; i < orb.s.size(); ++i) {
    const double x = orb.x[i], t = orb.s[i], p = orb.p[i];
    const double hpv = hp(model, x, t, p);
    const double zxt = -hx(model, x, t, p) - hpv * orb.w[i];
    out[i] = -ht(model, x, t, p) - hpv * zxt;
  }
  return out;
}

struct GammaPair {
  double gamma = 0.0;
  double gamma_tilde = 0.0;
};

inline GammaPair gamma_criteria(const OrbitData& orb, double lambda) { return {orb.gamma(lambda), orb.gamma_tilde}; }

// samples, Floquet data, Riccati branches and Γ integrals for a converged orbit
template <Hamiltonian M>
OrbitData complete_orbit(const M& model, int q, int winding, const std::vector<std::array<double, 2>>& z,
                         const OrbitOptions& opt) {
  OrbitData o;
  o.q = q;
  o.winding = winding;
  const int S = static_cast<int>(z.size());
  const double h = static_cast<double>(q) / S;
  Mat2 mono{1, 0, 0, 1};
  for (int k = 0; k < S; ++k) mono = mat_mul(flow(model, z[k][0], z[k][1], k * h, (k + 1) * h, opt.flow).jac, mono);
  o.monodromy = mono;
  const auto fq = floquet(mono);
  o.mu_u = fq.mu_u;
  o.mu_s = fq.mu_s;
  if (!(std::abs(fq.mu_u) > 1.0 + opt.hyperbolic_margin))
    throw NotHyperbolic("|mu_u| = " + fmt17(std::abs(fq.mu_u)) + " within the hyperbolicity margin");
  o.b1 = std::log(std::abs(fq.mu_u)) / q;

  const int n = opt.samples_per_period * q;
  o.s.resize(n + 1);
  for (int i = 0; i <= n; ++i) o.s[i] = static_cast<double>(q) * i / n;
  o.x.resize(n + 1);
  o.p.resize(n + 1);
  // sample segment by segment from the shooting states to avoid amplifying errors
  const int per = n / S;
  for (int k = 0; k < S; ++k) {
    std::vector<double> ts(o.s.begin() + k * per, o.s.begin() + (k + 1) * per + 1);
    const auto smp = flow_samples(model, z[k][0], z[k][1], ts, opt.flow);
    for (int j = 0; j <= per; ++j) {
      o.x[k * per + j] = smp[j][0];
      o.p[k * per + j] = smp[j][1];
    }
  }
  o.closure_defect = std::max(std::abs(o.x.back() - o.x.front() - winding), std::abs(o.p.back() - o.p.front()));

  std::vector<double> lag(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double x = o.x[i], t = o.s[i], p = o.p[i];
    lag[i] = p * hp(model, x, t, p) - model.H(x, t, p);
  }
  o.action = periodic_trapezoid(o.s, lag);
  o.w = riccati_unstable(model, o, opt);
  o.w_stable = riccati_stable(model, o, opt);
  o.zeta_tt = zeta_tt_samples(model, o);
  o.gamma_tilde = periodic_trapezoid(o.s, o.w);
  o.zeta_tt_integral = periodic_trapezoid(o.s, o.zeta_tt);
  return o;
}

inline double circle_distance(double a, double b) {
  const double d = a - b;
  return std::abs(d - std::round(d));
}

// same orbit up to integer translation in x and integer time shift
inline bool same_orbit(const OrbitData& a, const OrbitData& b, double tol) {
  if (a.q != b.q || a.winding != b.winding) return false;
  const std::size_t per = (b.s.size() - 1) / b.q;
  for (int r = 0; r < b.q; ++r) {
    const std::size_t j = r * per;
    if (circle_distance(a.x.front(), b.x[j]) < tol && std::abs(a.p.front() - b.p[j]) < tol) return true;
  }
  return false;
}

template <Hamiltonian M>
OrbitSearch find_orbits(const M& model, int q, const std::vector<OrbitSeed>& seeds, const OrbitOptions& opt = {}) {
  OrbitSearch out;
  std::vector<OrbitData> found;
  for (const auto& seed : seeds) {
    try {
      std::vector<std::array<double, 2>> z = seed.states;
      if (z.empty()) z.assign(opt.segments, {seed.x, seed.p});
      z = shoot_orbit(model, q, seed.winding, std::move(z), opt);
      auto o = complete_orbit(model, q, seed.winding, z, opt);
      // normalize the base point into [0, 1)
      const double shift = std::floor(o.x.front());
      for (auto& v : o.x) v -= shift;
      bool dup = false;
      for (const auto& f : found) dup = dup || same_orbit(f, o, opt.dedup_tol);
      if (!dup) found.push_back(std::move(o));
    } catch (const error& e) {
      out.failures.push_back({seed, e.what()});
    }
  }
  if (opt.keep_minimal_action && !found.empty()) {
    double amin = std::numeric_limits<double>::infinity();
    for (const auto& o : found) amin = std::min(amin, o.action);
    for (auto& o : found) {
      if (o.action <= amin + opt.action_tol * (1.0 + std::abs(amin))) out.orbits.push_back(std::move(o));
      else out.excluded.push_back(std::move(o));
    }
  } else {
    out.orbits = std::move(found);
  }
  std::sort(out.orbits.begin(), out.orbits.end(), [](const auto& a, const auto& b) { return a.x0() < b.x0(); });
  for (std::size_t i = 0; i < out.orbits.size(); ++i) out.orbits[i].index = static_cast<int>(i) + 1;
  return out;
}

// minima of F from sign changes of F' refined by bisection
inline std::vector<double> potential_minima(const TrigPoly& F, int scan = 4096) {
  std::vector<double> out;
  if (F.empty()) return out;
  for (int i = 0; i < scan; ++i) {
    double a = static_cast<double>(i) / scan, b = static_cast<double>(i + 1) / scan;
    double fa = F(a, 1), fb = F(b, 1);
    if (fa == 0.0 && F(a, 2) > 0.0) {
      out.push_back(a);
      continue;
    }
    if (!(fa < 0.0 && fb > 0.0)) continue;
    for (int it = 0; it < 200 && b - a > 1e-16; ++it) {
      const double mid = 0.5 * (a + b);
      (F(mid, 1) < 0.0 ? a : b) = mid;
    }
    out.push_back(0.5 * (a + b));
  }
  return out;
}

// MECH: the minima of F; MECH_T: continuation in ε from those minima
inline OrbitSearch find_model_orbits(const QuadraticModel& model, const OrbitOptions& opt = {}) {
  std::vector<OrbitSeed> seeds;
  const auto minima = potential_minima(model.F());
  if (model.autonomous()) {
    for (double a : minima) seeds.push_back({a, 0.0, 0, {}});
    return find_orbits(model, 1, seeds, opt);
  }
  OrbitSearch failed;
  for (double a : minima) {
    std::vector<std::array<double, 2>> z(opt.segments, {a, 0.0});
    try {
      for (int j = 1; j <= opt.continuation_steps; ++j) {
        const double e = model.eps() * j / opt.continuation_steps;
        const auto mj = QuadraticModel::mech_t(model.F(), model.G(), e);
        z = shoot_orbit(mj, 1, 0, std::move(z), opt);
      }
      seeds.push_back({z[0][0], z[0][1], 0, z});
    } catch (const error& e) {
      failed.failures.push_back({{a, 0.0, 0, {}}, e.what()});
    }
  }
  auto res = find_orbits(model, 1, seeds, opt);
  res.failures.insert(res.failures.end(), failed.failures.begin(), failed.failures.end());
  return res;
}

struct Selection {
  int i_star = 0;
  double margin = std::numeric_limits<double>::infinity();
  bool tie = false;
};

inline Selection predict_selection(const std::vector<OrbitData>& orbits, double lambda, double tie_rel = 1e-6) {
  Selection s;
  if (orbits.empty()) return s;
  double best = std::numeric_limits<double>::infinity(), second = best;
  for (const auto& o : orbits) {
    const double g = lambda < 0 ? o.gamma_tilde : o.gamma(lambda);
    if (g < best) {
      second = best;
      best = g;
      s.i_star = o.index;
    } else if (g < second) {
      second = g;
    }
  }
  s.margin = second - best;
  s.tie = orbits.size() > 1 && s.margin < tie_rel * (1.0 + std::abs(best));
  return s;
}

// argmin Γ̃, the vanishing-viscosity prediction
inline Selection predict_viscous_selection(const std::vector<OrbitData>& orbits, double tie_rel = 1e-6) {
  return predict_selection(orbits, -1.0, tie_rel);
}

// λ where the predicted selection changes, by bisection on the Γ curves inside [lo, hi]
inline std::optional<double> lambda_crit(const std::vector<OrbitData>& orbits, double lo, double hi,
                                         double tol = 1e-12) {
  if (orbits.size() < 2) return std::nullopt;
  const int a = predict_selection(orbits, lo).i_star;
  if (predict_selection(orbits, hi).i_star == a) return std::nullopt;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (predict_selection(orbits, mid).i_star == a ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace lfsel
