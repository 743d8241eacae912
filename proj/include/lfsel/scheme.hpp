#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"

namespace lfsel {

enum class CflPolicy { ignore, warn, abort };

struct CflMonitor {
  long violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
};

// u^k_m = (v^k_{m+1} - v^k_{m-1}) / (2Δx) for m + k even
inline Row dx_row(const Row& v, long k, const MeshSpec& mesh) {
  const long n = mesh.cols();
  Row u(n, nan_value);
  const double inv = 1.0 / (2.0 * mesh.dx());
  for (long m = wrap_index(k, 2); m < n; m += 2) u[m] = (v[wrap_index(m + 1, n)] - v[wrap_index(m - 1, n)]) * inv;
  return u;
}

// the Lax-Friedrichs update for u and the equivalent update for v, with row caches reused across steps
template <Hamiltonian M>
class Stepper {
 public:
  Stepper(const M& model, MeshSpec mesh, double c, double h_trial = 0.0)
      : model_(&model), mesh_(mesh), c_(c), h_(h_trial), xs_(grid_abscissae(mesh)),
        kernel_(make_row_kernel(model, std::span<const double>(xs_))), flux_(mesh.cols()) {}

  [[nodiscard]] const MeshSpec& mesh() const { return mesh_; }
  [[nodiscard]] double c() const { return c_; }
  [[nodiscard]] double h_trial() const { return h_; }
  void set_h_trial(double h) { h_ = h; }
  [[nodiscard]] const M& model() const { return *model_; }

  CflMonitor monitor;

  // u at level k (m + k even) to level k + 1
  void lf_step_u(const Row& u, long k, Row& out, CflPolicy policy = CflPolicy::abort) {
    const long n = mesh_.cols();
    const double lam = mesh_.lambda();
    kernel_.set_time(mesh_.t(k));
    const long first = wrap_index(k, 2);
    double worst = 0.0;
    for (long m = first; m < n; m += 2) {
      const double p = c_ + u[m];
      flux_[m] = kernel_.H(m, p);
      worst = std::max(worst, std::abs(kernel_.H_p(m, p)));
    }
    check_cfl(worst, k, policy);
    out.assign(n, nan_value);
    for (long m = first; m < n; m += 2) {
      const long m2 = wrap_index(m + 2, n);
      out[wrap_index(m + 1, n)] = 0.5 * (u[m] + u[m2]) - 0.5 * lam * (flux_[m2] - flux_[m]);
    }
  }

  // v at level k (m + k odd) to level k + 1
  void hj_step_v(const Row& v, long k, Row& out, CflPolicy policy = CflPolicy::abort) {
    const long n = mesh_.cols();
    const double dt = mesh_.dt(), inv = 1.0 / (2.0 * mesh_.dx());
    kernel_.set_time(mesh_.t(k));
    const long first = wrap_index(k, 2);
    double worst = 0.0;
    out.assign(n, nan_value);
    for (long m = first; m < n; m += 2) {
      const double vl = v[wrap_index(m - 1, n)], vr = v[wrap_index(m + 1, n)];
      const double p = c_ + (vr - vl) * inv;
      worst = std::max(worst, std::abs(kernel_.H_p(m, p)));
      out[m] = 0.5 * (vl + vr) - dt * (kernel_.H(m, p) - h_);
    }
    check_cfl(worst, k, policy);
  }

  // 1/λ - max |H_p(x_m, t_k, c + u_m)|
  double cfl_margin(const Row& u, long k) {
    kernel_.set_time(mesh_.t(k));
    double worst = 0.0;
    for (long m = wrap_index(k, 2); m < mesh_.cols(); m += 2)
      worst = std::max(worst, std::abs(kernel_.H_p(m, c_ + u[m])));
    return 1.0 / mesh_.lambda() - worst;
  }

 private:
  void check_cfl(double worst_hp, long k, CflPolicy policy) {
    const double margin = 1.0 / mesh_.lambda() - worst_hp;
    monitor.worst_margin = std::min(monitor.worst_margin, margin);
    if (margin > 0.0 || policy == CflPolicy::ignore) return;
    ++monitor.violations;
    if (policy == CflPolicy::abort)
      throw CflViolation("max |H_p| = " + fmt17(worst_hp) + " >= 1/lambda at level " + std::to_string(k));
  }

  const M* model_;
  MeshSpec mesh_;
  double c_;
  double h_;
  std::vector<double> xs_;
  decltype(make_row_kernel(std::declval<const M&>(), std::span<const double>{})) kernel_;
  Row flux_;
};

template <Hamiltonian M>
struct SchemeParams {
  const M* model;
  MeshSpec mesh;
  double c = 0.0;
  double h_trial = 0.0;
};

template <Hamiltonian M>
Row lf_step_u(const Row& u, long k, const SchemeParams<M>& p, CflPolicy policy = CflPolicy::abort) {
  Stepper<M> s(*p.model, p.mesh, p.c, p.h_trial);
  Row out;
  s.lf_step_u(u, k, out, policy);
  return out;
}

template <Hamiltonian M>
Row hj_step_v(const Row& v, long k, const SchemeParams<M>& p, CflPolicy policy = CflPolicy::abort) {
  Stepper<M> s(*p.model, p.mesh, p.c, p.h_trial);
  Row out;
  s.hj_step_v(v, k, out, policy);
  return out;
}

template <Hamiltonian M>
double cfl_margin(const Row& u, long k, const SchemeParams<M>& p) {
  Stepper<M> s(*p.model, p.mesh, p.c, p.h_trial);
  return s.cfl_margin(u, k);
}

// a smooth test solution with exact derivatives
struct SmoothField {
  virtual ~SmoothField() = default;
  [[nodiscard]] virtual double v(double x, double t) const = 0;
  [[nodiscard]] virtual double v_x(double x, double t) const = 0;
  [[nodiscard]] virtual double v_t(double x, double t) const = 0;
  [[nodiscard]] virtual double v_xx(double x, double t) const = 0;
  [[nodiscard]] virtual double v_tt(double x, double t) const = 0;
};

// D_t v^{k+1}_m + H(x_m,t_k,c+D_x v^k_{m+1}) - [v_t + H(x,t,c+v_x)](x_m,t_k) [+ (Δx/2λ) A(x_m,t_k)]
template <Hamiltonian M>
Row truncation_probe(const SmoothField& f, const SchemeParams<M>& p, long k, bool corrected = true) {
  const auto& mesh = p.mesh;
  const long n = mesh.cols();
  const double dx = mesh.dx(), dt = mesh.dt(), lam = mesh.lambda();
  const double tk = mesh.t(k), tk1 = mesh.t(k + 1);
  Row r(n, nan_value);
  for (long m = wrap_index(k, 2); m < n; m += 2) {
    const double xm = mesh.x(m);
    const double vl = f.v(mesh.x(m - 1), tk), vr = f.v(mesh.x(m + 1), tk);
    const double dtv = (f.v(xm, tk1) - 0.5 * (vl + vr)) / dt;
    const double dxv = (vr - vl) / (2.0 * dx);
    double res = dtv + p.model->H(xm, tk, p.c + dxv) - (f.v_t(xm, tk) + p.model->H(xm, tk, p.c + f.v_x(xm, tk)));
    if (corrected) res += dx / (2.0 * lam) * (f.v_xx(xm, tk) - lam * lam * f.v_tt(xm, tk));
    r[m] = res;
  }
  return r;
}

inline double sup_abs(const Row& r) {
  double s = 0.0;
  for (double v : r) if (!std::isnan(v)) s = std::max(s, std::abs(v));
  return s;
}

}  // namespace lfsel
