#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "trig.hpp"

namespace lfsel {

inline constexpr double default_h_fd = 1e-5;

template <class M>
concept Hamiltonian = requires(const M& m, double x, double t, double p) {
  { m.H(x, t, p) } -> std::convertible_to<double>;
  { m.name() } -> std::convertible_to<std::string>;
};

template <class M> concept HasHp = requires(const M& m, double a) { { m.H_p(a, a, a) } -> std::convertible_to<double>; };
template <class M> concept HasHpp = requires(const M& m, double a) { { m.H_pp(a, a, a) } -> std::convertible_to<double>; };
template <class M> concept HasHx = requires(const M& m, double a) { { m.H_x(a, a, a) } -> std::convertible_to<double>; };
template <class M> concept HasHt = requires(const M& m, double a) { { m.H_t(a, a, a) } -> std::convertible_to<double>; };
template <class M> concept HasHpx = requires(const M& m, double a) { { m.H_px(a, a, a) } -> std::convertible_to<double>; };
template <class M> concept HasHxx = requires(const M& m, double a) { { m.H_xx(a, a, a) } -> std::convertible_to<double>; };
template <class M> concept HasLagrangian = requires(const M& m, double a) { { m.L(a, a, a) } -> std::convertible_to<double>; };
template <class M> concept HasMomentumBound = requires(const M& m) { { m.momentum_bound() } -> std::convertible_to<double>; };
template <class M> concept HasAutonomous = requires(const M& m) { { m.autonomous() } -> std::convertible_to<bool>; };

enum class Partial { p, pp, x, t, px, xx };

// centered finite differences of H
template <Hamiltonian M>
double fd_partial(const M& m, Partial d, double x, double t, double p, double h = default_h_fd) {
  const double h2 = 10.0 * h;  // second differences lose two orders to cancellation
  switch (d) {
    case Partial::p: return (m.H(x, t, p + h) - m.H(x, t, p - h)) / (2 * h);
    case Partial::pp: return (m.H(x, t, p + h2) - 2 * m.H(x, t, p) + m.H(x, t, p - h2)) / (h2 * h2);
    case Partial::x: return (m.H(x + h, t, p) - m.H(x - h, t, p)) / (2 * h);
    case Partial::t: return (m.H(x, t + h, p) - m.H(x, t - h, p)) / (2 * h);
    case Partial::px:
      return (m.H(x + h2, t, p + h2) - m.H(x + h2, t, p - h2) - m.H(x - h2, t, p + h2) + m.H(x - h2, t, p - h2)) /
             (4 * h2 * h2);
    case Partial::xx: return (m.H(x + h2, t, p) - 2 * m.H(x, t, p) + m.H(x - h2, t, p)) / (h2 * h2);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

template <Hamiltonian M> double hp(const M& m, double x, double t, double p) {
  if constexpr (HasHp<M>) return m.H_p(x, t, p);
  else return fd_partial(m, Partial::p, x, t, p);
}
template <Hamiltonian M> double hpp(const M& m, double x, double t, double p) {
  if constexpr (HasHpp<M>) return m.H_pp(x, t, p);
  else return fd_partial(m, Partial::pp, x, t, p);
}
template <Hamiltonian M> double hx(const M& m, double x, double t, double p) {
  if constexpr (HasHx<M>) return m.H_x(x, t, p);
  else return fd_partial(m, Partial::x, x, t, p);
}
template <Hamiltonian M> double ht(const M& m, double x, double t, double p) {
  if constexpr (HasHt<M>) return m.H_t(x, t, p);
  else return fd_partial(m, Partial::t, x, t, p);
}
template <Hamiltonian M> double hpx(const M& m, double x, double t, double p) {
  if constexpr (HasHpx<M>) return m.H_px(x, t, p);
  else return fd_partial(m, Partial::px, x, t, p);
}
template <Hamiltonian M> double hxx(const M& m, double x, double t, double p) {
  if constexpr (HasHxx<M>) return m.H_xx(x, t, p);
  else return fd_partial(m, Partial::xx, x, t, p);
}

template <Hamiltonian M> bool is_autonomous(const M& m) {
  if constexpr (HasAutonomous<M>) return m.autonomous();
  else return false;
}

inline double default_momentum_bound(double c, double xi_max) {
  return 16.0 * (1.0 + std::abs(c) + xi_max);
}

struct LegendreResult {
  double L = 0.0;
  double p_star = 0.0;
};

// sup_p { xi p - H } over [-P_max, P_max] by safeguarded Newton on xi = H_p
template <Hamiltonian M>
LegendreResult legendre(const M& m, double x, double t, double xi, double p_max) {
  auto g = [&](double p) { return xi - hp(m, x, t, p); };
  double lo = -p_max, hi = p_max;
  const double glo = g(lo), ghi = g(hi);
  if (glo <= 0.0)
    throw ClampedMaximizer("maximizer at -P_max=" + std::to_string(-p_max) + " for xi=" + std::to_string(xi));
  if (ghi >= 0.0)
    throw ClampedMaximizer("maximizer at P_max=" + std::to_string(p_max) + " for xi=" + std::to_string(xi));
  double p = std::clamp(xi, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double gp = g(p);
    if (gp == 0.0) break;
    if (gp > 0.0) lo = p; else hi = p;
    const double curv = hpp(m, x, t, p);
    if (!(curv > 0.0))
      throw NonconvexSample("H_pp=" + std::to_string(curv) + " at x=" + std::to_string(x) +
                            " t=" + std::to_string(t) + " p=" + std::to_string(p));
    double next = p + gp / curv;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - p);
    p = next;
    if (step <= 1e-15 * (1.0 + std::abs(p)) || hi - lo <= 1e-15 * (1.0 + std::abs(p))) break;
  }
  return {xi * p - m.H(x, t, p), p};
}

// L and the shifted L^{(c)} = L - c xi
template <Hamiltonian M>
struct LagrangianView {
  const M* model;
  double xi_max;
  double p_max;

  LagrangianView(const M& m, double xi_max_, double p_max_ = 0.0)
      : model(&m), xi_max(xi_max_), p_max(p_max_ > 0 ? p_max_ : default_momentum_bound(0.0, xi_max_)) {}

  [[nodiscard]] double L(double x, double t, double xi) const {
    if constexpr (HasLagrangian<M>) return model->L(x, t, xi);
    else return legendre(*model, x, t, xi, p_max).L;
  }
  [[nodiscard]] double Lc(double x, double t, double xi, double c) const { return L(x, t, xi) - c * xi; }
};

template <Hamiltonian M>
double lagrangian(const M& m, double x, double t, double xi, double p_max = 0.0) {
  if constexpr (HasLagrangian<M>) return m.L(x, t, xi);
  else return legendre(m, x, t, xi, p_max > 0 ? p_max : default_momentum_bound(0.0, std::abs(xi))).L;
}

struct AssumptionReport {
  double min_hpp = std::numeric_limits<double>::infinity();
  double superlinearity = std::numeric_limits<double>::infinity();  // min H/|p| at p = +-P_max
  double alpha = 0.0;                                                // smallest admissible on samples
  double periodicity_residual = 0.0;
  double fenchel_young_gap = 0.0;  // max |L + H - xi p| at the maximizer
  bool convex = true;
  bool superlinear = true;
  bool periodic = true;
};

struct TonelliOptions {
  int density = 16;
  double p_max = 16.0;
  double xi_max = 2.0;
  double superlinear_threshold = 1.0;
  double periodicity_tol = 1e-12;
};

template <Hamiltonian M>
AssumptionReport check_tonelli(const M& m, const TonelliOptions& opt = {}) {
  AssumptionReport r;
  const int n = std::max(opt.density, 2);
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / n;
    for (int j = 0; j < n; ++j) {
      const double t = static_cast<double>(j) / n;
      for (int k = 0; k < n; ++k) {
        const double p = -opt.p_max + 2.0 * opt.p_max * k / (n - 1);
        r.min_hpp = std::min(r.min_hpp, hpp(m, x, t, p));
        const double h0 = m.H(x, t, p);
        r.periodicity_residual = std::max({r.periodicity_residual, std::abs(m.H(x + 1.0, t, p) - h0),
                                           std::abs(m.H(x, t + 1.0, p) - h0)});
      }
      for (double p : {-opt.p_max, opt.p_max})
        r.superlinearity = std::min(r.superlinearity, m.H(x, t, p) / std::abs(p));
      if (r.min_hpp <= 0.0) continue;
      for (int k = 0; k < n; ++k) {
        const double xi = -opt.xi_max + 2.0 * opt.xi_max * k / (n - 1);
        try {
          const auto lr = legendre(m, x, t, xi, opt.p_max);
          // envelope: L_x = -H_x at the maximizer
          const double lx = -hx(m, x, t, lr.p_star);
          r.alpha = std::max(r.alpha, std::abs(lx) / (std::abs(lr.L) + 1.0));
          r.fenchel_young_gap =
              std::max(r.fenchel_young_gap, std::abs(lr.L + m.H(x, t, lr.p_star) - xi * lr.p_star));
        } catch (const error&) {
          r.convex = false;
        }
      }
    }
  }
  r.convex = r.convex && r.min_hpp > 0.0;
  r.superlinear = r.superlinearity > opt.superlinear_threshold;
  r.periodic = r.periodicity_residual <= opt.periodicity_tol;
  return r;
}

enum class Family { free, mech, mech_t };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::free: return "FREE";
    case Family::mech: return "MECH";
    case Family::mech_t: return "MECH_T";
  }
  return "?";
}

// H = p^2/2 - F(x) - eps G(x,t)
class QuadraticModel {
 public:
  QuadraticModel() = default;
  QuadraticModel(Family family, TrigPoly F, TrigPoly2 G, double eps, double p_max = 64.0)
      : family_(family), F_(std::move(F)), G_(std::move(G)), eps_(eps), p_max_(p_max) {}

  static QuadraticModel free_particle() { return {Family::free, {}, {}, 0.0}; }
  static QuadraticModel mech(TrigPoly F) { return {Family::mech, std::move(F), {}, 0.0}; }
  static QuadraticModel mech_t(TrigPoly F, TrigPoly2 G, double eps) {
    return {Family::mech_t, std::move(F), std::move(G), eps};
  }

  [[nodiscard]] std::string name() const { return family_name(family_); }
  [[nodiscard]] Family family() const { return family_; }
  [[nodiscard]] const TrigPoly& F() const { return F_; }
  [[nodiscard]] const TrigPoly2& G() const { return G_; }
  [[nodiscard]] double eps() const { return eps_; }
  [[nodiscard]] double momentum_bound() const { return p_max_; }
  void set_momentum_bound(double p) { p_max_ = p; }
  [[nodiscard]] bool autonomous() const { return eps_ == 0.0 || G_.autonomous(); }

  // potential V = F + eps G and its partials
  [[nodiscard]] double V(double x, double t, int nx = 0, int nt = 0) const {
    double v = nt == 0 ? F_(x, nx) : 0.0;
    if (eps_ != 0.0) v += eps_ * G_(x, t, nx, nt);
    return v;
  }

  [[nodiscard]] double H(double x, double t, double p) const { return 0.5 * p * p - V(x, t); }
  [[nodiscard]] double H_p(double, double, double p) const { return p; }
  [[nodiscard]] double H_pp(double, double, double) const { return 1.0; }
  [[nodiscard]] double H_x(double x, double t, double) const { return -V(x, t, 1, 0); }
  [[nodiscard]] double H_t(double x, double t, double) const { return -V(x, t, 0, 1); }
  [[nodiscard]] double H_px(double, double, double) const { return 0.0; }
  [[nodiscard]] double H_xx(double x, double t, double) const { return -V(x, t, 2, 0); }
  [[nodiscard]] double L(double x, double t, double xi) const { return 0.5 * xi * xi + V(x, t); }
  [[nodiscard]] double L_xi(double, double, double xi) const { return xi; }
  [[nodiscard]] double L_xixi(double, double, double) const { return 1.0; }

  // per-row cache of V at fixed abscissae
  class RowKernel {
   public:
    RowKernel(const QuadraticModel& m, std::span<const double> xs) : m_(&m), v_(xs.size()) {
      f_.resize(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) f_[i] = m.F_(xs[i]);
      if (m.eps_ != 0.0) {
        gx_.resize(m.G_.terms.size());
        for (std::size_t l = 0; l < m.G_.terms.size(); ++l) {
          gx_[l].resize(xs.size());
          for (std::size_t i = 0; i < xs.size(); ++i) gx_[l][i] = m.G_.terms[l].x_factor(xs[i], 0);
        }
      }
      v_ = f_;
    }
    void set_time(double t) {
      if (m_->eps_ == 0.0 || gx_.empty()) return;
      v_ = f_;
      for (std::size_t l = 0; l < gx_.size(); ++l) {
        const auto& term = m_->G_.terms[l];
        const double tf = m_->eps_ * term.coef * term.t_factor(t, 0);
        if (tf == 0.0) continue;
        const auto& g = gx_[l];
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += tf * g[i];
      }
    }
    [[nodiscard]] double H(std::size_t i, double p) const { return 0.5 * p * p - v_[i]; }
    [[nodiscard]] double H_p(std::size_t, double p) const { return p; }
    [[nodiscard]] double L(std::size_t i, double xi) const { return 0.5 * xi * xi + v_[i]; }

   private:
    const QuadraticModel* m_;
    std::vector<double> f_;
    std::vector<std::vector<double>> gx_;
    std::vector<double> v_;
  };

  [[nodiscard]] RowKernel row_kernel(std::span<const double> xs) const { return RowKernel(*this, xs); }

 private:
  Family family_ = Family::free;
  TrigPoly F_;
  TrigPoly2 G_;
  double eps_ = 0.0;
  double p_max_ = 64.0;
};

// row evaluation through the model when it has no cache of its own
template <Hamiltonian M>
class GenericRowKernel {
 public:
  GenericRowKernel(const M& m, std::span<const double> xs) : m_(&m), xs_(xs.begin(), xs.end()) {}
  void set_time(double t) { t_ = t; }
  [[nodiscard]] double H(std::size_t i, double p) const { return m_->H(xs_[i], t_, p); }
  [[nodiscard]] double H_p(std::size_t i, double p) const { return hp(*m_, xs_[i], t_, p); }
  [[nodiscard]] double L(std::size_t i, double xi) const { return lagrangian(*m_, xs_[i], t_, xi); }

 private:
  const M* m_;
  std::vector<double> xs_;
  double t_ = 0.0;
};

template <class M> concept HasRowKernel = requires(const M& m, std::span<const double> xs) { m.row_kernel(xs); };

template <Hamiltonian M>
auto make_row_kernel(const M& m, std::span<const double> xs) {
  if constexpr (HasRowKernel<M>) return m.row_kernel(xs);
  else return GenericRowKernel<M>(m, xs);
}

}  // namespace lfsel
