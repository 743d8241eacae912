#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace lfsel {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

enum class Wave { cos, sin };

// n-th derivative of cos or sin at theta, without the frequency factor
inline double wave_derivative(Wave w, int n, double theta) {
  const int r = ((n % 4) + 4) % 4;
  const double c = std::cos(theta), s = std::sin(theta);
  if (w == Wave::cos) {
    switch (r) {
      case 0: return c;
      case 1: return -s;
      case 2: return -c;
      default: return s;
    }
  }
  switch (r) {
    case 0: return s;
    case 1: return c;
    case 2: return -s;
    default: return -c;
  }
}

inline double ipow(double v, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= v;
  return r;
}

// f(x) = sum_j a_j cos(2 pi j x) + b_j sin(2 pi j x)
struct TrigPoly {
  std::vector<double> a;
  std::vector<double> b;

  [[nodiscard]] std::size_t degree() const {
    const std::size_t n = std::max(a.size(), b.size());
    return n == 0 ? 0 : n - 1;
  }

  [[nodiscard]] bool empty() const {
    for (double v : a) if (v != 0.0) return false;
    for (double v : b) if (v != 0.0) return false;
    return true;
  }

  [[nodiscard]] double operator()(double x, int n = 0) const {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (a[j] == 0.0) continue;
      if (j == 0) {
        if (n == 0) s += a[0];
        continue;
      }
      const double w = two_pi * static_cast<double>(j);
      s += a[j] * ipow(w, n) * wave_derivative(Wave::cos, n, w * x);
    }
    for (std::size_t j = 1; j < b.size(); ++j) {
      if (b[j] == 0.0) continue;
      const double w = two_pi * static_cast<double>(j);
      s += b[j] * ipow(w, n) * wave_derivative(Wave::sin, n, w * x);
    }
    return s;
  }
};

// one separable term coef * X(2 pi jx x) * T(2 pi jt t)
struct TrigTerm {
  double coef = 0.0;
  int jx = 0;
  int jt = 0;
  Wave wx = Wave::cos;
  Wave wt = Wave::cos;

  [[nodiscard]] double x_factor(double x, int n) const {
    const double w = two_pi * jx;
    if (jx == 0) return n == 0 ? (wx == Wave::cos ? 1.0 : 0.0) : 0.0;
    return ipow(w, n) * wave_derivative(wx, n, w * x);
  }
  [[nodiscard]] double t_factor(double t, int n) const {
    const double w = two_pi * jt;
    if (jt == 0) return n == 0 ? (wt == Wave::cos ? 1.0 : 0.0) : 0.0;
    return ipow(w, n) * wave_derivative(wt, n, w * t);
  }
};

// g(x,t) as a finite sum of separable trigonometric terms
struct TrigPoly2 {
  std::vector<TrigTerm> terms;

  [[nodiscard]] bool empty() const {
    for (const auto& term : terms) if (term.coef != 0.0) return false;
    return true;
  }
  [[nodiscard]] bool autonomous() const {
    for (const auto& term : terms)
      if (term.coef != 0.0 && term.jt != 0) return false;
    return true;
  }

  [[nodiscard]] double operator()(double x, double t, int nx = 0, int nt = 0) const {
    double s = 0.0;
    for (const auto& term : terms) {
      if (term.coef == 0.0) continue;
      s += term.coef * term.x_factor(x, nx) * term.t_factor(t, nt);
    }
    return s;
  }
};

}  // namespace lfsel
