#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "lfsel/lfsel.hpp"

namespace testing_support {

using namespace lfsel;

inline std::mt19937_64& rng() {
  static std::mt19937_64 g(20240607);
  return g;
}

inline double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng()); }

// random values on the active slots of one row
inline Row random_row(const MeshSpec& mesh, Parity par, long k, double lo, double hi) {
  Row r(mesh.cols(), nan_value);
  for (long m = 0; m < mesh.cols(); ++m)
    if (is_active(par, k, m)) r[m] = uniform(lo, hi);
  return r;
}

// H given only by its value so every derived quantity takes the generic path
struct GenericQuadratic {
  QuadraticModel inner;
  [[nodiscard]] double H(double x, double t, double p) const { return inner.H(x, t, p); }
  [[nodiscard]] std::string name() const { return inner.name() + "-generic"; }
};

inline QuadraticModel one_well() { return QuadraticModel::mech(TrigPoly{{0.05, -0.05}, {}}); }

// sin²(2πx)(1 + 0.3 cos 2πx)²
inline QuadraticModel two_well() {
  return QuadraticModel::mech(TrigPoly{{0.51125, 0.15, -0.5, -0.15, -0.01125}, {}});
}

inline QuadraticModel flip_model() { return build_model(preset_model("MECH_T")); }

inline QuadraticModel small_mech_t(double eps) {
  TrigPoly2 G;
  G.terms.push_back({1.0, 1, 1, Wave::cos, Wave::sin});
  G.terms.push_back({0.5, 2, 1, Wave::sin, Wave::cos});
  return QuadraticModel::mech_t(TrigPoly{{0.0, -0.1}, {}}, G, eps);
}

// composite Simpson on [a, b]
template <class F>
double simpson(F&& f, double a, double b, int n = 20000) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

inline std::string source_path(const std::string& rel) { return std::string(LFSEL_SOURCE_DIR) + "/" + rel; }

}  // namespace testing_support
