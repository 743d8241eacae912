#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace lfsel;
using namespace testing_support;

TEST(Legendre, FreeQuadraticConjugate) {
  const GenericQuadratic m{QuadraticModel::free_particle()};
  const auto r = legendre(m, 0.3, 0.1, 0.7, 16.0);
  EXPECT_NEAR(r.L, 0.245, 1e-12);
  EXPECT_NEAR(r.p_star, 0.7, 1e-9);
}

TEST(Legendre, MechShiftsByPotential) {
  const auto mech = two_well();
  const GenericQuadratic m{mech};
  for (int i = 0; i < 50; ++i) {
    const double x = uniform(0, 1), xi = uniform(-2, 2);
    const auto r = legendre(m, x, 0.0, xi, 16.0);
    EXPECT_NEAR(r.L, 0.5 * xi * xi + mech.F()(x), 1e-10);
  }
}

TEST(Legendre, TimePeriodicMatchesDenseGridSup) {
  const auto mt = small_mech_t(0.1);
  const GenericQuadratic m{mt};
  const double P = 6.0;
  const int n = 1000000;
  for (int s = 0; s < 5; ++s) {
    const double x = uniform(0, 1), t = uniform(0, 1), xi = uniform(-1.5, 1.5);
    double best = -1e300;
    for (int i = 0; i <= n; ++i) {
      const double p = -P + 2.0 * P * i / n;
      best = std::max(best, xi * p - mt.H(x, t, p));
    }
    EXPECT_NEAR(legendre(m, x, t, xi, 16.0).L, best, 1e-8);
  }
}

TEST(Legendre, ClampedMaximizerRaised) {
  const GenericQuadratic m{QuadraticModel::free_particle()};
  EXPECT_THROW(legendre(m, 0.0, 0.0, 20.0, 16.0), ClampedMaximizer);
}

TEST(Legendre, BiconjugationRecoversH) {
  const auto mt = small_mech_t(0.3);
  const GenericQuadratic m{mt};
  for (int i = 0; i < 100; ++i) {
    const double x = uniform(0, 1), t = uniform(0, 1), xi = uniform(-3, 3);
    const auto r = legendre(m, x, t, xi, 16.0);
    EXPECT_NEAR(xi * r.p_star - r.L, mt.H(x, t, r.p_star), 1e-8);
  }
}

TEST(Tonelli, FreeIsConvexWithZeroAlpha) {
  const auto r = check_tonelli(GenericQuadratic{QuadraticModel::free_particle()});
  EXPECT_NEAR(r.min_hpp, 1.0, 1e-6);
  EXPECT_EQ(r.alpha, 0.0);
  EXPECT_TRUE(r.convex);
  EXPECT_TRUE(r.superlinear);
  EXPECT_TRUE(r.periodic);
}

TEST(Tonelli, MechAlphaFromSamples) {
  const auto mech = one_well();
  TonelliOptions opt;
  const auto r = check_tonelli(mech, opt);
  // independent sample maximum of |L_x| / (|L| + 1) on the same lattice
  double alpha = 0.0;
  const int n = opt.density;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / n;
    for (int k = 0; k < n; ++k) {
      const double xi = -opt.xi_max + 2.0 * opt.xi_max * k / (n - 1);
      alpha = std::max(alpha, std::abs(mech.F()(x, 1)) / (0.5 * xi * xi + mech.F()(x) + 1.0));
    }
  }
  EXPECT_NEAR(r.alpha, alpha, 1e-10);
  EXPECT_LE(r.alpha, 0.05 * two_pi + 1e-12);
  EXPECT_TRUE(r.convex);
}

struct NonConvex {
  [[nodiscard]] double H(double, double, double p) const { return 0.5 * p * p + 2.0 * std::cos(p); }
  [[nodiscard]] std::string name() const { return "nonconvex"; }
};

TEST(Tonelli, InjectedSignFlipRaisesFlag) {
  const auto r = check_tonelli(NonConvex{});
  EXPECT_FALSE(r.convex);
  EXPECT_LT(r.min_hpp, 0.0);
}

TEST(Model, PeriodicInSpaceAndTime) {
  const auto m = flip_model();
  for (int i = 0; i < 200; ++i) {
    const double x = uniform(-2, 2), t = uniform(-2, 2), p = uniform(-3, 3);
    EXPECT_NEAR(m.H(x + 1.0, t, p), m.H(x, t, p), 1e-12);
    EXPECT_NEAR(m.H(x, t + 1.0, p), m.H(x, t, p), 1e-12);
  }
}

TEST(Model, FiniteDifferencesConvergeQuadratically) {
  const auto m = small_mech_t(0.4);
  const std::vector<Partial> parts{Partial::p, Partial::pp, Partial::x, Partial::t, Partial::xx};
  for (int i = 0; i < 20; ++i) {
    const double x = uniform(0, 1), t = uniform(0, 1), p = uniform(-2, 2);
    const double exact[] = {m.H_p(x, t, p), m.H_pp(x, t, p), m.H_x(x, t, p), m.H_t(x, t, p), m.H_xx(x, t, p)};
    for (std::size_t j = 0; j < parts.size(); ++j) {
      const double e1 = std::abs(fd_partial(m, parts[j], x, t, p, 1e-2) - exact[j]);
      const double e2 = std::abs(fd_partial(m, parts[j], x, t, p, 5e-3) - exact[j]);
      if (e1 < 1e-9) continue;  // exact for the quadratic part in p
      EXPECT_GE(e1 / e2, 3.0) << "partial " << j;
    }
  }
}

TEST(Model, TrigPolyDerivativesMatchDifferences) {
  const TrigPoly F{{0.1, 0.2, -0.3}, {0.0, 0.05, 0.4}};
  for (int i = 0; i < 50; ++i) {
    const double x = uniform(0, 1), h = 1e-5;
    EXPECT_NEAR(F(x, 1), (F(x + h) - F(x - h)) / (2 * h), 1e-6);
    EXPECT_NEAR(F(x, 2), (F(x + h, 1) - F(x - h, 1)) / (2 * h), 1e-5);
  }
}
