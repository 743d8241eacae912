#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace lfsel;
using namespace testing_support;

namespace {

const MeshSpec kMesh{16, 32, 0.0, 1.0};  // λ = 1/2

Cone cone_of(int depth) { return make_cone(kMesh, 5, 40, depth); }

ControlField random_control(const Cone& cone) {
  const double bound = 1.0 / kMesh.lambda();
  return ControlField::from_function(cone, [bound](double, double) { return uniform(-bound, bound); });
}

struct Enumerated {
  std::vector<std::vector<double>> marginal;
  std::vector<double> mean, variance, sigma_tilde, d_tilde;
  double total = 0.0;
};

// all 2^d paths with their densities
Enumerated enumerate(const Cone& cone, const ControlField& xi) {
  const int D = cone.depth;
  Enumerated e;
  e.marginal.resize(D + 1);
  for (int j = 0; j <= D; ++j) e.marginal[j].assign(j + 1, 0.0);
  e.mean.assign(D + 1, 0.0);
  e.variance.assign(D + 1, 0.0);
  e.sigma_tilde.assign(D + 1, 0.0);
  e.d_tilde.assign(D + 1, 0.0);
  const double dx = kMesh.dx(), dt = kMesh.dt();
  for (long bits = 0; bits < (1L << D); ++bits) {
    std::vector<long> path{cone.n};
    for (int j = 0; j < D; ++j) path.push_back(path.back() + (((bits >> j) & 1) ? 1 : -1));
    const double mu = path_density(cone, xi, path);
    e.total += mu;
    double gap = 0.0;
    for (int j = 0; j <= D; ++j) {
      if (j > 0) {
        const int i = static_cast<int>((path[j - 1] - (cone.n - (j - 1))) / 2);
        gap += (path[j] - path[j - 1]) * dx + xi.xi[j - 1][i] * dt;
      }
      const int i = static_cast<int>((path[j] - (cone.n - j)) / 2);
      e.marginal[j][i] += mu;
      e.mean[j] += mu * kMesh.x(path[j]);
      e.sigma_tilde[j] += mu * gap * gap;
      e.d_tilde[j] += mu * std::abs(gap);
    }
  }
  for (int j = 0; j <= D; ++j)
    for (int i = 0; i <= j; ++i) {
      const double d = cone.site_x(j, i) - e.mean[j];
      e.variance[j] += e.marginal[j][i] * d * d;
    }
  return e;
}

}  // namespace

TEST(PathDensity, SymmetricWalk) {
  const auto cone = cone_of(5);
  const auto xi = ControlField::constant(cone, 0.0);
  std::vector<long> path{5, 6, 5, 4, 5, 6};
  EXPECT_DOUBLE_EQ(path_density(cone, xi, path), 1.0 / 32.0);
}

TEST(PathDensity, MaximalDriftIsDeterministic) {
  const auto cone = cone_of(4);
  const auto xi = ControlField::constant(cone, 1.0 / kMesh.lambda());
  EXPECT_DOUBLE_EQ(path_density(cone, xi, {5, 4, 3, 2, 1}), 1.0);
  EXPECT_DOUBLE_EQ(path_density(cone, xi, {5, 4, 3, 2, 3}), 0.0);
}

TEST(PathDensity, SumsToOneAndRejectsBadPaths) {
  const auto cone = cone_of(3);
  const auto xi = random_control(cone);
  EXPECT_NEAR(enumerate(cone, xi).total, 1.0, 1e-14);
  EXPECT_THROW(path_density(cone, xi, {5, 7, 6, 5}), InvalidPath);
  EXPECT_THROW(path_density(cone, xi, {5, 6, 5}), InvalidPath);
  EXPECT_THROW(path_density(cone, xi, {4, 5, 6, 7}), InvalidPath);
  EXPECT_THROW(make_cone(kMesh, 4, 40, 3), RangeError);
}

TEST(Marginals, BinomialAtZeroControl) {
  const auto cone = cone_of(2);
  const auto d = marginals_dp(cone, ControlField::constant(cone, 0.0));
  ASSERT_EQ(d.marginal[2].size(), 3u);
  EXPECT_DOUBLE_EQ(d.marginal[2][0], 0.25);
  EXPECT_DOUBLE_EQ(d.marginal[2][1], 0.5);
  EXPECT_DOUBLE_EQ(d.marginal[2][2], 0.25);
}

TEST(Marginals, DpEqualsEnumeration) {
  for (int trial = 0; trial < 100; ++trial) {
    const int depth = 1 + trial % 12;
    const auto cone = cone_of(depth);
    const auto xi = random_control(cone);
    const auto d = marginals_dp(cone, xi);
    const auto e = enumerate(cone, xi);
    const auto dj = d_tilde_joint(cone, xi);
    for (int j = 0; j <= depth; ++j) {
      double mass = 0.0;
      for (int i = 0; i <= j; ++i) {
        EXPECT_NEAR(d.marginal[j][i], e.marginal[j][i], 1e-12);
        mass += d.marginal[j][i];
      }
      EXPECT_NEAR(mass, 1.0, 1e-12);
      EXPECT_NEAR(d.mean[j], e.mean[j], 1e-12);
      EXPECT_NEAR(d.variance[j], e.variance[j], 1e-12);
      EXPECT_NEAR(d.sigma_tilde[j], e.sigma_tilde[j], 1e-12);
      EXPECT_NEAR(dj[j], e.d_tilde[j], 1e-12);
      EXPECT_LE(d.sigma_tilde[j], sigma_tilde_bound(cone, j) * (1.0 + 1e-12));
    }
  }
}

TEST(Marginals, ConstantControlMean) {
  const auto cone = cone_of(10);
  const double xi0 = 0.7;
  const auto d = marginals_dp(cone, ControlField::constant(cone, xi0));
  for (int j = 0; j <= 10; ++j) EXPECT_NEAR(d.mean[j], kMesh.x(5) - xi0 * j * kMesh.dt(), 1e-14);
}

TEST(EtaStatistics, EqualityAtZeroAndVanishingAtBound) {
  const auto cone = cone_of(16);
  const auto z = eta_statistics(cone, ControlField::constant(cone, 0.0));
  const auto b = eta_statistics(cone, ControlField::constant(cone, 1.0 / kMesh.lambda()));
  for (int j = 0; j <= 16; ++j) {
    EXPECT_NEAR(z.sigma_tilde[j], sigma_tilde_bound(cone, j), 1e-12);
    EXPECT_NEAR(b.sigma_tilde[j], 0.0, 1e-15);
    EXPECT_NEAR(b.d_tilde[j], 0.0, 1e-15);
  }
  EXPECT_TRUE(z.d_exact);
}

TEST(Lipschitz, ConstantControlVariance) {
  const auto cone = cone_of(12);
  const double xi0 = 1.2, lam = kMesh.lambda();
  const auto r = variance_under_lipschitz(cone, ControlField::constant(cone, xi0), 0.0);
  EXPECT_TRUE(r.lipschitz);
  EXPECT_TRUE(r.bound_holds);
  for (int j = 0; j <= 12; ++j)
    EXPECT_NEAR(r.sigma[j], (1.0 - lam * lam * xi0 * xi0) * sigma_tilde_bound(cone, j), 1e-14);
}

TEST(Lipschitz, LinearControlWithinBound) {
  for (double slope : {0.2, 0.5, 1.0}) {
    const auto cone = cone_of(14);
    const auto xi = ControlField::from_function(cone, [slope](double x, double) { return slope * (x - 0.15); });
    const auto r = variance_under_lipschitz(cone, xi, slope);
    EXPECT_TRUE(r.lipschitz);
    EXPECT_TRUE(r.bound_holds);
  }
}

TEST(Lipschitz, SignFlippingControlFlagged) {
  const auto cone = cone_of(14);
  const double bound = 1.0 / kMesh.lambda();
  ControlField xi;
  xi.xi.resize(14);
  for (int j = 0; j < 14; ++j) {
    xi.xi[j].resize(j + 1);
    // push mass away from the centre on both sides
    for (int i = 0; i <= j; ++i) xi.xi[j][i] = 2 * i < j ? bound : (2 * i > j ? -bound : 0.0);
  }
  const auto r = variance_under_lipschitz(cone, xi, 1.0);
  EXPECT_FALSE(r.lipschitz);
  EXPECT_FALSE(r.bound_holds);
}

TEST(Sampling, FrequenciesWithinClt) {
  const auto cone = cone_of(2);
  const auto st = sample_paths(cone, ControlField::constant(cone, 0.0), 7, 100000);
  const double n = 1e5;
  const double p[] = {0.25, 0.5, 0.25};
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(st.frequency[2][i], p[i], 4.0 * std::sqrt(p[i] * (1 - p[i]) / n));
}

TEST(Sampling, SeedAndThreadDeterminism) {
  const auto cone = cone_of(12);
  const auto xi = random_control(cone);
  const auto a = sample_paths(cone, xi, 99, 50000, 1);
  const auto b = sample_paths(cone, xi, 99, 50000, 1);
  const auto c = sample_paths(cone, xi, 99, 50000, 4);
  for (int j = 0; j <= 12; ++j) {
    EXPECT_EQ(a.sigma_tilde[j], b.sigma_tilde[j]);
    EXPECT_EQ(a.sigma_tilde[j], c.sigma_tilde[j]);
    EXPECT_EQ(a.d_tilde[j], c.d_tilde[j]);
    for (int i = 0; i <= j; ++i) EXPECT_EQ(a.frequency[j][i], c.frequency[j][i]);
  }
}

TEST(Sampling, SigmaTildeNearDp) {
  const MeshSpec mesh{32, 64, 0.0, 1.0};
  const auto cone = make_cone(mesh, 11, 60, 20);
  const auto xi = ControlField::from_function(cone, [](double x, double) { return 0.8 * std::sin(two_pi * x); });
  const auto dp = marginals_dp(cone, xi);
  const auto st = sample_paths(cone, xi, 3, 100000);
  EXPECT_NEAR(st.sigma_tilde[20], dp.sigma_tilde[20], 0.05 * dp.sigma_tilde[20]);
  const auto exact = d_tilde_joint(cone, xi);
  EXPECT_NEAR(st.d_tilde[20], exact[20], 3.0 * st.d_tilde_halfwidth[20]);
}

TEST(Sampling, DeepConeFallsBackToMonteCarlo) {
  const auto cone = cone_of(24);
  EtaOptions opt;
  opt.depth_joint = 20;
  opt.samples = 20000;
  const auto d = eta_statistics(cone, ControlField::constant(cone, 0.3), opt);
  EXPECT_FALSE(d.d_exact);
  EXPECT_GT(d.d_tilde_halfwidth[24], 0.0);
}
