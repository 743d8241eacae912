// one PASS/FAIL line per acceptance criterion
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lfsel/lfsel.hpp"

using namespace lfsel;
namespace fs = std::filesystem;

namespace {

std::mt19937_64 gen(20240101);
double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen); }

QuadraticModel one_well() { return build_model(preset_model("MECH1")); }
QuadraticModel two_well() { return build_model(preset_model("MECH")); }

std::string src(const std::string& rel) { return std::string(LFSEL_SOURCE_DIR) + "/" + rel; }

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

RunConfig load(const std::string& rel) { return parse_config(slurp(src(rel))); }

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [failed]");
  }
};

std::string g(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

Row random_row(const MeshSpec& mesh, Parity par, long k, double lo, double hi) {
  Row r(mesh.cols(), nan_value);
  for (long m = 0; m < mesh.cols(); ++m)
    if (is_active(par, k, m)) r[m] = uniform(lo, hi);
  return r;
}

// smooth v rows whose slope keeps minimizers away from the control bound
Row gentle_row(const MeshSpec& mesh, long l, double amp) {
  Row r(mesh.cols(), nan_value);
  const double phase = uniform(0, 1), a2 = uniform(-amp, amp);
  for (long m = wrap_index(l + 1, 2); m < mesh.cols(); m += 2)
    r[m] = amp * std::sin(two_pi * (mesh.x(m) + phase)) / two_pi + a2 * std::cos(2 * two_pi * mesh.x(m)) / (2 * two_pi);
  return r;
}

Outcome crit1() {
  Outcome o;
  const auto m = build_model(preset_model("MECH_T"));
  const MeshSpec mesh{32, 80, 0.0, 1.0};
  const SchemeParams<QuadraticModel> p{&m, mesh, -0.1, 0.0};
  double ident = 0.0, cons = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const long k = i % mesh.steps_per_period();
    const Row v = random_row(mesh, Parity::odd, k, -0.01, 0.01);
    const Row a = dx_row(hj_step_v(v, k, p), k + 1, mesh);
    const Row b = lf_step_u(dx_row(v, k, mesh), k, p);
    for (long j = 0; j < mesh.cols(); ++j)
      if (!std::isnan(a[j])) ident = std::max(ident, std::abs(a[j] - b[j]));
    const Row u = random_row(mesh, Parity::even, k, -1, 1);
    const Row w = lf_step_u(u, k, p);
    double s0 = 0.0, s1 = 0.0;
    for (double x : u) if (!std::isnan(x)) s0 += x;
    for (double x : w) if (!std::isnan(x)) s1 += x;
    cons = std::max(cons, std::abs(s1 - s0));
  }
  o.require(ident <= 1e-12, "identity " + g(ident) + " <= 1e-12");
  o.require(cons <= 1e-13, "conservation " + g(cons) + " <= 1e-13");
  return o;
}

Outcome crit2() {
  Outcome o;
  const auto m = build_model(preset_model("MECH_T"));
  const MeshSpec mesh{16, 40, 0.0, 1.0};
  const double lam = mesh.lambda(), bound = 1.0 / lam, dt = mesh.dt(), c = -0.1;
  double worst = 0.0;
  int interior = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const long l = trial;
    const Row v = gentle_row(mesh, l, 0.4);
    BellmanConfig cfg;
    cfg.c = c;
    const Row closed = bellman_one_step(m, mesh, v, l, cfg).value;
    const double t = mesh.t(l);
    for (long j = wrap_index(l, 2); j < mesh.cols(); j += 2) {
      const double vl = v[wrap_index(j - 1, mesh.cols())], vr = v[wrap_index(j + 1, mesh.cols())];
      double best = 1e300, arg = 0.0;
      const int G = 10000;
      for (int i = 0; i < G; ++i) {
        const double xi = -bound + 2.0 * bound * i / (G - 1);
        const double up = 0.5 - 0.5 * lam * xi;
        const double f = (lagrangian(m, mesh.x(j), t, xi) - c * xi) * dt + up * vr + (1.0 - up) * vl;
        if (f < best) {
          best = f;
          arg = xi;
        }
      }
      if (std::abs(arg) < 0.9 * bound) ++interior;
      worst = std::max(worst, std::abs(best - closed[j]));
    }
  }
  o.require(worst <= 1e-7, "grid vs closed form " + g(worst) + " <= 1e-7 over " + std::to_string(interior) + " interior sites");
  const auto f = QuadraticModel::free_particle();
  const MeshSpec m2{16, 20, 0.0, 1.0};
  Row z(m2.cols(), nan_value);
  for (long j = 1; j < m2.cols(); j += 2) z[j] = 0.0;
  BellmanConfig cfg;
  cfg.mode = BellmanMode::checked;
  cfg.c = 2.0;
  bool raised = false;
  try {
    bellman_one_step(f, m2, z, 0, cfg);
  } catch (const DualityMismatch&) {
    raised = true;
  }
  o.require(raised, "DualityMismatch beyond CFL");
  return o;
}

Outcome crit3() {
  Outcome o;
  const auto m = QuadraticModel::free_particle();
  double worst = 0.0;
  for (int N : {8, 16, 32, 64})
    for (double lam : {0.25, 0.5, 0.75, 0.9})
      for (double c : {-0.7, -0.2, 0.0, 0.3, 0.6}) {
        const auto sol = solve_periodic(m, MeshSpec::from_lambda(N, lam), c);
        worst = std::max(worst, std::abs(sol.h_delta - 0.5 * c * c));
      }
  o.require(worst <= 1e-12, "max |h - c^2/2| " + g(worst) + " <= 1e-12");
  return o;
}

Outcome crit4() {
  Outcome o;
  // plateau c for the two-well potential, h(c) = -min F = 0
  const auto rs = rate_study(two_well(), -0.450158, 0.5, {32, 64, 128, 256}, 0.0);
  std::string errs;
  for (const auto& e : rs.entries) errs += (errs.empty() ? "" : ",") + g(e.error);
  o.require(rs.monotone, "errors " + errs + " non-increasing");
  o.require(rs.alpha >= 0.4, "alpha " + g(rs.alpha) + " >= 0.4");
  return o;
}

// ε sin(2πx) cos(2πt) / (2π)
struct Wave : SmoothField {
  double eps = 0.05;
  double v(double x, double t) const override { return eps * std::sin(two_pi * x) * std::cos(two_pi * t) / two_pi; }
  double v_x(double x, double t) const override { return eps * std::cos(two_pi * x) * std::cos(two_pi * t); }
  double v_t(double x, double t) const override { return -eps * std::sin(two_pi * x) * std::sin(two_pi * t); }
  double v_xx(double x, double t) const override { return -eps * two_pi * std::sin(two_pi * x) * std::cos(two_pi * t); }
  double v_tt(double x, double t) const override { return -eps * two_pi * std::sin(two_pi * x) * std::cos(two_pi * t); }
};

double probe(const SmoothField& f, int N, bool corrected) {
  const auto m = QuadraticModel::free_particle();
  const MeshSpec mesh{N, 2 * N, 0.0, 1.0};
  const SchemeParams<QuadraticModel> p{&m, mesh, 0.1, 0.0};
  double s = 0.0;
  for (long k = 0; k < mesh.steps_per_period(); ++k) s = std::max(s, sup_abs(truncation_probe(f, p, k, corrected)));
  return s;
}

Outcome crit5() {
  Outcome o;
  const Wave f;
  const double c1 = probe(f, 64, true), c2 = probe(f, 128, true);
  const double corr = std::log2(c1 / c2);
  o.require(corr >= 1.5, "corrected order " + g(corr) + " >= 1.5");
  const double u1 = probe(f, 64, false), u2 = probe(f, 128, false);
  const double unc = std::log2(u1 / u2);
  o.require(std::abs(unc - 1.0) <= 0.1, "uncorrected order " + g(unc) + " within 0.1 of 1");
  const double lam = 0.5, supA = f.eps * two_pi * (1.0 - lam * lam);
  const int N = 256;
  const double ratio = probe(f, N, false) / ((1.0 / (2.0 * N)) * supA / (2.0 * lam));
  o.require(std::abs(ratio - 1.0) <= 0.2, "leading constant ratio " + g(ratio) + " within 20%");
  return o;
}

Outcome crit6() {
  Outcome o;
  const MeshSpec mesh{16, 32, 0.0, 1.0};
  const double bound = 1.0 / mesh.lambda(), dx = mesh.dx(), dt = mesh.dt();
  double worst = 0.0;
  bool sigma_bound = true;
  for (int trial = 0; trial < 100; ++trial) {
    const int D = 1 + trial % 12;
    const auto cone = make_cone(mesh, 5, 40, D);
    const auto xi = ControlField::from_function(cone, [bound](double, double) { return uniform(-bound, bound); });
    const auto d = marginals_dp(cone, xi);
    std::vector<std::vector<double>> marg(D + 1);
    std::vector<double> mean(D + 1, 0.0), st(D + 1, 0.0);
    for (int j = 0; j <= D; ++j) marg[j].assign(j + 1, 0.0);
    for (long bits = 0; bits < (1L << D); ++bits) {
      std::vector<long> path{cone.n};
      for (int j = 0; j < D; ++j) path.push_back(path.back() + (((bits >> j) & 1) ? 1 : -1));
      const double mu = path_density(cone, xi, path);
      double gap = 0.0;
      for (int j = 0; j <= D; ++j) {
        if (j > 0) gap += (path[j] - path[j - 1]) * dx + xi.xi[j - 1][(path[j - 1] - (cone.n - (j - 1))) / 2] * dt;
        marg[j][(path[j] - (cone.n - j)) / 2] += mu;
        mean[j] += mu * mesh.x(path[j]);
        st[j] += mu * gap * gap;
      }
    }
    for (int j = 0; j <= D; ++j) {
      for (int i = 0; i <= j; ++i) worst = std::max(worst, std::abs(marg[j][i] - d.marginal[j][i]));
      worst = std::max({worst, std::abs(mean[j] - d.mean[j]), std::abs(st[j] - d.sigma_tilde[j])});
      if (d.sigma_tilde[j] > sigma_tilde_bound(cone, j) * (1.0 + 1e-12)) sigma_bound = false;
    }
  }
  o.require(worst <= 1e-12, "DP vs enumeration " + g(worst) + " <= 1e-12");
  o.require(sigma_bound, "sigma~ bound on 100 controls");
  const auto cone = make_cone(mesh, 5, 40, 12);
  const auto z = eta_statistics(cone, ControlField::constant(cone, 0.0));
  double eq = 0.0;
  for (int j = 0; j <= 12; ++j) eq = std::max(eq, std::abs(z.sigma_tilde[j] - sigma_tilde_bound(cone, j)));
  o.require(eq <= 1e-12, "equality at zero control " + g(eq) + " <= 1e-12");
  bool lip = true;
  for (double slope : {0.1, 0.5, 1.0, 2.0}) {
    const auto c2 = make_cone(mesh, 11, 60, 16);
    const auto x2 = ControlField::from_function(c2, [slope](double x, double) { return slope * std::sin(two_pi * x) / two_pi; });
    lip = lip && variance_under_lipschitz(c2, x2, slope).bound_holds;
  }
  o.require(lip, "Lipschitz variance bound on the test set");
  return o;
}

Outcome crit7() {
  Outcome o;
  const auto m = one_well();
  SolveOptions so;
  so.tol = 1e-12;
  const auto sol = solve_periodic(m, MeshSpec::make(16, 32), 0.1, so);
  const int depth = 3;
  const double lo = verify_lax_oleinik(m, sol, depth).residual;
  const double cap = depth * sol.mesh.steps_per_period() * 1e-10;
  o.require(lo <= cap, "Lax-Oleinik residual " + g(lo) + " <= " + g(cap));
  const auto mc = minimizing_control(m, sol);
  o.require(mc.max_abs <= 1.0, "|xi*| " + g(mc.max_abs) + " <= 1/lambda1");
  double arg = 0.0;
  const auto& mesh = sol.mesh;
  for (long k = 0; k < mesh.steps_per_period(); ++k) {
    const Row row = sol.v_field.row(k);
    for (long j = wrap_index(k, 2); j < mesh.cols(); j += 2) {
      const auto r = detail::grid_minimize(m, mesh.x(j), mesh.t(k), row[wrap_index(j - 1, mesh.cols())],
                                           row[wrap_index(j + 1, mesh.cols())], mesh, sol.c, 10000);
      arg = std::max(arg, std::abs(r.second - mc.xi.at(k + 1, j)));
    }
  }
  o.require(arg <= 1e-6, "grid argmin " + g(arg) + " <= 1e-6");
  return o;
}

Outcome crit8() {
  Outcome o;
  double w = 0.0, gam = 0.0, det = 0.0;
  for (const auto& m : {one_well(), two_well()}) {
    const auto s = find_model_orbits(m);
    for (const auto& orb : s.orbits) {
      const double r = orb.q * std::sqrt(m.F()(orb.x0(), 2));
      for (double x : orb.w) w = std::max(w, std::abs(x - r));
      gam = std::max({gam, std::abs(orb.gamma_tilde - r), std::abs(orb.gamma(0.5) - r)});
      det = std::max(det, std::abs(orb.monodromy[0] * orb.monodromy[3] - orb.monodromy[1] * orb.monodromy[2] - 1.0));
    }
  }
  o.require(w <= 1e-8, "w - sqrt(F'') " + g(w) + " <= 1e-8");
  o.require(gam <= 1e-8, "Gamma - q sqrt(F'') " + g(gam) + " <= 1e-8");
  o.require(det <= 1e-8, "|det - 1| " + g(det) + " <= 1e-8");
  return o;
}

double barrier_sup(const PeierlsResult& pr, const std::function<double(double)>& ref) {
  double s = 0.0;
  for (long k = 0; k < pr.mesh.steps_per_period(); ++k)
    for (long j = 0; j < pr.mesh.cols(); ++j) {
      if (!is_active(Parity::odd, k, j)) continue;
      const double x = pr.mesh.x(j);
      s = std::max(s, std::abs(pr.at(k, j) - ref(x)));
    }
  return s;
}

// composite Simpson on [a, b]
double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

Outcome crit9() {
  Outcome o;
  const auto f = QuadraticModel::free_particle();
  PeierlsOptions po;
  po.max_periods = 200;
  for (double c : {0.0, 0.3}) {
    const auto pr = peierls_numeric(f, c, 0.5 * c * c, 0.0, MeshSpec::make(256, 512), po);
    const double s = barrier_sup(pr, [](double) { return 0.0; });
    o.require(s <= 0.02, "FREE c=" + g(c) + " sup " + g(s) + " <= 0.02");
  }
  const auto m = one_well();
  const int N = 128;
  const auto pr = peierls_numeric(m, 0.0, 0.0, 0.0, MeshSpec::make(N, 2 * N), po);
  // stationary barrier, so every phase is compared with the same profile
  const auto root = [](double y) { return std::sqrt(2.0 * 0.05 * (1.0 - std::cos(two_pi * y))); };
  const double s = barrier_sup(pr, [&](double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return std::min(simpson(root, 0.0, x, 2000), simpson(root, x, 1.0, 2000));
  });
  const double tol = 5.0 * std::sqrt(1.0 / (2.0 * N));
  o.require(s <= tol, "one-well sup " + g(s) + " <= " + g(tol));
  return o;
}

Outcome crit10() {
  Outcome o;
  {
    const auto cfg = load("configs/mech_two_well.toml");
    const auto m = build_model(cfg.model);
    const auto orbits = find_model_orbits(m).orbits;
    const auto rep = run_hyperbolic_ladder(m, orbits, cfg.c, cfg.lambda, ladder_options(cfg));
    const auto n = rep.entries.size();
    const std::vector<int> want{rep.predicted.i_star};
    const bool finest = n >= 2 && rep.entries[n - 1].detected == want && rep.entries[n - 2].detected == want;
    o.require(finest, "two-well finest levels detect orbit " + std::to_string(rep.predicted.i_star));
    std::string sups;
    for (const auto& e : rep.entries) sups += (sups.empty() ? "" : ",") + g(e.sup_peierls);
    o.require(rep.peierls_decreasing, "sup|v - h_p| " + sups + " decreasing");
  }
  const auto scfg = load("configs/flip_sweep.toml");
  const auto m = build_model(scfg.model);
  const auto orbits = find_model_orbits(m).orbits;
  auto sopt = ladder_options(scfg);
  sopt.compare_peierls = false;
  const auto sweep = lambda_sweep(m, orbits, scfg.c, scfg.lambdas, sopt);
  const bool bracket = sweep.bracket && sweep.bracket_contains_crit;
  o.require(bracket, "flip bracket " + (sweep.bracket ? g(sweep.bracket->first) + ".." + g(sweep.bracket->second) : "none") +
                         " contains lambda_crit " + (sweep.lambda_crit ? g(*sweep.lambda_crit) : "none"));
  const auto ccfg = load("configs/flip_compare.toml");
  const auto hyp = sweep.points.back().ladder;
  const auto cmp = compare_viscosity(m, orbits, ccfg.c, viscosity_options(ccfg), hyp);
  const auto small = sweep.points.front().detected;
  o.require(!small.empty() && small == cmp.diffusive_detected && cmp.nu_stable,
            "small-lambda detection equals diffusive detection");
  o.require(ccfg.lambda > *sweep.lambda_crit && !cmp.agree, "beyond lambda_crit hyperbolic and diffusive differ");
  return o;
}

int run_cli(const fs::path& cwd, const std::string& args, const std::string& threads) {
  const std::string cmd = "cd '" + cwd.string() + "' && LFSEL_THREADS=" + threads + " '" + LFSEL_CLI + "' " + args +
                          " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Outcome crit11() {
  Outcome o;
  const auto base = fs::temp_directory_path() / "lfsel_acceptance_determinism";
  fs::remove_all(base);
  const auto a = base / "a", b = base / "b";
  fs::create_directories(a);
  fs::create_directories(b);
  const int r1 = run_cli(a, "select run '" + src("configs/mech_two_well.toml") + "' --out run", "1");
  const int r2 = run_cli(b, "select run '" + (a / "run" / "manifest.toml").string() + "' --out run", "4");
  o.require(r1 == 0 && r2 == 0, "both runs exit 0");
  std::size_t files = 0, same = 0;
  for (const auto& e : fs::directory_iterator(a / "run")) {
    ++files;
    const auto other = b / "run" / e.path().filename();
    if (fs::exists(other) && slurp(e.path()) == slurp(other)) ++same;
  }
  o.require(files > 0 && files == same, std::to_string(same) + "/" + std::to_string(files) + " files byte-identical");
  fs::remove_all(base);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> crits{
      {"scheme identity", crit1},   {"bellman duality", crit2}, {"exact effective hamiltonian", crit3},
      {"sqrt rate", crit4},         {"truncation", crit5},      {"walk laws", crit6},
      {"lax-oleinik identity", crit7}, {"riccati and gamma", crit8}, {"peierls", crit9},
      {"selection", crit10},        {"determinism", crit11}};
  int failed = 0;
  for (std::size_t i = 0; i < crits.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = crits[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("criterion %zu %s: %s (%s; %.1fs)\n", i + 1, crits[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
