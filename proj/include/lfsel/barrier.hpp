#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "effective.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "orbits.hpp"
#include "parallel.hpp"

namespace lfsel {

// points (x, p) of an invariant-manifold branch, ordered outward from the orbit
struct BranchCurve {
  std::vector<double> x;
  std::vector<double> p;

  [[nodiscard]] bool empty() const { return x.empty(); }
  // linear interpolation in x; curve must be monotone in x
  [[nodiscard]] double operator()(double xq) const {
    if (x.empty()) return nan_value;
    const bool inc = x.back() >= x.front();
    auto lt = [inc](double a, double b) { return inc ? a < b : a > b; };
    if (lt(xq, x.front()) || lt(x.back(), xq)) return nan_value;
    std::size_t lo = 0, hi = x.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (lt(xq, x[mid]) ? hi : lo) = mid;
    }
    if (x[hi] == x[lo]) return p[lo];
    const double r = (xq - x[lo]) / (x[hi] - x[lo]);
    return p[lo] + r * (p[hi] - p[lo]);
  }
  [[nodiscard]] double reach() const { return x.empty() ? 0.0 : std::abs(x.back() - x.front()); }
};

struct ManifoldOptions {
  double eps0 = 1e-8;
  int per_domain = 128;
  int max_periods = 200;
  FlowOptions flow;
};

namespace detail {

inline double wrap_offset(double d) { return d - std::round(d); }

}  // namespace detail

// unstable (forward) or stable (backward) branch on one side of the orbit at each phase in times
// pieces j flowed from a fundamental domain at phase 0 tile the branch; side = +1 right, -1 left
template <Hamiltonian M>
std::vector<BranchCurve> manifold_branches(const M& model, const OrbitData& orb, const std::vector<double>& times,
                                           bool unstable, int side, double reach, bool monotone,
                                           const ManifoldOptions& opt = {}) {
  const double mu = std::abs(unstable ? orb.mu_u : 1.0 / orb.mu_s);
  const double slope = unstable ? orb.w.front() : orb.w_stable.front();
  const double lmu = std::log(mu);
  const int periods =
      std::min(opt.max_periods, static_cast<int>(std::ceil(std::log(std::max(reach, 1e-6) / opt.eps0) / lmu)) + 2);
  const double q = orb.q;
  const std::size_t nt = times.size();
  struct Pt {
    double param, x, p;
  };
  std::vector<std::vector<Pt>> pts(nt);
  const double nrm = std::sqrt(1.0 + slope * slope);
  for (int i = 0; i < opt.per_domain; ++i) {
    const double u = static_cast<double>(i) / opt.per_domain;
    const double eps = opt.eps0 * std::exp(u * lmu);
    const double x0 = orb.x.front() + side * eps / nrm, p0 = orb.p.front() + side * eps * slope / nrm;
    std::vector<double> ts;
    std::vector<std::pair<std::size_t, double>> tag;
    ts.push_back(0.0);
    tag.push_back({nt, 0.0});
    for (int j = 0; j < periods; ++j)
      for (std::size_t k = 0; k < nt; ++k) {
        const double tk = times[k] - q * std::floor(times[k] / q);
        ts.push_back(unstable ? j * q + tk : tk - (j + 1) * q);
        tag.push_back({k, j + u});
      }
    std::vector<std::size_t> order(ts.size());
    for (std::size_t a = 0; a < order.size(); ++a) order[a] = a;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return unstable ? ts[a] < ts[b] : ts[a] > ts[b]; });
    std::vector<double> sorted(order.size());
    for (std::size_t a = 0; a < order.size(); ++a) sorted[a] = ts[order[a]];
    const auto smp = flow_samples(model, x0, p0, sorted, opt.flow);
    for (std::size_t a = 0; a < order.size() && a < smp.size(); ++a) {
      const auto [k, param] = tag[order[a]];
      if (k == nt) continue;
      pts[k].push_back({param, smp[a][0], smp[a][1]});
    }
  }
  std::vector<BranchCurve> out(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    auto& v = pts[k];
    std::sort(v.begin(), v.end(), [](const Pt& a, const Pt& b) { return a.param < b.param; });
    const auto g = orb.at(times[k]);
    BranchCurve c;
    c.x.push_back(g[0]);
    c.p.push_back(g[1]);
    double last = g[0];
    for (const auto& pt : v) {
      const double off = pt.x - g[0];
      if (std::abs(off) > 1.0) break;
      if (monotone && side * (pt.x - last) <= 0.0) {
        if (side * off < 1e-4 * reach) continue;  // skip jitter next to the orbit
        break;
      }
      c.x.push_back(pt.x);
      c.p.push_back(pt.p);
      last = pt.x;
      if (side * off > reach) break;
    }
    out[k] = std::move(c);
  }
  return out;
}

struct LocalBranches {
  std::vector<double> times;
  // [orbit][slice] unstable-manifold branch left and right of the orbit
  std::vector<std::vector<BranchCurve>> left;
  std::vector<std::vector<BranchCurve>> right;
};

// closed form p = sign (x - a) sqrt(2 (F - F(a))) on the energy level of a fixed point
inline BranchCurve energy_branch(const TrigPoly& F, double a, int side, double reach, int n = 512) {
  BranchCurve c;
  const double fa = F(a);
  for (int i = 0; i <= n; ++i) {
    const double x = a + side * reach * i / n;
    c.x.push_back(x);
    c.p.push_back(side * std::sqrt(std::max(0.0, 2.0 * (F(x) - fa))));
  }
  return c;
}

template <Hamiltonian M>
LocalBranches local_unstable_branches(const M& model, const std::vector<OrbitData>& orbits,
                                      const std::vector<double>& times, double delta,
                                      const ManifoldOptions& opt = {}) {
  LocalBranches lb;
  lb.times = times;
  for (const auto& o : orbits) {
    bool closed = false;
    if constexpr (std::is_same_v<M, QuadraticModel>) closed = model.autonomous() && o.fixed_point();
    if (closed) {
      if constexpr (std::is_same_v<M, QuadraticModel>) {
        lb.left.emplace_back(times.size(), energy_branch(model.F(), o.x0(), -1, delta));
        lb.right.emplace_back(times.size(), energy_branch(model.F(), o.x0(), +1, delta));
      }
    } else {
      lb.left.push_back(manifold_branches(model, o, times, true, -1, delta, false, opt));
      lb.right.push_back(manifold_branches(model, o, times, true, +1, delta, false, opt));
    }
  }
  return lb;
}

// graph pieces on the segment between consecutive orbits at one phase
struct SegmentBranches {
  double a = 0.0;  // left orbit position
  double b = 0.0;  // right orbit position, a < b <= a + 1
  std::vector<double> xs;
  std::vector<double> upper;
  std::vector<double> lower;
};

struct SeparatrixSlice {
  double t = 0.0;
  std::vector<SegmentBranches> segments;  // segment i runs from orbit i to orbit i+1
  [[nodiscard]] double branch(double x, bool up) const;
};

struct SeparatrixData {
  std::vector<SeparatrixSlice> slices;
  double c0 = 0.0;
  double c1 = 0.0;
  bool closed_form = false;
  double area_defect = 0.0;  // |∫(upper - lower) - (c1 - c0)|

  [[nodiscard]] double upper(double x, std::size_t slice = 0) const { return slices.at(slice).branch(x, true); }
  [[nodiscard]] double lower(double x, std::size_t slice = 0) const { return slices.at(slice).branch(x, false); }
};

inline double SeparatrixSlice::branch(double x, bool up) const {
  for (const auto& s : segments) {
    double xr = s.a + (x - s.a) - std::floor(x - s.a);
    if (xr < s.a || xr > s.b) continue;
    const auto& f = up ? s.upper : s.lower;
    const auto it = std::upper_bound(s.xs.begin(), s.xs.end(), xr);
    const std::size_t j = std::clamp<std::size_t>(static_cast<std::size_t>(it - s.xs.begin()), 1, s.xs.size() - 1);
    const double r = (xr - s.xs[j - 1]) / (s.xs[j] - s.xs[j - 1]);
    return f[j - 1] + r * (f[j] - f[j - 1]);
  }
  return nan_value;
}

inline double segment_integral(const SegmentBranches& s, bool up) {
  const auto& f = up ? s.upper : s.lower;
  double acc = 0.0;
  for (std::size_t i = 1; i < s.xs.size(); ++i) acc += 0.5 * (f[i] + f[i - 1]) * (s.xs[i] - s.xs[i - 1]);
  return acc;
}

struct SeparatrixOptions {
  int samples_per_segment = 4096;
  std::vector<double> phases{0.0};
  ManifoldOptions manifold;
};

namespace detail {

// resample two monotone graphs meeting once onto a common x-grid, first graph left of the crossing
inline std::vector<double> splice(const BranchCurve& left, const BranchCurve& right, const std::vector<double>& xs,
                                  const std::string& what) {
  double lo = std::max(std::min(left.x.front(), left.x.back()), std::min(right.x.front(), right.x.back()));
  double hi = std::min(std::max(left.x.front(), left.x.back()), std::max(right.x.front(), right.x.back()));
  if (!(lo < hi)) throw ManifoldEscape(what + ": branches do not overlap");
  const int scan = 2048;
  double cross = nan_value;
  double prev = left(lo) - right(lo);
  for (int i = 1; i <= scan; ++i) {
    const double x = lo + (hi - lo) * i / scan;
    const double d = left(x) - right(x);
    if (std::signbit(d) != std::signbit(prev) || d == 0.0) {
      double a = lo + (hi - lo) * (i - 1) / scan, b = x;
      for (int it = 0; it < 100; ++it) {
        const double m = 0.5 * (a + b);
        const double dm = left(m) - right(m);
        (std::signbit(dm) == std::signbit(prev) ? a : b) = m;
      }
      cross = 0.5 * (a + b);
      break;
    }
    prev = d;
  }
  if (std::isnan(cross)) throw ManifoldEscape(what + ": branches do not intersect");
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i] <= cross ? left(xs[i]) : right(xs[i]);
  return out;
}

}  // namespace detail

inline SeparatrixData separatrix_closed_form(const TrigPoly& F, const std::vector<OrbitData>& orbits,
                                             const SeparatrixOptions& opt = {}) {
  if (orbits.empty()) throw NoSeparatrix("model has no hyperbolic orbits");
  SeparatrixData sd;
  sd.closed_form = true;
  const double fmin = F(orbits.front().x0());
  SeparatrixSlice sl;
  for (std::size_t i = 0; i < orbits.size(); ++i) {
    SegmentBranches s;
    s.a = orbits[i].x0();
    s.b = i + 1 < orbits.size() ? orbits[i + 1].x0() : orbits.front().x0() + 1.0;
    const int n = opt.samples_per_segment;
    for (int j = 0; j <= n; ++j) {
      const double x = s.a + (s.b - s.a) * j / n;
      const double pv = std::sqrt(std::max(0.0, 2.0 * (F(x) - fmin)));
      s.xs.push_back(x);
      s.upper.push_back(pv);
      s.lower.push_back(-pv);
    }
    sl.segments.push_back(std::move(s));
  }
  sd.slices.push_back(std::move(sl));
  return sd;
}

// upper: unstable of a then stable of b; lower: stable of a then unstable of b
template <Hamiltonian M>
SeparatrixData separatrix_from_manifolds(const M& model, const std::vector<OrbitData>& orbits,
                                         const SeparatrixOptions& opt = {}) {
  if (orbits.empty()) throw NoSeparatrix("model has no hyperbolic orbits");
  SeparatrixData sd;
  const auto& phases = opt.phases;
  const std::size_t I = orbits.size();
  std::vector<std::vector<BranchCurve>> ur(I), ul(I), sr(I), sl_(I);
  for (std::size_t i = 0; i < I; ++i) {
    const auto& o = orbits[i];
    const double gap_r = (i + 1 < I ? orbits[i + 1].x0() : orbits.front().x0() + 1.0) - o.x0();
    const double gap_l = o.x0() - (i > 0 ? orbits[i - 1].x0() : orbits.back().x0() - 1.0);
    ur[i] = manifold_branches(model, o, phases, true, +1, gap_r, true, opt.manifold);
    sr[i] = manifold_branches(model, o, phases, false, +1, gap_r, true, opt.manifold);
    ul[i] = manifold_branches(model, o, phases, true, -1, gap_l, true, opt.manifold);
    sl_[i] = manifold_branches(model, o, phases, false, -1, gap_l, true, opt.manifold);
  }
  for (std::size_t k = 0; k < phases.size(); ++k) {
    SeparatrixSlice slice;
    slice.t = phases[k];
    for (std::size_t i = 0; i < I; ++i) {
      const std::size_t j = (i + 1) % I;
      const double shift = j == 0 ? 1.0 : 0.0;
      SegmentBranches s;
      s.a = orbits[i].at(phases[k])[0];
      s.b = orbits[j].at(phases[k])[0] + shift;
      const int n = opt.samples_per_segment;
      for (int m = 0; m < n; ++m) s.xs.push_back(s.a + (s.b - s.a) * m / n);
      s.xs.push_back(s.b);
      auto shifted = [shift](BranchCurve c) {
        for (auto& v : c.x) v += shift;
        return c;
      };
      const std::string tag = "segment " + std::to_string(i + 1) + " at t=" + fmt17(phases[k]);
      s.upper = detail::splice(ur[i][k], shifted(sl_[j][k]), s.xs, tag + " upper");
      s.lower = detail::splice(sr[i][k], shifted(ul[j][k]), s.xs, tag + " lower");
      slice.segments.push_back(std::move(s));
    }
    sd.slices.push_back(std::move(slice));
  }
  return sd;
}

template <Hamiltonian M>
SeparatrixData compute_separatrix(const M& model, const std::vector<OrbitData>& orbits,
                                  const SeparatrixOptions& opt = {}) {
  SeparatrixData sd;
  bool closed = false;
  if constexpr (std::is_same_v<M, QuadraticModel>) {
    closed = model.autonomous();
    if (closed) sd = separatrix_closed_form(model.F(), orbits, opt);
  }
  if (!closed) sd = separatrix_from_manifolds(model, orbits, opt);
  double up = 0.0, lo = 0.0;
  for (const auto& s : sd.slices.front().segments) {
    up += segment_integral(s, true);
    lo += segment_integral(s, false);
  }
  sd.c1 = up;
  sd.c0 = lo;
  double area = 0.0;
  for (const auto& s : sd.slices.front().segments) {
    std::vector<double> diff(s.xs.size());
    for (std::size_t i = 0; i < s.xs.size(); ++i) diff[i] = s.upper[i] - s.lower[i];
    for (std::size_t i = 1; i < s.xs.size(); ++i) area += 0.5 * (diff[i] + diff[i - 1]) * (s.xs[i] - s.xs[i - 1]);
  }
  sd.area_defect = std::abs(area - (sd.c1 - sd.c0));
  return sd;
}

enum class BranchChoice { lower, upper, upper_then_lower, lower_then_upper };

struct SegmentChoice {
  BranchChoice kind = BranchChoice::lower;
  double y = 0.0;  // switch point for the two-piece choices
};

struct ReferenceSolution {
  double c = 0.0;
  std::vector<double> xs;  // on [x_1, x_1 + 1)
  std::vector<double> u0;  // U0 - c
  std::vector<double> shocks;
  std::vector<int> transitions;  // orbits with the lower branch on the left and the upper on the right
};

// piecewise branch profile at the first slice; c = ∫U0
inline ReferenceSolution construct_reference(const SeparatrixData& sd, const std::vector<SegmentChoice>& choices) {
  const auto& segs = sd.slices.front().segments;
  if (choices.size() != segs.size())
    throw InvalidChoice("expected " + std::to_string(segs.size()) + " segment choices, got " +
                        std::to_string(choices.size()));
  ReferenceSolution r;
  std::vector<double> U;
  double integral = 0.0;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& s = segs[i];
    const auto& ch = choices[i];
    if (ch.kind == BranchChoice::lower_then_upper)
      throw InvalidChoice("segment " + std::to_string(i + 1) + ": a lower-to-upper switch is an up-jump");
    const bool two = ch.kind == BranchChoice::upper_then_lower;
    if (two && !(ch.y > s.a && ch.y < s.b))
      throw InvalidChoice("switch point " + fmt17(ch.y) + " outside segment " + std::to_string(i + 1));
    if (two) r.shocks.push_back(ch.y);
    std::vector<double> f(s.xs.size());
    for (std::size_t j = 0; j < s.xs.size(); ++j) {
      const bool up = ch.kind == BranchChoice::upper || (two && s.xs[j] < ch.y);
      f[j] = up ? s.upper[j] : s.lower[j];
    }
    for (std::size_t j = 1; j < s.xs.size(); ++j) {
      const double x0 = s.xs[j - 1], x1 = s.xs[j];
      if (two && x0 < ch.y && ch.y < x1) {
        integral += 0.5 * (s.upper[j - 1] + s.upper[j]) * (ch.y - x0) +
                    0.5 * (s.lower[j - 1] + s.lower[j]) * (x1 - ch.y);
      } else {
        integral += 0.5 * (f[j - 1] + f[j]) * (x1 - x0);
      }
    }
    const std::size_t start = i == 0 ? 0 : 1;
    for (std::size_t j = start; j < s.xs.size(); ++j) {
      if (i + 1 == segs.size() && j + 1 == s.xs.size()) break;
      r.xs.push_back(s.xs[j]);
      U.push_back(f[j]);
    }
  }
  r.c = integral;
  r.u0.resize(U.size());
  for (std::size_t j = 0; j < U.size(); ++j) r.u0[j] = U[j] - r.c;
  // orbit i+1 sits between segment i and segment i+1
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& before = choices[(i + segs.size() - 1) % segs.size()];
    const auto& after = choices[i];
    const bool left_lower = before.kind == BranchChoice::lower || before.kind == BranchChoice::upper_then_lower;
    const bool right_upper = after.kind == BranchChoice::upper || after.kind == BranchChoice::upper_then_lower;
    if (left_lower && right_upper) r.transitions.push_back(static_cast<int>(i) + 1);
  }
  return r;
}

inline constexpr double peierls_sentinel = 1e18;

struct PeierlsOptions {
  int velocities = 129;
  double xi_max = 1.0;  // 1 / λ₁
  long max_periods = 200;
  double tol = 1e-6;
  bool strict = false;  // NotStabilized when T_max is reached
  unsigned threads = 0;
};

struct PeierlsResult {
  MeshSpec mesh;
  double c = 0.0;
  double h = 0.0;
  double x0 = 0.0;
  long base_node = 0;
  GridField barrier;  // full 2N nodes at each of the 2K phases, stored on both parities
  long periods_used = 0;
  double defect = 0.0;
  bool stabilized = false;

  // running minimum at (x_j, t_k)
  [[nodiscard]] double at(long k, long j) const { return values[wrap_index(k, mesh.steps_per_period())][wrap_index(j, mesh.cols())]; }
  std::vector<Row> values;
  [[nodiscard]] GridField odd_field() const {
    GridField f(mesh, Parity::odd, mesh.steps_per_period(), true, c);
    for (long k = 0; k < mesh.steps_per_period(); ++k)
      for (long m = wrap_index(k + 1, 2); m < mesh.cols(); m += 2) f.set(k, m, at(k, m));
    return f;
  }
  // linear interpolation in x at phase level k
  [[nodiscard]] double eval(long k, double x) const {
    const double s = x / mesh.dx();
    const double fl = std::floor(s);
    const long j = static_cast<long>(fl);
    const double r = s - fl;
    return (1.0 - r) * at(k, j) + r * at(k, j + 1);
  }
};

// W^{n+1}(x_j) = min_ξ Ŵ^n(x_j − ξΔt) + (L^{(c)}(x_j, t_n, ξ) + h) Δt with a running minimum over whole periods
template <Hamiltonian M>
PeierlsResult peierls_numeric(const M& model, double c, double h, double x0, const MeshSpec& mesh,
                              const PeierlsOptions& opt = {}) {
  mesh.validate();
  const long n = mesh.cols(), steps = mesh.steps_per_period();
  const double dx = mesh.dx(), dt = mesh.dt();
  const int V = opt.velocities;
  std::vector<double> xi(V), frac(V), quad(V);
  std::vector<long> shift(V);
  for (int i = 0; i < V; ++i) {
    xi[i] = opt.xi_max * std::cos(std::numbers::pi * i / (V - 1));
    const double s = xi[i] * dt / dx;
    const double fl = std::floor(s);
    shift[i] = static_cast<long>(fl);
    frac[i] = s - fl;
  }
  const auto xs = grid_abscissae(mesh);
  auto kernel = make_row_kernel(model, std::span<const double>(xs));

  PeierlsResult res;
  res.mesh = mesh;
  res.c = c;
  res.h = h;
  res.x0 = x0;
  const double s0 = x0 / dx;
  res.base_node = wrap_index(static_cast<long>(std::floor(s0 + 1e-12)), n);
  // cone of slope C around the base cell, C above every |L_ξ - c| on the velocity grid
  double slope = 0.0;
  for (int q = 0; q < 4; ++q) {
    kernel.set_time(0.25 * q);
    for (long j = 0; j < n; ++j)
      for (int i = 1; i < V; ++i)
        slope = std::max(slope, std::abs((kernel.L(j, xi[i]) - kernel.L(j, xi[i - 1])) / (xi[i] - xi[i - 1]) - c));
  }
  const double cone = 2.0 * slope + 1.0;
  Row W(n), Wn(n);
  for (long j = 0; j < n; ++j) {
    const long right = wrap_index(j - res.base_node - 1, n), left = wrap_index(res.base_node - j, n);
    W[j] = cone * dx * static_cast<double>(std::min(right, left));
  }
  res.values.assign(steps, Row(n, peierls_sentinel));
  res.values[0] = W;
  std::vector<double> cost(static_cast<std::size_t>(n) * V);
  const double big = 0.5 * peierls_sentinel;
  const unsigned workers = thread_cap(opt.threads);
  const long chunk = 64;
  const std::size_t nchunks = static_cast<std::size_t>((n + chunk - 1) / chunk);

  double defect = std::numeric_limits<double>::infinity();
  long period = 0;
  for (; period < opt.max_periods; ++period) {
    defect = 0.0;
    for (long k = 0; k < steps; ++k) {
      kernel.set_time(mesh.t(k));
      for (long j = 0; j < n; ++j)
        for (int i = 0; i < V; ++i) cost[j * V + i] = (kernel.L(j, xi[i]) - c * xi[i] + h) * dt;
      auto sweep = [&](std::size_t ch) {
        const long jb = static_cast<long>(ch) * chunk, je = std::min(n, jb + chunk);
        for (long j = jb; j < je; ++j) {
          double best = peierls_sentinel;
          for (int i = 0; i < V; ++i) {
            // x_j − ξΔt lies between nodes j − shift − 1 and j − shift
            const double a = W[wrap_index(j - shift[i] - 1, n)], b = W[wrap_index(j - shift[i], n)];
            if (frac[i] == 0.0) {
              if (b >= big) continue;
              best = std::min(best, b + cost[j * V + i]);
              continue;
            }
            if (a >= big || b >= big) continue;
            best = std::min(best, frac[i] * a + (1.0 - frac[i]) * b + cost[j * V + i]);
          }
          Wn[j] = best;
        }
      };
      if (workers > 1) parallel_for(nchunks, sweep, workers);
      else for (std::size_t ch = 0; ch < nchunks; ++ch) sweep(ch);
      W.swap(Wn);
      // W now at phase k + 1; a whole number of periods has elapsed at phase 0
      const long phase = (k + 1) % steps;
      auto& rm = res.values[phase];
      for (long j = 0; j < n; ++j) {
        if (W[j] < rm[j]) {
          if (rm[j] < big) defect = std::max(defect, rm[j] - W[j]);
          else if (W[j] < big) defect = std::max(defect, period > 0 ? std::numeric_limits<double>::infinity() : 0.0);
          rm[j] = W[j];
        }
      }
    }
    if (period > 0 && defect < opt.tol) {
      res.stabilized = true;
      ++period;
      break;
    }
  }
  res.periods_used = period;
  res.defect = defect;
  if (!res.stabilized && opt.strict)
    throw NotStabilized("running minimum still moving by " + fmt17(defect) + " after " +
                        std::to_string(opt.max_periods) + " periods");
  res.barrier = res.odd_field();
  return res;
}

enum class FitStatus { fit, ambiguous, miss, empty };

inline const char* fit_name(FitStatus s) {
  switch (s) {
    case FitStatus::fit: return "fit";
    case FitStatus::ambiguous: return "ambiguous";
    case FitStatus::miss: return "miss";
    case FitStatus::empty: return "empty";
  }
  return "?";
}

struct OrbitFit {
  int orbit = 0;
  double left = 0.0;   // sup |c + ū − ζ_x| left of the orbit
  double right = 0.0;  // same on the right
  FitStatus left_status = FitStatus::empty;
  FitStatus right_status = FitStatus::empty;
  bool transition = false;
  bool ambiguous = false;  // AmbiguousFit
  double theta = 0.0;      // max one-sided slope of ū within δ
};

struct TransitionReport {
  std::vector<OrbitFit> fits;
  std::vector<int> transitions;
  double delta = 0.0;
  double tol_fit = 0.0;
  long slices = 0;
  [[nodiscard]] bool ambiguous() const {
    for (const auto& f : fits) if (f.ambiguous) return true;
    return false;
  }
};

struct DetectOptions {
  double delta = 0.15;
  double tol_fit = -1.0;  // negative: 5 sqrt(Δx) (1 + |ζ_x|_inf)
  long slice_stride = 0;  // 0: at most 256 slices per period
};

inline long default_stride(const MeshSpec& mesh, long stride) {
  if (stride > 0) return stride;
  return std::max<long>(1, mesh.steps_per_period() / 256);
}

inline std::vector<double> slice_times(const MeshSpec& mesh, long stride) {
  std::vector<double> ts;
  for (long k = 0; k < mesh.steps_per_period(); k += stride) ts.push_back(mesh.t(k));
  return ts;
}

inline FitStatus classify(double d, double tol) {
  if (d < tol) return FitStatus::fit;
  if (d < 2.0 * tol) return FitStatus::ambiguous;
  return FitStatus::miss;
}

// compares c + ū with the unstable branch ζ_x on both sides of each orbit within δ
inline TransitionReport detect_transitions(const PeriodicSolution& sol, const std::vector<OrbitData>& orbits,
                                           const LocalBranches& lb, const DetectOptions& opt = {}) {
  TransitionReport rep;
  rep.delta = opt.delta;
  const auto& mesh = sol.mesh;
  const long stride = default_stride(mesh, opt.slice_stride);
  if (orbits.empty()) return rep;
  double zmax = 0.0;
  for (std::size_t i = 0; i < orbits.size(); ++i)
    for (std::size_t k = 0; k < lb.times.size(); ++k)
      for (const auto* br : {&lb.left[i][k], &lb.right[i][k]})
        for (double v : br->p) zmax = std::max(zmax, std::abs(v));
  rep.tol_fit = opt.tol_fit > 0 ? opt.tol_fit : 5.0 * std::sqrt(mesh.dx()) * (1.0 + zmax);
  const long n = mesh.cols();
  for (std::size_t i = 0; i < orbits.size(); ++i) {
    OrbitFit f;
    f.orbit = orbits[i].index;
    f.theta = -std::numeric_limits<double>::infinity();
    bool seen_l = false, seen_r = false;
    std::size_t slice = 0;
    for (long k = 0; k < mesh.steps_per_period(); k += stride, ++slice) {
      const double t = mesh.t(k);
      const double g = orbits[i].at(t)[0];
      const auto& L = lb.left[i][slice];
      const auto& R = lb.right[i][slice];
      for (long m = wrap_index(k, 2); m < n; m += 2) {
        const double off = detail::wrap_offset(mesh.x(m) - g);
        if (std::abs(off) > opt.delta) continue;
        const double val = sol.c + sol.u_field.at(k, m);
        const double xq = g + off;
        const auto& br = off < 0 ? L : R;
        const double z = br(xq);
        if (!std::isnan(z)) {
          const double d = std::abs(val - z);
          if (off < 0) {
            f.left = std::max(f.left, d);
            seen_l = true;
          } else {
            f.right = std::max(f.right, d);
            seen_r = true;
          }
        }
        const double off2 = detail::wrap_offset(mesh.x(m + 2) - g);
        if (std::abs(off2) <= opt.delta)
          f.theta = std::max(f.theta, (sol.u_field.at(k, m + 2) - sol.u_field.at(k, m)) / (2.0 * mesh.dx()));
      }
    }
    f.left_status = seen_l ? classify(f.left, rep.tol_fit) : FitStatus::empty;
    f.right_status = seen_r ? classify(f.right, rep.tol_fit) : FitStatus::empty;
    const bool miss = f.left_status == FitStatus::miss || f.right_status == FitStatus::miss;
    f.transition = f.left_status == FitStatus::fit && f.right_status == FitStatus::fit;
    f.ambiguous = !f.transition && !miss;
    if (f.transition) rep.transitions.push_back(f.orbit);
    rep.fits.push_back(f);
    rep.slices = static_cast<long>(slice);
  }
  return rep;
}

template <Hamiltonian M>
TransitionReport detect_transitions(const M& model, const PeriodicSolution& sol, const std::vector<OrbitData>& orbits,
                                    const DetectOptions& opt = {}, const ManifoldOptions& mopt = {}) {
  const auto times = slice_times(sol.mesh, default_stride(sol.mesh, opt.slice_stride));
  const auto lb = local_unstable_branches(model, orbits, times, opt.delta, mopt);
  return detect_transitions(sol, orbits, lb, opt);
}

}  // namespace lfsel
