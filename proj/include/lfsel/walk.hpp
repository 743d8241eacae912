#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "parallel.hpp"

namespace lfsel {

// counter-based splitmix64: the stream is a pure function of (seed, sample, step)
struct CounterRng {
  std::uint64_t seed = 0;

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  [[nodiscard]] std::uint64_t bits(std::uint64_t sample, std::uint64_t step) const {
    return mix(mix(mix(seed) ^ sample) ^ (step * 0xd1342543de82ef95ULL + 1));
  }
  // uniform in [0, 1)
  [[nodiscard]] double uniform(std::uint64_t sample, std::uint64_t step) const {
    return static_cast<double>(bits(sample, step) >> 11) * 0x1.0p-53;
  }
};

// backward light cone from (x_n, t_{l+1}); level j sits at time index l+1-j and holds j+1 sites
struct Cone {
  MeshSpec mesh;
  long n = 0;
  long top = 0;  // l + 1
  int depth = 1;

  [[nodiscard]] long level_time(int j) const { return top - j; }
  [[nodiscard]] long site_index(int j, int i) const { return n - j + 2L * i; }
  [[nodiscard]] double site_x(int j, int i) const { return mesh.x(site_index(j, i)); }
};

inline Cone make_cone(const MeshSpec& mesh, long n, long top, int depth) {
  if (depth < 1) throw RangeError("cone depth must be positive");
  if (is_active(Parity::even, top, n)) throw RangeError("cone origin must lie on the odd grid");
  return {mesh, n, top, depth};
}

// ξ per cone site on levels 0..depth-1
struct ControlField {
  std::vector<std::vector<double>> xi;

  static ControlField from_function(const Cone& cone, const std::function<double(double, double)>& f) {
    ControlField c;
    c.xi.resize(cone.depth);
    for (int j = 0; j < cone.depth; ++j) {
      c.xi[j].resize(j + 1);
      for (int i = 0; i <= j; ++i) c.xi[j][i] = f(cone.site_x(j, i), cone.mesh.t(cone.level_time(j)));
    }
    c.validate(cone);
    return c;
  }
  static ControlField constant(const Cone& cone, double v) {
    return from_function(cone, [v](double, double) { return v; });
  }
  void validate(const Cone& cone) const {
    const double bound = 1.0 / cone.mesh.lambda();
    if (static_cast<int>(xi.size()) != cone.depth) throw RangeError("control field depth mismatch");
    for (int j = 0; j < cone.depth; ++j)
      for (double v : xi[j])
        if (!(std::abs(v) <= bound * (1.0 + 1e-14)))
          throw BoundViolation("control " + fmt17(v) + " exceeds 1/lambda=" + fmt17(bound));
  }
  // probability of the backward step to x + Δx
  [[nodiscard]] double rho_up(const Cone& cone, int j, int i) const {
    return std::clamp(0.5 - 0.5 * cone.mesh.lambda() * xi[j][i], 0.0, 1.0);
  }
  [[nodiscard]] double rho_down(const Cone& cone, int j, int i) const { return 1.0 - rho_up(cone, j, i); }
};

// product of step probabilities; the path lists grid indices m from level 0 to depth
inline double path_density(const Cone& cone, const ControlField& xi, const std::vector<long>& path) {
  if (static_cast<int>(path.size()) != cone.depth + 1) throw InvalidPath("path length mismatch");
  if (path[0] != cone.n) throw InvalidPath("path does not start at the cone origin");
  double mu = 1.0;
  for (int j = 0; j < cone.depth; ++j) {
    const long d = path[j + 1] - path[j];
    if (d != 1 && d != -1) throw InvalidPath("step of " + std::to_string(d) + " cells at level " + std::to_string(j));
    const long off = path[j] - (cone.n - j);
    if (off < 0 || off > 2L * j || off % 2 != 0) throw InvalidPath("path leaves the cone");
    const int i = static_cast<int>(off / 2);
    mu *= d == 1 ? xi.rho_up(cone, j, i) : xi.rho_down(cone, j, i);
  }
  return mu;
}

struct ConeDistribution {
  std::vector<std::vector<double>> marginal;  // level j, site i
  std::vector<double> mean;                   // γ̄
  std::vector<double> variance;               // σ
  std::vector<double> sigma_tilde;            // E|γ - η|^2
  std::vector<double> d_tilde;                // E|γ - η|
  std::vector<double> d_tilde_halfwidth;      // CI half-width when sampled, 0 when exact
  bool d_exact = true;

  [[nodiscard]] int depth() const { return static_cast<int>(marginal.size()) - 1; }
};

inline void fill_moments(const Cone& cone, ConeDistribution& d) {
  const int D = cone.depth;
  d.mean.assign(D + 1, 0.0);
  d.variance.assign(D + 1, 0.0);
  for (int j = 0; j <= D; ++j) {
    double s = 0.0;
    for (int i = 0; i <= j; ++i) s += d.marginal[j][i] * cone.site_x(j, i);
    d.mean[j] = s;
    double v = 0.0;
    for (int i = 0; i <= j; ++i) {
      const double e = cone.site_x(j, i) - s;
      v += d.marginal[j][i] * e * e;
    }
    d.variance[j] = v;
  }
}

// level-by-level push of mass from the origin; σ̃ from the martingale increments of γ - η
inline ConeDistribution marginals_dp(const Cone& cone, const ControlField& xi) {
  const int D = cone.depth;
  const double dx = cone.mesh.dx(), lam = cone.mesh.lambda();
  ConeDistribution d;
  d.marginal.resize(D + 1);
  d.marginal[0] = {1.0};
  d.sigma_tilde.assign(D + 1, 0.0);
  for (int j = 0; j < D; ++j) {
    auto& next = d.marginal[j + 1];
    next.assign(j + 2, 0.0);
    double inc = 0.0;
    for (int i = 0; i <= j; ++i) {
      const double p = d.marginal[j][i];
      const double up = xi.rho_up(cone, j, i);
      next[i + 1] += p * up;
      next[i] += p * (1.0 - up);
      const double lx = lam * xi.xi[j][i];
      inc += p * dx * dx * (1.0 - lx * lx);
    }
    d.sigma_tilde[j + 1] = d.sigma_tilde[j] + inc;
  }
  fill_moments(cone, d);
  return d;
}

inline constexpr int default_depth_joint = 20;

struct JointState {
  int i;
  double gap;  // γ - η
  double p;
};

// exact E|γ - η| by a joint (site, γ - η) sweep
inline std::vector<double> d_tilde_joint(const Cone& cone, const ControlField& xi) {
  const int D = cone.depth;
  const double dx = cone.mesh.dx(), dt = cone.mesh.dt();
  std::vector<double> out(D + 1, 0.0);
  std::vector<JointState> cur{{0, 0.0, 1.0}}, nxt;
  for (int j = 0; j < D; ++j) {
    nxt.clear();
    nxt.reserve(cur.size() * 2);
    for (const auto& s : cur) {
      const double up = xi.rho_up(cone, j, s.i);
      const double drift = xi.xi[j][s.i] * dt;
      if (up > 0.0) nxt.push_back({s.i + 1, s.gap + dx + drift, s.p * up});
      if (up < 1.0) nxt.push_back({s.i, s.gap - dx + drift, s.p * (1.0 - up)});
    }
    std::sort(nxt.begin(), nxt.end(), [](const JointState& a, const JointState& b) {
      return a.i != b.i ? a.i < b.i : a.gap < b.gap;
    });
    cur.clear();
    for (const auto& s : nxt) {
      if (!cur.empty() && cur.back().i == s.i && cur.back().gap == s.gap) cur.back().p += s.p;
      else cur.push_back(s);
    }
    double e = 0.0;
    for (const auto& s : cur) e += s.p * std::abs(s.gap);
    out[j + 1] = e;
  }
  return out;
}

struct SampleStats {
  std::vector<std::vector<double>> frequency;
  std::vector<double> sigma_tilde;
  std::vector<double> d_tilde;
  std::vector<double> d_tilde_halfwidth;  // 1.96 standard errors
  long count = 0;
};

inline constexpr std::size_t sample_chunk = 4096;

// seeded sampling; chunked reduction in fixed order keeps results independent of the worker count
inline SampleStats sample_paths(const Cone& cone, const ControlField& xi, std::uint64_t seed, long count,
                                unsigned threads = 0) {
  if (count < 1) throw RangeError("sample count must be positive");
  const int D = cone.depth;
  const double dx = cone.mesh.dx(), dt = cone.mesh.dt();
  const CounterRng rng{seed};
  struct Partial {
    std::vector<std::vector<double>> freq;
    std::vector<double> s2, s1;
  };
  const std::size_t chunks = (static_cast<std::size_t>(count) + sample_chunk - 1) / sample_chunk;
  std::vector<Partial> parts(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    Partial& pt = parts[c];
    pt.freq.resize(D + 1);
    for (int j = 0; j <= D; ++j) pt.freq[j].assign(j + 1, 0.0);
    pt.s2.assign(D + 1, 0.0);
    pt.s1.assign(D + 1, 0.0);
    const std::size_t lo = c * sample_chunk, hi = std::min<std::size_t>(count, lo + sample_chunk);
    for (std::size_t s = lo; s < hi; ++s) {
      int i = 0;
      double gap = 0.0;
      pt.freq[0][0] += 1.0;
      for (int j = 0; j < D; ++j) {
        const double up = xi.rho_up(cone, j, i);
        const double drift = xi.xi[j][i] * dt;
        if (rng.uniform(s, static_cast<std::uint64_t>(j)) < up) {
          gap += dx + drift;
          ++i;
        } else {
          gap += -dx + drift;
        }
        pt.freq[j + 1][i] += 1.0;
        pt.s2[j + 1] += gap * gap;
        pt.s1[j + 1] += std::abs(gap);
      }
    }
  }, threads);
  SampleStats st;
  st.count = count;
  st.frequency.resize(D + 1);
  for (int j = 0; j <= D; ++j) st.frequency[j].assign(j + 1, 0.0);
  st.sigma_tilde.assign(D + 1, 0.0);
  st.d_tilde.assign(D + 1, 0.0);
  st.d_tilde_halfwidth.assign(D + 1, 0.0);
  for (const auto& pt : parts) {
    for (int j = 0; j <= D; ++j) {
      for (int i = 0; i <= j; ++i) st.frequency[j][i] += pt.freq[j][i];
      st.sigma_tilde[j] += pt.s2[j];
      st.d_tilde[j] += pt.s1[j];
    }
  }
  const double n = static_cast<double>(count);
  for (int j = 0; j <= D; ++j) {
    for (auto& f : st.frequency[j]) f /= n;
    st.sigma_tilde[j] /= n;
    st.d_tilde[j] /= n;
    const double var = std::max(0.0, st.sigma_tilde[j] - st.d_tilde[j] * st.d_tilde[j]);
    st.d_tilde_halfwidth[j] = 1.96 * std::sqrt(var / n);
  }
  return st;
}

struct EtaOptions {
  int depth_joint = default_depth_joint;
  std::uint64_t seed = 1;
  long samples = 100000;
  unsigned threads = 0;
};

// σ̃ and d̃ per level with the bound checks
inline ConeDistribution eta_statistics(const Cone& cone, const ControlField& xi, const EtaOptions& opt = {}) {
  ConeDistribution d = marginals_dp(cone, xi);
  if (cone.depth <= opt.depth_joint) {
    d.d_tilde = d_tilde_joint(cone, xi);
    d.d_tilde_halfwidth.assign(cone.depth + 1, 0.0);
    d.d_exact = true;
  } else {
    const auto st = sample_paths(cone, xi, opt.seed, opt.samples, opt.threads);
    d.d_tilde = st.d_tilde;
    d.d_tilde_halfwidth = st.d_tilde_halfwidth;
    d.d_exact = false;
  }
  return d;
}

// (t_{l+1} - t_k) Δx / λ
inline double sigma_tilde_bound(const Cone& cone, int j) {
  return cone.mesh.t(j) * cone.mesh.dx() / cone.mesh.lambda();
}

struct LipschitzReport {
  std::vector<double> sigma;
  std::vector<double> bound;
  bool lipschitz = true;
  int worst_level = -1;
  int worst_site = -1;
  double worst_excess = 0.0;
  bool bound_holds = true;
};

// ξ_* is the two-point interpolation of ξ at γ̄ on the level's cell [x_m, x_{m+2}); exact nodes use the left cell
inline double interpolated_control(const Cone& cone, const ControlField& xi, int j, double gbar) {
  const double dx2 = 2.0 * cone.mesh.dx();
  const double s = (gbar - cone.site_x(j, 0)) / dx2;
  if (j == 0) return xi.xi[0][0];
  int i = static_cast<int>(std::floor(s));
  if (static_cast<double>(i) == s && i > 0) --i;
  i = std::clamp(i, 0, j - 1);
  const double x0 = cone.site_x(j, i);
  return xi.xi[j][i] + (xi.xi[j][i + 1] - xi.xi[j][i]) / dx2 * (gbar - x0);
}

inline LipschitzReport variance_under_lipschitz(const Cone& cone, const ControlField& xi, double theta) {
  const auto d = marginals_dp(cone, xi);
  LipschitzReport r;
  r.sigma = d.variance;
  r.bound.assign(cone.depth + 1, 0.0);
  for (int j = 0; j < cone.depth; ++j) {
    const double star = interpolated_control(cone, xi, j, d.mean[j]);
    for (int i = 0; i <= j; ++i) {
      const double excess = std::abs(xi.xi[j][i] - star) - theta * std::abs(cone.site_x(j, i) - d.mean[j]);
      if (excess > 1e-12 && excess > r.worst_excess) {
        r.lipschitz = false;
        r.worst_excess = excess;
        r.worst_level = j;
        r.worst_site = i;
      }
    }
  }
  for (int j = 0; j <= cone.depth; ++j) {
    const double T = cone.mesh.t(j);
    r.bound[j] = theta > 0 ? std::exp(4.0 * theta * T) / (4.0 * theta * cone.mesh.lambda()) * cone.mesh.dx()
                           : T * cone.mesh.dx() / cone.mesh.lambda();
    if (r.sigma[j] > r.bound[j] * (1.0 + 1e-12)) r.bound_holds = false;
  }
  return r;
}

inline void write_walk_csv(std::ostream& os, const Cone& cone, const ConeDistribution& d) {
  os << "k,gamma_bar,sigma,sigma_tilde,d_tilde,d_tilde_halfwidth,sigma_tilde_bound\n";
  for (int j = 0; j <= cone.depth; ++j)
    os << cone.level_time(j) << ',' << fmt17(d.mean[j]) << ',' << fmt17(d.variance[j]) << ','
       << fmt17(d.sigma_tilde[j]) << ',' << fmt17(d.d_tilde[j]) << ',' << fmt17(d.d_tilde_halfwidth[j]) << ','
       << fmt17(sigma_tilde_bound(cone, j)) << '\n';
}

}  // namespace lfsel
