#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "barrier.hpp"
#include "effective.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "orbits.hpp"

namespace lfsel {

enum class Verdict { confirmed, refuted, inconclusive };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::confirmed: return "confirmed";
    case Verdict::refuted: return "refuted";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct LadderOptions {
  std::vector<int> Ns{32, 64, 128, 256};
  SolveOptions solve;
  DetectOptions detect;
  ManifoldOptions manifold;
  PeierlsOptions peierls;
  bool compare_peierls = true;
  double h_ref = nan_value;  // h(c) for the barrier; NaN uses the finest h_Δ seen so far
  bool seed_from_coarse = true;
  double lambda0 = 0.0;
  double lambda1 = 1.0;
};

struct LadderEntry {
  int N = 0;
  int K = 0;
  double lambda = 0.0;  // N / K
  double nu = nan_value;
  double h_delta = nan_value;
  long periods = 0;
  TransitionReport detection;
  std::vector<int> detected;
  double anchor_value = nan_value;  // v̄ at the anchor after normalization
  double sup_peierls = nan_value;
  bool peierls_stabilized = false;
  double theta_hat = nan_value;
  std::string error;
  std::optional<PeriodicSolution> solution;
  std::optional<PeierlsResult> barrier;
};

struct SelectionReport {
  std::string model_id;
  std::string scaling = "hyperbolic";
  double c = 0.0;
  double lambda = nan_value;
  double nu = nan_value;
  std::vector<LadderEntry> entries;
  Selection predicted;
  double anchor_x = nan_value;
  Verdict verdict = Verdict::inconclusive;
  std::string cause;
  bool peierls_decreasing = false;
};

// linear interpolation of a coarse level-0 row onto a finer mesh
inline Row seed_from(const PeriodicSolution& coarse, const MeshSpec& fine) {
  Row seed(fine.cols(), nan_value);
  for (long m = 1; m < fine.cols(); m += 2) seed[m] = linear_interpolant(coarse.v_field, fine.x(m), 0.0);
  return seed;
}

// sup over all levels and odd nodes of |v̄ − h_p|
inline double sup_barrier_gap(const PeriodicSolution& sol, const PeierlsResult& pr) {
  double s = 0.0;
  const auto& mesh = sol.mesh;
  for (long k = 0; k < mesh.steps_per_period(); ++k)
    for (long m = wrap_index(k + 1, 2); m < mesh.cols(); m += 2) {
      const double b = pr.at(k, m);
      if (b >= 0.5 * peierls_sentinel) continue;
      s = std::max(s, std::abs(sol.v_field.at(k, m) - b));
    }
  return s;
}

// confirmed when the two finest levels both detect exactly {i*}; refuted when both agree on another set
inline void judge(SelectionReport& rep, int expected) {
  rep.verdict = Verdict::inconclusive;
  if (rep.predicted.tie) {
    rep.cause = "tied criterion";
    return;
  }
  std::vector<const LadderEntry*> ok;
  for (const auto& e : rep.entries) if (e.error.empty()) ok.push_back(&e);
  if (ok.size() < 2) {
    rep.cause = "fewer than two completed levels";
    return;
  }
  const auto& a = *ok[ok.size() - 2];
  const auto& b = *ok[ok.size() - 1];
  if (a.detection.ambiguous() || b.detection.ambiguous()) {
    rep.cause = "AmbiguousFit at a finest level";
    return;
  }
  const std::vector<int> want{expected};
  if (a.detected == want && b.detected == want) {
    rep.verdict = Verdict::confirmed;
    rep.cause.clear();
  } else if (a.detected == b.detected && !a.detected.empty()) {
    rep.verdict = Verdict::refuted;
    rep.cause = "finest levels agree on a different transition set";
  } else {
    rep.cause = "finest levels disagree or detect nothing";
  }
}

namespace detail {

inline void fill_barrier(LadderEntry& e, PeriodicSolution& sol, double x_anchor, const PeierlsResult* pr) {
  // anchor v̄ at (x*, 0)
  const double shift = linear_interpolant(sol.v_field, x_anchor, 0.0);
  sol.v_field.add_constant(-shift);
  e.anchor_value = linear_interpolant(sol.v_field, x_anchor, 0.0);
  if (pr) {
    e.sup_peierls = sup_barrier_gap(sol, *pr);
    e.peierls_stabilized = pr->stabilized;
  }
}

inline double max_theta(const TransitionReport& r) {
  if (r.fits.empty()) return nan_value;
  double t = -std::numeric_limits<double>::infinity();
  for (const auto& f : r.fits) t = std::max(t, f.theta);
  return t;
}

}  // namespace detail

template <Hamiltonian M>
SelectionReport run_hyperbolic_ladder(const M& model, const std::vector<OrbitData>& orbits, double c, double lambda,
                                      const LadderOptions& opt = {}) {
  SelectionReport rep;
  rep.model_id = model.name();
  rep.c = c;
  rep.lambda = lambda;
  rep.predicted = predict_selection(orbits, lambda);
  const OrbitData* star = nullptr;
  for (const auto& o : orbits) if (o.index == rep.predicted.i_star) star = &o;
  rep.anchor_x = star ? star->x0() : 0.5 * MeshSpec{}.dx();
  std::optional<PeriodicSolution> prev;
  for (int N : opt.Ns) {
    LadderEntry e;
    e.N = N;
    try {
      const auto mesh = MeshSpec::from_lambda(N, lambda, opt.lambda0, opt.lambda1);
      e.K = mesh.K;
      e.lambda = mesh.lambda();
      SolveOptions so = opt.solve;
      if (opt.seed_from_coarse && prev && !so.seed) so.seed = seed_from(*prev, mesh);
      auto sol = solve_periodic(model, mesh, c, so);
      e.h_delta = sol.h_delta;
      e.periods = sol.iterations_used;
      e.detection = detect_transitions(model, sol, orbits, opt.detect, opt.manifold);
      e.detected = e.detection.transitions;
      e.theta_hat = detail::max_theta(e.detection);
      std::optional<PeierlsResult> pr;
      if (opt.compare_peierls && star) {
        const double h = std::isnan(opt.h_ref) ? sol.h_delta : opt.h_ref;
        pr = peierls_numeric(model, c, h, rep.anchor_x, mesh, opt.peierls);
      }
      detail::fill_barrier(e, sol, rep.anchor_x, pr ? &*pr : nullptr);
      prev = sol;
      e.solution = std::move(sol);
      e.barrier = std::move(pr);
    } catch (const error& err) {
      e.error = err.what();
    }
    rep.entries.push_back(std::move(e));
  }
  judge(rep, rep.predicted.i_star);
  // errors vs the barrier non-increasing across the last three completed levels
  std::vector<double> gaps;
  for (const auto& e : rep.entries) if (e.error.empty() && !std::isnan(e.sup_peierls)) gaps.push_back(e.sup_peierls);
  if (gaps.size() >= 3) {
    const std::size_t n = gaps.size();
    rep.peierls_decreasing = gaps[n - 1] <= gaps[n - 2] && gaps[n - 2] <= gaps[n - 3];
  }
  return rep;
}

struct SweepPoint {
  double lambda = 0.0;
  Selection predicted;
  std::vector<int> detected;  // finest completed level
  SelectionReport ladder;
};

struct SweepReport {
  std::string model_id;
  double c = 0.0;
  std::vector<SweepPoint> points;
  Selection viscous;  // argmin Γ̃
  std::optional<double> lambda_crit;
  std::optional<std::pair<double, double>> bracket;  // consecutive grid λ where detection flips
  bool bracket_contains_crit = false;
  bool small_lambda_matches_viscous = false;
};

inline std::vector<int> finest_detection(const SelectionReport& r) {
  for (auto it = r.entries.rbegin(); it != r.entries.rend(); ++it)
    if (it->error.empty()) return it->detected;
  return {};
}

template <Hamiltonian M>
SweepReport lambda_sweep(const M& model, const std::vector<OrbitData>& orbits, double c,
                         const std::vector<double>& lambdas, const LadderOptions& opt = {}) {
  SweepReport rep;
  rep.model_id = model.name();
  rep.c = c;
  rep.viscous = predict_viscous_selection(orbits);
  for (double lam : lambdas) {
    SweepPoint pt;
    pt.lambda = lam;
    pt.ladder = run_hyperbolic_ladder(model, orbits, c, lam, opt);
    pt.predicted = pt.ladder.predicted;
    pt.detected = finest_detection(pt.ladder);
    // drop the bulky fields once detection is recorded
    for (auto& e : pt.ladder.entries) {
      e.solution.reset();
      e.barrier.reset();
    }
    rep.points.push_back(std::move(pt));
  }
  if (!lambdas.empty()) rep.lambda_crit = lambda_crit(orbits, lambdas.front(), lambdas.back());
  for (std::size_t i = 1; i < rep.points.size(); ++i) {
    const auto& a = rep.points[i - 1].detected;
    const auto& b = rep.points[i].detected;
    if (a.size() == 1 && b.size() == 1 && a != b) {
      rep.bracket = std::make_pair(rep.points[i - 1].lambda, rep.points[i].lambda);
      break;
    }
  }
  if (rep.bracket && rep.lambda_crit)
    rep.bracket_contains_crit = *rep.lambda_crit >= rep.bracket->first && *rep.lambda_crit <= rep.bracket->second;
  if (!rep.points.empty())
    rep.small_lambda_matches_viscous = rep.points.front().detected == std::vector<int>{rep.viscous.i_star};
  return rep;
}

struct ViscosityComparison {
  std::string model_id;
  double c = 0.0;
  Selection viscous;
  SelectionReport diffusive;  // entries per ν
  std::vector<int> diffusive_detected;
  bool nu_stable = false;  // detection unchanged across the ν ladder
  std::optional<SelectionReport> hyperbolic;
  bool agree = false;
};

struct ViscosityOptions {
  int N = 128;
  std::vector<double> nus{0.04, 0.02};
  SolveOptions solve;
  DetectOptions detect;
  ManifoldOptions manifold;
};

template <Hamiltonian M>
ViscosityComparison compare_viscosity(const M& model, const std::vector<OrbitData>& orbits, double c,
                                      const ViscosityOptions& opt = {},
                                      const std::optional<SelectionReport>& hyperbolic = std::nullopt) {
  ViscosityComparison cmp;
  cmp.model_id = model.name();
  cmp.c = c;
  cmp.viscous = predict_viscous_selection(orbits);
  cmp.diffusive.model_id = model.name();
  cmp.diffusive.scaling = "diffusive";
  cmp.diffusive.c = c;
  cmp.diffusive.predicted = cmp.viscous;
  for (double nu : opt.nus) {
    LadderEntry e;
    e.N = opt.N;
    e.nu = nu;
    try {
      auto run = diffusive_lf_run(model, c, opt.N, nu, opt.solve);
      e.K = run.solution.mesh.K;
      e.lambda = run.solution.mesh.lambda();
      e.h_delta = run.solution.h_delta;
      e.periods = run.solution.iterations_used;
      e.detection = detect_transitions(model, run.solution, orbits, opt.detect, opt.manifold);
      e.detected = e.detection.transitions;
      e.theta_hat = detail::max_theta(e.detection);
    } catch (const error& err) {
      e.error = err.what();
    }
    cmp.diffusive.entries.push_back(std::move(e));
  }
  judge(cmp.diffusive, cmp.viscous.i_star);
  cmp.diffusive_detected = finest_detection(cmp.diffusive);
  cmp.nu_stable = true;
  for (const auto& e : cmp.diffusive.entries)
    if (!e.error.empty() || e.detected != cmp.diffusive_detected) cmp.nu_stable = false;
  if (hyperbolic) {
    cmp.hyperbolic = hyperbolic;
    cmp.agree = finest_detection(*hyperbolic) == cmp.diffusive_detected;
  }
  return cmp;
}

}  // namespace lfsel
