#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lfsel/lfsel.hpp"

namespace fs = std::filesystem;
using namespace lfsel;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path + ": " + std::strerror(errno));
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// preset name or a config file whose [model] section is used
ModelConfig resolve_model(const std::string& spec) {
  if (fs::exists(spec)) return parse_config(read_text(spec)).model;
  return preset_model(spec);
}

void print(const json& j) { std::cout << dump(j); }

int cmd_effective(const std::string& model_spec, double c, int N, int K, double tol, long max_periods,
                  const std::string& out) {
  const auto model = build_model(resolve_model(model_spec));
  const auto mesh = MeshSpec::make(N, K);
  SolveOptions so;
  so.tol = tol;
  so.max_periods = max_periods;
  const auto sol = solve_periodic(model, mesh, c, so);
  print({{"model", model.name()},
         {"N", N},
         {"K", K},
         {"lambda", num(mesh.lambda())},
         {"c", num(c)},
         {"h_delta", num(sol.h_delta)},
         {"residuals",
          {{"periodicity", num(sol.residual_periodicity)},
           {"scheme", num(sol.scheme_residual)},
           {"final_defect", num(sol.final_defect)}}},
         {"iterations", sol.iterations_used},
         {"cfl_margin", num(sol.cfl_margin)}});
  if (!out.empty()) {
    ensure_dir(out);
    write_file(fs::path(out) / "v.csv", field_csv(sol.v_field));
    write_file(fs::path(out) / "u.csv", field_csv(sol.u_field));
  }
  return 0;
}

int cmd_walk(int N, int K, long n, long top, int depth, double xi0, double xi1, std::uint64_t seed, long samples,
             int depth_joint, const std::string& out) {
  const auto mesh = MeshSpec::make(N, K);
  const auto cone = make_cone(mesh, n, top, depth);
  const auto xi = ControlField::from_function(cone, [&](double x, double) { return xi0 + xi1 * std::sin(two_pi * x); });
  EtaOptions eo;
  eo.seed = seed;
  eo.samples = samples;
  eo.depth_joint = depth_joint;
  const auto d = eta_statistics(cone, xi, eo);
  const auto lip = variance_under_lipschitz(cone, xi, std::abs(xi1) * two_pi);
  bool sigma_ok = true;
  for (int j = 0; j <= depth; ++j)
    if (d.sigma_tilde[j] > sigma_tilde_bound(cone, j) * (1.0 + 1e-12)) sigma_ok = false;
  json levels = json::array();
  for (int j = 0; j <= depth; ++j)
    levels.push_back({{"k", cone.level_time(j)},
                      {"gamma_bar", num(d.mean[j])},
                      {"sigma", num(d.variance[j])},
                      {"sigma_tilde", num(d.sigma_tilde[j])},
                      {"d_tilde", num(d.d_tilde[j])},
                      {"sigma_tilde_bound", num(sigma_tilde_bound(cone, j))},
                      {"lipschitz_bound", num(lip.bound[j])}});
  print({{"N", N}, {"K", K}, {"depth", depth}, {"d_exact", d.d_exact}, {"sigma_tilde_bound_holds", sigma_ok},
         {"lipschitz_bound_holds", lip.bound_holds}, {"levels", levels}});
  if (!out.empty()) {
    std::ostringstream os;
    write_walk_csv(os, cone, d);
    write_file(out, os.str());
  }
  return 0;
}

int cmd_orbits(const std::string& model_spec, const std::vector<double>& lambdas) {
  const auto model = build_model(resolve_model(model_spec));
  const auto search = find_model_orbits(model);
  json j = orbits_json(search, lambdas);
  j["model"] = model.name();
  const auto crit = lambdas.size() >= 2 ? lambda_crit(search.orbits, lambdas.front(), lambdas.back()) : std::nullopt;
  j["lambda_crit"] = crit ? num(*crit) : json(nullptr);
  j["viscous"] = to_json(predict_viscous_selection(search.orbits));
  print(j);
  return 0;
}

int cmd_peierls(const std::string& model_spec, double c, double h, double x0, int N, int K, long tmax, int vel,
                const std::string& out) {
  const auto model = build_model(resolve_model(model_spec));
  const auto mesh = MeshSpec::make(N, K);
  if (std::isnan(h)) h = solve_periodic(model, mesh, c).h_delta;
  PeierlsOptions po;
  po.max_periods = tmax;
  po.velocities = vel;
  const auto pr = peierls_numeric(model, c, h, x0, mesh, po);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (long k = 0; k < mesh.steps_per_period(); ++k)
    for (long m = 0; m < mesh.cols(); ++m) {
      const double b = pr.at(k, m);
      if (b >= 0.5 * peierls_sentinel) continue;
      lo = std::min(lo, b);
      hi = std::max(hi, b);
    }
  print({{"model", model.name()}, {"c", num(c)}, {"N", N}, {"K", K}, {"h", num(h)}, {"x0", num(x0)},
         {"periods_used", pr.periods_used}, {"defect", num(pr.defect)}, {"stabilized", pr.stabilized},
         {"min", num(lo)}, {"max", num(hi)}});
  if (!out.empty()) write_file(out, field_csv(pr.odd_field()));
  return 0;
}

int cmd_select(const std::string& kind, const std::string& path, const std::string& out) {
  auto cfg = parse_config(read_text(path));
  if (!out.empty()) cfg.out_dir = out;
  const auto res = run_selection(cfg, kind, cfg.out_dir);
  std::cout << res.summary << "\n";
  return static_cast<int>(res.code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lax-Friedrichs selection experiments"};
  app.require_subcommand(1);

  std::string model = "FREE", out;
  double c = 0.0, tol = -1.0;
  int N = 32, K = 64;
  long max_periods = 20000;
  auto* eff = app.add_subcommand("effective", "effective Hamiltonian of the periodic scheme");
  eff->add_option("--model", model, "preset (FREE, MECH, MECH1, MECH_T) or config file");
  eff->add_option("--c", c);
  eff->add_option("--N", N);
  eff->add_option("--K", K);
  eff->add_option("--tol", tol);
  eff->add_option("--max-periods", max_periods);
  eff->add_option("--out", out, "directory for field CSVs");

  long wn = 1, wtop = 0;
  int depth = 8, depth_joint = default_depth_joint;
  double xi0 = 0.0, xi1 = 0.0;
  std::uint64_t seed = 1;
  long samples = 100000;
  auto* walk = app.add_subcommand("walk-stats", "controlled random walk statistics on a backward cone");
  walk->add_option("--N", N);
  walk->add_option("--K", K);
  walk->add_option("--n", wn, "origin node");
  walk->add_option("--top", wtop, "origin level");
  walk->add_option("--depth", depth);
  walk->add_option("--xi", xi0, "constant part of the control");
  walk->add_option("--xi-sin", xi1, "amplitude of sin(2 pi x) in the control");
  walk->add_option("--seed", seed);
  walk->add_option("--samples", samples);
  walk->add_option("--depth-joint", depth_joint);
  walk->add_option("--out", out, "CSV file");

  std::vector<double> lambdas{0.0, 0.5, 1.0};
  auto* orb = app.add_subcommand("orbits", "hyperbolic periodic orbits and selection criteria");
  orb->add_option("--model", model);
  orb->add_option("--lambdas", lambdas)->delimiter(',');

  double h = std::nan(""), x0 = 0.0;
  long tmax = 200;
  int vel = 129;
  auto* pei = app.add_subcommand("peierls", "numerical Peierls barrier");
  pei->add_option("--model", model);
  pei->add_option("--c", c);
  pei->add_option("--h-ref", h, "effective Hamiltonian; default solves the scheme");
  pei->add_option("--x0", x0);
  pei->add_option("--N", N);
  pei->add_option("--K", K);
  pei->add_option("--T-max", tmax);
  pei->add_option("--velocities", vel);
  pei->add_option("--out", out, "CSV file");

  std::string cfg_path;
  auto* sel = app.add_subcommand("select", "selection experiments from a config file");
  sel->require_subcommand(1);
  std::string kind;
  for (const char* k : {"run", "sweep", "compare"}) {
    auto* s = sel->add_subcommand(k);
    s->add_option("config", cfg_path)->required();
    s->add_option("--out", out, "output directory, overrides output.dir");
    s->callback([&kind, k] { kind = k; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (*eff) return cmd_effective(model, c, N, K, tol, max_periods, out);
    if (*walk) return cmd_walk(N, K, wn, wtop, depth, xi0, xi1, seed, samples, depth_joint, out);
    if (*orb) return cmd_orbits(model, lambdas);
    if (*pei) return cmd_peierls(model, c, h, x0, N, K, tmax, vel, out);
    if (*sel) return cmd_select(kind, cfg_path, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
