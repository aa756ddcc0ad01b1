// tenm: steady states, simulation, spectra, regime sweeps and the acceptance suite
// for the time-elapsed neuron network model.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tenm/tenm.hpp"

namespace {

using namespace tenm;
using nlohmann::json;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> eps, t_end;
  std::optional<int> n, snapshot_stride;
};

void add_common(CLI::App* sub, Common& c)
{
  sub->add_option("--config", c.config, "JSON config (or a run.json from an earlier run)");
  sub->add_option("--out", c.out, "output directory (default: config 'out')");
  sub->add_option("--seed", c.seed, "64-bit seed for every random draw");
  sub->add_option("--eps", c.eps, "override params.eps");
  sub->add_option("--n", c.n, "override params.n");
  sub->add_option("--tend", c.t_end, "override params.t_end");
  sub->add_option("--snapshot-stride", c.snapshot_stride, "override experiment.snapshot_stride");
}

RunConfig resolve(const Common& c)
{
  RunConfig cfg = c.config.empty() ? RunConfig{} : parse_config(c.config);
  if (!c.out.empty()) cfg.out = c.out;
  if (c.seed) cfg.seed = *c.seed;
  if (c.eps) cfg.params.eps = *c.eps;
  if (c.n) cfg.params.n = *c.n;
  if (c.t_end) cfg.params.t_end = *c.t_end;
  if (c.snapshot_stride) cfg.experiment.snapshot_stride = *c.snapshot_stride;
  // overrides go through the same checks as the file
  return parse_config_json(to_json(cfg));
}

const DelayKernel* kernel_of(const RunConfig& cfg) { return cfg.kernel.is_dirac() ? nullptr : &cfg.kernel; }

json steady_json(const SteadyState& st, const FiringRateModel& model)
{
  return {{"eps", st.eps},
          {"M", st.M},
          {"M_grid", st.M_grid},
          {"kappa", st.kappa},
          {"sigma_eps", st.sigma_eps},
          {"residual", st.residual},
          {"roots", st.roots},
          {"envelope_K", st.envelope_K},
          {"envelope_ok", st.envelope_ok},
          {"zeta", zeta_modulus(model, st.eps, st.M)},
          {"warnings", st.warnings}};
}

int cmd_steady(const RunConfig& cfg)
{
  OutputDir dir(cfg.out);
  write_run_json(dir, "steady", cfg);
  const auto st = solve_steady(cfg.rate, cfg.params);
  CsvWriter csv(dir / "steady.csv", {"j", "x", "F"});
  for (int j = 0; j < st.n(); ++j) csv.row({(long long)j, cfg.params.x(j), st.F[j]});
  auto j = steady_json(st, cfg.rate);
  const auto rep = validate_assumptions(cfg.rate, {cfg.params.eps});
  j["assumption_violations"] = rep.violations;
  write_json(dir / "steady.json", j);
  std::printf("M = %.15g  M_grid = %.15g  kappa = %.6g  roots = %zu\n", st.M, st.M_grid, st.kappa, st.roots.size());
  for (const auto& w : st.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return 0;
}

DensityState initial_density(const RunConfig& cfg, const SteadyState& st)
{
  const auto& i = cfg.experiment.initial;
  const int n = cfg.params.n;
  const double dx = cfg.params.dx();
  if (i.kind == "indicator") return project_indicator(i.lo, i.hi, n, dx);
  if (i.kind == "exponential") return project_density([&](double x) { return std::exp(-i.rate * x); }, n, dx);
  const auto fam = i.family == "random" ? PerturbationFamily::random : PerturbationFamily::cosine;
  return perturbed_start(st, cfg.rate, cfg.params, i.amplitude, fam, cfg.seed);
}

int cmd_simulate(const RunConfig& cfg)
{
  OutputDir dir(cfg.out);
  write_run_json(dir, "simulate", cfg);
  const auto st = solve_steady(cfg.rate, cfg.params);
  RunOptions opt;
  opt.steady = &st;
  opt.snapshot_stride = cfg.experiment.snapshot_stride;
  const auto tr = run_with(initial_density(cfg, st), cfg.rate, kernel_of(cfg), cfg.params, opt);

  CsvWriter series(dir / "series.csv", {"t", "m", "p", "mass", "dist"});
  for (std::size_t k = 0; k < tr.t.size(); ++k) series.row({tr.t[k], tr.m[k], tr.p[k], tr.mass[k], tr.dist[k]});
  CsvWriter snaps(dir / "snapshots.csv", {"t", "j", "x", "f"});
  for (const auto& s : tr.snapshots)
    for (int j = 0; j < int(s.f.size()); ++j) snaps.row({s.t, (long long)j, cfg.params.x(j), s.f[j]});

  json summary{{"completed", tr.completed},
               {"error", tr.error},
               {"steps", int(tr.t.size()) - 1},
               {"max_drift", tr.max_drift},
               {"cumulative_factor", tr.cumulative_factor},
               {"f_min", tr.f_min},
               {"f_max", tr.f_max},
               {"m_min", tr.m_min},
               {"m_max", tr.m_max},
               {"closure_solves", tr.closure.solves},
               {"closure_max_iterations", tr.closure.max_iterations},
               {"steady", steady_json(st, cfg.rate)}};
  if (cfg.rate.is_step()) summary["sandwich_ok"] = step_sandwich(tr, cfg.rate).ok;
  try {
    const auto fit = decay_rate_fit(tr.t, tr.dist, cfg.experiment.transient_frac * cfg.params.t_end);
    summary["decay_fit"] = {{"C", fit.C}, {"alpha", fit.alpha}, {"r2", fit.r2}, {"points", fit.points}};
  } catch (const NumericError& e) {
    summary["decay_fit"] = {{"error", e.what()}};
  }
  write_json(dir / "summary.json", summary);
  if (!tr.completed) {
    std::fprintf(stderr, "error: run stopped at t = %.6g: %s\n", tr.t.empty() ? 0.0 : tr.t.back(), tr.error.c_str());
    return 3;
  }
  std::printf("steps = %zu  final dist = %.6g  max drift = %.3g\n", tr.t.size() - 1, tr.dist.back(), tr.max_drift);
  return 0;
}

int cmd_spectrum(const RunConfig& cfg)
{
  OutputDir dir(cfg.out);
  write_run_json(dir, "spectrum", cfg);
  const auto st = solve_steady(cfg.rate, cfg.params);
  const auto* k = kernel_of(cfg);
  const auto op = assemble_for(st, cfg.rate, k, cfg.params);
  const auto sp = compute_spectrum(op, op.n_delay == 0 ? &st.F : nullptr);
  CsvWriter csv(dir / "spectrum.csv", {"k", "re", "im"});
  for (std::size_t i = 0; i < sp.eigenvalues.size(); ++i)
    csv.row({(long long)i, sp.eigenvalues[i].real(), sp.eigenvalues[i].imag()});

  const auto B = assemble_for(st, cfg.rate, k, cfg.params, OperatorPart::b_only);
  const auto pr = semigroup_decay_probe(B, cfg.experiment.probe_horizon, cfg.experiment.probe_samples,
                                        CounterRng(cfg.seed, 1));
  CsvWriter bcsv(dir / "bprobe.csv", {"t", "envelope"});
  for (std::size_t i = 0; i < pr.t.size(); ++i) bcsv.row({pr.t[i], pr.envelope[i]});

  json j{{"kind", to_string(op.kind)},
         {"dim", op.dim()},
         {"lambda0_re", sp.lambda0.real()},
         {"lambda0_im", sp.lambda0.imag()},
         {"zero_mode_error", sp.zero_mode_error},
         {"discrete_gap", sp.discrete_gap},
         {"omega_b", sp.omega_b},
         {"gap", sp.gap},
         {"kernel_defect", kernel_defect(op, kernel_direction(op, st, cfg.rate, cfg.params))},
         {"adjoint_defect", adjoint_defect(op)},
         {"bprobe", {{"alpha", pr.alpha}, {"C", pr.C}, {"r2", pr.r2}}}};
  if (sp.zero_eigvec_vs_F) j["zero_eigvec_vs_F"] = *sp.zero_eigvec_vs_F;
  write_json(dir / "spectrum.json", j);
  std::printf("gap = %.10g  |lambda0| = %.3g  dim = %d\n", sp.gap, sp.zero_mode_error, op.dim());
  return 0;
}

int cmd_sweep(const RunConfig& cfg)
{
  OutputDir dir(cfg.out);
  write_run_json(dir, "sweep", cfg);
  SweepOptions opt;
  opt.amplitude = cfg.experiment.amplitude;
  opt.transient_frac = cfg.experiment.transient_frac;
  opt.basin_amplitudes = cfg.experiment.basin_amplitudes;
  opt.family = cfg.experiment.initial.family == "random" ? PerturbationFamily::random : PerturbationFamily::cosine;
  opt.seed = cfg.seed;
  const auto rows = regime_sweep(cfg.rate, kernel_of(cfg), cfg.experiment.eps_list, cfg.params, opt);
  CsvWriter csv(dir / "regime.csv",
                {"eps", "M", "M_grid", "kappa", "zeta", "gap", "lambda0", "alpha_fit", "C_fit", "r2", "basin",
                 "root_count", "regime", "flagged", "sandwich_ok", "m_min", "m_max", "f_min", "f_max", "error"});
  int failed = 0;
  for (const auto& r : rows) {
    csv.row({r.eps, r.M, r.M_grid, r.kappa, r.zeta, r.gap, r.lambda0, r.alpha_fit, r.C_fit, r.r2, r.basin,
             (long long)r.root_count, r.regime, (long long)r.flagged, (long long)r.sandwich_ok, r.m_min, r.m_max,
             r.f_min, r.f_max, r.error});
    std::printf("eps = %-10g regime = %-12s gap = %-10.6g alpha = %-10.6g %s\n", r.eps, r.regime.c_str(), r.gap,
                r.alpha_fit, r.error.c_str());
    failed += !r.error.empty();
  }
  return failed == int(rows.size()) ? 3 : 0;
}

int cmd_verify(const RunConfig& cfg)
{
  OutputDir dir(cfg.out);
  write_run_json(dir, "verify", cfg);
  AcceptanceOptions opt;
  opt.seed = cfg.seed;
  opt.out = dir.path();
  const auto rs = run_acceptance(opt);
  bool all = true;
  for (const auto& r : rs) {
    std::printf("[%s] %2d %-36s %s\n", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.detail.c_str());
    all = all && r.passed;
  }
  write_json(dir / "verify_report.json", report_json(rs, cfg.seed));
  return all ? 0 : 4;
}

int cmd_plots(const std::string& out)
{
  const auto r = emit_plots(out);
  for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  for (const auto& s : r.written) std::printf("wrote %s\n", s.c_str());
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"time-elapsed neuron network: steady states, dynamics and spectra"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "print the default config as JSON and exit");

  Common steady, simulate, spectrum, sweep, verify;
  auto* s1 = app.add_subcommand("steady", "steady state (F, M) and its diagnostics");
  add_common(s1, steady);
  auto* s2 = app.add_subcommand("simulate", "run the nonlinear dynamics");
  add_common(s2, simulate);
  auto* s3 = app.add_subcommand("spectrum", "spectrum of the linearized generator");
  add_common(s3, spectrum);
  auto* s4 = app.add_subcommand("sweep", "regime sweep over eps");
  add_common(s4, sweep);
  auto* s5 = app.add_subcommand("verify", "acceptance suite, verify_report.json");
  add_common(s5, verify);
  std::string plots_dir = "results";
  auto* s6 = app.add_subcommand("plots", "write gnuplot scripts for the CSVs in a result directory");
  s6->add_option("--out", plots_dir, "result directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (print_defaults) {
      std::cout << serialize(RunConfig{}) << "\n";
      return 0;
    }
    if (s1->parsed()) return cmd_steady(resolve(steady));
    if (s2->parsed()) return cmd_simulate(resolve(simulate));
    if (s3->parsed()) return cmd_spectrum(resolve(spectrum));
    if (s4->parsed()) return cmd_sweep(resolve(sweep));
    if (s5->parsed()) {
      Common v = verify;
      if (!v.seed && v.config.empty()) v.seed = 7;
      if (v.out.empty() && v.config.empty()) v.out = "verify";
      return cmd_verify(resolve(v));
    }
    if (s6->parsed()) return cmd_plots(plots_dir);
    std::cout << app.help();
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
