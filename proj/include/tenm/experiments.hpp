#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kernel.hpp"
#include "linear.hpp"
#include "params.hpp"
#include "rate.hpp"
#include "rng.hpp"
#include "steady.hpp"
#include "transport.hpp"

namespace tenm {

struct DecayFit {
  double C = 0.0;
  double alpha = 0.0;
  double r2 = 0.0;
  int points = 0;
};

// Least squares on (t, log d) for t >= transient_cut; samples below 1e-13 are dropped.
inline DecayFit decay_rate_fit(const std::vector<double>& t, const std::vector<double>& d, double transient_cut)
{
  if (t.size() != d.size()) throw DomainError("decay_rate_fit: series lengths differ");
  double St = 0, Sy = 0, Stt = 0, Sty = 0, Syy = 0;
  int cnt = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < transient_cut || !(d[i] >= 1e-13) || !std::isfinite(d[i])) continue;
    const double y = std::log(d[i]);
    St += t[i];
    Sy += y;
    Stt += t[i] * t[i];
    Sty += t[i] * y;
    Syy += y * y;
    ++cnt;
  }
  if (cnt < 20) throw NumericError("decay_rate_fit: fewer than 20 usable points after the transient cut");
  const double vt = Stt - St * St / cnt, vy = Syy - Sy * Sy / cnt, cty = Sty - St * Sy / cnt;
  if (!(vt > 0.0)) throw NumericError("decay_rate_fit: degenerate time axis");
  DecayFit f;
  f.alpha = cty / vt;
  f.C = std::exp((Sy - f.alpha * St) / cnt);
  f.r2 = vy > 0.0 ? cty * cty / (vt * vy) : 1.0;
  f.points = cnt;
  return f;
}

// eps sup_x |d_mu a(x, eps mu)| at mu, or eps |sigma'(eps mu)| for Step
inline double zeta_modulus(const FiringRateModel& model, double eps, double mu)
{
  if (model.is_constant()) return 0.0;
  const double u = eps * mu;
  if (model.is_step()) return eps * std::abs(model.step().sigma_du(u));
  const auto& s = model.smooth();
  return eps * std::abs(s.a1 - s.a0) * s.shape_du(u); // the ramp tends to 1
}

enum class PerturbationFamily { cosine, random };

// f0 proportional to F (1 + A phi), clipped to the admissible range and renormalized.
// cosine: phi = cos(2 pi x / x_max); random: four cosine modes with random phases, sup |phi| <= 1.
inline DensityState perturbed_start(const SteadyState& st, const FiringRateModel& model, const ModelParams& params,
                                    double amplitude, PerturbationFamily family = PerturbationFamily::cosine,
                                    std::uint64_t seed = 0)
{
  const int n = st.n();
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> phase(4, 0.0);
  if (family == PerturbationFamily::random) {
    CounterRng rng(seed, 0x7065727475726221ULL);
    for (double& p : phase) p = rng.uniform(0.0, two_pi);
  }
  DensityState s;
  s.dx = st.dx;
  s.f.resize(n);
  for (int j = 0; j < n; ++j) {
    const double x = j * st.dx;
    double phi = 0.0;
    if (family == PerturbationFamily::cosine) {
      phi = std::cos(two_pi * x / params.x_max);
    } else {
      for (int k = 0; k < 4; ++k) phi += 0.25 * std::cos((k + 1) * two_pi * x / params.x_max + phase[k]);
    }
    s.f[j] = std::max(0.0, st.F[j] * (1.0 + amplitude * phi));
  }
  const double m = s.mass();
  for (double& v : s.f) v /= m;
  if (model.is_step())
    for (int j = 0; j + 1 < n; ++j) s.f[j] = std::min(s.f[j], 1.0);
  const double m2 = s.mass();
  for (double& v : s.f) v /= m2;
  return s;
}

inline Trajectory run_with(const DensityState& f0, const FiringRateModel& model, const DelayKernel* kernel,
                           const ModelParams& params, const RunOptions& opt)
{
  return kernel ? run(f0, model, *kernel, params, opt) : run(f0, model, params, opt);
}

struct SandwichCheck {
  bool ok = true;
  double f_min = 0.0, f_max = 0.0, m_min = 0.0, m_max = 0.0;
};

// 0 <= f <= 1 and 1 - sigma_+ <= m <= 1 along a Step trajectory
inline SandwichCheck step_sandwich(const Trajectory& tr, const FiringRateModel& model)
{
  SandwichCheck c;
  c.f_min = tr.f_min;
  c.f_max = tr.f_max;
  c.m_min = tr.m_min;
  c.m_max = tr.m_max;
  if (!model.is_step()) return c;
  const double lo = 1.0 - model.step().sigma_plus;
  c.ok = tr.completed && tr.f_min >= 0.0 && tr.f_max <= 1.0 + 1e-10 && tr.m_min >= lo - 1e-8 && tr.m_max <= 1.0 + 1e-8;
  return c;
}

struct BasinResult {
  double largest = 0.0;
  std::vector<double> amplitudes, alpha, r2;
  std::vector<bool> decaying;
};

inline BasinResult basin_probe(const SteadyState& st, const FiringRateModel& model, const DelayKernel* kernel,
                               const ModelParams& params, const std::vector<double>& amplitudes,
                               double transient_cut, PerturbationFamily family = PerturbationFamily::cosine,
                               std::uint64_t seed = 0)
{
  BasinResult b;
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    if (i > 0 && amplitudes[i] < amplitudes[i - 1]) throw DomainError("basin_probe: amplitudes must be ascending");
    const double A = amplitudes[i];
    bool dec = false;
    double al = 0.0, r2 = 1.0;
    if (A == 0.0) {
      dec = true; // distance stays at roundoff
    } else {
      RunOptions opt;
      opt.steady = &st;
      const auto tr = run_with(perturbed_start(st, model, params, A, family, seed), model, kernel, params, opt);
      if (tr.completed) {
        try {
          const auto fit = decay_rate_fit(tr.t, tr.dist, transient_cut);
          al = fit.alpha;
          r2 = fit.r2;
          dec = fit.alpha < 0.0 && fit.r2 >= 0.9;
        } catch (const NumericError&) {
          // converged to the floor before enough samples: decayed
          dec = tr.dist.back() < 1e-13;
          al = NAN;
          r2 = NAN;
        }
      }
    }
    b.amplitudes.push_back(A);
    b.alpha.push_back(al);
    b.r2.push_back(r2);
    b.decaying.push_back(dec);
    if (dec) b.largest = A;
  }
  return b;
}

struct RegimeRow {
  double eps = 0.0;
  double M = 0.0;
  double M_grid = 0.0;
  double kappa = 0.0;
  double zeta = 0.0;
  double gap = NAN;
  double lambda0 = NAN;
  double alpha_fit = NAN;
  double C_fit = NAN;
  double r2 = NAN;
  double basin = NAN;
  int root_count = 0;
  std::string regime = "intermediate"; // weak | strong | intermediate
  bool flagged = false;
  bool sandwich_ok = true;
  double m_min = NAN, m_max = NAN, f_min = NAN, f_max = NAN;
  std::vector<double> t, dist; // perturbed run
  std::string error;

  double gap_mismatch() const { return std::abs(alpha_fit + gap) / gap; }
};

struct SweepOptions {
  double amplitude = 0.05;
  double transient_frac = 0.2;
  std::vector<double> basin_amplitudes{0.0, 0.05, 0.1, 0.2, 0.4};
  bool spectrum = true;
  PerturbationFamily family = PerturbationFamily::cosine;
  std::uint64_t seed = 0;
};

inline OperatorMatrix assemble_for(const SteadyState& st, const FiringRateModel& model, const DelayKernel* kernel,
                                   const ModelParams& params, OperatorPart part = OperatorPart::full)
{
  const bool delay = kernel && !kernel->is_dirac();
  if (model.is_step()) return assemble_step(st, model, params, delay, delay ? kernel : nullptr, part);
  if (delay) return assemble_delay_block(st, model, *kernel, params, part);
  return assemble_smooth_nodelay(st, model, params, part);
}

inline RegimeRow regime_row(const FiringRateModel& model, const DelayKernel* kernel, double eps,
                            const ModelParams& base, const SweepOptions& opt)
{
  RegimeRow row;
  row.eps = eps;
  try {
    ModelParams params = base;
    params.eps = eps;
    const auto st = solve_steady(model, params);
    row.M = st.M;
    row.M_grid = st.M_grid;
    row.kappa = st.kappa;
    row.root_count = int(st.roots.size());
    row.zeta = zeta_modulus(model, eps, st.M);
    if (row.zeta < 0.5) {
      row.flagged = true;
      row.regime = eps <= 1.0 ? "weak" : "strong";
    }
    if (opt.spectrum) {
      const auto sp = compute_spectrum(assemble_for(st, model, kernel, params));
      row.gap = sp.gap;
      row.lambda0 = std::abs(sp.lambda0);
    }
    const double cut = opt.transient_frac * params.t_end;
    RunOptions ro;
    ro.steady = &st;
    const auto tr = run_with(perturbed_start(st, model, params, opt.amplitude, opt.family, opt.seed), model, kernel,
                             params, ro);
    row.t = tr.t;
    row.dist = tr.dist;
    const auto sw = step_sandwich(tr, model);
    row.sandwich_ok = sw.ok;
    row.m_min = sw.m_min;
    row.m_max = sw.m_max;
    row.f_min = sw.f_min;
    row.f_max = sw.f_max;
    if (!tr.completed) throw NumericError("perturbed run: " + tr.error);
    const auto fit = decay_rate_fit(tr.t, tr.dist, cut);
    row.alpha_fit = fit.alpha;
    row.C_fit = fit.C;
    row.r2 = fit.r2;
    row.basin = basin_probe(st, model, kernel, params, opt.basin_amplitudes, cut, opt.family, opt.seed).largest;
  } catch (const Error& e) {
    row.error = e.what();
  }
  return row;
}

// One row per eps, in input order; a failing eps is recorded in its row.
inline std::vector<RegimeRow> regime_sweep(const FiringRateModel& model, const DelayKernel* kernel,
                                           const std::vector<double>& eps_list, const ModelParams& params,
                                           const SweepOptions& opt = {})
{
  if (!std::is_sorted(eps_list.begin(), eps_list.end())) throw DomainError("regime_sweep: eps list must be sorted");
  std::vector<RegimeRow> rows;
  rows.reserve(eps_list.size());
  for (double eps : eps_list) rows.push_back(regime_row(model, kernel, eps, params, opt));
  return rows;
}

struct OracleComparison {
  std::vector<double> t, error;
  double max_error = 0.0;
};

// Constant rate against the characteristics solution of the projected datum, compared at
// the nodes: f = f0(x - t) e^{-a0 t} for x >= t, p e^{-a0 x} with p = a0 mass for x < t.
// The reservoir node is compared through the exact mass beyond x_{n-1}.
inline OracleComparison oracle_compare_constant_rate(const DensityState& f0, double a0, const ModelParams& params)
{
  const FiringRateModel model(ConstantRate{a0});
  const int n = params.n;
  const double dx = params.dx();
  const auto tr = run(f0, model, params, RunOptions{1, nullptr, std::nullopt});
  if (!tr.completed) throw NumericError("oracle_compare_constant_rate: " + tr.error);
  const double mass = f0.mass();
  const double p = a0 * mass;
  const double xr = (n - 1) * dx;
  OracleComparison out;
  for (std::size_t s = 0; s < tr.snapshots.size(); ++s) {
    const int k = int(s); // stride 1: snapshot s is step s
    const double t = k * dx;
    double err = 0.0;
    for (int j = 0; j + 1 < n; ++j) {
      const double x = j * dx;
      const double ex = j >= k ? f0.f[j - k] * std::exp(-a0 * t) : p * std::exp(-a0 * x);
      err += std::abs(tr.snapshots[s].f[j] - ex) * dx;
    }
    // reservoir: compare masses on [x_{n-1}, inf)
    double res = 0.0;
    for (int i = std::max(0, n - 1 - k); i < n; ++i) res += f0.f[i] * dx;
    res *= std::exp(-a0 * t);
    if (t > xr) res += mass * (std::exp(-a0 * xr) - std::exp(-a0 * t));
    const double sim_res = tr.snapshots[s].f[n - 1] * dx / (-std::expm1(-a0 * dx));
    err += std::abs(sim_res - res);
    out.t.push_back(t);
    out.error.push_back(err);
    out.max_error = std::max(out.max_error, err);
  }
  return out;
}

} // namespace tenm
