#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "cells.hpp"
#include "errors.hpp"
#include "kernel.hpp"
#include "params.hpp"
#include "rate.hpp"
#include "rng.hpp"
#include "steady.hpp"

namespace tenm {

struct DensityState {
  double t = 0.0;
  double dx = 0.0;
  std::vector<double> f;

  int n() const { return int(f.size()); }
  double mass() const
  {
    double s = 0.0;
    for (double v : f) s += v * dx;
    return s;
  }
};

// Samples g at the grid nodes and rescales to unit mass.
template <class G>
DensityState project_density(G&& g, int n, double dx)
{
  DensityState s;
  s.dx = dx;
  s.f.resize(n);
  for (int j = 0; j < n; ++j) s.f[j] = g(j * dx);
  const double m = s.mass();
  if (!(m > 0.0)) throw DomainError("project_density: zero mass");
  for (double& v : s.f) v /= m;
  return s;
}

// Cell averages of 1_{[lo,hi]}, rescaled to unit mass; keeps the jump location exact.
inline DensityState project_indicator(double lo, double hi, int n, double dx)
{
  DensityState s;
  s.dx = dx;
  s.f.resize(n);
  for (int j = 0; j < n; ++j) {
    const double a = j * dx, b = (j + 1) * dx;
    s.f[j] = std::max(0.0, std::min(b, hi) - std::max(a, lo)) / dx;
  }
  const double m = s.mass();
  if (!(m > 0.0)) throw DomainError("project_indicator: empty support");
  for (double& v : s.f) v /= m;
  return s;
}

struct ClosureStats {
  long solves = 0;
  long iterations = 0;
  int max_iterations = 0;
};

// p(t - k dt), k = 0..K, newest first, with the kernel's product-trapezoid weights
class ActivityHistory {
public:
  ActivityHistory() : w_{1.0}, buf_(1, 0.0) {}
  ActivityHistory(const DelayKernel& kernel, double dt, double pre_history)
    : w_(kernel.weights(dt)), buf_(w_.size(), pre_history) {}

  const std::vector<double>& weights() const { return w_; }
  std::size_t size() const { return buf_.size(); }
  double operator[](std::size_t k) const { return buf_[k]; }

  // m(t) = sum_k w_k p(t - y_k); Dirac is the single term k = 0
  double activity() const
  {
    if (w_.size() == 1) return buf_[0];
    double s = 0.0;
    for (std::size_t k = 0; k < w_.size(); ++k) s += w_[k] * buf_[k];
    return s;
  }

  // the part of the sum that is already known before p(t) is: sum_{k>=1} w_k p(t - k dt)
  double lagged() const
  {
    double s = 0.0;
    for (std::size_t k = 1; k < w_.size(); ++k) s += w_[k] * buf_[k];
    return s;
  }

  void set_current(double p) { buf_[0] = p; }
  // shift by one step; the slot for the new current value is filled with the last one
  void advance()
  {
    buf_.push_front(buf_.front());
    buf_.pop_back();
  }

private:
  std::vector<double> w_;
  std::deque<double> buf_;
};

namespace detail {

// Solve m = w0 P(eps m) + H. Smooth: damped Picard; Step: bisection on a scanned bracket,
// keeping the root nearest `warm`.
inline double solve_closure(const DischargeFunction& P, const FiringRateModel& model, double eps, double w0,
                            double H, double mass, double warm, double tol, ClosureStats* stats)
{
  auto g = [&](double m) { return w0 * P(eps * m) + H; };
  int iters = 0;
  double m;
  if (model.is_constant() || eps == 0.0) {
    m = g(0.0);
    iters = 1;
  } else if (model.is_smooth()) {
    m = std::isfinite(warm) && warm > 0.0 ? warm : g(model.a0() * mass);
    double theta = 1.0;
    double prev_res = INFINITY;
    bool ok = false;
    for (iters = 1; iters <= 1000; ++iters) {
      const double gm = g(m);
      const double res = std::abs(gm - m);
      if (res <= tol * std::max(1.0, std::abs(m))) {
        m = gm;
        ok = true;
        break;
      }
      if (res > prev_res) theta *= 0.5;
      prev_res = res;
      m += theta * (gm - m);
    }
    if (!ok)
      throw ClosureFailure("closure: damped fixed point did not converge in 1e3 iterations (m=" +
                           std::to_string(m) + ")");
  } else {
    const double top = w0 * mass * model.a1() + H;
    auto h = [&](double x) { return g(x) - x; };
    const int scan = 32;
    double best = NAN, best_dist = INFINITY;
    double lo = 0.0, hlo = h(0.0);
    if (hlo == 0.0) best = 0.0, best_dist = std::abs(warm);
    for (int i = 1; i <= scan; ++i) {
      const double hi = top * double(i) / scan;
      const double hhi = h(hi);
      if (hhi == 0.0 || (hhi > 0.0) != (hlo > 0.0)) {
        const double r = hhi == 0.0 ? hi : bisect(h, lo, hi, 0.0);
        const double d = std::isfinite(warm) ? std::abs(r - warm) : double(i);
        if (d < best_dist) best = r, best_dist = d;
      }
      lo = hi;
      hlo = hhi;
    }
    if (!std::isfinite(best)) throw ClosureFailure("closure: no root of the step closure on [0, top]");
    m = best;
    iters = 200;
  }
  if (stats) {
    ++stats->solves;
    stats->iterations += iters;
    stats->max_iterations = std::max(stats->max_iterations, iters);
  }
  return m;
}

} // namespace detail

inline double activity_no_delay(const DensityState& state, const FiringRateModel& model, double eps,
                                const ModelParams& params, double warm = NAN, ClosureStats* stats = nullptr)
{
  const double mass = state.mass();
  if (!(mass > 0.0)) throw DomainError("activity_no_delay: state has no mass");
  RateCells cells(model, state.n(), state.dx);
  DischargeFunction P(cells, state.f);
  return detail::solve_closure(P, model, eps, 1.0, 0.0, mass, warm, params.tol_fixed_point, stats);
}

inline double activity_delay(const ActivityHistory& history) { return history.activity(); }

struct StepDiagnostics {
  double m = 0.0;     // activity used over the step
  double p = 0.0;     // discharge at the start of the step
  double drift = 0.0; // relative mass change before renormalization
  double factor = 1.0;
};

// Exact transport for dt = dx with cohort survival; births go to cell 0, the last cell
// keeps its survivors. The rate is frozen at u = eps m over the step.
inline DensityState advance_cohorts(const DensityState& s, const RateCells& cells, double u,
                                    StepDiagnostics* diag = nullptr)
{
  const int n = s.n();
  std::vector<double> inc;
  cells.increments(u, inc);
  DensityState next;
  next.dx = s.dx;
  next.t = s.t + s.dx;
  next.f.assign(n, 0.0);
  double births = 0.0;
  for (int j = 0; j < n; ++j) {
    const double fire = -std::expm1(-inc[j]);
    const double stay = s.f[j] * (1.0 - fire);
    births += s.f[j] * fire;
    if (j + 1 < n) next.f[j + 1] += stay;
    else next.f[j] += stay;
  }
  next.f[0] += births;
  const double before = s.mass();
  const double after = next.mass();
  for (double v : next.f)
    if (!std::isfinite(v) || v < 0.0) throw IntegratorFault("step: non-finite or negative density");
  const double factor = before / after;
  for (double& v : next.f) v *= factor;
  if (diag) {
    diag->drift = after / before - 1.0;
    diag->factor = factor;
  }
  return next;
}

inline DensityState step_advance(const DensityState& state, ActivityHistory& history, const FiringRateModel& model,
                                 double eps, const ModelParams& params, StepDiagnostics* diag = nullptr,
                                 ClosureStats* stats = nullptr)
{
  if (std::abs(state.dx - params.dt()) > 1e-14 * params.dt()) throw DomainError("step_advance: dt must equal dx");
  RateCells cells(model, state.n(), state.dx);
  DischargeFunction P(cells, state.f);
  const double w0 = history.weights()[0];
  const double m = detail::solve_closure(P, model, eps, w0, history.lagged(), state.mass(), history.activity(),
                                         params.tol_fixed_point, stats);
  const double p = P(eps * m);
  history.set_current(p);
  auto next = advance_cohorts(state, cells, eps * m, diag);
  history.advance();
  if (diag) {
    diag->m = m;
    diag->p = p;
  }
  return next;
}

struct Snapshot {
  double t = 0.0;
  std::vector<double> f; // pointwise values, reservoir read as the start of its tail
};

struct Trajectory {
  std::vector<double> t, m, p, mass, dist;
  std::vector<Snapshot> snapshots;
  double max_drift = 0.0;       // max |relative mass change| before renormalization
  double cumulative_factor = 1.0; // product of renormalization factors
  ClosureStats closure;
  double f_min = INFINITY, f_max = -INFINITY; // pointwise, over every step
  double m_min = INFINITY, m_max = -INFINITY;
  bool completed = false;
  std::string error;
  DensityState last;
};

struct RunOptions {
  int snapshot_stride = 0;              // 0: no snapshots
  const SteadyState* steady = nullptr;  // reference for dist_L1 and pre-history
  std::optional<double> pre_history;    // discharge for t < 0
};

namespace detail {

inline void check_initial(const DensityState& f0, const FiringRateModel& model, int n)
{
  if (f0.n() != n) throw DomainError("run: initial density has the wrong grid size");
  for (double v : f0.f)
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("run: initial density must be finite and >= 0");
  if (std::abs(f0.mass() - 1.0) > 1e-10) throw DomainError("run: initial density must have unit mass");
  if (model.is_step()) {
    for (int j = 0; j + 1 < n; ++j)
      if (f0.f[j] > 1.0 + 1e-10) throw DomainError("run: step-rate runs need 0 <= f0 <= 1");
  }
}

inline Trajectory run_impl(DensityState state, const FiringRateModel& model, const DelayKernel* kernel,
                           const ModelParams& params, const RunOptions& opt)
{
  params.validate();
  detail::check_initial(state, model, params.n);
  const double eps = params.eps;
  const double dx = params.dx();
  RateCells cells(model, params.n, dx);
  Trajectory tr;

  double pre = 0.0;
  if (opt.pre_history) pre = *opt.pre_history;
  else if (opt.steady) pre = opt.steady->M_grid;
  else pre = activity_no_delay(state, model, eps, params);
  ActivityHistory history = kernel ? ActivityHistory(*kernel, params.dt(), pre) : ActivityHistory();
  if (!kernel) history.set_current(pre);

  const int steps = params.steps();
  std::vector<double> inc;
  for (int n = 0; n <= steps; ++n) {
    try {
      DischargeFunction P(cells, state.f);
      const double w0 = history.weights()[0];
      const double m = detail::solve_closure(P, model, eps, w0, history.lagged(), state.mass(), history.activity(),
                                             params.tol_fixed_point, &tr.closure);
      const double u = eps * m;
      const double p = P(u);
      history.set_current(p);

      tr.t.push_back(state.t);
      tr.m.push_back(m);
      tr.p.push_back(p);
      tr.mass.push_back(state.mass());
      if (opt.steady) {
        double d = 0.0;
        for (int j = 0; j < params.n; ++j) d += std::abs(state.f[j] - opt.steady->F[j]) * dx;
        tr.dist.push_back(d);
      }
      cells.increments(u, inc);
      const bool snap = opt.snapshot_stride > 0 && n % opt.snapshot_stride == 0;
      Snapshot sn;
      if (snap) {
        sn.t = state.t;
        sn.f = state.f;
      }
      for (int j = 0; j < params.n; ++j) {
        const double v = j + 1 < params.n ? state.f[j] : cells.reservoir_point(state.f[j], inc[j]);
        tr.f_min = std::min(tr.f_min, v);
        tr.f_max = std::max(tr.f_max, v);
        if (snap) sn.f[j] = v;
      }
      if (snap) tr.snapshots.push_back(std::move(sn));
      tr.m_min = std::min(tr.m_min, m);
      tr.m_max = std::max(tr.m_max, m);
      if (n == steps) break;

      StepDiagnostics diag;
      state = advance_cohorts(state, cells, u, &diag);
      history.advance();
      tr.max_drift = std::max(tr.max_drift, std::abs(diag.drift));
      tr.cumulative_factor *= diag.factor;
    } catch (const Error& e) {
      tr.error = e.what();
      tr.last = state;
      return tr;
    }
  }
  tr.completed = true;
  tr.last = std::move(state);
  return tr;
}

} // namespace detail

// No-delay closure m = p.
inline Trajectory run(const DensityState& f0, const FiringRateModel& model, const ModelParams& params,
                      const RunOptions& opt = {})
{
  return detail::run_impl(f0, model, nullptr, params, opt);
}

// Delayed closure m = int p(t - y) b(dy). A Dirac kernel goes through the same closure call.
inline Trajectory run(const DensityState& f0, const FiringRateModel& model, const DelayKernel& kernel,
                      const ModelParams& params, const RunOptions& opt = {})
{
  return detail::run_impl(f0, model, &kernel, params, opt);
}

struct ContractionResult {
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  int pairs = 0;
};

namespace detail {

// J(m) on t_i = i h, i = 0..K, for a piecewise-constant path given per fine step.
// Old ages follow their characteristics from f0; newborns use a trapezoid in the birth time.
inline std::vector<double> contraction_map(const FiringRateModel& model, double eps, const DensityState& f0,
                                           const std::vector<double>& path, double h,
                                           const std::vector<double>& w, double pre)
{
  const int K = int(path.size()) - 1;
  const int n = f0.n();
  const double dx = f0.dx;
  std::vector<double> p(K + 1, 0.0), logS_old(n, 0.0);
  std::vector<double> logS_new; // cohort born at t_k, survival up to current t_i
  for (int i = 0; i <= K; ++i) {
    const double t = i * h;
    const double u = eps * path[i];
    if (i > 0) {
      const double up = eps * path[i - 1];
      for (int j = 0; j < n; ++j) logS_old[j] += model.increment(j * dx + t - h, h, up);
      for (int k = 0; k < i; ++k)
        logS_new[k] += model.increment((i - 1 - k) * h, h, up);
    }
    double old = 0.0;
    for (int j = 0; j < n; ++j) old += f0.f[j] * std::exp(-logS_old[j]) * model.increment(j * dx + t, dx, u);
    double fresh = 0.0;
    for (int k = 0; k < i; ++k) {
      const double wk = k == 0 ? 0.5 : 1.0;
      fresh += wk * h * model.rate((i - k) * h, u) * p[k] * std::exp(-logS_new[k]);
    }
    const double self = i > 0 ? 0.5 * h * model.rate(0.0, u) : 0.0;
    p[i] = (old + fresh) / (1.0 - self);
    logS_new.push_back(0.0);
  }
  if (w.size() == 1) return p;
  std::vector<double> J(K + 1, 0.0);
  for (int i = 0; i <= K; ++i)
    for (std::size_t l = 0; l < w.size(); ++l) J[i] += w[l] * (int(l) <= i ? p[i - l] : pre);
  return J;
}

} // namespace detail

// max ||J(m1) - J(m2)||_inf / ||m1 - m2||_inf over random piecewise-constant paths on [0,T].
// Paths take values in [a_lo/2, a1], a_lo the smallest activity a unit-mass density can produce.
inline ContractionResult contraction_probe(const FiringRateModel& model, double eps, const DensityState& f0,
                                           double T, int samples, CounterRng rng,
                                           const DelayKernel* kernel = nullptr, int fine_steps = 64,
                                           int pieces = 5)
{
  if (samples < 1) throw DomainError("contraction_probe: samples must be positive");
  const double h = T / fine_steps;
  const double lo = 0.5 * (model.is_step() ? 1.0 - model.step().sigma_plus : model.a0());
  const double hi = model.a1();
  const std::vector<double> w = kernel ? kernel->weights(h) : std::vector<double>{1.0};
  const double pre = 0.5 * (lo + hi);
  auto draw = [&]() {
    std::vector<double> vals(pieces);
    for (double& v : vals) v = rng.uniform(lo, hi);
    std::vector<double> path(fine_steps + 1);
    for (int i = 0; i <= fine_steps; ++i) path[i] = vals[std::min(pieces - 1, i * pieces / (fine_steps + 1))];
    return path;
  };
  ContractionResult res;
  double sum = 0.0;
  for (int s = 0; s < samples; ++s) {
    const auto m1 = draw();
    const auto m2 = draw();
    double dm = 0.0;
    for (int i = 0; i <= fine_steps; ++i) dm = std::max(dm, std::abs(m1[i] - m2[i]));
    if (dm < 1e-14) continue;
    const auto J1 = detail::contraction_map(model, eps, f0, m1, h, w, pre);
    const auto J2 = detail::contraction_map(model, eps, f0, m2, h, w, pre);
    double dJ = 0.0;
    for (int i = 0; i <= fine_steps; ++i) dJ = std::max(dJ, std::abs(J1[i] - J2[i]));
    const double r = dJ / dm;
    res.max_ratio = std::max(res.max_ratio, r);
    sum += r;
    ++res.pairs;
  }
  res.mean_ratio = res.pairs ? sum / res.pairs : 0.0;
  return res;
}

} // namespace tenm
