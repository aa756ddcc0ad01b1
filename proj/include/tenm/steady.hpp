#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cells.hpp"
#include "errors.hpp"
#include "kernel.hpp"
#include "params.hpp"
#include "rate.hpp"

namespace tenm {

struct SteadyState {
  double eps = 0.0;
  double M = 0.0;       // continuum activity, Psi(eps, M) = 1
  double M_grid = 0.0;  // closure activity of F on the grid
  std::vector<double> F; // grid density, unit mass, exact fixed point of the scheme
  double kappa = 0.0;
  double sigma_eps = 0.0; // Step only
  double residual = 0.0;
  std::vector<double> roots; // all sign changes found on the scan, ascending
  double envelope_K = 0.0;   // F_j <= K e^{-a0 x_j/2}
  bool envelope_ok = true;
  double dx = 0.0;
  std::vector<std::string> warnings;

  int n() const { return int(F.size()); }
  double mass() const
  {
    double s = 0.0;
    for (double v : F) s += v * dx;
    return s;
  }
};

// Psi(eps, m) = m int_0^inf e^{-A(x, eps m)} dx, integral past x_max taken as the exact
// exponential tail at the rate a(x_max, eps m)
inline double psi_eval(const FiringRateModel& model, double eps, double m, double x_max = 20.0)
{
  if (!(m >= 0.0)) throw DomainError("psi_eval: m must be >= 0");
  if (m == 0.0) return 0.0;
  const double u = eps * m;
  if (model.is_constant()) return m / model.a0();
  if (model.is_step()) return m * (1.0 + model.step().sigma(u));
  auto e = [&](double x) { return std::exp(-model.cumulative(x, u)); };
  double I = 0.0;
  const double cuts[] = {0.0, 0.5, 2.0, 6.0, x_max};
  for (int i = 0; i + 1 < 5; ++i) {
    const double a = std::min(cuts[i], x_max), b = std::min(cuts[i + 1], x_max);
    I += detail::integrate(e, a, b, 1e-13);
  }
  I += e(x_max) / model.rate(x_max, u);
  return m * I;
}

namespace detail {

// bisection to roundoff on a sign change of h over [lo, hi]
template <class H>
double bisect(H&& h, double lo, double hi, double tol)
{
  double hlo = h(lo);
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double hm = h(mid);
    if ((hm > 0.0) == (hlo > 0.0)) {
      lo = mid;
      hlo = hm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// E_j = exp(-sum_{k<j} inc_k), last entry lumped with its exponential tail
inline std::vector<double> steady_profile(const std::vector<double>& inc)
{
  const int n = int(inc.size());
  std::vector<double> E(n);
  double A = 0.0;
  for (int j = 0; j < n; ++j) {
    E[j] = std::exp(-A);
    A += inc[j];
  }
  E[n - 1] /= -std::expm1(-inc[n - 1]);
  return E;
}

} // namespace detail

// Grid steady profile at effective input u, normalized to unit mass.
inline std::vector<double> steady_density_at(const RateCells& cells, double u)
{
  auto E = detail::steady_profile(cells.increments(u));
  double Z = 0.0;
  for (double v : E) Z += v * cells.dx();
  for (double& v : E) v /= Z;
  return E;
}

// L1 norm of D+F + a(., eps M) F over interior nodes; for Step the node whose upwind cell
// contains sigma is skipped.
inline double steady_residual(const SteadyState& st, const FiringRateModel& model, double eps)
{
  const int n = st.n();
  const double dx = st.dx;
  const double M = st.M_grid > 0.0 ? st.M_grid : st.M;
  const double u = eps * M;
  double sg = -1.0;
  if (model.is_step()) sg = model.step().sigma(u);
  double r = 0.0;
  for (int j = 1; j < n - 1; ++j) {
    const double x = j * dx;
    if (model.is_step() && (j - 1) * dx < sg && sg <= x) continue;
    r += std::abs((st.F[j] - st.F[j - 1]) / dx + model.rate(x, u) * st.F[j]) * dx;
  }
  return r;
}

inline SteadyState solve_steady(const FiringRateModel& model, const ModelParams& params)
{
  params.validate();
  const double eps = params.eps;
  const double tol = params.tol_root;
  SteadyState st;
  st.eps = eps;
  st.dx = params.dx();

  // continuum roots: scan Psi - 1 on 256 subintervals of [0, a1 + 1]
  auto h = [&](double m) { return psi_eval(model, eps, m, params.x_max) - 1.0; };
  const double top = model.a1() + 1.0;
  const int scan = 256;
  double prev_m = 0.0, prev_h = h(0.0);
  for (int i = 1; i <= scan; ++i) {
    const double m = top * double(i) / scan;
    const double hm = h(m);
    if (hm == 0.0) {
      st.roots.push_back(m);
    } else if ((hm > 0.0) != (prev_h > 0.0) && prev_h != 0.0) {
      st.roots.push_back(detail::bisect(h, prev_m, m, 1e-3 * tol));
    }
    prev_m = m;
    prev_h = hm;
  }
  if (st.roots.empty()) throw BracketFailure("solve_steady: Psi - 1 has no sign change on [0, a1 + 1]");
  if (st.roots.size() > 1) st.warnings.push_back("multiple steady roots found; smallest is canonical");

  if (model.is_step()) {
    // damped fixed point on M = 1/(1 + sigma(eps M)), started at the canonical scan root
    const auto& s = model.step();
    double M = st.roots.front();
    bool done = false;
    for (int it = 0; it < 10000; ++it) {
      const double g = 1.0 / (1.0 + s.sigma(eps * M));
      if (std::abs(g - M) <= 0.1 * tol) {
        M = g;
        done = true;
        break;
      }
      M += 0.5 * (g - M);
    }
    if (!done) throw DivergenceError("solve_steady: step fixed point did not converge in 1e4 iterations");
    st.M = M;
  } else {
    st.M = st.roots.front();
  }

  // grid-consistent pair: m = sum_j F(eps m)_j inc_j(eps m)
  RateCells cells(model, params.n, params.dx());
  auto closure_gap = [&](double m) {
    const auto F = steady_density_at(cells, eps * m);
    return DischargeFunction(cells, F)(eps * m) - m;
  };
  double lo = std::max(0.0, st.M - 0.05 * std::max(st.M, 1.0));
  double hi = st.M + 0.05 * std::max(st.M, 1.0);
  if ((closure_gap(lo) > 0.0) == (closure_gap(hi) > 0.0)) {
    lo = 0.0;
    hi = top;
  }
  st.M_grid = model.is_constant() ? closure_gap(st.M) + st.M : detail::bisect(closure_gap, lo, hi, 0.0);
  const double u = eps * st.M_grid;
  st.F = steady_density_at(cells, u);

  if (model.is_step()) {
    st.sigma_eps = model.step().sigma(u);
    st.kappa = 0.0;
  } else {
    const auto dinc = cells.increments_du(u);
    for (int j = 0; j < params.n; ++j) st.kappa += eps * dinc[j] * st.F[j];
  }
  st.residual = steady_residual(st, model, eps);

  // envelope constant fitted on the first half of the domain, then checked everywhere
  const double a0 = model.a0();
  for (int j = 0; j < params.n / 2; ++j)
    st.envelope_K = std::max(st.envelope_K, st.F[j] * std::exp(0.5 * a0 * j * st.dx));
  for (int j = 0; j < params.n - 1; ++j)
    if (st.F[j] > st.envelope_K * std::exp(-0.5 * a0 * j * st.dx) * (1.0 + 1e-12)) st.envelope_ok = false;

  const double tail = cells.reservoir_point(st.F.back(), cells.increments(u).back());
  if (!(st.F[params.n - 2] < 1e-8 * st.F[0]) && !(tail < 1e-8 * st.F[0]))
    st.warnings.push_back("x_max too short: F(x_max) >= 1e-8 F(0)");
  return st;
}

// dF/ds of the grid steady family with mass s at s = 1; the kernel direction of the
// linearization. Equals F when the rate does not depend on the activity.
inline std::vector<double> steady_mass_derivative(const SteadyState& st, const FiringRateModel& model,
                                                  const ModelParams& params)
{
  if (model.is_constant() || model.is_step() || st.eps == 0.0) return st.F;
  RateCells cells(model, params.n, params.dx());
  const int n = params.n;
  const double dx = params.dx();
  const double eps = st.eps;
  const double u = eps * st.M_grid;
  const auto inc = cells.increments(u);
  const auto dinc = cells.increments_du(u);

  // unnormalized profile and its u-derivative
  std::vector<double> E(n), dE(n);
  double A = 0.0, dA = 0.0;
  for (int j = 0; j < n; ++j) {
    E[j] = std::exp(-A);
    dE[j] = -dA * E[j];
    A += inc[j];
    dA += dinc[j];
  }
  {
    const double q = -std::expm1(-inc[n - 1]);       // 1 - e^{-inc}
    const double dq = std::exp(-inc[n - 1]) * dinc[n - 1];
    dE[n - 1] = dE[n - 1] / q - E[n - 1] * dq / (q * q);
    E[n - 1] /= q;
  }
  double Z = 0.0, dZ = 0.0;
  for (int j = 0; j < n; ++j) {
    Z += E[j] * dx;
    dZ += dE[j] * dx;
  }
  std::vector<double> dF(n);
  for (int j = 0; j < n; ++j) dF[j] = (dE[j] * Z - E[j] * dZ) / (Z * Z);

  // m_s = s c(u_s), u_s = eps m_s  =>  du/ds = eps c / (1 - eps c')
  double c = 0.0, dc = 0.0;
  for (int j = 0; j < n; ++j) {
    c += st.F[j] * inc[j];
    dc += dF[j] * inc[j] + st.F[j] * dinc[j];
  }
  const double du = eps * c / (1.0 - eps * dc);
  std::vector<double> G(n);
  for (int j = 0; j < n; ++j) G[j] = st.F[j] + dF[j] * du;
  return G;
}

} // namespace tenm
