#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "rate.hpp"

namespace tenm {

template <class R>
concept RateFunction = requires(const R& r, double x, double u) {
  { r.rate(x, u) } -> std::convertible_to<double>;
};

template <class R>
concept HasRateDerivative = requires(const R& r, double x, double u) {
  { r.rate_du(x, u) } -> std::convertible_to<double>;
};

struct ZetaSample {
  double eps = 0.0;
  double mu_proxy = 0.0;
  double zeta_at_proxy = 0.0; // eps sup_x d_mu a(x, eps mu) at mu = proxy
  double zeta_at_one = 0.0;   // same at mu = 1
};

struct AssumptionReport {
  std::vector<std::string> violations;
  std::vector<ZetaSample> zeta;
  double rate_min = 0.0;
  double rate_max = 0.0;

  bool ok() const { return violations.empty(); }
};

namespace detail {

inline std::vector<double> age_lattice(double x_hi = 40.0, int n = 801)
{
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = x_hi * double(i) / double(n - 1);
  return xs;
}

inline std::vector<double> input_lattice()
{
  std::vector<double> us{0.0};
  for (int k = -3; k <= 4; ++k)
    for (double m : {1.0, 2.0, 5.0}) us.push_back(m * std::pow(10.0, k));
  return us;
}

template <RateFunction R>
double rate_du_at(const R& r, double x, double u)
{
  if constexpr (HasRateDerivative<R>) {
    return r.rate_du(x, u);
  } else {
    const double h = 1e-6 * std::max(1.0, u);
    const double lo = std::max(0.0, u - h);
    return (r.rate(x, u + h) - r.rate(x, lo)) / (u + h - lo);
  }
}

// Psi root by bisection with trapezoid quadrature; only a proxy for the steady activity
template <RateFunction R>
double activity_proxy(const R& r, double eps, double x_hi = 40.0, int n = 4000)
{
  auto psi = [&](double m) {
    double A = 0.0, I = 0.0, prev = r.rate(0.0, eps * m);
    const double h = x_hi / n;
    double e_prev = 1.0;
    for (int i = 1; i <= n; ++i) {
      const double a = r.rate(i * h, eps * m);
      A += 0.5 * (a + prev) * h;
      prev = a;
      const double e = std::exp(-A);
      I += 0.5 * (e + e_prev) * h;
      e_prev = e;
    }
    return m * I;
  };
  double lo = 0.0, hi = 1.0;
  while (psi(hi) < 1.0 && hi < 1e6) hi *= 2.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (psi(mid) < 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline std::string fmt_point(double x, double u)
{
  std::ostringstream os;
  os << "(x=" << x << ", u=" << u << ")";
  return os.str();
}

} // namespace detail

// Samples the structural hypotheses on a lattice. Never throws for a violation; lists it.
// proxy(eps) supplies the steady activity at which the decay modulus is evaluated.
template <RateFunction R>
AssumptionReport validate_assumptions(const R& r, const std::vector<double>& eps_grid,
                                      std::function<double(double)> proxy = {})
{
  AssumptionReport rep;
  const auto xs = detail::age_lattice();
  const auto us = detail::input_lattice();
  const double tol = 1e-12;

  rep.rate_min = r.rate(0.0, 0.0);
  rep.rate_max = rep.rate_min;
  bool mono_x = true, mono_u = true, finite = true, lipschitz = true;
  for (double u : us) {
    double prev = r.rate(xs[0], u);
    for (std::size_t i = 1; i < xs.size(); ++i) {
      const double a = r.rate(xs[i], u);
      if (!std::isfinite(a) || a < 0.0) {
        if (finite) rep.violations.push_back("rate not finite/nonnegative at " + detail::fmt_point(xs[i], u));
        finite = false;
      }
      if (a < prev - tol && mono_x) {
        rep.violations.push_back("rate decreasing in x at " + detail::fmt_point(xs[i], u));
        mono_x = false;
      }
      prev = a;
      rep.rate_min = std::min(rep.rate_min, a);
      rep.rate_max = std::max(rep.rate_max, a);
    }
  }
  for (double x : xs) {
    double prev = r.rate(x, us[0]);
    for (std::size_t k = 1; k < us.size(); ++k) {
      const double a = r.rate(x, us[k]);
      if (a < prev - tol && mono_u) {
        rep.violations.push_back("rate decreasing in mu at " + detail::fmt_point(x, us[k]));
        mono_u = false;
      }
      prev = a;
    }
  }
  if constexpr (HasRateDerivative<R>) {
    // bounded first partials; Step-like rates opt out by throwing
    try {
      double sup = 0.0;
      for (double u : us)
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
          const double dx = std::abs(r.rate(xs[i + 1], u) - r.rate(xs[i], u)) / (xs[i + 1] - xs[i]);
          const double du = std::abs(r.rate_du(xs[i], u));
          sup = std::max({sup, dx, du});
        }
      if (!(sup < 1e8)) lipschitz = false;
    } catch (const UnsupportedOperation&) {
    }
  }
  if (!lipschitz) rep.violations.push_back("first partials of the rate are not bounded on the lattice");

  // limits: a(x,0) and a(x,u) settle as x,u grow
  const double far = xs.back();
  if (std::abs(r.rate(far, 0.0) - r.rate(2.0 * far, 0.0)) > 1e-6)
    rep.violations.push_back("a(x,0) has no limit as x grows");
  if (std::abs(r.rate(far, 1e8) - r.rate(2.0 * far, 1e9)) > 1e-6)
    rep.violations.push_back("a(x,u) has no limit as x,u grow");

  for (double eps : eps_grid) {
    ZetaSample z;
    z.eps = eps;
    z.mu_proxy = proxy ? proxy(eps) : detail::activity_proxy(r, eps);
    auto zeta_at = [&](double mu) {
      double s = 0.0;
      for (double x : xs) s = std::max(s, detail::rate_du_at(r, x, eps * mu));
      return eps * s;
    };
    z.zeta_at_proxy = zeta_at(z.mu_proxy);
    z.zeta_at_one = zeta_at(1.0);
    rep.zeta.push_back(z);
  }
  return rep;
}

// Built-in families. Step gets the threshold checks and eps |sigma'(eps mu)| as modulus.
inline AssumptionReport validate_assumptions(const FiringRateModel& model, const std::vector<double>& eps_grid,
                                             std::function<double(double)> proxy = {})
{
  if (!model.is_step()) {
    auto rep = validate_assumptions<FiringRateModel>(model, eps_grid, proxy);
    if (model.is_smooth()) {
      const auto& s = model.smooth();
      if (!(s.a0 > 0.0)) rep.violations.push_back("a0 > 0 required");
      if (!(s.a0 <= s.a1)) rep.violations.push_back("a0 <= a1 required");
      if (!(s.x_scale > 0.0) || !(s.mu_scale > 0.0)) rep.violations.push_back("x_scale, mu_scale > 0 required");
    } else if (!(model.a0() > 0.0)) {
      rep.violations.push_back("a0 > 0 required");
    }
    return rep;
  }

  const auto& st = model.step();
  AssumptionReport rep;
  // rate lattice checks without the derivative; dispatch to a view exposing rate() only
  struct RateOnly {
    const FiringRateModel* m;
    double rate(double x, double u) const { return m->rate(x, u); }
  };
  rep = validate_assumptions(RateOnly{&model}, {}, {});
  if (!(st.sigma_minus >= 0.0 && st.sigma_minus < st.sigma_plus && st.sigma_plus < 1.0))
    rep.violations.push_back("0 <= sigma_minus < sigma_plus < 1 required");
  if (!(st.u_scale > 0.0)) rep.violations.push_back("u_scale > 0 required");
  if (std::abs(st.sigma(0.0) - st.sigma_plus) > 1e-15) rep.violations.push_back("sigma(0) != sigma_plus");
  if (std::abs(st.sigma(1e3 * st.u_scale) - st.sigma_minus) > 1e-12)
    rep.violations.push_back("sigma(u) does not tend to sigma_minus");
  for (double u : detail::input_lattice())
    if (st.sigma_du(u) > 0.0) {
      rep.violations.push_back("sigma' > 0 somewhere");
      break;
    }
  for (double eps : eps_grid) {
    ZetaSample z;
    z.eps = eps;
    if (proxy) {
      z.mu_proxy = proxy(eps);
    } else {
      double m = 1.0 / (1.0 + st.sigma_plus);
      for (int it = 0; it < 500; ++it) m = 0.5 * m + 0.5 / (1.0 + st.sigma(eps * m));
      z.mu_proxy = m;
    }
    z.zeta_at_proxy = eps * std::abs(st.sigma_du(eps * z.mu_proxy));
    z.zeta_at_one = eps * std::abs(st.sigma_du(eps));
    rep.zeta.push_back(z);
  }
  return rep;
}

} // namespace tenm
