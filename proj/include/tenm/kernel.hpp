#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"

namespace tenm {

namespace detail {

// adaptive Gauss-Kronrod on [a,b]; smooth integrands only, split at kinks yourself
// (max_depth 0 is a single 31-point panel)
template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-14, unsigned max_depth = 15)
{
  if (!(b > a)) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, max_depth, tol, &err);
}

} // namespace detail

struct DiracKernel {};
struct ExponentialKernel {
  double lambda = 2.0;
};
struct GammaKernel {
  double shape = 2.0;
  double scale = 0.25;
};
// samples of b at y_i = i*dy, linear in between, zero past the last sample
struct TabulatedKernel {
  double dy = 0.1;
  std::vector<double> values;
};

struct MomentCertificate {
  double value = 0.0;
  bool finite = false;
};

class DelayKernel {
public:
  using Variant = std::variant<DiracKernel, ExponentialKernel, GammaKernel, TabulatedKernel>;

  static constexpr double tail_mass = 1e-8;

  DelayKernel() : v_(DiracKernel{}) {}

  DelayKernel(DiracKernel k) : v_(k) {}

  DelayKernel(ExponentialKernel k, double delta) : v_(k), delta_(delta)
  {
    if (!(k.lambda > 0.0)) throw DomainError("exponential kernel: lambda must be positive");
    check_delta();
    if (delta >= k.lambda)
      throw InfeasibleDelta("exponential kernel: delta >= lambda makes the exponential moment diverge");
    y_max_ = std::log(1.0 / tail_mass) / k.lambda;
    scale_ = 1.0 / (1.0 - std::exp(-k.lambda * y_max_));
  }

  DelayKernel(GammaKernel k, double delta) : v_(k), delta_(delta)
  {
    if (!(k.shape >= 1.0)) throw DomainError("gamma kernel: shape >= 1 required (b' must be integrable)");
    if (!(k.scale > 0.0)) throw DomainError("gamma kernel: scale must be positive");
    check_delta();
    if (delta * k.scale >= 1.0)
      throw InfeasibleDelta("gamma kernel: delta >= 1/scale makes the exponential moment diverge");
    y_max_ = k.scale * boost::math::gamma_q_inv(k.shape, tail_mass);
    scale_ = 1.0 / boost::math::gamma_p(k.shape, y_max_ / k.scale);
  }

  DelayKernel(TabulatedKernel k, double delta) : v_(std::move(k)), delta_(delta)
  {
    const auto& t = std::get<TabulatedKernel>(v_);
    if (!(t.dy > 0.0)) throw DomainError("tabulated kernel: dy must be positive");
    if (t.values.size() < 2) throw DomainError("tabulated kernel: need at least two samples");
    for (double v : t.values)
      if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("tabulated kernel: samples must be finite and >= 0");
    check_delta();
    y_max_ = t.dy * double(t.values.size() - 1);
    double trap = 0.0;
    for (std::size_t i = 0; i + 1 < t.values.size(); ++i) trap += 0.5 * (t.values[i] + t.values[i + 1]) * t.dy;
    if (!(trap > 0.0)) throw DomainError("tabulated kernel: zero total mass");
    scale_ = 1.0 / trap;
  }

  const Variant& variant() const { return v_; }
  bool is_dirac() const { return std::holds_alternative<DiracKernel>(v_); }
  double delta() const { return delta_; }
  double y_max() const { return y_max_; }

  std::string kind() const
  {
    switch (v_.index()) {
    case 0: return "dirac";
    case 1: return "exponential";
    case 2: return "gamma";
    default: return "tabulated";
    }
  }

  // truncated, renormalized density; zero outside [0, y_max]
  double density(double y) const
  {
    if (is_dirac()) throw UnsupportedOperation("dirac kernel has no density");
    if (y < 0.0 || y > y_max_) return 0.0;
    if (auto e = std::get_if<ExponentialKernel>(&v_)) return scale_ * e->lambda * std::exp(-e->lambda * y);
    if (auto g = std::get_if<GammaKernel>(&v_)) {
      if (y == 0.0) return g->shape == 1.0 ? scale_ / g->scale : 0.0;
      return scale_ * std::exp((g->shape - 1.0) * std::log(y) - y / g->scale - std::lgamma(g->shape) -
                               g->shape * std::log(g->scale));
    }
    const auto& t = std::get<TabulatedKernel>(v_);
    const double s = y / t.dy;
    const auto i = std::min<std::size_t>(std::size_t(s), t.values.size() - 2);
    const double w = s - double(i);
    return scale_ * ((1.0 - w) * t.values[i] + w * t.values[i + 1]);
  }

  double derivative(double y) const
  {
    if (is_dirac()) throw UnsupportedOperation("dirac kernel has no density");
    if (y < 0.0 || y > y_max_) return 0.0;
    if (auto e = std::get_if<ExponentialKernel>(&v_)) return -e->lambda * density(y);
    if (auto g = std::get_if<GammaKernel>(&v_)) {
      if (y == 0.0) return g->shape == 1.0 ? -density(0.0) / g->scale : 0.0;
      return density(y) * ((g->shape - 1.0) / y - 1.0 / g->scale);
    }
    const auto& t = std::get<TabulatedKernel>(v_);
    const auto i = std::min<std::size_t>(std::size_t(y / t.dy), t.values.size() - 2);
    return scale_ * (t.values[i + 1] - t.values[i]) / t.dy;
  }

  // int_lo^hi g(y) b(y) dy for smooth g, splitting at the kernel's own kinks
  // adaptive = false uses one panel per piece, enough on cells of width dt for these kernels
  template <class G>
  double integrate_against(G&& g, double lo, double hi, bool adaptive = true) const
  {
    lo = std::max(lo, 0.0);
    hi = std::min(hi, y_max_);
    if (!(hi > lo)) return 0.0;
    std::vector<double> cuts{lo};
    if (auto t = std::get_if<TabulatedKernel>(&v_)) {
      for (std::size_t i = 1; i + 1 < t->values.size(); ++i) {
        const double y = double(i) * t->dy;
        if (y > lo && y < hi) cuts.push_back(y);
      }
    }
    cuts.push_back(hi);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      s += detail::integrate([&](double y) { return g(y) * density(y); }, cuts[i], cuts[i + 1], 1e-12,
                             adaptive ? 15u : 0u);
    return s;
  }

  double mass() const
  {
    if (is_dirac()) return 1.0;
    return integrate_against([](double) { return 1.0; }, 0.0, y_max_);
  }

  // weights w_k = int b(y) phi_k(y) dy against hat functions on y_k = k*dt
  std::vector<double> weights(double dt) const
  {
    if (is_dirac()) return {1.0};
    const auto K = std::size_t(std::ceil(y_max_ / dt - 1e-12));
    std::vector<double> w(K + 1, 0.0);
    for (std::size_t k = 0; k + 1 <= K; ++k) {
      const double a = double(k) * dt, b = a + dt;
      // on [a,b] phi_k falls from 1 to 0 and phi_{k+1} rises
      // the first cell may hold an integrable singularity (gamma shape < 2)
      w[k] += integrate_against([&](double y) { return (b - y) / dt; }, a, b, k == 0);
      w[k + 1] += integrate_against([&](double y) { return (y - a) / dt; }, a, b, k == 0);
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= total;
    return w;
  }

  // int_0^{y_max} e^{delta y} (b + |b'|) dy
  MomentCertificate moment() const
  {
    if (is_dirac()) return {1.0, true};
    double v = 0.0;
    if (auto t = std::get_if<TabulatedKernel>(&v_)) {
      for (std::size_t i = 0; i + 1 < t->values.size(); ++i) {
        const double a = double(i) * t->dy, b = a + t->dy;
        const double slope = std::abs(scale_ * (t->values[i + 1] - t->values[i]) / t->dy);
        v += detail::integrate(
          [&](double y) { return std::exp(delta_ * y) * (density(y) + slope); }, a, b, 1e-12, 0);
      }
    } else {
      // split off the first stretch where the gamma slope changes sign
      std::vector<double> cuts{0.0};
      if (auto g = std::get_if<GammaKernel>(&v_); g && g->shape > 1.0)
        cuts.push_back(std::min((g->shape - 1.0) * g->scale, y_max_));
      cuts.push_back(y_max_);
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        v += detail::integrate(
          [&](double y) { return std::exp(delta_ * y) * (density(y) + std::abs(derivative(y))); },
          cuts[i], cuts[i + 1]);
    }
    return {v, std::isfinite(v) && v < 1e12};
  }

private:
  void check_delta() const
  {
    if (!(delta_ > 0.0)) throw DomainError("kernel: delta must be positive");
  }

  Variant v_;
  double delta_ = 1.0;
  double y_max_ = 0.0;
  double scale_ = 1.0;
};

} // namespace tenm
