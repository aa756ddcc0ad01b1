#pragma once

#include <cmath>
#include <string>
#include <variant>

#include "errors.hpp"

namespace tenm {

struct ConstantRate {
  double a0 = 1.0;
};

// a(x,u) = a0 + (a1 - a0) (1 - e^{-x/x_scale}) u/(mu_scale + u)
struct SmoothRate {
  double a0 = 1.0;
  double a1 = 2.0;
  double x_scale = 1.0;
  double mu_scale = 1.0;

  double shape(double u) const { return u / (mu_scale + u); }
  double shape_du(double u) const { return mu_scale / ((mu_scale + u) * (mu_scale + u)); }
  // 1 - e^{-x/x_scale} without cancellation near 0
  double ramp(double x) const { return -std::expm1(-x / x_scale); }
  // int_x^{x+h} (1 - e^{-y/x_scale}) dy
  double ramp_integral(double x, double h) const
  {
    return h - x_scale * std::exp(-x / x_scale) * (-std::expm1(-h / x_scale));
  }
};

// a(x,u) = 1_{x > sigma(u)}, sigma(u) = sigma_minus + (sigma_plus - sigma_minus) e^{-u/u_scale}
struct StepRate {
  double sigma_plus = 0.5;
  double sigma_minus = 0.25;
  double u_scale = 1.0;

  double sigma(double u) const
  {
    return sigma_minus + (sigma_plus - sigma_minus) * std::exp(-u / u_scale);
  }
  double sigma_du(double u) const
  {
    return -(sigma_plus - sigma_minus) / u_scale * std::exp(-u / u_scale);
  }
};

class FiringRateModel {
public:
  using Variant = std::variant<ConstantRate, SmoothRate, StepRate>;

  FiringRateModel() : v_(SmoothRate{}) {}
  FiringRateModel(ConstantRate r) : v_(r) {}
  FiringRateModel(SmoothRate r) : v_(r) {}
  FiringRateModel(StepRate r) : v_(r) {}

  const Variant& variant() const { return v_; }
  bool is_constant() const { return std::holds_alternative<ConstantRate>(v_); }
  bool is_smooth() const { return std::holds_alternative<SmoothRate>(v_); }
  bool is_step() const { return std::holds_alternative<StepRate>(v_); }
  const StepRate& step() const { return std::get<StepRate>(v_); }
  const SmoothRate& smooth() const { return std::get<SmoothRate>(v_); }
  const ConstantRate& constant() const { return std::get<ConstantRate>(v_); }

  std::string kind() const
  {
    if (is_constant()) return "constant";
    if (is_smooth()) return "smooth";
    return "step";
  }

  // lim_{x->inf} a(x, 0)
  double a0() const
  {
    if (auto c = std::get_if<ConstantRate>(&v_)) return c->a0;
    if (auto s = std::get_if<SmoothRate>(&v_)) return s->a0;
    return 1.0;
  }
  // sup a
  double a1() const
  {
    if (auto c = std::get_if<ConstantRate>(&v_)) return c->a0;
    if (auto s = std::get_if<SmoothRate>(&v_)) return s->a1;
    return 1.0;
  }

  double rate(double x, double u) const
  {
    check(x, u);
    if (auto c = std::get_if<ConstantRate>(&v_)) return c->a0;
    if (auto s = std::get_if<SmoothRate>(&v_))
      return s->a0 + (s->a1 - s->a0) * s->ramp(x) * s->shape(u);
    const auto& st = std::get<StepRate>(v_);
    return x > st.sigma(u) ? 1.0 : 0.0;
  }

  double rate_du(double x, double u) const
  {
    check(x, u);
    if (is_constant()) return 0.0;
    if (auto s = std::get_if<SmoothRate>(&v_))
      return (s->a1 - s->a0) * s->ramp(x) * s->shape_du(u);
    throw UnsupportedOperation("rate_dmu: step rate has no classical derivative in mu");
  }

  // A(x,u) = int_0^x a(y,u) dy
  double cumulative(double x, double u) const { return increment(0.0, x, u); }

  // int_x^{x+h} a(y,u) dy, closed form for every family
  double increment(double x, double h, double u) const
  {
    check(x, u);
    if (h < 0.0) throw DomainError("increment: negative width");
    if (auto c = std::get_if<ConstantRate>(&v_)) return c->a0 * h;
    if (auto s = std::get_if<SmoothRate>(&v_))
      return s->a0 * h + (s->a1 - s->a0) * s->shape(u) * s->ramp_integral(x, h);
    const double sg = std::get<StepRate>(v_).sigma(u);
    return std::max(x + h - sg, 0.0) - std::max(x - sg, 0.0);
  }

  // d/du of increment(x,h,u)
  double increment_du(double x, double h, double u) const
  {
    check(x, u);
    if (is_constant()) return 0.0;
    if (auto s = std::get_if<SmoothRate>(&v_))
      return (s->a1 - s->a0) * s->shape_du(u) * s->ramp_integral(x, h);
    throw UnsupportedOperation("increment_du: step rate has no classical derivative in mu");
  }

private:
  static void check(double x, double u)
  {
    if (!(x >= 0.0) || !(u >= 0.0)) throw DomainError("rate: negative age or input");
  }

  Variant v_;
};

} // namespace tenm
