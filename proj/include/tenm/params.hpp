#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "errors.hpp"

namespace tenm {

struct ModelParams {
  double eps = 1.0;
  double x_max = 20.0;
  int n = 512;
  double t_end = 50.0;
  double tol_fixed_point = 1e-13;
  double tol_root = 1e-12;
  std::optional<double> delta_weight; // unset: kernel delta

  double dx() const { return x_max / double(n); }
  double dt() const { return dx(); } // dt = dx always
  double x(int j) const { return double(j) * dx(); }
  int steps() const { return int(std::llround(t_end / dt())); }

  void validate() const
  {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw ConfigError("params.eps", "must be finite and >= 0");
    if (!(x_max > 0.0) || !std::isfinite(x_max)) throw ConfigError("params.x_max", "must be positive");
    if (n < 16) throw ConfigError("params.n", "at least 16 cells required");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("params.t_end", "must be positive");
    auto tol_ok = [](double t) { return t > 0.0 && t <= 1e-4; };
    if (!tol_ok(tol_fixed_point)) throw ConfigError("params.tol_fixed_point", "must lie in (0, 1e-4]");
    if (!tol_ok(tol_root)) throw ConfigError("params.tol_root", "must lie in (0, 1e-4]");
    if (delta_weight && !(*delta_weight > 0.0))
      throw ConfigError("params.delta_weight", "must be positive");
  }
};

} // namespace tenm
