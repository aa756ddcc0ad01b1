#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rate.hpp"

namespace tenm {

// Cell j covers [x_j, x_{j+1}), x_j = j*dx, j = 0..n-1. The last cell is a reservoir for
// every age >= x_{n-1}: it keeps its own survivors and fires at the rate of its cell.
class RateCells {
public:
  RateCells(FiringRateModel model, int n, double dx) : model_(std::move(model)), n_(n), dx_(dx)
  {
    if (model_.is_smooth()) {
      ramp_.resize(n);
      for (int j = 0; j < n; ++j) ramp_[j] = model_.smooth().ramp_integral(j * dx, dx);
    }
  }

  const FiringRateModel& model() const { return model_; }
  int size() const { return n_; }
  double dx() const { return dx_; }
  double x(int j) const { return double(j) * dx_; }

  // inc_j(u) = int over cell j of a(y,u) dy
  void increments(double u, std::vector<double>& out) const
  {
    out.resize(n_);
    const auto& v = model_.variant();
    if (auto c = std::get_if<ConstantRate>(&v)) {
      std::fill(out.begin(), out.end(), c->a0 * dx_);
    } else if (auto s = std::get_if<SmoothRate>(&v)) {
      const double g = (s->a1 - s->a0) * s->shape(u);
      for (int j = 0; j < n_; ++j) out[j] = s->a0 * dx_ + g * ramp_[j];
    } else {
      const double sg = std::get<StepRate>(v).sigma(u);
      for (int j = 0; j < n_; ++j) out[j] = std::max(x(j + 1) - sg, 0.0) - std::max(x(j) - sg, 0.0);
    }
  }

  std::vector<double> increments(double u) const
  {
    std::vector<double> out;
    increments(u, out);
    return out;
  }

  // d inc_j / du; zero for Constant, unsupported for Step
  std::vector<double> increments_du(double u) const
  {
    std::vector<double> out(n_, 0.0);
    if (model_.is_smooth()) {
      const auto& s = model_.smooth();
      const double g = (s.a1 - s.a0) * s.shape_du(u);
      for (int j = 0; j < n_; ++j) out[j] = g * ramp_[j];
    } else if (model_.is_step()) {
      throw UnsupportedOperation("increments_du: step rate");
    }
    return out;
  }

  // pointwise value of the last cell, read as the start of an exponential tail
  double reservoir_point(double f_last, double inc_last) const { return f_last * (-std::expm1(-inc_last)); }

private:
  FiringRateModel model_;
  int n_;
  double dx_;
  std::vector<double> ramp_;
};

// p(u) = sum_j f_j inc_j(u) for a fixed density, precomputed so the closure is O(1) per call
// (O(log n) for Step).
class DischargeFunction {
public:
  DischargeFunction(const RateCells& cells, const std::vector<double>& f) : cells_(&cells)
  {
    const auto& v = cells.model().variant();
    const int n = cells.size();
    const double dx = cells.dx();
    if (std::holds_alternative<ConstantRate>(v) || std::holds_alternative<SmoothRate>(v)) {
      for (int j = 0; j < n; ++j) s0_ += f[j] * dx;
      if (auto s = std::get_if<SmoothRate>(&v)) {
        for (int j = 0; j < n; ++j) s1_ += f[j] * s->ramp_integral(j * dx, dx);
      }
    } else {
      // suffix[j] = dx * sum_{k >= j} f_k
      suffix_.assign(n + 1, 0.0);
      for (int j = n - 1; j >= 0; --j) suffix_[j] = suffix_[j + 1] + f[j] * dx;
      f_ = &f;
    }
  }

  double operator()(double u) const
  {
    const auto& v = cells_->model().variant();
    if (auto c = std::get_if<ConstantRate>(&v)) return c->a0 * s0_;
    if (auto s = std::get_if<SmoothRate>(&v)) return s->a0 * s0_ + (s->a1 - s->a0) * s->shape(u) * s1_;
    const double sg = std::get<StepRate>(v).sigma(u);
    const double dx = cells_->dx();
    const int n = cells_->size();
    if (sg <= 0.0) return suffix_[0];
    const int k = int(std::floor(sg / dx));
    if (k >= n) return 0.0;
    const double right = double(k + 1) * dx;
    return (*f_)[k] * (right - sg) + suffix_[k + 1];
  }

private:
  const RateCells* cells_;
  double s0_ = 0.0, s1_ = 0.0;
  std::vector<double> suffix_;
  const std::vector<double>* f_ = nullptr;
};

} // namespace tenm
