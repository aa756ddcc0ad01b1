#include <gtest/gtest.h>

#include <cmath>

#include "tenm/tenm.hpp"

using namespace tenm;

namespace {

const FiringRateModel smooth_default{SmoothRate{1.0, 2.0, 1.0, 1.0}};
const FiringRateModel step_default{StepRate{0.5, 0.25, 1.0}};

ModelParams params_at(double eps, int n = 512)
{
  ModelParams p;
  p.eps = eps;
  p.n = n;
  return p;
}

double l1_to_exp(const SteadyState& st, double rate)
{
  double d = 0.0;
  for (int j = 0; j + 1 < st.n(); ++j) d += std::abs(st.F[j] - rate * std::exp(-rate * j * st.dx)) * st.dx;
  return d;
}

} // namespace

TEST(Psi, ConstantIsLinear)
{
  const FiringRateModel m{ConstantRate{2.0}};
  for (double mu : {0.1, 1.0, 3.0}) EXPECT_NEAR(psi_eval(m, 5.0, mu), mu / 2.0, 1e-14);
}

TEST(Psi, ZeroActivity)
{
  EXPECT_EQ(psi_eval(smooth_default, 1.0, 0.0), 0.0);
  EXPECT_EQ(psi_eval(step_default, 1.0, 0.0), 0.0);
}

TEST(Psi, StepAtZeroCoupling)
{
  // survival is 1 up to sigma_plus then e^{-(x - sigma_plus)}
  for (double mu : {0.5, 1.0, 2.0}) EXPECT_NEAR(psi_eval(step_default, 0.0, mu), 1.5 * mu, 1e-14);
}

TEST(Psi, SmoothMatchesBruteForce)
{
  // midpoint survival integral on [0, 40]
  const double eps = 1.0, mu = 0.8, u = eps * mu;
  const int n = 400000;
  const double h = 40.0 / n;
  double I = 0.0;
  for (int i = 0; i < n; ++i) I += std::exp(-smooth_default.cumulative((i + 0.5) * h, u));
  EXPECT_NEAR(psi_eval(smooth_default, eps, mu), mu * I * h, 1e-9);
}

TEST(SolveSteady, ConstantRate)
{
  const FiringRateModel m{ConstantRate{1.0}};
  const auto st = solve_steady(m, params_at(1.0));
  EXPECT_NEAR(st.M, 1.0, 1e-12);
  EXPECT_NEAR(st.mass(), 1.0, 1e-12);
  EXPECT_LE(l1_to_exp(st, 1.0), st.dx);
  EXPECT_EQ(st.kappa, 0.0);
}

TEST(SolveSteady, StepAtZeroCoupling)
{
  const auto st = solve_steady(step_default, params_at(0.0));
  EXPECT_NEAR(st.M, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(st.sigma_eps, 0.5, 1e-15);
}

TEST(SolveSteady, StepStrongCoupling)
{
  // sigma(eps M) -> sigma_minus, so M -> 1 / (1 + 0.25)
  const auto st = solve_steady(step_default, params_at(1e4));
  EXPECT_NEAR(st.M, 0.8, 1e-6);
  ASSERT_EQ(st.roots.size(), 1u);
}

TEST(SolveSteady, RootSatisfiesPsi)
{
  for (double eps : {1e-2, 1.0, 1e2, 1e4}) {
    const auto st = solve_steady(smooth_default, params_at(eps));
    EXPECT_NEAR(psi_eval(smooth_default, eps, st.M), 1.0, 1e-11) << eps;
    EXPECT_GE(st.M, 1.0);
    EXPECT_LE(st.M, 2.0);
    // grid closure activity is within first order of the continuum one
    EXPECT_LE(std::abs(st.M_grid - st.M), 2.0 * st.dx) << eps;
    EXPECT_NEAR(st.mass(), 1.0, 1e-12);
  }
}

TEST(SolveSteady, GridFixedPoint)
{
  // F is a fixed point of one cohort step at u = eps M_grid
  const auto p = params_at(10.0);
  const auto st = solve_steady(smooth_default, p);
  DensityState s{0.0, st.dx, st.F};
  RateCells cells(smooth_default, p.n, p.dx());
  const auto next = advance_cohorts(s, cells, p.eps * st.M_grid);
  double d = 0.0;
  for (int j = 0; j < p.n; ++j) d = std::max(d, std::abs(next.f[j] - st.F[j]));
  EXPECT_LE(d, 1e-12);
}

TEST(SolveSteady, EnvelopeHolds)
{
  const auto st = solve_steady(smooth_default, params_at(1.0));
  EXPECT_TRUE(st.envelope_ok);
  for (int j = 0; j < st.n(); ++j) EXPECT_LE(st.F[j], st.envelope_K * std::exp(-0.5 * j * st.dx) * (1 + 1e-12));
}

TEST(SteadyResidual, HalvesUnderRefinement)
{
  const FiringRateModel m{ConstantRate{1.0}};
  const double r1 = solve_steady(m, params_at(1.0, 256)).residual;
  const double r2 = solve_steady(m, params_at(1.0, 512)).residual;
  EXPECT_GT(r1, 0.0);
  EXPECT_GE(r1 / r2, 2.0 / 1.2);
  EXPECT_LE(r1 / r2, 2.0 * 1.2);
}

TEST(SteadyResidual, SampledExponential)
{
  const FiringRateModel m{ConstantRate{1.0}};
  for (int n : {256, 512, 1024}) {
    SteadyState st;
    st.dx = 20.0 / n;
    st.M = st.M_grid = 1.0;
    st.F.resize(n);
    for (int j = 0; j < n; ++j) st.F[j] = std::exp(-j * st.dx);
    EXPECT_LE(steady_residual(st, m, 1.0), 1.0 * st.dx) << n;
  }
}

TEST(SteadyResidual, StepFirstOrder)
{
  for (double eps : {0.0, 1e3}) {
    const double r1 = solve_steady(step_default, params_at(eps, 256)).residual;
    const auto st = solve_steady(step_default, params_at(eps, 512));
    EXPECT_LE(st.residual, 2.0 * st.dx) << eps;
    EXPECT_LT(st.residual, r1) << eps;
  }
}

TEST(MassDerivative, MatchesFiniteDifferenceOfFamily)
{
  // family of grid steady states with mass s: F_s = s E(u_s), u_s = eps m_s, m_s = s c(u_s)
  const auto p = params_at(1.0, 256);
  const auto st = solve_steady(smooth_default, p);
  const auto G = steady_mass_derivative(st, smooth_default, p);
  RateCells cells(smooth_default, p.n, p.dx());
  auto family = [&](double s) {
    double m = st.M_grid;
    std::vector<double> F;
    for (int it = 0; it < 400; ++it) {
      F = steady_density_at(cells, p.eps * m);
      const auto inc = cells.increments(p.eps * m);
      double c = 0.0;
      for (int j = 0; j < p.n; ++j) c += F[j] * inc[j];
      m = s * c;
    }
    for (double& v : F) v *= s;
    return F;
  };
  const double h = 1e-5;
  const auto Fp = family(1.0 + h), Fm = family(1.0 - h);
  double d = 0.0, mass = 0.0;
  for (int j = 0; j < p.n; ++j) {
    d += std::abs(G[j] - (Fp[j] - Fm[j]) / (2 * h)) * p.dx();
    mass += G[j] * p.dx();
  }
  EXPECT_LE(d, 1e-6);
  EXPECT_NEAR(mass, 1.0, 1e-10);
}
