#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "tenm/tenm.hpp"

using namespace tenm;

namespace {

const FiringRateModel smooth_default{SmoothRate{1.0, 2.0, 1.0, 1.0}};
const FiringRateModel step_default{StepRate{0.5, 0.25, 1.0}};
const FiringRateModel constant_one{ConstantRate{1.0}};

// midpoint rule on [0,x] with n panels
double midpoint_cumulative(const FiringRateModel& m, double x, double u, int n)
{
  const double h = x / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += m.rate((i + 0.5) * h, u);
  return s * h;
}

} // namespace

TEST(Rate, ConstantIsFlat)
{
  EXPECT_EQ(constant_one.rate(0.0, 0.0), 1.0);
  EXPECT_EQ(constant_one.rate(7.5, 3.0), 1.0);
  EXPECT_EQ(constant_one.rate_du(2.0, 5.0), 0.0);
}

TEST(Rate, StepAboveThreshold)
{
  // sigma(0) = sigma_plus = 0.5 < 0.6
  EXPECT_EQ(step_default.rate(0.6, 0.0), 1.0);
  EXPECT_EQ(step_default.rate(0.4, 0.0), 0.0);
  // sigma(u) -> 0.25 for large u
  EXPECT_EQ(step_default.rate(0.3, 50.0), 1.0);
}

TEST(Rate, SmoothLimit)
{
  EXPECT_NEAR(smooth_default.rate(60.0, 1e12), 2.0, 1e-10);
  EXPECT_EQ(smooth_default.rate(0.0, 5.0), 1.0);
  EXPECT_EQ(smooth_default.rate(5.0, 0.0), 1.0);
}

TEST(Rate, NegativeArgumentsRejected)
{
  EXPECT_THROW(smooth_default.rate(-1.0, 0.0), DomainError);
  EXPECT_THROW(step_default.rate(0.0, -1.0), DomainError);
}

TEST(RateDerivative, SmoothAtZeroInput)
{
  // (a1 - a0) * 1 * mu_scale / mu_scale^2 = 1
  EXPECT_NEAR(smooth_default.rate_du(60.0, 0.0), 1.0, 1e-12);
}

TEST(RateDerivative, MatchesFiniteDifference)
{
  for (double x : {0.3, 1.0, 4.0})
    for (double u : {0.1, 1.0, 3.0}) {
      const double h = 1e-6;
      const double fd = (smooth_default.rate(x, u + h) - smooth_default.rate(x, u - h)) / (2 * h);
      EXPECT_NEAR(smooth_default.rate_du(x, u), fd, 1e-8) << x << " " << u;
    }
}

TEST(RateDerivative, VanishesAtLargeInput)
{
  // eps * sup_x d_mu a(x, eps mu) at mu = 1
  double prev = INFINITY;
  for (double eps : {1e2, 1e3, 1e4}) {
    const double z = eps * smooth_default.rate_du(60.0, eps);
    EXPECT_LT(z, prev);
    prev = z;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(RateDerivative, StepIsUnsupported)
{
  EXPECT_THROW(step_default.rate_du(1.0, 1.0), UnsupportedOperation);
}

TEST(Cumulative, ConstantIsLinear)
{
  for (double x : {0.0, 0.5, 3.0, 19.0}) EXPECT_DOUBLE_EQ(constant_one.cumulative(x, 1.0), x);
}

TEST(Cumulative, StepIsRampFromThreshold)
{
  for (double x : {0.0, 0.2, 0.5, 0.9, 4.0})
    EXPECT_NEAR(step_default.cumulative(x, 0.0), std::max(x - 0.5, 0.0), 1e-15);
}

TEST(Cumulative, SmoothMatchesMidpointQuadrature)
{
  for (double x : {0.5, 2.0, 10.0})
    for (double u : {0.0, 0.7, 5.0})
      EXPECT_NEAR(smooth_default.cumulative(x, u), midpoint_cumulative(smooth_default, x, u, 1000000), 1e-9);
}

TEST(Cumulative, IncrementsAdd)
{
  const double u = 0.8;
  const double a = smooth_default.increment(0.0, 1.3, u) + smooth_default.increment(1.3, 2.2, u);
  EXPECT_NEAR(a, smooth_default.cumulative(3.5, u), 1e-13);
}

TEST(Cells, IncrementsMatchModel)
{
  RateCells cells(smooth_default, 64, 0.25);
  const auto inc = cells.increments(1.5);
  for (int j = 0; j < 64; ++j) EXPECT_NEAR(inc[j], smooth_default.increment(j * 0.25, 0.25, 1.5), 1e-14);
}

TEST(Cells, DischargeMatchesDirectSum)
{
  const int n = 80;
  const double dx = 0.25;
  std::vector<double> f(n);
  for (int j = 0; j < n; ++j) f[j] = std::exp(-0.3 * j * dx) * (1.0 + 0.5 * std::sin(j));
  for (const auto& model : {smooth_default, step_default, constant_one}) {
    RateCells cells(model, n, dx);
    DischargeFunction P(cells, f);
    for (double u : {0.0, 0.4, 3.0}) {
      const auto inc = cells.increments(u);
      double direct = 0.0;
      for (int j = 0; j < n; ++j) direct += f[j] * inc[j];
      EXPECT_NEAR(P(u), direct, 1e-12) << model.kind() << " u=" << u;
    }
  }
}

TEST(KernelMoment, DiracIsOne)
{
  const DelayKernel k;
  const auto c = k.moment();
  EXPECT_TRUE(c.finite);
  EXPECT_EQ(c.value, 1.0);
}

TEST(KernelMoment, ExponentialClosedForm)
{
  // b = l e^{-l y}, |b'| = l^2 e^{-l y}: int_0^Y e^{d y}(l + l^2) e^{-l y} dy, Y the truncation point
  const double l = 2.0, d = 1.0;
  const DelayKernel k(ExponentialKernel{l}, d);
  const double Y = k.y_max();
  const double raw = (l + l * l) * (1.0 - std::exp(-(l - d) * Y)) / (l - d);
  const double scale = 1.0 / (1.0 - std::exp(-l * Y)); // density renormalized on [0, Y]
  const auto c = k.moment();
  EXPECT_TRUE(c.finite);
  EXPECT_NEAR(c.value, raw * scale, 1e-9);
  EXPECT_NEAR(c.value, 6.0, 1e-3);
}

TEST(KernelMoment, InfeasibleDeltaRejected)
{
  EXPECT_THROW(DelayKernel(ExponentialKernel{1.0}, 1.0), InfeasibleDelta);
  EXPECT_THROW(DelayKernel(ExponentialKernel{0.5}, 1.0), InfeasibleDelta);
}

TEST(KernelMoment, GammaAndTabulatedFinite)
{
  EXPECT_TRUE(DelayKernel(GammaKernel{2.0, 0.25}, 1.0).moment().finite);
  EXPECT_TRUE(DelayKernel(TabulatedKernel{0.1, {0, 1, 2, 1, 0}}, 1.0).moment().finite);
}

TEST(KernelWeights, SumToOneAndMatchMean)
{
  const DelayKernel k(ExponentialKernel{2.0}, 1.0);
  const double dt = 0.01;
  const auto w = k.weights(dt);
  double s = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_GE(w[i], 0.0);
    s += w[i];
    mean += w[i] * i * dt;
  }
  EXPECT_NEAR(s, 1.0, 1e-14);
  // hat weights reproduce linear moments exactly: E[y] = 1/l up to truncation
  EXPECT_NEAR(mean, 0.5, 1e-6);
}

TEST(Assumptions, SmoothDefaultsPass)
{
  const auto rep = validate_assumptions(smooth_default, {1.0, 1e2});
  EXPECT_TRUE(rep.ok());
  EXPECT_NEAR(rep.rate_min, 1.0, 1e-12);
  EXPECT_LE(rep.rate_max, 2.0);
}

TEST(Assumptions, StepThresholdOrder)
{
  EXPECT_TRUE(validate_assumptions(step_default, {0.0, 1.0}).ok());
  const FiringRateModel bad{StepRate{0.25, 0.5, 1.0}};
  const auto rep = validate_assumptions(bad, {});
  EXPECT_FALSE(rep.ok());
}

namespace {
struct Decreasing {
  double rate(double x, double) const { return 2.0 - x / (1.0 + x); }
};
} // namespace

TEST(Assumptions, DecreasingRateFlagged)
{
  const auto rep = validate_assumptions(Decreasing{}, {});
  ASSERT_FALSE(rep.ok());
  bool found = false;
  for (const auto& v : rep.violations) found |= v.find("decreasing in x") != std::string::npos;
  EXPECT_TRUE(found);
}

TEST(Assumptions, RateBoundsOnLattice)
{
  // a0 <= a <= a1 for every built-in family
  for (const auto& model : {smooth_default, constant_one}) {
    const auto rep = validate_assumptions(model, {});
    EXPECT_GE(rep.rate_min, model.a0() - 1e-14);
    EXPECT_LE(rep.rate_max, model.a1() + 1e-14);
  }
}

TEST(Rng, Deterministic)
{
  CounterRng a(42, 3), b(42, 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SubstreamsDiffer)
{
  CounterRng a(42, 1), b(42, 2);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 50; ++i) {
    seen.insert(a.next_u64());
    seen.insert(b.next_u64());
  }
  EXPECT_EQ(seen.size(), 100u);
}

TEST(Rng, UniformMoments)
{
  CounterRng r(9);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 5e-3);
  EXPECT_NEAR(s2 / n - 0.25, 1.0 / 12.0, 5e-3);
}
