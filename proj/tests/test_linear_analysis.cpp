#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "tenm/tenm.hpp"

using namespace tenm;

namespace {

const FiringRateModel smooth_default{SmoothRate{1.0, 2.0, 1.0, 1.0}};
const FiringRateModel step_default{StepRate{0.5, 0.25, 1.0}};
const FiringRateModel constant_one{ConstantRate{1.0}};

ModelParams params_at(double eps, int n = 512)
{
  ModelParams p;
  p.eps = eps;
  p.n = n;
  return p;
}

struct Built {
  ModelParams p;
  SteadyState st;
  OperatorMatrix op;
};

Built build(const FiringRateModel& m, double eps, int n = 512, const DelayKernel* kernel = nullptr)
{
  Built b{params_at(eps, n), {}, {}};
  if (kernel) b.p.delta_weight = kernel->delta();
  b.st = solve_steady(m, b.p);
  b.op = assemble_for(b.st, m, kernel, b.p, OperatorPart::full);
  return b;
}

double defect_per_dx(const Built& b, const FiringRateModel& m)
{
  const auto v = kernel_direction(b.op, b.st, m, b.p);
  return kernel_defect(b.op, v) / b.op.norm(v) / b.p.dx();
}

} // namespace

TEST(Assemble, ShapesAndKinds)
{
  const auto a = build(smooth_default, 1e2, 128);
  EXPECT_EQ(a.op.kind, OperatorKind::smooth_nodelay);
  EXPECT_EQ(a.op.dim(), 128);
  const DelayKernel k(ExponentialKernel{2.0}, 1.0);
  const auto b = build(smooth_default, 1e2, 128, &k);
  EXPECT_EQ(b.op.kind, OperatorKind::smooth_delay_block);
  EXPECT_EQ(b.op.dim(), 128 + b.op.n_delay);
  EXPECT_GT(b.op.n_delay, 0);
  const auto c = build(step_default, 0.0, 128);
  EXPECT_EQ(c.op.kind, OperatorKind::step_nodelay);
}

TEST(Assemble, KindMustMatchFamily)
{
  const auto p = params_at(1.0, 64);
  const auto st = solve_steady(smooth_default, p);
  EXPECT_THROW(assemble_step(st, smooth_default, p), DomainError);
}

TEST(KernelDefect, FirstOrderInDx)
{
  for (double eps : {1e2, 1e3}) {
    const double c1 = defect_per_dx(build(smooth_default, eps, 256), smooth_default);
    const double c2 = defect_per_dx(build(smooth_default, eps, 512), smooth_default);
    EXPECT_LE(c2, 5.0) << eps;
    // defect/dx roughly constant means the defect itself halves
    EXPECT_NEAR(c1 / c2, 1.0, 0.2) << eps;
  }
}

TEST(KernelDefect, DelayBlockSmall)
{
  const DelayKernel k(ExponentialKernel{2.0}, 1.0);
  const auto b = build(smooth_default, 1e3, 512, &k);
  EXPECT_LE(defect_per_dx(b, smooth_default), 5.0);
}

TEST(KernelDefect, StepDirectionIsSteadyState)
{
  const auto b = build(step_default, 0.0, 512);
  const auto v = kernel_direction(b.op, b.st, step_default, b.p);
  for (int j = 0; j < b.p.n; ++j) EXPECT_EQ(v[j], b.st.F[j]);
  EXPECT_LE(kernel_defect(b.op, v) / b.p.dx(), 5.0);
}

TEST(AdjointDefect, MassIsConserved)
{
  const DelayKernel k(ExponentialKernel{2.0}, 1.0);
  for (const auto& b : {build(constant_one, 1.0, 256), build(smooth_default, 1e2, 256),
                        build(step_default, 1e3, 256), build(smooth_default, 1e2, 256, &k)})
    EXPECT_LE(adjoint_defect(b.op), 1e-10) << to_string(b.op.kind);
}

TEST(Spectrum, ConstantRate)
{
  const auto b = build(constant_one, 1.0, 512);
  const auto sp = compute_spectrum(b.op, &b.st.F);
  EXPECT_LE(std::abs(sp.lambda0), 1e-3);
  EXPECT_GE(sp.gap, 0.3);
  EXPECT_NEAR(sp.gap, 1.0, 0.05);
}

TEST(Spectrum, EigenvaluesDescending)
{
  const auto b = build(smooth_default, 1e2, 128);
  const auto sp = compute_spectrum(b.op);
  EXPECT_EQ(int(sp.eigenvalues.size()), b.op.dim());
  for (std::size_t i = 1; i < sp.eigenvalues.size(); ++i)
    EXPECT_GE(sp.eigenvalues[i - 1].real(), sp.eigenvalues[i].real());
}

TEST(Spectrum, DiracBlockEqualsNoDelay)
{
  const auto p = params_at(1e2, 256);
  const auto st = solve_steady(smooth_default, p);
  const auto a = compute_spectrum(assemble_smooth_nodelay(st, smooth_default, p));
  const auto b = compute_spectrum(assemble_delay_block(st, smooth_default, DelayKernel{}, p));
  ASSERT_EQ(a.eigenvalues.size(), b.eigenvalues.size());
  for (int i = 0; i < 5; ++i) EXPECT_LE(std::abs(a.eigenvalues[i] - b.eigenvalues[i]), 1e-6) << i;
}

TEST(Spectrum, StepZeroModeIsSteadyState)
{
  const auto b = build(step_default, 0.0, 512);
  const auto sp = compute_spectrum(b.op, &b.st.F);
  ASSERT_TRUE(sp.zero_eigvec_vs_F.has_value());
  EXPECT_LE(*sp.zero_eigvec_vs_F, 2.0 * b.p.dx());
}

TEST(Spectrum, StepNonLeadingModesDecay)
{
  const auto b = build(step_default, 0.0, 512);
  const auto sp = compute_spectrum(b.op);
  const double guard = 10.0 * std::max(sp.zero_mode_error, 1e-300);
  for (auto z : sp.eigenvalues)
    if (std::abs(z - sp.lambda0) > guard) {
      EXPECT_LE(z.real(), -0.5);
    }
}

TEST(Spectrum, TransportPartBelowMinimalRate)
{
  for (const auto* m : {&smooth_default, &constant_one}) {
    const auto p = params_at(1e2, 256);
    const auto st = solve_steady(*m, p);
    const auto op = assemble_for(st, *m, nullptr, p, OperatorPart::b_only);
    const auto sp = compute_spectrum(op);
    const double amin = m->a0();
    for (auto z : sp.eigenvalues) EXPECT_LE(z.real(), -amin + 2.0 * p.dx());
  }
}

TEST(Spectrum, StableUnderRefinement)
{
  const auto a = build(smooth_default, 1e2, 256);
  const auto b = build(smooth_default, 1e2, 512);
  const auto sa = compute_spectrum(a.op), sb = compute_spectrum(b.op);
  const double resid = kernel_defect(a.op, kernel_direction(a.op, a.st, smooth_default, a.p));
  EXPECT_LE(std::abs(sb.lambda0 - sa.lambda0), 2.0 * resid);
  EXPECT_LE(std::abs(sb.gap - sa.gap), 2.0 * resid);
}

TEST(Spectrum, DimensionBudget)
{
  OperatorMatrix op;
  op.A = Eigen::MatrixXd::Zero(4097, 4097);
  EXPECT_THROW(compute_spectrum(op), DomainError);
}

TEST(SemigroupProbe, ConstantRateBound)
{
  const auto p = params_at(1.0, 256);
  const auto st = solve_steady(constant_one, p);
  const auto op = assemble_for(st, constant_one, nullptr, p, OperatorPart::b_only);
  const auto pr = semigroup_decay_probe(op, 10.0, 100, CounterRng(5));
  EXPECT_LE(pr.alpha, -0.9);
  // C e^{alpha t} is an envelope
  for (std::size_t k = 0; k < pr.t.size(); ++k)
    EXPECT_LE(pr.envelope[k], pr.C * std::exp(pr.alpha * pr.t[k]) * (1 + 1e-12));
}

TEST(SemigroupProbe, SmoothBound)
{
  const auto p = params_at(1e2, 256);
  const auto st = solve_steady(smooth_default, p);
  const auto op = assemble_for(st, smooth_default, nullptr, p, OperatorPart::b_only);
  const auto pr = semigroup_decay_probe(op, 10.0, 100, CounterRng(6));
  EXPECT_LE(pr.alpha, -0.4);
}

TEST(SemigroupProbe, RejectsFullOperator)
{
  const auto b = build(constant_one, 1.0, 64);
  EXPECT_THROW(semigroup_decay_probe(b.op, 1.0, 2, CounterRng(1)), DomainError);
}
