#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <lapacke.h>

#include "cells.hpp"
#include "errors.hpp"
#include "kernel.hpp"
#include "params.hpp"
#include "rate.hpp"
#include "rng.hpp"
#include "steady.hpp"

namespace tenm {

enum class OperatorKind { smooth_nodelay, smooth_delay_block, step_nodelay, step_delay_block };

inline std::string to_string(OperatorKind k)
{
  switch (k) {
  case OperatorKind::smooth_nodelay: return "smooth_nodelay";
  case OperatorKind::smooth_delay_block: return "smooth_delay_block";
  case OperatorKind::step_nodelay: return "step_nodelay";
  default: return "step_delay_block";
  }
}

enum class OperatorPart { full, b_only };

struct OperatorMatrix {
  OperatorKind kind = OperatorKind::smooth_nodelay;
  OperatorPart part = OperatorPart::full;
  Eigen::MatrixXd A;
  double eps = 0.0;
  double kappa = 0.0;
  double sigma_eps = 0.0;
  double delta_weight = 1.0;
  int n_age = 0;
  int n_delay = 0;
  double dx = 0.0;
  Eigen::VectorXd norm_weights; // L1 weights: dx on ages, trapezoid e^{-delta y} dy on delay ages
  double omega_b = 0.0;         // growth bound of the transport-absorption part

  int dim() const { return int(A.rows()); }
  double norm(const Eigen::VectorXd& v) const { return norm_weights.dot(v.cwiseAbs()); }
};

namespace detail {

struct Coefficients {
  std::vector<double> abar;  // cell-averaged rate
  std::vector<double> aprime; // eps * cell-averaged d_mu a (zero for step kinds)
};

inline Coefficients coefficients(const SteadyState& st, const FiringRateModel& model, const ModelParams& params,
                                 bool step_kind)
{
  RateCells cells(model, params.n, params.dx());
  const double u = st.eps * st.M_grid;
  Coefficients c;
  c.abar = cells.increments(u);
  for (double& v : c.abar) v /= params.dx();
  c.aprime.assign(params.n, 0.0);
  if (!step_kind && model.is_smooth()) {
    c.aprime = cells.increments_du(u);
    for (double& v : c.aprime) v *= st.eps / params.dx();
  }
  return c;
}

// upwind -D+ g - abar g with the last cell retaining its inflow
inline void add_transport(Eigen::MatrixXd& A, const std::vector<double>& abar, double dx)
{
  const int n = int(abar.size());
  for (int j = 0; j < n; ++j) {
    if (j + 1 < n) {
      A(j, j) -= 1.0 / dx;
      A(j + 1, j) += 1.0 / dx;
    }
    A(j, j) -= abar[j];
  }
}

inline OperatorMatrix assemble(const SteadyState& st, const FiringRateModel& model, const DelayKernel* kernel,
                               const ModelParams& params, OperatorKind kind, OperatorPart part)
{
  params.validate();
  if (st.n() != params.n) throw DomainError("assemble: steady state and params disagree on the grid");
  const bool step_kind = kind == OperatorKind::step_nodelay || kind == OperatorKind::step_delay_block;
  const bool delay = kind == OperatorKind::smooth_delay_block || kind == OperatorKind::step_delay_block;
  if (step_kind != model.is_step()) throw DomainError("assemble: operator kind does not match the rate family");
  const int n = params.n;
  const double dx = params.dx();
  const auto c = coefficients(st, model, params, step_kind);
  const double kappa = step_kind ? 0.0 : st.kappa;
  if (!step_kind && !(kappa < 1.0)) throw RegimeError("assemble: kappa >= 1, M[g] is not defined");

  std::vector<double> w{1.0};
  if (delay && kernel) w = kernel->weights(params.dt());
  const int K = int(w.size()) - 1;
  const int dim = n + K;

  OperatorMatrix op;
  op.kind = kind;
  op.part = part;
  op.eps = st.eps;
  op.kappa = kappa;
  op.sigma_eps = st.sigma_eps;
  op.delta_weight = params.delta_weight.value_or(kernel && !kernel->is_dirac() ? kernel->delta() : 1.0);
  op.n_age = n;
  op.n_delay = K;
  op.dx = dx;
  op.A = Eigen::MatrixXd::Zero(dim, dim);
  op.norm_weights = Eigen::VectorXd::Zero(dim);
  for (int j = 0; j < n; ++j) op.norm_weights[j] = dx;
  for (int k = 1; k <= K; ++k)
    op.norm_weights[n + k - 1] = (k == K ? 0.5 : 1.0) * dx * std::exp(-op.delta_weight * k * dx);
  op.omega_b = -c.abar[n - 1];
  if (K > 0) op.omega_b = std::max(op.omega_b, -op.delta_weight);

  add_transport(op.A, c.abar, dx);
  for (int k = 1; k <= K; ++k) {
    op.A(n + k - 1, n + k - 1) -= 1.0 / dx;
    if (k > 1) op.A(n + k - 1, n + k - 2) += 1.0 / dx;
  }
  if (part == OperatorPart::b_only) return op;

  // boundary functional O = (N[g] + kappa sum_{k>=1} w_k v_k) / (1 - kappa w_0)
  const double denom = 1.0 - kappa * w[0];
  if (!(denom > 0.0)) throw RegimeError("assemble: 1 - kappa w_0 <= 0");
  Eigen::VectorXd o = Eigen::VectorXd::Zero(dim), d = Eigen::VectorXd::Zero(dim);
  for (int j = 0; j < n; ++j) o[j] = c.abar[j] * dx / denom;
  for (int k = 1; k <= K; ++k) o[n + k - 1] = kappa * w[k] / denom;
  // D[v] = w_0 O + sum_{k>=1} w_k v_k
  d = w[0] * o;
  for (int k = 1; k <= K; ++k) d[n + k - 1] += w[k];

  op.A.row(0) += o.transpose() / dx;
  if (!step_kind) {
    for (int i = 0; i < n; ++i)
      if (c.aprime[i] != 0.0) op.A.row(i) -= (c.aprime[i] * st.F[i]) * d.transpose();
  }
  if (K > 0) op.A.row(n) += o.transpose() / dx; // v_0 = O feeds the first delay cell
  return op;
}

} // namespace detail

inline OperatorMatrix assemble_smooth_nodelay(const SteadyState& st, const FiringRateModel& model,
                                              const ModelParams& params, OperatorPart part = OperatorPart::full)
{
  return detail::assemble(st, model, nullptr, params, OperatorKind::smooth_nodelay, part);
}

inline OperatorMatrix assemble_delay_block(const SteadyState& st, const FiringRateModel& model,
                                           const DelayKernel& kernel, const ModelParams& params,
                                           OperatorPart part = OperatorPart::full)
{
  const auto cert = kernel.moment();
  if (!cert.finite) throw DomainError("assemble_delay_block: kernel moment certificate is not finite");
  return detail::assemble(st, model, &kernel, params, OperatorKind::smooth_delay_block, part);
}

inline OperatorMatrix assemble_step(const SteadyState& st, const FiringRateModel& model, const ModelParams& params,
                                    bool with_delay = false, const DelayKernel* kernel = nullptr,
                                    OperatorPart part = OperatorPart::full)
{
  if (!model.is_step()) throw DomainError("assemble_step: step rate required");
  if (with_delay && !kernel) throw DomainError("assemble_step: delay block needs a kernel");
  return detail::assemble(st, model, with_delay ? kernel : nullptr, params,
                          with_delay ? OperatorKind::step_delay_block : OperatorKind::step_nodelay, part);
}

// Kernel direction of the assembled operator: mass-derivative of the steady family on ages,
// the matching constant boundary value on delay ages.
inline Eigen::VectorXd kernel_direction(const OperatorMatrix& op, const SteadyState& st, const FiringRateModel& model,
                                        const ModelParams& params)
{
  const bool step_kind = op.kind == OperatorKind::step_nodelay || op.kind == OperatorKind::step_delay_block;
  const auto G = step_kind ? st.F : steady_mass_derivative(st, model, params);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(op.dim());
  for (int j = 0; j < op.n_age; ++j) v[j] = G[j];
  if (op.n_delay > 0) {
    const auto c = detail::coefficients(st, model, params, step_kind);
    double Mg = 0.0;
    for (int j = 0; j < op.n_age; ++j) Mg += c.abar[j] * G[j] * op.dx;
    Mg /= 1.0 - op.kappa;
    for (int k = 0; k < op.n_delay; ++k) v[op.n_age + k] = Mg;
  }
  return v;
}

inline double kernel_defect(const OperatorMatrix& op, const Eigen::VectorXd& v) { return op.norm(op.A * v); }

// sup over columns of |<(1,0), Lambda e_j>| / ||e_j||
inline double adjoint_defect(const OperatorMatrix& op)
{
  double worst = 0.0;
  for (int j = 0; j < op.dim(); ++j) {
    const double s = op.A.col(j).head(op.n_age).sum() * op.dx;
    worst = std::max(worst, std::abs(s) / op.norm_weights[j]);
  }
  return worst;
}

struct SpectrumReport {
  std::vector<std::complex<double>> eigenvalues; // descending real part
  std::complex<double> lambda0;
  double zero_mode_error = 0.0;
  double discrete_gap = 0.0; // -max Re over eigenvalues outside the guard ball
  double omega_b = 0.0;      // transport-absorption growth bound
  double gap = 0.0;          // min(discrete_gap, -omega_b)
  std::optional<double> zero_eigvec_vs_F;
  Eigen::VectorXd zero_eigvec; // age part, unit mass
};

namespace detail {

inline std::string dump_matrix(const Eigen::MatrixXd& A)
{
  const auto path = std::filesystem::temp_directory_path() / "tenm_failed_matrix.csv";
  std::ofstream os(path);
  os << std::setprecision(17);
  for (int i = 0; i < A.rows(); ++i) {
    for (int j = 0; j < A.cols(); ++j) os << (j ? "," : "") << A(i, j);
    os << "\n";
  }
  return path.string();
}

inline std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& A)
{
  const int n = int(A.rows());
  Eigen::MatrixXd work = A; // column major, overwritten by dgeev
  std::vector<double> wr(n), wi(n);
  const int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', n, work.data(), n, wr.data(), wi.data(), nullptr, 1,
                                 nullptr, 1);
  if (info != 0)
    throw NumericError("compute_spectrum: dgeev failed (info=" + std::to_string(info) +
                       "), matrix dumped to " + dump_matrix(A));
  std::vector<std::complex<double>> ev(n);
  for (int i = 0; i < n; ++i) ev[i] = {wr[i], wi[i]};
  std::stable_sort(ev.begin(), ev.end(), [](auto a, auto b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  return ev;
}

// inverse iteration next to a real eigenvalue
inline Eigen::VectorXd null_vector(const Eigen::MatrixXd& A, double lambda)
{
  const int n = int(A.rows());
  const double shift = lambda + 1e-8 * std::max(1.0, A.cwiseAbs().maxCoeff());
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A - shift * Eigen::MatrixXd::Identity(n, n));
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  for (int it = 0; it < 4; ++it) {
    v = lu.solve(v);
    v /= v.cwiseAbs().maxCoeff();
  }
  return v;
}

} // namespace detail

// reference: density to compare the zero mode against (F for no-delay kinds)
inline SpectrumReport compute_spectrum(const OperatorMatrix& op, const std::vector<double>* reference = nullptr)
{
  if (op.dim() > 4096) throw DomainError("compute_spectrum: dimension above the dense solver budget");
  SpectrumReport r;
  r.eigenvalues = detail::eigenvalues(op.A);
  r.lambda0 = r.eigenvalues.front();
  for (auto z : r.eigenvalues)
    if (std::abs(z) < std::abs(r.lambda0)) r.lambda0 = z;
  r.zero_mode_error = std::abs(r.lambda0);
  const double guard = 10.0 * std::max(r.zero_mode_error, 1e-300);
  double top = -INFINITY;
  for (auto z : r.eigenvalues)
    if (std::abs(z - r.lambda0) > guard) top = std::max(top, z.real());
  r.discrete_gap = -top;
  r.omega_b = op.omega_b;
  r.gap = std::min(r.discrete_gap, -op.omega_b);

  if (op.part == OperatorPart::full) {
    Eigen::VectorXd v = detail::null_vector(op.A, r.lambda0.real()).head(op.n_age);
    const double mass = v.sum() * op.dx;
    if (mass != 0.0) v /= mass;
    r.zero_eigvec = v;
    if (reference && int(reference->size()) == op.n_age) {
      double d = 0.0;
      for (int j = 0; j < op.n_age; ++j) d += std::abs(v[j] - (*reference)[j]) * op.dx;
      r.zero_eigvec_vs_F = d;
    }
  }
  return r;
}

struct DecayProbe {
  double C = 0.0;
  double alpha = 0.0;
  double r2 = 0.0;
  std::vector<double> t, envelope;
};

// Envelope of ||exp(tB) g|| / ||g|| over random g, stepped with one matrix exponential.
// Fit of log envelope on the last 80% of the horizon; C makes C e^{alpha t} an upper bound.
inline DecayProbe semigroup_decay_probe(const OperatorMatrix& opB, double horizon, int samples, CounterRng rng,
                                        int steps = 40)
{
  if (opB.part != OperatorPart::b_only) throw DomainError("semigroup_decay_probe: expects the B-part only");
  const int dim = opB.dim();
  const double h = horizon / steps;
  const Eigen::MatrixXd E = (opB.A * h).exp();
  Eigen::MatrixXd G(dim, samples);
  for (int s = 0; s < samples; ++s)
    for (int i = 0; i < dim; ++i) G(i, s) = rng.uniform(-1.0, 1.0);
  Eigen::VectorXd n0(samples);
  for (int s = 0; s < samples; ++s) n0[s] = opB.norm(G.col(s));

  DecayProbe out;
  for (int k = 0; k <= steps; ++k) {
    if (k > 0) G = E * G;
    double env = 0.0;
    for (int s = 0; s < samples; ++s) env = std::max(env, opB.norm(G.col(s)) / n0[s]);
    out.t.push_back(k * h);
    out.envelope.push_back(env);
  }
  // least squares on log envelope past the transient
  double St = 0, Sy = 0, Stt = 0, Sty = 0, Syy = 0;
  int cnt = 0;
  for (int k = 0; k <= steps; ++k) {
    if (out.t[k] < 0.2 * horizon || !(out.envelope[k] > 1e-300)) continue;
    const double y = std::log(out.envelope[k]);
    St += out.t[k];
    Sy += y;
    Stt += out.t[k] * out.t[k];
    Sty += out.t[k] * y;
    Syy += y * y;
    ++cnt;
  }
  const double vt = Stt - St * St / cnt, vy = Syy - Sy * Sy / cnt, cty = Sty - St * Sy / cnt;
  out.alpha = cty / vt;
  out.r2 = vy > 0.0 ? cty * cty / (vt * vy) : 1.0;
  for (int k = 0; k <= steps; ++k) out.C = std::max(out.C, out.envelope[k] * std::exp(-out.alpha * out.t[k]));
  return out;
}

} // namespace tenm
