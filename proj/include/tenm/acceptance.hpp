#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "experiments.hpp"
#include "io.hpp"
#include "linear.hpp"
#include "steady.hpp"
#include "transport.hpp"

namespace tenm {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  int checks = 0;
  int failures = 0;
  std::string detail; // first failing check, or a one-line summary
};

struct AcceptanceOptions {
  std::uint64_t seed = 7;
  std::filesystem::path out = "verify";
  bool reproducibility = true; // criterion 11 in-process: regenerate the seeded CSVs and compare
};

namespace detail {

inline constexpr double inf = std::numeric_limits<double>::infinity();

// one CSV per criterion: case,check,value,lo,hi,pass
class CheckTable {
public:
  CheckTable(int id, std::string name, const std::filesystem::path& path)
    : csv_(path, {"case", "check", "value", "lo", "hi", "pass"})
  {
    res_.id = id;
    res_.name = std::move(name);
  }

  bool check(const std::string& c, const std::string& what, double v, double lo, double hi)
  {
    const bool ok = v >= lo && v <= hi;
    csv_.row({c, what, v, lo, hi, (long long)ok});
    ++res_.checks;
    if (!ok) {
      if (res_.failures == 0) {
        std::ostringstream os;
        os << c << ": " << what << " = " << format_double(v) << " outside [" << format_double(lo) << ", "
           << format_double(hi) << "]";
        res_.detail = os.str();
      }
      ++res_.failures;
    }
    return ok;
  }

  void fail(const std::string& c, const std::string& what, const std::string& why)
  {
    csv_.row({c, what + ": " + why, NAN, NAN, NAN, 0LL});
    ++res_.checks;
    if (res_.failures == 0) res_.detail = c + ": " + what + ": " + why;
    ++res_.failures;
  }

  CriterionResult result() const
  {
    auto r = res_;
    r.passed = r.checks > 0 && r.failures == 0;
    if (r.passed) r.detail = std::to_string(r.checks) + " checks";
    return r;
  }

private:
  CsvWriter csv_;
  CriterionResult res_;
};

struct Case {
  std::string name;
  FiringRateModel model;
  double eps = 0.0;
  std::optional<DelayKernel> kernel;
  const DelayKernel* k() const { return kernel ? &*kernel : nullptr; }
};

inline ModelParams params_for(double eps, int n = 512)
{
  ModelParams p;
  p.eps = eps;
  p.n = n;
  return p;
}

inline DelayKernel exp_kernel() { return DelayKernel(ExponentialKernel{2.0}, 1.0); }

inline std::vector<Case> linear_cases()
{
  return {{"constant", FiringRateModel(ConstantRate{1.0}), 1.0, std::nullopt},
          {"smooth_eps1e2", FiringRateModel(SmoothRate{}), 1e2, std::nullopt},
          {"smooth_eps1e3", FiringRateModel(SmoothRate{}), 1e3, std::nullopt},
          {"smooth_eps1e4", FiringRateModel(SmoothRate{}), 1e4, std::nullopt},
          {"step_eps0", FiringRateModel(StepRate{}), 0.0, std::nullopt},
          {"step_eps1e3", FiringRateModel(StepRate{}), 1e3, std::nullopt},
          {"smooth_eps1e3_expdelay", FiringRateModel(SmoothRate{}), 1e3, exp_kernel()},
          {"step_eps1e3_expdelay", FiringRateModel(StepRate{}), 1e3, exp_kernel()}};
}

struct StepRunLog {
  std::string name;
  Trajectory tr;
  FiringRateModel model;
};

inline void c1_mass(CheckTable& t, std::vector<StepRunLog>& steps)
{
  std::vector<std::pair<std::string, std::optional<DelayKernel>>> kernels;
  kernels.emplace_back("none", std::nullopt);
  kernels.emplace_back("dirac", DelayKernel(DiracKernel{}));
  kernels.emplace_back("exponential", exp_kernel());
  kernels.emplace_back("gamma", DelayKernel(GammaKernel{2.0, 0.25}, 1.0));
  kernels.emplace_back("tabulated", DelayKernel(TabulatedKernel{0.1, {0.0, 1.0, 2.0, 1.0, 0.0}}, 1.0));
  const std::vector<Case> models{{"constant", FiringRateModel(ConstantRate{1.0}), 1.0, std::nullopt},
                                 {"smooth_eps1", FiringRateModel(SmoothRate{}), 1.0, std::nullopt},
                                 {"smooth_eps1e3", FiringRateModel(SmoothRate{}), 1e3, std::nullopt},
                                 {"step_eps0", FiringRateModel(StepRate{}), 0.0, std::nullopt},
                                 {"step_eps1e3", FiringRateModel(StepRate{}), 1e3, std::nullopt}};
  for (const auto& m : models) {
    const auto p = params_for(m.eps);
    const auto f0 = project_indicator(0.0, 1.0, p.n, p.dx());
    for (const auto& [kn, k] : kernels) {
      const std::string name = m.name + "/" + kn;
      const auto tr = run_with(f0, m.model, k ? &*k : nullptr, p, {});
      if (!tr.completed) {
        t.fail(name, "run", tr.error);
        continue;
      }
      t.check(name, "max per-step drift", tr.max_drift, 0.0, 1e-6);
      t.check(name, "cumulative renormalization |prod - 1|", std::abs(tr.cumulative_factor - 1.0), 0.0, 1e-4);
      t.check(name, "final mass - 1", std::abs(tr.last.mass() - 1.0), 0.0, 1e-12);
      if (m.model.is_step()) steps.push_back({"c1:" + name, tr, m.model});
    }
  }
}

inline void c2_oracle(CheckTable& t)
{
  double prev = NAN;
  for (int n : {512, 1024}) {
    const auto p = params_for(1.0, n);
    const auto f0 = project_indicator(0.0, 1.0, n, p.dx());
    const auto oc = oracle_compare_constant_rate(f0, 1.0, p);
    const std::string name = "constant/indicator/n" + std::to_string(n);
    t.check(name, "max_t L1 error / dx", oc.max_error / p.dx(), 0.0, 5.0);
    if (std::isfinite(prev)) t.check(name, "error ratio n/2 to n", prev / oc.max_error, 1.7, 2.3);
    prev = oc.max_error;
  }
}

inline void c3_steady(CheckTable& t)
{
  for (double eps : {1e2, 1e3, 1e4}) {
    const FiringRateModel m(SmoothRate{});
    const auto p = params_for(eps);
    const auto st = solve_steady(m, p);
    const std::string name = "smooth/eps" + format_double(eps);
    t.check(name, "|Psi(eps, M) - 1|", std::abs(psi_eval(m, eps, st.M, p.x_max) - 1.0), 0.0, 1e-10);
    t.check(name, "envelope F <= K e^{-a0 x/2}", st.envelope_ok ? 1.0 : 0.0, 1.0, 1.0);
    t.check(name, "grid mass - 1", std::abs(st.mass() - 1.0), 0.0, 1e-12);
  }
  for (double eps : {0.0, 1e3}) {
    const StepRate s;
    const FiringRateModel m(s);
    const auto p = params_for(eps);
    const auto st = solve_steady(m, p);
    const std::string name = "step/eps" + format_double(eps);
    t.check(name, "|M - 1/(1 + sigma(eps M))|", std::abs(st.M - 1.0 / (1.0 + s.sigma(eps * st.M))), 0.0, 1e-12);
    t.check(name, "M", st.M, 1.0 - s.sigma_plus, 1.0);
    double fmin = inf, fmax = -inf;
    for (double v : st.F) fmin = std::min(fmin, v), fmax = std::max(fmax, v);
    t.check(name, "min F", fmin, 0.0, inf);
    t.check(name, "max F", fmax, -inf, 1.0);
    t.check(name, "envelope F <= K e^{-a0 x/2}", st.envelope_ok ? 1.0 : 0.0, 1.0, 1.0);
  }
  {
    const FiringRateModel m(ConstantRate{1.0});
    const auto st = solve_steady(m, params_for(1.0));
    t.check("constant", "|M - a0|", std::abs(st.M - 1.0), 0.0, 1e-12);
    t.check("constant", "envelope F <= K e^{-a0 x/2}", st.envelope_ok ? 1.0 : 0.0, 1.0, 1.0);
  }
}

struct LinearData {
  double kernel_defect = NAN, adjoint_defect = NAN, gap = NAN, lambda0 = NAN, dx = NAN;
};

inline LinearData linear_data(const Case& c, int n)
{
  const auto p = params_for(c.eps, n);
  const auto st = solve_steady(c.model, p);
  const auto op = assemble_for(st, c.model, c.k(), p);
  LinearData d;
  d.dx = p.dx();
  d.kernel_defect = kernel_defect(op, kernel_direction(op, st, c.model, p));
  d.adjoint_defect = adjoint_defect(op);
  const auto sp = compute_spectrum(op);
  d.gap = sp.gap;
  d.lambda0 = std::abs(sp.lambda0);
  return d;
}

inline void c4_c5_linear(CheckTable& t4, CheckTable& t5)
{
  const double C = 5.0;
  for (const auto& c : linear_cases()) {
    try {
      const auto a = linear_data(c, 512);
      const auto b = linear_data(c, 1024);
      t4.check(c.name + "/n512", "kernel defect / dx", a.kernel_defect / a.dx, 0.0, C);
      t4.check(c.name + "/n1024", "kernel defect / dx", b.kernel_defect / b.dx, 0.0, C);
      t4.check(c.name, "kernel defect ratio n512/n1024", a.kernel_defect / b.kernel_defect, 1.7, 2.3);
      // the column mass identity holds to roundoff, so there is nothing left to halve
      t4.check(c.name + "/n512", "adjoint defect / dx", a.adjoint_defect / a.dx, 0.0, C);
      t4.check(c.name + "/n1024", "adjoint defect / dx", b.adjoint_defect / b.dx, 0.0, C);
      t4.check(c.name, "adjoint defect at roundoff floor", std::max(a.adjoint_defect, b.adjoint_defect), 0.0, 1e-10);

      for (const auto* d : {&a, &b}) {
        const std::string name = c.name + (d == &a ? "/n512" : "/n1024");
        t5.check(name, "|lambda0|", d->lambda0, 0.0, 1e-2);
        t5.check(name, "gap", d->gap, 1e-12, inf);
      }
      t5.check(c.name, "relative gap change n512 to n1024", std::abs(b.gap - a.gap) / a.gap, 0.0, 0.05);
    } catch (const Error& e) {
      t4.fail(c.name, "assembly", e.what());
      t5.fail(c.name, "spectrum", e.what());
    }
  }
}

inline void c6_decay(CheckTable& t, std::vector<StepRunLog>& steps, std::vector<RegimeRow>& rows_out)
{
  const std::vector<Case> cases{{"constant", FiringRateModel(ConstantRate{1.0}), 1.0, std::nullopt},
                                {"smooth_eps1e-2", FiringRateModel(SmoothRate{}), 1e-2, std::nullopt},
                                {"smooth_eps1e2", FiringRateModel(SmoothRate{}), 1e2, std::nullopt},
                                {"smooth_eps1e3", FiringRateModel(SmoothRate{}), 1e3, std::nullopt},
                                {"smooth_eps1e4", FiringRateModel(SmoothRate{}), 1e4, std::nullopt},
                                {"step_eps0", FiringRateModel(StepRate{}), 0.0, std::nullopt},
                                {"step_eps1e3", FiringRateModel(StepRate{}), 1e3, std::nullopt}};
  SweepOptions opt;
  opt.amplitude = 0.05;
  opt.basin_amplitudes = {};
  for (const auto& c : cases) {
    const auto row = regime_row(c.model, c.k(), c.eps, params_for(c.eps), opt);
    rows_out.push_back(row);
    if (!row.error.empty()) {
      t.fail(c.name, "row", row.error);
      continue;
    }
    t.check(c.name, "flagged (zeta < 0.5)", row.flagged ? 1.0 : 0.0, 1.0, 1.0);
    t.check(c.name, "alpha_fit", row.alpha_fit, -inf, -1e-12);
    t.check(c.name, "r2", row.r2, 0.9, 1.0 + 1e-12);
    t.check(c.name, "|alpha_fit + gap| / gap", row.gap_mismatch(), 0.0, 0.15);
    if (c.model.is_step()) {
      Trajectory tr;
      tr.completed = true;
      tr.f_min = row.f_min;
      tr.f_max = row.f_max;
      tr.m_min = row.m_min;
      tr.m_max = row.m_max;
      steps.push_back({"c6:" + c.name, tr, c.model});
    }
  }
}

inline void c7_contraction(CheckTable& t, std::uint64_t seed)
{
  const std::vector<Case> cases{{"constant", FiringRateModel(ConstantRate{1.0}), 1.0, std::nullopt},
                                {"smooth_eps1e2", FiringRateModel(SmoothRate{}), 1e2, std::nullopt},
                                {"smooth_eps1e3", FiringRateModel(SmoothRate{}), 1e3, std::nullopt},
                                {"smooth_eps1e4", FiringRateModel(SmoothRate{}), 1e4, std::nullopt}};
  std::uint64_t key = 0;
  for (const auto& c : cases) {
    const auto p = params_for(c.eps);
    const auto st = solve_steady(c.model, p);
    const auto f0 = perturbed_start(st, c.model, p, 0.05);
    const auto r = contraction_probe(c.model, c.eps, f0, 0.05, 100, CounterRng(seed, ++key));
    t.check(c.name, "sample pairs", r.pairs, 100, 100);
    if (c.model.is_constant()) t.check(c.name, "max ratio (exactly 0)", r.max_ratio, 0.0, 0.0);
    else t.check(c.name, "max ratio", r.max_ratio, 0.0, 1.0 - 1e-12);
  }
}

inline void c8_sandwich(CheckTable& t, std::vector<StepRunLog>& steps)
{
  const StepRate s;
  const FiringRateModel m(s);
  for (double eps : {0.0, 1e2, 1e3}) {
    const auto p = params_for(eps);
    const auto f0 = project_indicator(0.0, 1.0, p.n, p.dx());
    steps.push_back({"c8:indicator/eps" + format_double(eps), run(f0, m, p), m});
    const auto k = exp_kernel();
    steps.push_back({"c8:indicator/expdelay/eps" + format_double(eps), run(f0, m, k, p), m});
  }
  for (const auto& r : steps) {
    if (!r.tr.completed) {
      t.fail(r.name, "run", r.tr.error);
      continue;
    }
    const double lo = 1.0 - r.model.step().sigma_plus;
    t.check(r.name, "min f", r.tr.f_min, 0.0, inf);
    t.check(r.name, "max f", r.tr.f_max, -inf, 1.0 + 1e-10);
    t.check(r.name, "min m", r.tr.m_min, lo - 1e-8, inf);
    t.check(r.name, "max m", r.tr.m_max, -inf, 1.0 + 1e-8);
  }
}

inline double series_diff(const std::vector<double>& a, const std::vector<double>& b)
{
  if (a.size() != b.size()) return inf;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline void c9_delay(CheckTable& t, std::vector<StepRunLog>& steps)
{
  const std::vector<Case> cases{{"constant", FiringRateModel(ConstantRate{1.0}), 1.0, std::nullopt},
                                {"smooth_eps1", FiringRateModel(SmoothRate{}), 1.0, std::nullopt},
                                {"smooth_eps1e2", FiringRateModel(SmoothRate{}), 1e2, std::nullopt},
                                {"step_eps1e3", FiringRateModel(StepRate{}), 1e3, std::nullopt}};
  const DelayKernel dirac{DiracKernel{}};
  const DelayKernel fast(ExponentialKernel{1e3}, 1.0);
  for (const auto& c : cases) {
    const auto p = params_for(c.eps);
    const auto f0 = project_indicator(0.0, 1.0, p.n, p.dx());
    RunOptions opt;
    opt.snapshot_stride = 1;
    const auto a = run(f0, c.model, p, opt);
    const auto b = run(f0, c.model, dirac, p, opt);
    const auto e = run(f0, c.model, fast, p, opt);
    if (!a.completed || !b.completed || !e.completed) {
      t.fail(c.name, "run", a.error + b.error + e.error);
      continue;
    }
    t.check(c.name, "dirac vs no-delay: max |m diff|", series_diff(a.m, b.m), 0.0, 1e-12);
    t.check(c.name, "dirac vs no-delay: max |p diff|", series_diff(a.p, b.p), 0.0, 1e-12);
    t.check(c.name, "dirac vs no-delay: max |f diff|", series_diff(a.last.f, b.last.f), 0.0, 1e-12);
    double worst = 0.0;
    for (std::size_t s = 0; s < b.snapshots.size(); ++s) {
      double d = 0.0;
      for (int j = 0; j < p.n; ++j) d += std::abs(b.snapshots[s].f[j] - e.snapshots[s].f[j]) * p.dx();
      worst = std::max(worst, d);
    }
    t.check(c.name, "exponential(1e3) vs dirac: sup_t L1", worst, 0.0, 1e-2);
    if (c.model.is_step()) {
      steps.push_back({"c9:" + c.name + "/dirac", b, c.model});
      steps.push_back({"c9:" + c.name + "/exp1e3", e, c.model});
    }
  }
}

inline void c10_bprobe(CheckTable& t, std::uint64_t seed)
{
  struct B {
    Case c;
    double bound;
  };
  const std::vector<B> cases{
    {{"constant_a0_1", FiringRateModel(ConstantRate{1.0}), 1.0, std::nullopt}, -0.9},
    {{"smooth_defaults", FiringRateModel(SmoothRate{}), 1.0, std::nullopt}, -0.4},
    {{"step_eps0_delta1", FiringRateModel(StepRate{}), 0.0, exp_kernel()}, -std::min(1.0, 1.0) + 0.1},
    {{"step_eps1e3_delta1", FiringRateModel(StepRate{}), 1e3, exp_kernel()}, -std::min(1.0, 1.0) + 0.1}};
  std::uint64_t key = 100;
  for (const auto& b : cases) {
    const auto p = params_for(b.c.eps);
    const auto st = solve_steady(b.c.model, p);
    const auto op = assemble_for(st, b.c.model, b.c.k(), p, OperatorPart::b_only);
    const auto pr = semigroup_decay_probe(op, 10.0, 8, CounterRng(seed, ++key));
    t.check(b.c.name, "envelope alpha_fit", pr.alpha, -inf, b.bound);
    t.check(b.c.name, "envelope C (finite)", pr.C, 0.0, 1e6);
  }
}

inline std::string slurp(const std::filesystem::path& p)
{
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

} // namespace detail

inline std::string criterion_file(int id)
{
  static const char* names[] = {"",         "c01_mass",    "c02_oracle",   "c03_steady",
                                "c04_defects", "c05_gap",  "c06_decay",    "c07_contraction",
                                "c08_sandwich", "c09_delay", "c10_bprobe", "c11_repro"};
  return std::string(names[id]) + ".csv";
}

// Criteria 1..10, plus 11 as an in-process regeneration of the seeded CSVs when enabled.
// Every CSV is a pure function of the seed.
inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt)
{
  using namespace detail;
  std::filesystem::create_directories(opt.out);
  auto path = [&](int id) { return opt.out / criterion_file(id); };
  std::vector<CriterionResult> out;
  std::vector<StepRunLog> steps;
  auto guarded = [&](CheckTable& t, auto&& body) {
    try {
      body();
    } catch (const Error& e) {
      t.fail("criterion", "exception", e.what());
    }
    out.push_back(t.result());
  };

  {
    CheckTable t(1, "mass conservation", path(1));
    guarded(t, [&] { c1_mass(t, steps); });
  }
  {
    CheckTable t(2, "characteristics oracle", path(2));
    guarded(t, [&] { c2_oracle(t); });
  }
  {
    CheckTable t(3, "steady-state construction", path(3));
    guarded(t, [&] { c3_steady(t); });
  }
  {
    CheckTable t4(4, "kernel/adjoint structure", path(4));
    CheckTable t5(5, "spectral gap", path(5));
    try {
      c4_c5_linear(t4, t5);
    } catch (const Error& e) {
      t4.fail("criterion", "exception", e.what());
      t5.fail("criterion", "exception", e.what());
    }
    out.push_back(t4.result());
    out.push_back(t5.result());
  }
  std::vector<RegimeRow> rows;
  {
    CheckTable t(6, "nonlinear decay matches gap", path(6));
    guarded(t, [&] { c6_decay(t, steps, rows); });
  }
  {
    CheckTable t(7, "contraction of the fixed-point map", path(7));
    guarded(t, [&] { c7_contraction(t, opt.seed); });
  }
  std::vector<StepRunLog> c9_steps;
  CriterionResult r9;
  {
    CheckTable t(9, "delay consistency", path(9));
    try {
      c9_delay(t, c9_steps);
    } catch (const Error& e) {
      t.fail("criterion", "exception", e.what());
    }
    r9 = t.result();
  }
  {
    for (auto& s : c9_steps) steps.push_back(std::move(s));
    CheckTable t(8, "step-rate sandwich", path(8));
    guarded(t, [&] { c8_sandwich(t, steps); });
  }
  out.push_back(r9);
  {
    CheckTable t(10, "B-part hypodissipativity", path(10));
    guarded(t, [&] { c10_bprobe(t, opt.seed); });
  }
  if (opt.reproducibility) {
    CheckTable t(11, "reproducibility", path(11));
    try {
      const auto scratch = opt.out / ".repro";
      std::filesystem::create_directories(scratch);
      {
        CheckTable t7(7, "", scratch / criterion_file(7));
        c7_contraction(t7, opt.seed);
        CheckTable t10(10, "", scratch / criterion_file(10));
        c10_bprobe(t10, opt.seed);
      }
      for (int id : {7, 10}) {
        const bool same = slurp(path(id)) == slurp(scratch / criterion_file(id));
        t.check(criterion_file(id), "bit-identical on regeneration", same ? 1.0 : 0.0, 1.0, 1.0);
      }
      std::filesystem::remove_all(scratch);
    } catch (const Error& e) {
      t.fail("criterion", "exception", e.what());
    }
    out.push_back(t.result());
  }
  return out;
}

inline nlohmann::json report_json(const std::vector<CriterionResult>& rs, std::uint64_t seed)
{
  nlohmann::json arr = nlohmann::json::array();
  bool all = true;
  for (const auto& r : rs) {
    arr.push_back({{"id", r.id},
                   {"name", r.name},
                   {"passed", r.passed},
                   {"checks", r.checks},
                   {"failures", r.failures},
                   {"detail", r.detail},
                   {"csv", criterion_file(r.id)}});
    all = all && r.passed;
  }
  return {{"artifact_version", artifact_version}, {"seed", seed}, {"all_passed", all}, {"criteria", arr}};
}

} // namespace tenm
