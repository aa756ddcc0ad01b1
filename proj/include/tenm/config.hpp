#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "kernel.hpp"
#include "params.hpp"
#include "rate.hpp"

namespace tenm {

inline constexpr const char* artifact_version = "0.1.0";

struct InitialSpec {
  std::string kind = "perturbed"; // perturbed | indicator | exponential
  double amplitude = 0.05;
  std::string family = "cosine";  // cosine | random
  double lo = 0.0, hi = 1.0;      // indicator
  double rate = 1.0;              // exponential
};

struct ExperimentSpec {
  std::vector<double> eps_list{1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4};
  double amplitude = 0.05;
  double transient_frac = 0.2;
  std::vector<double> basin_amplitudes{0.0, 0.05, 0.1, 0.2, 0.4};
  int snapshot_stride = 64;
  int probe_samples = 8;
  double probe_horizon = 10.0;
  InitialSpec initial;
};

struct RunConfig {
  FiringRateModel rate{SmoothRate{}};
  DelayKernel kernel{};
  ModelParams params;
  ExperimentSpec experiment;
  std::string out = "results";
  std::uint64_t seed = 0;
};

namespace detail {

using json = nlohmann::json;

// Walks one JSON object, remembers which keys were consumed, rejects the rest.
class ObjectReader {
public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path))
  {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k); }

  double number(const std::string& k, double fallback)
  {
    if (!take(k)) return fallback;
    const auto& v = j_.at(k);
    if (!v.is_number()) throw ConfigError(key(k), "expected a number");
    return v.get<double>();
  }

  int integer(const std::string& k, int fallback)
  {
    if (!take(k)) return fallback;
    const auto& v = j_.at(k);
    if (!v.is_number_integer()) throw ConfigError(key(k), "expected an integer");
    return v.get<int>();
  }

  std::uint64_t unsigned_integer(const std::string& k, std::uint64_t fallback)
  {
    if (!take(k)) return fallback;
    const auto& v = j_.at(k);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError(key(k), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string string(const std::string& k, const std::string& fallback)
  {
    if (!take(k)) return fallback;
    const auto& v = j_.at(k);
    if (!v.is_string()) throw ConfigError(key(k), "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& k, const std::vector<double>& fallback)
  {
    if (!take(k)) return fallback;
    const auto& v = j_.at(k);
    if (!v.is_array()) throw ConfigError(key(k), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(key(k) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::optional<json> object(const std::string& k)
  {
    if (!take(k)) return std::nullopt;
    return std::optional<json>(std::in_place, j_.at(k));
  }

  void finish() const
  {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) {
        if (it.key() == "dt") throw ConfigError(key("dt"), "dt is derived (dt = dx) and cannot be set");
        throw ConfigError(key(it.key()), "unknown key");
      }
  }

private:
  bool take(const std::string& k)
  {
    seen_.insert(k);
    return j_.contains(k);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& key, const std::string& what)
{
  if (!ok) throw ConfigError(key, what);
}

inline FiringRateModel parse_rate(const json& j)
{
  ObjectReader r(j, "rate");
  const auto kind = r.string("kind", "smooth");
  FiringRateModel m;
  if (kind == "constant") {
    ConstantRate c;
    c.a0 = r.number("a0", c.a0);
    require(c.a0 > 0.0, r.key("a0"), "must be positive");
    m = c;
  } else if (kind == "smooth") {
    SmoothRate s;
    s.a0 = r.number("a0", s.a0);
    s.a1 = r.number("a1", s.a1);
    s.x_scale = r.number("x_scale", s.x_scale);
    s.mu_scale = r.number("mu_scale", s.mu_scale);
    require(s.a0 > 0.0, r.key("a0"), "must be positive");
    require(s.a1 >= s.a0, r.key("a1"), "a1 >= a0 required");
    require(s.x_scale > 0.0, r.key("x_scale"), "must be positive");
    require(s.mu_scale > 0.0, r.key("mu_scale"), "must be positive");
    m = s;
  } else if (kind == "step") {
    StepRate s;
    s.sigma_plus = r.number("sigma_plus", s.sigma_plus);
    s.sigma_minus = r.number("sigma_minus", s.sigma_minus);
    s.u_scale = r.number("u_scale", s.u_scale);
    require(s.sigma_minus < s.sigma_plus, r.key("sigma_minus"), "sigma_minus < sigma_plus required");
    require(s.sigma_minus >= 0.0, r.key("sigma_minus"), "must be >= 0");
    require(s.sigma_plus < 1.0, r.key("sigma_plus"), "sigma_plus < 1 required");
    require(s.u_scale > 0.0, r.key("u_scale"), "must be positive");
    m = s;
  } else {
    throw ConfigError(r.key("kind"), "expected constant, smooth or step");
  }
  r.finish();
  return m;
}

inline DelayKernel parse_kernel(const json& j)
{
  ObjectReader r(j, "kernel");
  const auto kind = r.string("kind", "dirac");
  const double delta = r.number("delta", 1.0);
  require(delta > 0.0, r.key("delta"), "must be positive");
  DelayKernel k;
  try {
    if (kind == "dirac") {
      k = DelayKernel(DiracKernel{});
    } else if (kind == "exponential") {
      k = DelayKernel(ExponentialKernel{r.number("lambda", 2.0)}, delta);
    } else if (kind == "gamma") {
      GammaKernel g;
      g.shape = r.number("shape", 2.0);
      g.scale = r.number("scale", 0.25);
      k = DelayKernel(g, delta);
    } else if (kind == "tabulated") {
      TabulatedKernel t;
      t.dy = r.number("dy", 0.0);
      t.values = r.numbers("values", {});
      k = DelayKernel(t, delta);
    } else {
      throw ConfigError(r.key("kind"), "expected dirac, exponential, gamma or tabulated");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const InfeasibleDelta& e) {
    throw ConfigError(r.key("delta"), e.what());
  } catch (const Error& e) {
    throw ConfigError("kernel", e.what());
  }
  r.finish();
  return k;
}

inline ModelParams parse_params(const json& j)
{
  ObjectReader r(j, "params");
  ModelParams p;
  p.eps = r.number("eps", p.eps);
  p.x_max = r.number("x_max", p.x_max);
  p.n = r.integer("n", p.n);
  p.t_end = r.number("t_end", p.t_end);
  p.tol_fixed_point = r.number("tol_fixed_point", p.tol_fixed_point);
  p.tol_root = r.number("tol_root", p.tol_root);
  if (r.has("delta_weight")) p.delta_weight = r.number("delta_weight", 1.0);
  r.finish();
  p.validate();
  return p;
}

inline InitialSpec parse_initial(const json& j)
{
  ObjectReader r(j, "experiment.initial");
  InitialSpec s;
  s.kind = r.string("kind", s.kind);
  if (s.kind == "perturbed") {
    s.amplitude = r.number("amplitude", s.amplitude);
    s.family = r.string("family", s.family);
    require(s.amplitude >= 0.0 && s.amplitude < 1.0, r.key("amplitude"), "must lie in [0, 1)");
    require(s.family == "cosine" || s.family == "random", r.key("family"), "expected cosine or random");
  } else if (s.kind == "indicator") {
    s.lo = r.number("lo", s.lo);
    s.hi = r.number("hi", s.hi);
    require(s.lo >= 0.0 && s.hi > s.lo, r.key("hi"), "0 <= lo < hi required");
  } else if (s.kind == "exponential") {
    s.rate = r.number("rate", s.rate);
    require(s.rate > 0.0, r.key("rate"), "must be positive");
  } else {
    throw ConfigError(r.key("kind"), "expected perturbed, indicator or exponential");
  }
  r.finish();
  return s;
}

inline ExperimentSpec parse_experiment(const json& j)
{
  ObjectReader r(j, "experiment");
  ExperimentSpec e;
  e.eps_list = r.numbers("eps_list", e.eps_list);
  e.amplitude = r.number("amplitude", e.amplitude);
  e.transient_frac = r.number("transient_frac", e.transient_frac);
  e.basin_amplitudes = r.numbers("basin_amplitudes", e.basin_amplitudes);
  e.snapshot_stride = r.integer("snapshot_stride", e.snapshot_stride);
  e.probe_samples = r.integer("probe_samples", e.probe_samples);
  e.probe_horizon = r.number("probe_horizon", e.probe_horizon);
  if (auto o = r.object("initial")) e.initial = parse_initial(*o);
  r.finish();
  require(!e.eps_list.empty(), r.key("eps_list"), "must not be empty");
  for (std::size_t i = 0; i < e.eps_list.size(); ++i) {
    require(e.eps_list[i] >= 0.0, r.key("eps_list"), "entries must be >= 0");
    require(i == 0 || e.eps_list[i] > e.eps_list[i - 1], r.key("eps_list"), "must be strictly ascending");
  }
  require(e.amplitude >= 0.0 && e.amplitude < 1.0, r.key("amplitude"), "must lie in [0, 1)");
  require(e.transient_frac >= 0.0 && e.transient_frac < 1.0, r.key("transient_frac"), "must lie in [0, 1)");
  for (std::size_t i = 1; i < e.basin_amplitudes.size(); ++i)
    require(e.basin_amplitudes[i] >= e.basin_amplitudes[i - 1], r.key("basin_amplitudes"), "must be ascending");
  require(e.snapshot_stride >= 0, r.key("snapshot_stride"), "must be >= 0");
  require(e.probe_samples >= 1, r.key("probe_samples"), "must be >= 1");
  require(e.probe_horizon > 0.0, r.key("probe_horizon"), "must be positive");
  return e;
}

} // namespace detail

// Accepts a config object, or a run.json written by a previous run (its "config" member).
inline RunConfig parse_config_json(const nlohmann::json& in)
{
  const nlohmann::json* j = &in;
  if (in.is_object() && in.contains("config") && in.contains("artifact_version")) j = &in.at("config");
  detail::ObjectReader r(*j, "");
  RunConfig c;
  if (auto o = r.object("rate")) c.rate = detail::parse_rate(*o);
  if (auto o = r.object("kernel")) c.kernel = detail::parse_kernel(*o);
  if (auto o = r.object("params")) c.params = detail::parse_params(*o);
  if (auto o = r.object("experiment")) c.experiment = detail::parse_experiment(*o);
  c.out = r.string("out", c.out);
  c.seed = r.unsigned_integer("seed", c.seed);
  r.finish();
  if (c.params.delta_weight && !c.kernel.is_dirac() && *c.params.delta_weight >= c.kernel.delta() + 1e-15) {
    // the weight may be weaker than the kernel's certified rate, never stronger
    throw ConfigError("params.delta_weight", "must not exceed kernel.delta");
  }
  return c;
}

inline RunConfig parse_config(const std::string& path)
{
  std::ifstream is(path);
  if (!is) throw ConfigError("--config", "cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config_json(j);
}

inline nlohmann::json to_json(const FiringRateModel& m)
{
  const auto& v = m.variant();
  if (auto c = std::get_if<ConstantRate>(&v)) return {{"kind", "constant"}, {"a0", c->a0}};
  if (auto s = std::get_if<SmoothRate>(&v))
    return {{"kind", "smooth"}, {"a0", s->a0}, {"a1", s->a1}, {"x_scale", s->x_scale}, {"mu_scale", s->mu_scale}};
  const auto& s = std::get<StepRate>(v);
  return {{"kind", "step"}, {"sigma_plus", s.sigma_plus}, {"sigma_minus", s.sigma_minus}, {"u_scale", s.u_scale}};
}

inline nlohmann::json to_json(const DelayKernel& k)
{
  const auto& v = k.variant();
  if (k.is_dirac()) return {{"kind", "dirac"}};
  nlohmann::json j{{"kind", k.kind()}, {"delta", k.delta()}};
  if (auto e = std::get_if<ExponentialKernel>(&v)) j["lambda"] = e->lambda;
  if (auto g = std::get_if<GammaKernel>(&v)) {
    j["shape"] = g->shape;
    j["scale"] = g->scale;
  }
  if (auto t = std::get_if<TabulatedKernel>(&v)) {
    j["dy"] = t->dy;
    j["values"] = t->values;
  }
  return j;
}

inline nlohmann::json to_json(const RunConfig& c)
{
  nlohmann::json p{{"eps", c.params.eps},
                   {"x_max", c.params.x_max},
                   {"n", c.params.n},
                   {"t_end", c.params.t_end},
                   {"tol_fixed_point", c.params.tol_fixed_point},
                   {"tol_root", c.params.tol_root}};
  if (c.params.delta_weight) p["delta_weight"] = *c.params.delta_weight;
  const auto& i = c.experiment.initial;
  nlohmann::json init{{"kind", i.kind}};
  if (i.kind == "perturbed") {
    init["amplitude"] = i.amplitude;
    init["family"] = i.family;
  } else if (i.kind == "indicator") {
    init["lo"] = i.lo;
    init["hi"] = i.hi;
  } else {
    init["rate"] = i.rate;
  }
  const auto& e = c.experiment;
  nlohmann::json ex{{"eps_list", e.eps_list},
                    {"amplitude", e.amplitude},
                    {"transient_frac", e.transient_frac},
                    {"basin_amplitudes", e.basin_amplitudes},
                    {"snapshot_stride", e.snapshot_stride},
                    {"probe_samples", e.probe_samples},
                    {"probe_horizon", e.probe_horizon},
                    {"initial", init}};
  return {{"rate", to_json(c.rate)}, {"kernel", to_json(c.kernel)}, {"params", p},
          {"experiment", ex},        {"out", c.out},                 {"seed", c.seed}};
}

inline std::string serialize(const RunConfig& c) { return to_json(c).dump(2); }

} // namespace tenm
