#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tenm/tenm.hpp"

using namespace tenm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
  const auto d = fs::temp_directory_path() / ("tenm_cli_io_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p)
{
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s)
{
  std::ofstream os(p, std::ios::binary);
  os << s;
}

int cli(const std::string& args)
{
  const std::string cmd = std::string(TENM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string config_error_key(const json& j)
{
  try {
    parse_config_json(j);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<accepted>";
}

} // namespace

TEST(Config, MinimalConstantGetsDefaults)
{
  const auto c = parse_config_json(json::parse(R"({"rate": {"kind": "constant", "a0": 1.0}})"));
  EXPECT_TRUE(c.rate.is_constant());
  EXPECT_EQ(c.rate.a0(), 1.0);
  EXPECT_TRUE(c.kernel.is_dirac());
  const ModelParams d;
  EXPECT_EQ(c.params.n, d.n);
  EXPECT_EQ(c.params.x_max, d.x_max);
  EXPECT_EQ(c.params.eps, d.eps);
  EXPECT_EQ(c.params.t_end, d.t_end);
  EXPECT_EQ(c.seed, 0u);
  EXPECT_FALSE(c.params.delta_weight.has_value());
}

TEST(Config, StepThresholdOrderMessage)
{
  try {
    parse_config_json(json::parse(R"({"rate": {"kind": "step", "sigma_plus": 0.2, "sigma_minus": 0.4}})"));
    FAIL() << "accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "rate.sigma_minus");
    EXPECT_NE(std::string(e.what()).find("sigma_minus < sigma_plus required"), std::string::npos);
    EXPECT_EQ(e.exit_code(), 2);
  }
}

TEST(Config, UnknownKeyReportsPath)
{
  EXPECT_EQ(config_error_key(json::parse(R"({"params": {"nn": 4}})")), "params.nn");
  EXPECT_EQ(config_error_key(json::parse(R"({"experiment": {"initial": {"kind": "indicator", "h": 1}}})")),
            "experiment.initial.h");
  EXPECT_EQ(config_error_key(json::parse(R"({"colour": 1})")), "colour");
}

TEST(Config, TypeMismatch)
{
  EXPECT_EQ(config_error_key(json::parse(R"({"params": {"n": "many"}})")), "params.n");
  EXPECT_EQ(config_error_key(json::parse(R"({"params": {"n": 12.5}})")), "params.n");
  EXPECT_EQ(config_error_key(json::parse(R"({"seed": -1})")), "seed");
}

TEST(Config, TimeStepIsDerived)
{
  try {
    parse_config_json(json::parse(R"({"params": {"dt": 0.01}})"));
    FAIL() << "accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "params.dt");
    EXPECT_NE(std::string(e.what()).find("derived"), std::string::npos);
  }
}

TEST(Config, KernelDeltaChecked)
{
  EXPECT_EQ(config_error_key(json::parse(R"({"kernel": {"kind": "exponential", "lambda": 1.0, "delta": 1.0}})")),
            "kernel.delta");
  EXPECT_EQ(config_error_key(json::parse(
              R"({"kernel": {"kind": "exponential", "lambda": 3.0, "delta": 1.0}, "params": {"delta_weight": 2.0}})")),
            "params.delta_weight");
}

TEST(Config, RoundTrip)
{
  RunConfig c;
  c.rate = FiringRateModel(StepRate{0.6, 0.1, 2.0});
  c.kernel = DelayKernel(GammaKernel{3.0, 0.5}, 1.5);
  c.params.eps = 123.25;
  c.params.n = 300;
  c.params.delta_weight = 1.0;
  c.experiment.eps_list = {0.5, 7.0};
  c.experiment.initial.kind = "indicator";
  c.experiment.initial.hi = 0.75;
  c.seed = 0xfeedfacecafebeefULL;
  const auto text = serialize(c);
  const auto back = parse_config_json(json::parse(text));
  EXPECT_EQ(serialize(back), text);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(back.rate.step().sigma_minus, 0.1);
  EXPECT_EQ(back.kernel.kind(), "gamma");
}

TEST(Config, RunJsonAccepted)
{
  RunConfig c;
  c.params.eps = 42.0;
  const json run{{"artifact_version", artifact_version}, {"subcommand", "simulate"}, {"config", to_json(c)}};
  EXPECT_EQ(parse_config_json(run).params.eps, 42.0);
}

TEST(Csv, FormatAndQuoting)
{
  const auto d = scratch("csv");
  {
    CsvWriter w(d / "a.csv", {"x", "k", "s"});
    w.row({0.1, 7LL, std::string("a,b")});
    w.row({1.0 / 3.0, -2LL, std::string("plain")});
    EXPECT_THROW(w.row({1.0}), Error);
  }
  EXPECT_EQ(slurp(d / "a.csv"), "x,k,s\n0.10000000000000001,7,\"a,b\"\n0.33333333333333331,-2,plain\n");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(format_double(INFINITY), "inf");
}

TEST(OutputDir, LockIsExclusive)
{
  const auto d = scratch("lock");
  {
    OutputDir a(d);
    EXPECT_TRUE(fs::exists(d / ".lock"));
    try {
      OutputDir b(d);
      FAIL() << "second lock acquired";
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.key(), "--out");
    }
  }
  EXPECT_FALSE(fs::exists(d / ".lock"));
  OutputDir again(d);
}

TEST(Plots, SeriesGivesDecayScript)
{
  const auto d = scratch("plots_series");
  spit(d / "series.csv", "t,m,p,mass,dist\n0,1,1,1,0.1\n");
  const auto r = emit_plots(d);
  EXPECT_EQ(r.written, std::vector<std::string>{"decay.gp"});
  EXPECT_EQ(r.warnings.size(), 2u);
  EXPECT_NE(slurp(d / "decay.gp").find("series.csv"), std::string::npos);
}

TEST(Plots, SpectrumScript)
{
  const auto d = scratch("plots_spectrum");
  spit(d / "spectrum.csv", "k,re,im\n0,0,0\n");
  const auto r = emit_plots(d);
  EXPECT_EQ(r.written, std::vector<std::string>{"spectrum.gp"});
  EXPECT_TRUE(fs::exists(d / "spectrum.gp"));
}

TEST(Plots, EmptyDirectoryOnlyWarns)
{
  const auto d = scratch("plots_empty");
  const auto r = emit_plots(d);
  EXPECT_TRUE(r.written.empty());
  EXPECT_EQ(r.warnings.size(), 3u);
  EXPECT_TRUE(fs::is_empty(d));
}

TEST(Cli, BadConfigExitsTwo)
{
  const auto d = scratch("bad_config");
  spit(d / "c.json", R"({"params": {"dt": 0.1}})");
  EXPECT_EQ(cli("steady --config " + (d / "c.json").string() + " --out " + (d / "o").string()), 2);
  spit(d / "c2.json", "{ not json");
  EXPECT_EQ(cli("steady --config " + (d / "c2.json").string() + " --out " + (d / "o").string()), 2);
  EXPECT_EQ(cli("steady --config " + (d / "missing.json").string()), 2);
  EXPECT_EQ(cli("simulate --no-such-flag"), 2);
}

TEST(Cli, InadmissibleStartExitsThree)
{
  // a step-rate run from a density above one is a domain failure, not a config error
  const auto d = scratch("domain");
  spit(d / "c.json", R"({"rate": {"kind": "step"}, "params": {"n": 64, "t_end": 1.0},
                        "experiment": {"initial": {"kind": "indicator", "lo": 0.0, "hi": 0.5}}})");
  EXPECT_EQ(cli("simulate --config " + (d / "c.json").string() + " --out " + (d / "o").string()), 3);
}

TEST(Cli, SteadyWritesOutputs)
{
  const auto d = scratch("steady");
  ASSERT_EQ(cli("steady --eps 10 --n 128 --out " + (d / "o").string()), 0);
  for (const char* f : {"steady.csv", "steady.json", "run.json"}) EXPECT_TRUE(fs::exists(d / "o" / f)) << f;
  EXPECT_FALSE(fs::exists(d / "o" / ".lock"));
  const auto j = json::parse(slurp(d / "o" / "steady.json"));
  EXPECT_TRUE(j.contains("M"));
}

TEST(Cli, RunJsonReproducesBitIdentical)
{
  const auto d = scratch("repro");
  const auto a = d / "a", b = d / "b";
  ASSERT_EQ(cli("simulate --eps 5 --n 128 --tend 5 --seed 3 --out " + a.string()), 0);
  ASSERT_EQ(cli("simulate --config " + (a / "run.json").string() + " --out " + b.string()), 0);
  for (const char* f : {"series.csv", "snapshots.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  // identical apart from the output directory
  auto ca = json::parse(slurp(a / "run.json"))["config"], cb = json::parse(slurp(b / "run.json"))["config"];
  ca.erase("out");
  cb.erase("out");
  EXPECT_EQ(ca, cb);
}

TEST(Cli, PrintDefaultsParses)
{
  const auto d = scratch("defaults");
  const std::string cmd = std::string(TENM_CLI_PATH) + " --print-defaults > " + (d / "c.json").string();
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(serialize(parse_config(d / "c.json")), serialize(RunConfig{}));
}
