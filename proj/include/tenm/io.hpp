#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "errors.hpp"

namespace tenm {

// '.' decimal, '\n' endings, 17 significant digits; independent of the global locale
inline std::string format_double(double v)
{
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  for (char* c = buf; *c; ++c)
    if (*c == ',') *c = '.';
  return buf;
}

using CsvCell = std::variant<double, long long, std::string>;

class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : os_(path, std::ios::binary), width_(header.size())
  {
    if (!os_) throw Error("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << '\n';
  }

  void row(const std::vector<CsvCell>& cells)
  {
    if (cells.size() != width_) throw Error("csv: row width does not match the header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, double>) os_ << format_double(v);
          else if constexpr (std::is_same_v<T, long long>) os_ << v;
          else os_ << quote(v);
        },
        cells[i]);
    }
    os_ << '\n';
  }

private:
  static std::string quote(const std::string& s)
  {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }

  std::ofstream os_;
  std::size_t width_;
};

// Per-run output directory guarded by an O_EXCL lock file, removed on destruction.
class OutputDir {
public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir))
  {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("--out", "cannot create " + dir_.string() + ": " + ec.message());
    lock_ = dir_ / ".lock";
    fd_ = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw ConfigError("--out", dir_.string() + " is in use by another run (remove " + lock_.string() +
                                   " if that run is gone)");
    const auto pid = std::to_string(::getpid()) + "\n";
    if (::write(fd_, pid.data(), pid.size()) < 0) {
      // the lock still holds without the pid
    }
  }
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;
  ~OutputDir()
  {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      std::filesystem::remove(lock_, ec);
    }
  }

  const std::filesystem::path& path() const { return dir_; }
  std::filesystem::path operator/(const std::string& name) const { return dir_ / name; }

private:
  std::filesystem::path dir_, lock_;
  int fd_ = -1;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

inline void write_run_json(const OutputDir& dir, const std::string& subcommand, const RunConfig& cfg)
{
  write_json(dir / "run.json",
             {{"artifact_version", artifact_version}, {"subcommand", subcommand}, {"config", to_json(cfg)}});
}

struct PlotResult {
  std::vector<std::string> written;
  std::vector<std::string> warnings;
};

// gnuplot scripts next to the CSVs they read; missing CSVs are skipped with a warning
inline PlotResult emit_plots(const std::filesystem::path& dir)
{
  PlotResult r;
  auto present = [&](const char* csv) { return std::filesystem::is_regular_file(dir / csv); };
  auto script = [&](const char* name, const std::string& body) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw Error(std::string("cannot write ") + (dir / name).string());
    os << body;
    r.written.push_back(name);
  };
  const std::string head = "set datafile separator ','\nset key autotitle columnhead\n";
  if (present("series.csv")) {
    script("decay.gp", head + "set logscale y\nset xlabel 't'\nset ylabel 'L1 distance to steady state'\n"
                              "plot 'series.csv' using 't':'dist' with lines title 'dist'\n");
  } else {
    r.warnings.push_back("series.csv missing: decay.gp skipped");
  }
  if (present("spectrum.csv")) {
    script("spectrum.gp", head + "set xlabel 'Re'\nset ylabel 'Im'\nset grid\n"
                                 "plot 'spectrum.csv' using 're':'im' with points pt 7 ps 0.5 title 'eigenvalues'\n");
  } else {
    r.warnings.push_back("spectrum.csv missing: spectrum.gp skipped");
  }
  if (present("snapshots.csv")) {
    script("density.gp", head + "set xlabel 'x'\nset ylabel 'f(t,x)'\n"
                                "plot 'snapshots.csv' using 'x':'f':'t' with points pt 7 ps 0.3 palette title 'f'\n");
  } else {
    r.warnings.push_back("snapshots.csv missing: density.gp skipped");
  }
  return r;
}

} // namespace tenm
