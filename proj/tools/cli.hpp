#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace affine::cli {

inline const std::vector<std::string> kCommands = {"validate",    "charfn",   "density",   "invariant", "simulate",
                                                   "bound-check", "lyapunov", "dobrushin", "tvdecay"};

/// Fully resolved invocation; every default is filled in by parse_config.
struct RunConfig {
  std::string command;
  std::filesystem::path model_path;
  std::filesystem::path out_dir;
  double t = 1.0;
  std::vector<double> x;  ///< empty means the origin
  std::vector<double> u;
  std::string grid;       ///< empty means the model-dependent default
  std::optional<double> theta;
  double t0 = 1.0;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  std::string method = "fft";
  std::vector<int> q;
  std::vector<int> qt;
  std::size_t paths = 10000;
  double dt = 1e-3;
  std::vector<double> h = {0.25, 0.5, 1.0};
  double M = 2.0;
  std::vector<double> times;
  std::vector<std::vector<double>> xs;
  std::size_t samples = 0;  ///< 0 means the command's default
  double fit_lo = 1e-6;
  double fit_hi = 0.5;
  unsigned threads = 0;
};

/// Throws affine::Error(Usage) on bad arguments; returns nullopt when help was printed.
std::optional<RunConfig> parse_config(const std::vector<std::string>& args);

/// Runs the command and writes report.json plus CSV artifacts into out_dir. Returns the exit status.
int dispatch(const RunConfig& cfg);

/// parse_config + dispatch with the exit-status taxonomy: 0 ok, 1 usage, 2 violated hypothesis, 3 numerics.
int run(const std::vector<std::string>& args);

/// Default grid string for the model at the given dimension split.
std::string default_grid(int m, int n);

}  // namespace affine::cli
