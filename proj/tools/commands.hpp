#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rkg/nash_moser.hpp"
#include "rkg/resonance.hpp"

namespace rkg::cli {

enum Exit : int {
  kOk = 0,
  kNumericFailure = 1,
  kExcluded = 2,
  kUsage = 64,
  kInsufficientGrid = 65,
  kMissingArtifacts = 66,
};

/// Thrown for artifacts that cannot be found or parsed; maps to kMissingArtifacts.
struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolveArgs {
  SolverConfig cfg;
  std::string out = "rkg-solve";
  double verify_tol = 1e-8;
};

struct MeasureArgs {
  double eta = 0.04;
  int samples = 100000;
  ResonanceParams res;
  int m = 0;
  int sign = 1;
  int solve_grid = 5;
  int solve_stages = 2;
  int L0 = 8;
  MeasureOptions opt;
  MeanNormalization mean_norm = MeanNormalization::HalfLine;
  long max_intervals = 2000;
  std::string out = "-";
};

/// Either a prior solve directory or explicit parameters at w = 0.
struct SourceArgs {
  std::string from;
  double eps = 0.0;
  int m = 0;
  int sign = 1;
  ResonanceParams res;
  MeanNormalization mean_norm = MeanNormalization::HalfLine;
};

struct DivisorArgs {
  SourceArgs src;
  int L = -1;     // -1: the last stage's L_n, or 64 without a solve directory
  int Jmax = -1;  // -1: 2 L
  std::string out = "divisors";
};

struct SpectrumArgs {
  SourceArgs src;
  std::vector<int> ells;  // empty: 0..L
  int L = 16;
  int Jmax = 64;
  std::string out = "spectrum.csv";
};

struct VerifyArgs {
  std::string from;
  std::string field;
  double eps = -1.0;
  double tol = 1e-8;
  std::string out;  // empty: <from>/verify.json, or stdout with --field
};

/// Solution data of a prior solve directory.
struct SolveArtifacts {
  SolverConfig cfg;
  CoeffField u, w;
  KernelField v;
  int last_L = 0;
};
SolveArtifacts load_solve_dir(const std::string& dir);

/// Time mean b_0 of 3 u^2, its M and eps for a source.
struct Background {
  double eps = 0.0;
  Profile b0;
  double M = 0.0;
  int last_L = -1;
  bool from_solve = false;
};
Background load_background(const SourceArgs& a);

/// m(eps) samples at eps = eta i / N, i = 1..N, anchored at the explicit value for eps = 0.
struct MGrid {
  std::vector<double> eps, M;
  std::vector<std::string> status;
};
MGrid solve_m_grid(const MeasureArgs& a);

int cmd_solve(const SolveArgs& a, std::ostream& log);
int cmd_measure(const MeasureArgs& a, std::ostream& log);
int cmd_divisors(const DivisorArgs& a, std::ostream& log);
int cmd_spectrum(const SpectrumArgs& a, std::ostream& log);
int cmd_verify(const VerifyArgs& a, std::ostream& log);

/// Parses argv and dispatches; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rkg::cli
