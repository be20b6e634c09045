#pragma once

#include "cnls/config.hpp"
#include "cnls/verify.hpp"

namespace cnls {

/// Exit codes shared by the drivers and the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitSolveFailed = 1;
inline constexpr int kExitUsage = 2;

/// Computes the eigenvalue table of the configured problem and writes
/// spectrum.json. An empty positive spectrum is not an error: the file
/// carries the failure flag and the exit code stays 0.
int run_spectrum(const ExperimentConfig& cfg);

/// Runs the full search for every lambda entry: sign normalization,
/// bracketing, radius estimation, the pass/linking flow, Newton polish and
/// the strong-form check. Writes result_<lambda>.json, profile_<lambda>.csv
/// and sweep.csv. Individual failures are recorded; the exit code is 1 only
/// when every entry failed.
int run_solve(const ExperimentConfig& cfg);

/// Runs the verification suites plus the hypothesis certificates on the
/// configured problem and writes verify.json. Nonzero exit on any failure.
int run_verify(const ExperimentConfig& cfg, bool corrupt_stencil = false);

/// One row of the solve summary (sweep.csv).
struct SweepRow {
  double lambda = 0.0;
  int m = 0;
  double level = 0.0;
  double residual = 0.0;
  double u1_norm = 0.0;
  double u2_norm = 0.0;
  int iterations = 0;
  bool accepted = false;
  std::string note;
};

/// In-process variant of run_solve for tests and refinement studies.
std::vector<SweepRow> solve_all(const ExperimentConfig& cfg);

/// Re-runs the sweep on grid variants (n_nodes, radius) without touching
/// the rest of the configuration. The accepted levels across rows quantify
/// the truncation and mesh error of the computed branch.
std::vector<std::vector<SweepRow>> refinement_study(
    const ExperimentConfig& cfg,
    const std::vector<std::pair<int, double>>& grids);

}  // namespace cnls
