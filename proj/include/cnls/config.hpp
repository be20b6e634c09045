#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cnls/model.hpp"
#include "cnls/solver.hpp"

namespace cnls {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Named analytic coefficient profile, sampled onto the grid at load time.
///   constant:      value
///   harmonic:      offset + scale * r^2
///   gaussian_well: offset - depth * exp(-(r/width)^2)
///   step:          inner for |r| < r_step, outer beyond
struct PotentialFamily {
  std::string family = "constant";
  double value = 0.0;
  double offset = 0.0, scale = 1.0;
  double depth = 1.0, width = 1.0;
  double inner = 0.0, outer = 0.0, r_step = 1.0;
};

Eigen::VectorXd sample_family(const PotentialFamily& fam, const Grid& grid);

/// A lambda entry: either a plain number, factor * mu_k, or the midpoint of
/// two eigenvalues. Symbolic entries resolve against the base spectrum.
struct LambdaRequest {
  enum class Kind { Value, MuMultiple, MuMidpoint };
  Kind kind = Kind::Value;
  double value = 0.0;
  double factor = 1.0;
  int mu_index = 1;
  int mu_i = 1, mu_j = 2;
  std::string text;  // echo for the output files
};

struct ExperimentConfig {
  std::string preset;  // "", "eq1.10" or "eq1.11"
  GridSpec grid;

  PotentialFamily b1, b2, V1, V2, gamma;
  double b1_floor = 1.0, b2_floor = 1.0;

  std::string nl_kind = "quartic_coupled";  // | power_sum | custom_quadratic
  double theta = 1.0;
  double p1 = 4.0, p2 = 4.0;
  PotentialFamily c1, c2;

  std::vector<LambdaRequest> lambdas;
  SolverConfig solver;
  int k_max = 12;

  std::string out_dir = "out";
  bool write_json = true;
  bool write_csv = true;
  unsigned long seed = 42;

  std::string config_hash;  // canonical FNV-1a of the merged document
};

/// Parses and validates a JSON config document (preset defaults merged
/// first, explicit keys win). Throws ConfigError with a readable message.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

/// Samples the potential families and builds the nonlinearity for one
/// lambda value.
ProblemSpec instantiate_problem(const ExperimentConfig& cfg, const Grid& grid,
                                double lambda);

/// Resolves a lambda entry against the base-problem eigenvalue sequence.
/// Throws ConfigError when a referenced eigenvalue was not computed.
double resolve_lambda(const LambdaRequest& req, const std::vector<double>& mus);

}  // namespace cnls
