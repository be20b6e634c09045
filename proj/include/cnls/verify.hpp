#pragma once

#include <string>
#include <vector>

#include "cnls/solver.hpp"

namespace cnls {

struct StrongResidual {
  double res1 = 0.0;
  double res2 = 0.0;
};

/// Strong-form residuals of both equations, quadrature-weighted L2 norms,
/// computed from raw difference stencils rather than the assembled forms.
/// `corrupt_stencil` perturbs the stencil scale; it exists purely as a
/// negative control for the verification pipeline.
StrongResidual residual_check(const FunctionalContext& ctx, const State& u,
                              double lambda, bool corrupt_stencil = false);

/// The dual residual measured in the weight-compensated nodal norm
/// sqrt(sum r_i^2 / w_i), directly comparable with residual_check.
double dual_residual_nodal_norm(const FunctionalContext& ctx, const State& u,
                                double lambda);

/// Worst relative error between central differences of E, J, P, Psi and
/// their analytic pairings over `count` random (u, v) draws.
double fd_gradient_check(const FunctionalContext& ctx, int count, double scale,
                         double lambda = 0.7, unsigned long seed = 321);

/// Minimal slack of <E'(u)-E'(v), u-v> - (|u1|_1-|v1|_1)^2 - (|u2|_2-|v2|_2)^2
/// over `count` random pairs. Nonnegative up to roundoff.
double norm_expansion_suite(const FunctionalContext& ctx, int count,
                     unsigned long seed = 654);

struct BruteForceComparison {
  bool matched = false;
  double state_distance = 0.0;   // A-norm gap to the closest enumerated point
  double level_difference = 0.0;
  int n_critical_points = 0;
  std::vector<double> levels;
};

/// Enumerates critical points on a tiny instance (total unknowns <= 12) by
/// damped Newton from a dense seed cloud, then checks the candidate against
/// the enumeration. Throws std::invalid_argument above the dimension cap.
BruteForceComparison brute_force_solution_check(const FunctionalContext& ctx,
                                                double lambda,
                                                const CriticalPoint& candidate,
                                                unsigned long seed = 987);

struct VerifySuiteResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  std::string detail;
};

struct VerifyOptions {
  int fd_count = 1000;
  int expansion_count = 1000;
  int floor_count = 10000;
  int ratio_count = 32;
  bool corrupt_stencil = false;
  unsigned long seed = 2024;
};

/// Runs every suite against the configured problem at the given lambda and
/// returns one row per suite. Any failed row means the batch fails.
std::vector<VerifySuiteResult> run_all_suites(const FunctionalContext& ctx,
                                              double lambda,
                                              const VerifyOptions& opts);

/// W == 0 stand-in used for the purely linear checks.
Nonlinearity make_zero_custom();

}  // namespace cnls
