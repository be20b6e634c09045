#pragma once

#include <string>
#include <vector>

#include "cnls/pencil.hpp"

namespace cnls {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  double r_plus = 0.0;   // 0 = estimate by scanning
  double r_minus = 0.0;  // 0 = estimate by scanning
  double flow_step = 1.0;
  int max_iters = 4000;
  double residual_tol = 1e-9;
  double newton_switch_tol = 1e-3;
  int multistart = 8;
  int path_points = 25;
  int probe_count = 200;
  double r_scan_min = 1e-3;
  double r_scan_max = 10.0;
  int r_scan_points = 40;
  double radius_cap = 1e3;  // upper bound for the r_minus search
  unsigned long seed = 2024;
};

void validate_solver_config(const SolverConfig& cfg);

struct CeramiSample {
  double psi = 0.0;
  double compactness = 0.0;  // (1 + |u|) |Psi'(u)|
  double norm = 0.0;
};

struct CriticalPoint {
  State state;
  double lambda = 0.0;
  double level = 0.0;
  double residual = 0.0;  // A^{-1}-weighted dual residual norm
  int m = 0;
  int iterations = 0;
  std::pair<double, double> component_norms{0.0, 0.0};
  std::vector<CeramiSample> cerami_trace;
  bool converged = false;
  bool nontrivial = false;
  std::string failure_reason;
  /// Largest Psi seen on the frozen boundary mesh across the whole run
  /// (linking branch only; 0 and the far path endpoint for the pass branch).
  double frozen_max_psi = 0.0;
  double alpha = 0.0;   // rim estimate used for acceptance
  double r_plus = 0.0;
  double r_minus = 0.0;
  State search_direction;  // unit ray the far boundary was built on
};

struct RimEstimate {
  double r_plus = 0.0;
  double alpha = 0.0;
};

/// Scans a geometric radius grid, sampling the upper-cone sphere, and
/// returns the radius maximizing the sampled minimum of Psi together with
/// that minimum. Throws GeometryError when no radius yields a positive
/// minimum (lambda too close to mu_{m+1}, or the nonlinearity dominates at
/// every sampled scale).
RimEstimate estimate_r_plus(const FunctionalContext& ctx,
                            const ConeGeometry& geom, double lambda,
                            const SolverConfig& cfg);

/// Smallest radius on a geometric grid, starting above r_plus, at which the
/// sampled Psi on (C_- + R+ e) at that radius is <= 0 for three consecutive
/// grid radii. Throws GeometryError when the cap is reached first (the
/// superquadratic growth never shows below the cap).
double estimate_r_minus(const FunctionalContext& ctx, const ConeGeometry& geom,
                        const State& e, double r_plus, double lambda,
                        const SolverConfig& cfg);

/// Mountain-pass search for the m = 0 bracket: deforms a discrete path from
/// 0 to r_minus*e by descent steps on the path maximizer, then polishes with
/// Newton. The returned point has level > 0 when converged.
CriticalPoint mountain_pass(const FunctionalContext& ctx,
                            const SolverConfig& cfg, const ConeGeometry& geom,
                            double lambda);

/// Linking search for m >= 1: deforms a mesh over the (m+1)-dimensional
/// slice spanned by the lower-cone basis and e, keeping the boundary mesh
/// (where Psi <= 0) frozen, and tracks the mesh maximum down to the saddle.
CriticalPoint linking_flow(const FunctionalContext& ctx,
                           const SolverConfig& cfg, const ConeGeometry& geom,
                           double lambda);

/// Damped Newton refinement of the stationarity system from u0. Requires the
/// dual residual at u0 to be at most cfg.newton_switch_tol unless `force`.
CriticalPoint newton_refine(const FunctionalContext& ctx,
                            const SolverConfig& cfg, const State& u0,
                            double lambda, bool force = false);

struct CeramiReport {
  bool norm_blowup = false;
  bool residual_stall = false;
  bool trivial_attractor = false;
  bool zero_level_nontrivial = false;
  double final_level = 0.0;
  double final_compactness = 0.0;
};

/// Purely diagnostic digest of a flow trace: flags the scenarios that
/// matter for the compactness discussion (norm growth at bounded level,
/// non-decaying scaled residuals, collapse to the trivial state, and
/// convergence to a zero-level nontrivial state).
CeramiReport cerami_monitor(const std::vector<CeramiSample>& trace);

/// Plain descent flow from u0 with Armijo-damped preconditioned steps.
/// Used by the diagnostics and tests; Psi never increases along it.
std::pair<State, std::vector<CeramiSample>> run_descent_flow(
    const FunctionalContext& ctx, const State& u0, double lambda,
    int max_iters, const SolverConfig& cfg);

/// |u|_A = sqrt(2 E(u)).
double a_norm(const FunctionalContext& ctx, const State& u);

/// Probes used for the rim scan: upper-cone samples at the given radius.
/// Exposed so the verification layer can re-sample the same sets.
std::vector<State> sample_upper_cone(const FunctionalContext& ctx,
                                     const ConeGeometry& geom, double radius,
                                     int count, unsigned long seed);

/// Samples of (C_- + R+ e) at the given radius (the linking boundary shell).
std::vector<State> sample_link_shell(const FunctionalContext& ctx,
                                     const ConeGeometry& geom, const State& e,
                                     double radius, int count,
                                     unsigned long seed);

}  // namespace cnls
