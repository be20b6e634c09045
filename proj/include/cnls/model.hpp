#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cnls/grid.hpp"

namespace cnls {

/// Nodal samples of the linear coefficients: b_i enter the definite form,
/// V_i and gamma the indefinite one. Floors are the positive constants
/// bounding b_i from below.
struct PotentialSet {
  Eigen::VectorXd b1, b2;      // on the unknown nodes, b_i >= floor > 0
  Eigen::VectorXd V1, V2;      // bounded, sign free
  Eigen::VectorXd gamma;       // cross coupling, bounded, sign free
  double b1_floor = 0.0;
  double b2_floor = 0.0;
};

/// Throws std::invalid_argument on a floor violation, a non-finite nodal
/// value, or a length mismatch against n_interior.
void validate_potentials(const PotentialSet& pots, int n_interior);

enum class NonlinearityKind { PowerSum, QuarticCoupled, Custom };

/// Superlinear coupling term W(x, t, s) with gradient and (for the builtin
/// families) analytic Hessian.
///
///   PowerSum:        W = c1(x)|t|^p1 / p1 + c2(x)|s|^p2 / p2
///   QuarticCoupled:  W = t^4/4 + t^2 s^2/2 + s^4/4
///   Custom:          user callbacks (node index, t, s); Hessian by
///                    central differences; theta must be given explicitly.
struct Nonlinearity {
  NonlinearityKind kind = NonlinearityKind::QuarticCoupled;

  // PowerSum data
  Eigen::VectorXd c1, c2;  // nodal, inf > 0
  double p1 = 4.0, p2 = 4.0;

  double theta = 1.0;      // the monotonicity constant, >= 1
  double p_growth = 4.0;   // growth exponent in (2, 2*)

  std::function<double(int, double, double)> custom_W;
  std::function<std::pair<double, double>(int, double, double)> custom_gradW;
};

Nonlinearity make_quartic_coupled();
Nonlinearity make_power_sum(Eigen::VectorXd c1, Eigen::VectorXd c2, double p1,
                            double p2);
/// W = |z|^2: violates the superquadratic growth condition on purpose;
/// used as a negative control for the hypothesis checker.
Nonlinearity make_quadratic_custom();

/// Critical exponent 2N/(N-2) for N > 2, +infinity otherwise.
double critical_exponent(int dimension);

/// Checks admissibility against the spatial dimension (subcritical
/// exponents, positive coefficient floors, theta >= 1, callbacks present
/// for Custom). Throws std::invalid_argument.
void validate_nonlinearity(const Nonlinearity& nl, int dimension,
                           int n_interior);

double eval_W(const Nonlinearity& nl, int x_index, double t, double s);
std::pair<double, double> eval_gradW(const Nonlinearity& nl, int x_index,
                                     double t, double s);
/// Row-major 2x2 Hessian packed as {W_tt, W_ts, W_ss}.
std::array<double, 3> eval_hessW(const Nonlinearity& nl, int x_index, double t,
                                 double s);
/// grad W(x,z) . z - 2 W(x,z); nonnegative for admissible W.
double eval_calW(const Nonlinearity& nl, int x_index, double t, double s);

/// One fully sampled problem instance on a grid.
struct ProblemSpec {
  GridSpec grid_spec;
  PotentialSet potentials;
  Nonlinearity nonlinearity;
  double lambda = 0.0;
};

/// Sampling plan for the hypothesis certificates: |z|-radii for the limit
/// probes, ray directions in the (t, s)-plane, the eta grid for the
/// monotonicity check, and how many nodes to probe.
struct SamplingPlan {
  int n_rays = 16;
  double radius_min = 1e-3;
  double radius_max = 1e3;
  int n_radii = 25;           // geometric grid between min and max
  int n_eta = 101;            // eta in [0, 1]
  int n_x_samples = 8;        // node indices, evenly spread
  double growth_factor = 2.0; // required tail growth of W/|z|^2
  unsigned long seed = 12345;
};

struct HypothesisCheck {
  std::string id;
  bool passed = false;
  bool applicable = true;
  std::string detail;
};

struct HypothesisReport {
  std::vector<HypothesisCheck> checks;
  bool all_passed() const;
  const HypothesisCheck* find(const std::string& id) const;
};

/// Sampling-based certificates for the structural hypotheses:
///   b_floor                inf b_i >= floor > 0 on the nodes
///   v_positive_somewhere   some node has V1 > 0 or V2 > 0
///   growth_bound           W >= 0 (the upper bound is reported, not judged)
///   superquadratic_growth  W/|z|^2 grows without bound along rays
///   zero_limit             W/|z|^2 -> 0 at the origin, W_t(x,0,s) = 0,
///                          W_s(x,t,0) = 0
///   theta_monotonicity     theta*calW(z) >= calW(eta z) on the eta grid
///   radial_symmetry        structural under radial sampling
/// Failures are report entries, never exceptions.
HypothesisReport check_hypotheses(const ProblemSpec& spec, const Grid& grid,
                                  const SamplingPlan& plan = {});

}  // namespace cnls
