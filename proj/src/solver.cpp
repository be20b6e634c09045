#include "cnls/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

namespace cnls {

namespace {

constexpr double kTrivialNorm = 1e-8;  // below this the state counts as zero

State a_normalized(const FunctionalContext& ctx, const State& u) {
  Eigen::VectorXd x = u.flat();
  const double norm = std::sqrt(x.dot(ctx.A() * x));
  if (!(norm > 0.0))
    throw std::invalid_argument("solver: cannot normalize the zero state");
  return State::from_flat(x / norm);
}

struct ArmijoResult {
  State next;
  double psi_next;
  bool accepted = false;
};

// One preconditioned descent step with backtracking. The decrease predicate
// uses the exact pairing <Psi'(u), g> = g^T A g, so Psi never increases on
// an accepted step. `max_move` caps the step length in the A-norm; the path
// and mesh deformations use it to keep points from tunneling through the
// ridge in a single step.
ArmijoResult armijo_step(
    const FunctionalContext& ctx, const State& u, double lambda, double psi_u,
    double step0,
    double max_move = std::numeric_limits<double>::infinity()) {
  ArmijoResult out{u, psi_u, false};
  const State g = sobolev_gradient(ctx, u, lambda);
  const Eigen::VectorXd gflat = g.flat();
  const double slope = gflat.dot(ctx.A() * gflat);
  if (!(slope > 0.0)) return out;
  double s = step0;
  if (std::isfinite(max_move)) {
    const double glen = std::sqrt(slope);
    if (glen > 0.0) s = std::min(s, max_move / glen);
  }
  const Eigen::VectorXd uflat = u.flat();
  for (int halving = 0; halving < 40; ++halving) {
    State cand = State::from_flat(uflat - s * gflat);
    const double psi_c = psi(ctx, cand, lambda);
    if (psi_c <= psi_u - 1e-4 * s * slope) {
      out.next = std::move(cand);
      out.psi_next = psi_c;
      out.accepted = true;
      return out;
    }
    s *= 0.5;
  }
  return out;
}

CeramiSample make_sample(const FunctionalContext& ctx, const State& u,
                         double lambda, double psi_u) {
  const double norm = a_norm(ctx, u);
  return {psi_u, (1.0 + norm) * residual_norm(ctx, u, lambda), norm};
}

Eigen::SparseMatrix<double> newton_jacobian(const FunctionalContext& ctx,
                                            const State& u, double lambda) {
  const int n = ctx.n();
  const Eigen::VectorXd& w = ctx.grid().mass_weights;
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> trips;
  trips.reserve(ctx.A().nonZeros() + ctx.B().nonZeros() + 4 * n);
  for (int k = 0; k < ctx.A().outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(ctx.A(), k); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < ctx.B().outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(ctx.B(), k); it; ++it)
      trips.emplace_back(it.row(), it.col(), -lambda * it.value());
  for (int i = 0; i < n; ++i) {
    const auto h = eval_hessW(ctx.nonlinearity(), i, u.u1[i], u.u2[i]);
    trips.emplace_back(i, i, -w[i] * h[0]);
    trips.emplace_back(i, n + i, -w[i] * h[1]);
    trips.emplace_back(n + i, i, -w[i] * h[1]);
    trips.emplace_back(n + i, n + i, -w[i] * h[2]);
  }
  Eigen::SparseMatrix<double> jac(2 * n, 2 * n);
  jac.setFromTriplets(trips.begin(), trips.end());
  return jac;
}

void fill_point_data(const FunctionalContext& ctx, CriticalPoint& cp) {
  cp.level = psi(ctx, cp.state, cp.lambda);
  cp.residual = residual_norm(ctx, cp.state, cp.lambda);
  cp.component_norms = component_norms(ctx, cp.state);
  cp.nontrivial = a_norm(ctx, cp.state) >= kTrivialNorm;
}

// Ascends Psi restricted to span(frame) from the coefficients c0 (frame
// columns are A-orthonormal). The restriction decays superquadratically, so
// a local maximum exists; it sits near the saddle whenever the slice nearly
// contains it, which makes it a strong Newton seed.
Eigen::VectorXd slice_maximize(const FunctionalContext& ctx, double lambda,
                               const std::vector<Eigen::VectorXd>& frame,
                               Eigen::VectorXd c0) {
  const int k = static_cast<int>(frame.size());
  auto lift = [&](const Eigen::VectorXd& c) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(ctx.dim());
    for (int i = 0; i < k; ++i) x += c[i] * frame[i];
    return x;
  };
  Eigen::VectorXd c = std::move(c0);
  double val = psi(ctx, State::from_flat(lift(c)), lambda);
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::VectorXd r =
        dual_residual(ctx, State::from_flat(lift(c)), lambda).flat();
    Eigen::VectorXd grad(k);
    for (int i = 0; i < k; ++i) grad[i] = r.dot(frame[i]);
    const double g2 = grad.squaredNorm();
    if (g2 <= 1e-24 * (1.0 + val * val)) break;
    double s = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 40; ++halving) {
      const Eigen::VectorXd cand = c + s * grad;
      const double v = psi(ctx, State::from_flat(lift(cand)), lambda);
      if (v >= val + 1e-4 * s * g2) {
        c = cand;
        val = v;
        moved = true;
        break;
      }
      s *= 0.5;
    }
    if (!moved) break;
  }
  return lift(c);
}

}  // namespace

void validate_solver_config(const SolverConfig& cfg) {
  if (cfg.r_plus > 0.0 && cfg.r_minus > 0.0 && !(cfg.r_minus > cfg.r_plus))
    throw std::invalid_argument("solver config: r_minus must exceed r_plus");
  if (!(cfg.residual_tol > 0.0) || !(cfg.newton_switch_tol > 0.0))
    throw std::invalid_argument("solver config: tolerances must be positive");
  if (cfg.residual_tol >= cfg.newton_switch_tol)
    throw std::invalid_argument(
        "solver config: residual_tol must be below newton_switch_tol");
  if (cfg.flow_step <= 0.0 || cfg.max_iters < 1 || cfg.path_points < 5 ||
      cfg.probe_count < 1 || cfg.multistart < 1)
    throw std::invalid_argument("solver config: bad search parameters");
}

double a_norm(const FunctionalContext& ctx, const State& u) {
  return std::sqrt(std::max(0.0, 2.0 * energy_E(ctx, u)));
}

std::vector<State> sample_upper_cone(const FunctionalContext& ctx,
                                     const ConeGeometry& geom, double radius,
                                     int count, unsigned long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<State> probes;
  probes.reserve(count);

  auto push_scaled = [&](const State& dir) {
    Eigen::VectorXd x = dir.flat();
    const double norm = std::sqrt(x.dot(ctx.A() * x));
    if (norm > 0.0) probes.push_back(State::from_flat(radius / norm * x));
  };

  // coherent single modes first: they are the directions where the
  // nonlinear term actually bites
  for (const State& v : geom.basis_plus) {
    if (static_cast<int>(probes.size()) >= count / 2) break;
    push_scaled(v);
  }

  const bool whole_space = geom.m == 0 || geom.spectrum_empty;
  const int dim = ctx.dim();
  while (static_cast<int>(probes.size()) < count) {
    if (whole_space && (probes.size() % 2 == 0 || geom.basis_plus.empty())) {
      Eigen::VectorXd x(dim);
      for (int i = 0; i < dim; ++i) x[i] = gauss(rng);
      push_scaled(State::from_flat(x));
    } else if (!geom.basis_plus.empty()) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
      for (const State& v : geom.basis_plus)
        x += std::abs(gauss(rng)) * v.flat();
      push_scaled(State::from_flat(x));
    } else {
      Eigen::VectorXd x(dim);
      for (int i = 0; i < dim; ++i) x[i] = gauss(rng);
      push_scaled(State::from_flat(x));
    }
  }
  return probes;
}

std::vector<State> sample_link_shell(const FunctionalContext& ctx,
                                     const ConeGeometry& geom, const State& e,
                                     double radius, int count,
                                     unsigned long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<State> probes;

  const State ehat = a_normalized(ctx, e);
  if (geom.m == 0) {
    probes.push_back(State::from_flat(radius * ehat.flat()));
    return probes;
  }
  std::vector<Eigen::VectorXd> dirs;
  for (const State& v : geom.basis_minus)
    dirs.push_back(a_normalized(ctx, v).flat());
  probes.reserve(count);
  // include the pure ray and the pure span shell
  probes.push_back(State::from_flat(radius * ehat.flat()));
  while (static_cast<int>(probes.size()) < count) {
    Eigen::VectorXd x = std::abs(gauss(rng)) * ehat.flat();
    for (const auto& d : dirs) x += gauss(rng) * d;
    const double norm = std::sqrt(x.dot(ctx.A() * x));
    if (norm > 0.0) probes.push_back(State::from_flat(radius / norm * x));
  }
  return probes;
}

RimEstimate estimate_r_plus(const FunctionalContext& ctx,
                            const ConeGeometry& geom, double lambda,
                            const SolverConfig& cfg) {
  if (!(lambda < geom.mu_m1))
    throw GeometryError("rim estimate: lambda must lie strictly below mu_{m+1}");
  RimEstimate best{0.0, -std::numeric_limits<double>::infinity()};
  const double lo = std::log(cfg.r_scan_min), hi = std::log(cfg.r_scan_max);
  for (int k = 0; k < cfg.r_scan_points; ++k) {
    const double r = std::exp(lo + (hi - lo) * k / (cfg.r_scan_points - 1));
    const auto probes =
        sample_upper_cone(ctx, geom, r, cfg.probe_count, cfg.seed + 31 * k);
    double alpha_r = std::numeric_limits<double>::infinity();
    for (const State& u : probes)
      alpha_r = std::min(alpha_r, psi(ctx, u, lambda));
    if (alpha_r > best.alpha) best = {r, alpha_r};
  }
  if (!(best.alpha > 0.0))
    throw GeometryError(
        "rim estimate: no radius with a positive sampled minimum; lambda may "
        "sit too close to mu_{m+1} or the coupling term dominates at every "
        "sampled scale");
  return best;
}

double estimate_r_minus(const FunctionalContext& ctx, const ConeGeometry& geom,
                        const State& e, double r_plus, double lambda,
                        const SolverConfig& cfg) {
  double r = std::max(r_plus * 1.25, 1e-6);
  int consecutive = 0;
  double first_of_run = r;
  int index = 0;
  while (r <= cfg.radius_cap) {
    const auto probes =
        sample_link_shell(ctx, geom, e, r, cfg.probe_count, cfg.seed + 977 * index);
    double worst = -std::numeric_limits<double>::infinity();
    for (const State& u : probes) worst = std::max(worst, psi(ctx, u, lambda));
    if (worst <= 0.0) {
      if (consecutive == 0) first_of_run = r;
      if (++consecutive == 3) return first_of_run;
    } else {
      consecutive = 0;
    }
    r *= 1.25;
    ++index;
  }
  throw GeometryError(
      "far radius: Psi stayed positive on the shell up to the radius cap; "
      "the superquadratic growth never took over");
}

CriticalPoint newton_refine(const FunctionalContext& ctx,
                            const SolverConfig& cfg, const State& u0,
                            double lambda, bool force) {
  CriticalPoint cp;
  cp.lambda = lambda;
  cp.state = u0;

  double res = residual_norm(ctx, u0, lambda);
  if (!force && res > cfg.newton_switch_tol) {
    cp.failure_reason = "newton: starting residual above the switch threshold";
    fill_point_data(ctx, cp);
    return cp;
  }

  State u = u0;
  cp.cerami_trace.push_back(make_sample(ctx, u, lambda, psi(ctx, u, lambda)));
  for (int iter = 0; iter < 60; ++iter) {
    if (res <= cfg.residual_tol) {
      cp.converged = true;
      break;
    }
    const Eigen::SparseMatrix<double> jac = newton_jacobian(ctx, u, lambda);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(jac);
    if (lu.info() != Eigen::Success) {
      std::ostringstream os;
      os << "newton: singular Jacobian";
      if (ctx.dim() <= 1200) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(jac)};
        os << " (smallest singular value ~ "
           << svd.singularValues().tail(1)(0) << ")";
      }
      cp.failure_reason = os.str();
      break;
    }
    const Eigen::VectorXd delta = lu.solve(dual_residual(ctx, u, lambda).flat());
    double s = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 30; ++halving) {
      State cand = State::from_flat(u.flat() - s * delta);
      const double res_c = residual_norm(ctx, cand, lambda);
      if (res_c <= (1.0 - 1e-4 * s) * res) {
        u = std::move(cand);
        res = res_c;
        moved = true;
        break;
      }
      s *= 0.5;
    }
    if (!moved) {
      cp.failure_reason = "newton: step halving found no residual decrease";
      break;
    }
    ++cp.iterations;
    cp.cerami_trace.push_back(make_sample(ctx, u, lambda, psi(ctx, u, lambda)));
  }
  if (!cp.converged && cp.failure_reason.empty())
    cp.failure_reason = "newton: iteration budget exhausted";
  cp.state = u;
  fill_point_data(ctx, cp);
  return cp;
}

// ---- mountain pass ---------------------------------------------------------

namespace {

struct PathFlowOutcome {
  CriticalPoint point;
  bool accepted = false;
  std::string reason;
};

// Re-space the polyline nodes uniformly by A-norm arclength.
void redistribute_path(const FunctionalContext& ctx, std::vector<State>& pts) {
  const int P = static_cast<int>(pts.size());
  std::vector<double> cum(P, 0.0);
  for (int k = 1; k < P; ++k) {
    const Eigen::VectorXd d = pts[k].flat() - pts[k - 1].flat();
    cum[k] = cum[k - 1] + std::sqrt(d.dot(ctx.A() * d));
  }
  if (!(cum.back() > 0.0)) return;
  std::vector<State> fresh = pts;
  for (int k = 1; k + 1 < P; ++k) {
    const double target = cum.back() * k / (P - 1);
    int seg = 1;
    while (seg < P - 1 && cum[seg] < target) ++seg;
    const double span = cum[seg] - cum[seg - 1];
    const double t = span > 0.0 ? (target - cum[seg - 1]) / span : 0.0;
    fresh[k] = State::from_flat((1.0 - t) * pts[seg - 1].flat() +
                                t * pts[seg].flat());
  }
  pts = std::move(fresh);
}

PathFlowOutcome run_path_flow(const FunctionalContext& ctx,
                              const SolverConfig& cfg, double lambda,
                              const State& dir_hat, double r_minus,
                              double alpha, double r_plus) {
  PathFlowOutcome out;
  const int P = std::max(5, cfg.path_points);
  std::vector<State> pts(P);
  std::vector<double> psis(P);
  for (int k = 0; k < P; ++k) {
    pts[k] = State::from_flat((r_minus * k / (P - 1)) * dir_hat.flat());
    psis[k] = psi(ctx, pts[k], lambda);
  }
  if (psis.back() > 0.0) {
    out.reason = "path endpoint has positive Psi";
    return out;
  }

  std::vector<CeramiSample> trace;
  int newton_attempts = 0;
  int stall_count = 0;

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    int kmax = 1;
    for (int k = 2; k + 1 < P; ++k)
      if (psis[k] > psis[kmax]) kmax = k;  // strict: ties keep lowest index

    trace.push_back(make_sample(ctx, pts[kmax], lambda, psis[kmax]));
    const double res = trace.back().compactness / (1.0 + trace.back().norm);

    // The discrete maximizer hovers near the saddle with a gradient set by
    // the path resolution, so the polish is attempted periodically, not only
    // once the residual falls below the switch threshold. The seed is the
    // ray maximum through the maximizer, which parks on the natural
    // constraint surface of the saddle.
    const bool try_newton =
        res <= cfg.newton_switch_tol || (iter >= 40 && iter % 20 == 0);
    if (try_newton && newton_attempts <= 60) {
      State seed = pts[kmax];
      const double norm = a_norm(ctx, seed);
      if (norm > 0.0) {
        const std::vector<Eigen::VectorXd> ray{seed.flat() / norm};
        seed = State::from_flat(slice_maximize(
            ctx, lambda, ray, Eigen::VectorXd::Constant(1, norm)));
      }
      CriticalPoint cand = newton_refine(ctx, cfg, seed, lambda, /*force=*/true);
      ++newton_attempts;
      if (cand.converged && cand.nontrivial && cand.level > 0.0 &&
          cand.residual <= cfg.residual_tol) {
        cand.iterations += iter;
        trace.insert(trace.end(), cand.cerami_trace.begin(),
                     cand.cerami_trace.end());
        cand.cerami_trace = std::move(trace);
        cand.alpha = alpha;
        cand.r_plus = r_plus;
        cand.r_minus = r_minus;
        out.point = std::move(cand);
        out.accepted = true;
        return out;
      }
    }

    bool moved = false;
    const double max_move = 0.5 * r_minus / (P - 1);
    for (int k = std::max(1, kmax - 1); k <= std::min(P - 2, kmax + 1); ++k) {
      auto step =
          armijo_step(ctx, pts[k], lambda, psis[k], cfg.flow_step, max_move);
      if (step.accepted) {
        pts[k] = std::move(step.next);
        psis[k] = step.psi_next;
        moved = true;
      }
    }
    if (!moved) {
      if (++stall_count > 5) {
        out.reason = "path maximizer numerically stationary short of the "
                     "residual target";
        return out;
      }
    } else {
      stall_count = 0;
    }

    // collapse to the trivial state
    double top = -std::numeric_limits<double>::infinity(), top_norm = 0.0;
    for (int k = 1; k + 1 < P; ++k) {
      top = std::max(top, psis[k]);
      top_norm = std::max(top_norm, a_norm(ctx, pts[k]));
    }
    if (top <= 1e-12 && top_norm <= 1e-6 * r_minus) {
      out.reason = "path collapsed onto the trivial attractor";
      return out;
    }

    // keep the polyline from bunching
    double seg_min = std::numeric_limits<double>::infinity(), seg_max = 0.0;
    for (int k = 1; k < P; ++k) {
      const Eigen::VectorXd d = pts[k].flat() - pts[k - 1].flat();
      const double len = std::sqrt(d.dot(ctx.A() * d));
      seg_min = std::min(seg_min, len);
      seg_max = std::max(seg_max, len);
    }
    if (seg_max > 8.0 * std::max(seg_min, 1e-300)) {
      redistribute_path(ctx, pts);
      for (int k = 0; k < P; ++k) psis[k] = psi(ctx, pts[k], lambda);
    }
  }
  out.reason = "flow iteration budget exhausted";
  return out;
}

std::vector<State> multistart_directions(const FunctionalContext& ctx,
                                         const ConeGeometry& geom,
                                         const SolverConfig& cfg) {
  std::vector<State> dirs;
  dirs.push_back(a_normalized(ctx, geom.e_vector));
  if (geom.basis_plus.size() >= 2) {
    const Eigen::VectorXd v1 = a_normalized(ctx, geom.basis_plus[0]).flat();
    const Eigen::VectorXd v2 = a_normalized(ctx, geom.basis_plus[1]).flat();
    for (int k = 1; k <= 7; ++k) {
      const double th = std::numbers::pi * k / 8.0;
      dirs.push_back(State::from_flat(std::cos(th) * v1 + std::sin(th) * v2));
    }
  }
  // concentrated bump profiles at a few widths; these carry the strongest
  // coupling response per unit of energy and serve any sign pattern of J
  const Grid& grid = ctx.grid();
  for (double width : {1.0, grid.spec.radius / 8.0, grid.spec.radius / 4.0,
                       grid.spec.radius / 2.0}) {
    Eigen::VectorXd bump(grid.n_interior);
    for (int i = 0; i < grid.n_interior; ++i) {
      const double x = grid.interior_node(i) / width;
      bump[i] = std::exp(-x * x);
    }
    dirs.push_back(a_normalized(ctx, State(bump, bump)));
  }
  std::mt19937_64 rng(cfg.seed + 4242);
  std::normal_distribution<double> gauss;
  int guard = 0;
  while (static_cast<int>(dirs.size()) < 2 * cfg.multistart && guard++ < 200) {
    Eigen::VectorXd x(ctx.dim());
    for (int i = 0; i < ctx.dim(); ++i) x[i] = gauss(rng);
    State s = State::from_flat(x);
    if (functional_J(ctx, s) > 0.0) dirs.push_back(a_normalized(ctx, s));
  }
  if (static_cast<int>(dirs.size()) > cfg.multistart)
    dirs.resize(std::max(1, cfg.multistart));
  return dirs;
}

}  // namespace

CriticalPoint mountain_pass(const FunctionalContext& ctx,
                            const SolverConfig& cfg, const ConeGeometry& geom,
                            double lambda) {
  validate_solver_config(cfg);
  if (geom.m != 0)
    throw std::invalid_argument("mountain_pass: bracket m must be 0");

  RimEstimate rim;
  if (cfg.r_plus > 0.0) {
    rim.r_plus = cfg.r_plus;
    double worst = std::numeric_limits<double>::infinity();
    for (const State& u : sample_upper_cone(ctx, geom, cfg.r_plus,
                                            cfg.probe_count, cfg.seed))
      worst = std::min(worst, psi(ctx, u, lambda));
    rim.alpha = worst;
  } else {
    rim = estimate_r_plus(ctx, geom, lambda, cfg);
  }

  CriticalPoint last_failure;
  last_failure.lambda = lambda;
  std::string reasons;
  const auto dirs = multistart_directions(ctx, geom, cfg);
  for (size_t attempt = 0; attempt < dirs.size(); ++attempt) {
    double r_minus = cfg.r_minus;
    if (!(r_minus > 0.0)) {
      try {
        r_minus = estimate_r_minus(ctx, geom, dirs[attempt], rim.r_plus,
                                   lambda, cfg);
      } catch (const GeometryError& err) {
        reasons += std::string(err.what()) + "; ";
        continue;
      }
    }
    auto outcome = run_path_flow(ctx, cfg, lambda, dirs[attempt], r_minus,
                                 rim.alpha, rim.r_plus);
    if (outcome.accepted) {
      outcome.point.m = 0;
      outcome.point.search_direction = dirs[attempt];
      // the fixed endpoints are the frozen set of this branch
      outcome.point.frozen_max_psi =
          std::max(0.0, psi(ctx, State::from_flat(r_minus * dirs[attempt].flat()),
                            lambda));
      return outcome.point;
    }
    reasons += outcome.reason + "; ";
  }
  last_failure.failure_reason = "mountain pass failed: " + reasons;
  last_failure.state = State::zero(ctx.n());
  fill_point_data(ctx, last_failure);
  last_failure.converged = false;
  last_failure.alpha = rim.alpha;
  last_failure.r_plus = rim.r_plus;
  return last_failure;
}

// ---- linking flow ----------------------------------------------------------

namespace {

struct LinkMesh {
  std::vector<State> pts;
  std::vector<double> psis;
  std::vector<bool> frozen;
  double frozen_max = -std::numeric_limits<double>::infinity();
};

LinkMesh build_link_mesh(const FunctionalContext& ctx, const ConeGeometry& geom,
                         const SolverConfig& cfg, double lambda,
                         double r_minus) {
  const int m = geom.m;
  std::vector<Eigen::VectorXd> frame;
  for (const State& v : geom.basis_minus)
    frame.push_back(a_normalized(ctx, v).flat());
  frame.push_back(a_normalized(ctx, geom.e_vector).flat());

  // directions on the half sphere {t >= 0} of the coefficient space
  std::vector<Eigen::VectorXd> dirs;
  if (m == 1) {
    const int nth = std::max(8, cfg.path_points);
    for (int j = 0; j <= nth; ++j) {
      const double th = std::numbers::pi * j / nth;
      Eigen::VectorXd y(2);
      y << std::cos(th), std::sin(th);
      dirs.push_back(y);
    }
  } else {
    std::mt19937_64 rng(cfg.seed + 555);
    std::normal_distribution<double> gauss;
    for (int i = 0; i < m + 1; ++i) {  // coordinate rays, +- on the span part
      Eigen::VectorXd y = Eigen::VectorXd::Zero(m + 1);
      y[i] = 1.0;
      dirs.push_back(y);
      if (i < m) dirs.push_back(-y);
    }
    const int extra = std::max(24, 4 * cfg.path_points);
    for (int k = 0; k < extra; ++k) {
      Eigen::VectorXd y(m + 1);
      for (int i = 0; i <= m; ++i) y[i] = gauss(rng);
      y[m] = std::abs(y[m]);
      if (y.norm() > 0.0) dirs.push_back(y / y.norm());
    }
  }

  LinkMesh mesh;
  const int L = std::max(4, cfg.path_points);
  auto lift = [&](const Eigen::VectorXd& y) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(ctx.dim());
    for (int i = 0; i <= m; ++i) x += y[i] * frame[i];
    return State::from_flat(x);
  };
  // center point (the origin) is part of the lower disc
  mesh.pts.push_back(State::zero(ctx.n()));
  mesh.psis.push_back(0.0);
  mesh.frozen.push_back(true);
  for (const auto& d : dirs) {
    const bool span_ray = std::abs(d[m]) < 1e-14;
    for (int l = 1; l <= L; ++l) {
      const Eigen::VectorXd y = (r_minus * l / L) * d;
      mesh.pts.push_back(lift(y));
      mesh.psis.push_back(psi(ctx, mesh.pts.back(), lambda));
      mesh.frozen.push_back(span_ray || l == L);
    }
  }
  for (size_t i = 0; i < mesh.pts.size(); ++i)
    if (mesh.frozen[i]) mesh.frozen_max = std::max(mesh.frozen_max, mesh.psis[i]);
  return mesh;
}

}  // namespace

CriticalPoint linking_flow(const FunctionalContext& ctx,
                           const SolverConfig& cfg, const ConeGeometry& geom,
                           double lambda) {
  validate_solver_config(cfg);
  if (geom.m < 1)
    throw std::invalid_argument("linking_flow: bracket m must be >= 1");

  RimEstimate rim;
  if (cfg.r_plus > 0.0) {
    rim.r_plus = cfg.r_plus;
    double worst = std::numeric_limits<double>::infinity();
    for (const State& u : sample_upper_cone(ctx, geom, cfg.r_plus,
                                            cfg.probe_count, cfg.seed))
      worst = std::min(worst, psi(ctx, u, lambda));
    rim.alpha = worst;
    if (!(rim.alpha > 0.0))
      throw GeometryError("linking: configured r_plus has no positive rim");
  } else {
    rim = estimate_r_plus(ctx, geom, lambda, cfg);
  }

  double r_minus = cfg.r_minus > 0.0
                       ? cfg.r_minus
                       : estimate_r_minus(ctx, geom, geom.e_vector, rim.r_plus,
                                          lambda, cfg);

  // the frozen shell must really sit below zero; widen if a mesh point leaks
  LinkMesh mesh;
  bool mesh_ok = false;
  for (int widen = 0; widen < 6; ++widen) {
    mesh = build_link_mesh(ctx, geom, cfg, lambda, r_minus);
    if (mesh.frozen_max <= 1e-10) {
      mesh_ok = true;
      break;
    }
    r_minus *= 1.25;
  }
  if (!mesh_ok)
    throw GeometryError(
        "linking: frozen boundary mesh kept a positive Psi value after "
        "re-estimating the far radius");

  CriticalPoint failure;
  failure.lambda = lambda;
  failure.m = geom.m;

  std::vector<Eigen::VectorXd> span_frame;
  for (const State& v : geom.basis_minus)
    span_frame.push_back(a_normalized(ctx, v).flat());

  std::vector<CeramiSample> trace;
  int newton_attempts = 0;
  double frozen_max_seen = mesh.frozen_max;

  const double mesh_move = 0.5 * r_minus / std::max(4, cfg.path_points);
  for (int sweep = 1; sweep <= cfg.max_iters; ++sweep) {
    // deform everything still above alpha/2
    for (size_t i = 0; i < mesh.pts.size(); ++i) {
      if (mesh.frozen[i] || mesh.psis[i] <= 0.5 * rim.alpha) continue;
      auto step = armijo_step(ctx, mesh.pts[i], lambda, mesh.psis[i],
                              cfg.flow_step, mesh_move);
      if (step.accepted) {
        mesh.pts[i] = std::move(step.next);
        mesh.psis[i] = step.psi_next;
      }
    }
    // frozen points never move; their values are rechecked as an invariant
    double frozen_now = -std::numeric_limits<double>::infinity();
    size_t argmax = 0;
    double dmax = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < mesh.pts.size(); ++i) {
      if (mesh.frozen[i]) frozen_now = std::max(frozen_now, mesh.psis[i]);
      if (mesh.psis[i] > dmax) {
        dmax = mesh.psis[i];
        argmax = i;
      }
    }
    frozen_max_seen = std::max(frozen_max_seen, frozen_now);
    if (frozen_now > 1e-10)
      throw GeometryError("linking: frozen boundary invariant violated");

    trace.push_back(make_sample(ctx, mesh.pts[argmax], lambda, dmax));
    const double res = trace.back().compactness / (1.0 + trace.back().norm);
    const bool try_newton =
        res <= cfg.newton_switch_tol || (sweep < 5 || sweep % 10 == 0);
    if (try_newton && newton_attempts <= 60) {
      // Seed the polish with the maximizer of Psi over the slice spanned by
      // the lower basis and the maximizer's orthogonal direction. That max
      // sits at or above the rim level by the linking geometry, so the seed
      // cannot collapse onto the trivial well.
      State seed = mesh.pts[argmax];
      {
        Eigen::VectorXd u = seed.flat();
        Eigen::VectorXd w = u;
        for (const auto& v : span_frame) w -= v.dot(ctx.A() * u) * v;
        const double wnorm = std::sqrt(w.dot(ctx.A() * w));
        if (wnorm > 1e-12) {
          std::vector<Eigen::VectorXd> frame = span_frame;
          frame.push_back(w / wnorm);
          Eigen::VectorXd c0(frame.size());
          for (size_t i = 0; i < frame.size(); ++i)
            c0[i] = frame[i].dot(ctx.A() * u);
          seed = State::from_flat(slice_maximize(ctx, lambda, frame, c0));
        }
      }
      CriticalPoint cand = newton_refine(ctx, cfg, seed, lambda, /*force=*/true);
      ++newton_attempts;
      if (cand.converged && cand.nontrivial &&
          cand.residual <= cfg.residual_tol &&
          cand.level >= rim.alpha * (1.0 - 1e-2)) {
        cand.iterations += sweep;
        trace.insert(trace.end(), cand.cerami_trace.begin(),
                     cand.cerami_trace.end());
        cand.cerami_trace = std::move(trace);
        cand.m = geom.m;
        cand.alpha = rim.alpha;
        cand.r_plus = rim.r_plus;
        cand.r_minus = r_minus;
        cand.frozen_max_psi = frozen_max_seen;
        cand.search_direction = a_normalized(ctx, geom.e_vector);
        return cand;
      }
    }
  }

  failure.failure_reason = "linking: sweep budget exhausted before the mesh "
                           "maximum stabilized";
  failure.state = State::zero(ctx.n());
  fill_point_data(ctx, failure);
  failure.converged = false;
  failure.alpha = rim.alpha;
  failure.r_plus = rim.r_plus;
  failure.r_minus = r_minus;
  failure.frozen_max_psi = frozen_max_seen;
  failure.cerami_trace = std::move(trace);
  return failure;
}

// ---- diagnostics -----------------------------------------------------------

CeramiReport cerami_monitor(const std::vector<CeramiSample>& trace) {
  CeramiReport rep;
  if (trace.empty()) return rep;
  const auto& first = trace.front();
  const auto& last = trace.back();
  rep.final_level = last.psi;
  rep.final_compactness = last.compactness;

  double max_norm = 0.0, max_abs_psi = 0.0;
  for (const auto& s : trace) {
    max_norm = std::max(max_norm, s.norm);
    max_abs_psi = std::max(max_abs_psi, std::abs(s.psi));
  }
  rep.norm_blowup = last.norm >= 10.0 * std::max(1.0, first.norm) &&
                    max_abs_psi <= 10.0 * (1.0 + std::abs(first.psi));

  const size_t q = std::max<size_t>(1, trace.size() / 4);
  auto median_of = [&](size_t begin, size_t end) {
    std::vector<double> vals;
    for (size_t i = begin; i < end; ++i) vals.push_back(trace[i].compactness);
    std::sort(vals.begin(), vals.end());
    return vals[vals.size() / 2];
  };
  const double head = median_of(0, q);
  const double tail = median_of(trace.size() - q, trace.size());
  rep.residual_stall = trace.size() >= 8 && tail >= 0.5 * head && tail > 1e-12;

  rep.trivial_attractor = std::abs(last.psi) <= 1e-10 * (1.0 + std::abs(first.psi)) &&
                          last.norm <= 1e-6 * std::max(1.0, first.norm);
  rep.zero_level_nontrivial =
      std::abs(last.psi) <= 1e-8 * (1.0 + std::abs(first.psi)) &&
      last.norm > 1e-3;
  return rep;
}

std::pair<State, std::vector<CeramiSample>> run_descent_flow(
    const FunctionalContext& ctx, const State& u0, double lambda,
    int max_iters, const SolverConfig& cfg) {
  State u = u0;
  double psi_u = psi(ctx, u, lambda);
  std::vector<CeramiSample> trace;
  for (int iter = 0; iter < max_iters; ++iter) {
    trace.push_back(make_sample(ctx, u, lambda, psi_u));
    const double res = trace.back().compactness / (1.0 + trace.back().norm);
    if (res <= cfg.residual_tol) break;
    auto step = armijo_step(ctx, u, lambda, psi_u, cfg.flow_step);
    if (!step.accepted) break;
    u = std::move(step.next);
    psi_u = step.psi_next;
  }
  trace.push_back(make_sample(ctx, u, lambda, psi_u));
  return {std::move(u), std::move(trace)};
}

}  // namespace cnls
