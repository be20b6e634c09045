#include "cnls/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace cnls {

namespace {

State random_state(int n, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, scale);
  Eigen::VectorXd a(n), b(n);
  for (int i = 0; i < n; ++i) {
    a[i] = gauss(rng);
    b[i] = gauss(rng);
  }
  return State(std::move(a), std::move(b));
}

// Laplacian of one component from the raw stencil, Dirichlet values zero.
Eigen::VectorXd stencil_laplacian(const Grid& grid, const Eigen::VectorXd& u,
                                  double flux_scale) {
  const int n = grid.n_interior;
  const double h = grid.h;
  Eigen::VectorXd lap(n);
  if (grid.spec.mode == GridMode::Radial) {
    const int N = grid.spec.dimension;
    for (int i = 0; i < n; ++i) {
      if (i == 0) {
        // regularity at the origin: u'(0) = 0, so Delta u = N u''(0)
        const double up = (n > 1) ? u[1] : 0.0;  // Dirichlet when n == 1
        lap[0] = flux_scale * 2.0 * N * (up - u[0]) / (h * h);
        continue;
      }
      const double r = grid.interior_node(i);
      const double rp = std::pow(r + 0.5 * h, N - 1) * flux_scale;
      const double rm = std::pow(r - 0.5 * h, N - 1);
      const double up = (i + 1 < n) ? u[i + 1] : 0.0;  // Dirichlet at R
      lap[i] = (rp * (up - u[i]) - rm * (u[i] - u[i - 1])) /
               (std::pow(r, N - 1) * h * h);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const double um = (i > 0) ? u[i - 1] : 0.0;
      const double up = (i + 1 < n) ? u[i + 1] : 0.0;
      lap[i] = (flux_scale * (up - u[i]) - (u[i] - um)) / (h * h);
    }
  }
  return lap;
}

}  // namespace

Nonlinearity make_zero_custom() {
  Nonlinearity nl;
  nl.kind = NonlinearityKind::Custom;
  nl.theta = 1.0;
  nl.p_growth = 2.5;
  nl.custom_W = [](int, double, double) { return 0.0; };
  nl.custom_gradW = [](int, double, double) {
    return std::pair<double, double>{0.0, 0.0};
  };
  return nl;
}

StrongResidual residual_check(const FunctionalContext& ctx, const State& u,
                              double lambda, bool corrupt_stencil) {
  const Grid& grid = ctx.grid();
  const PotentialSet& pots = ctx.potentials();
  const Nonlinearity& nl = ctx.nonlinearity();
  const int n = grid.n_interior;
  const double flux_scale = corrupt_stencil ? 1.0 + 1e-3 : 1.0;

  const Eigen::VectorXd lap1 = stencil_laplacian(grid, u.u1, flux_scale);
  const Eigen::VectorXd lap2 = stencil_laplacian(grid, u.u2, flux_scale);

  StrongResidual out;
  for (int i = 0; i < n; ++i) {
    auto [wt, ws] = eval_gradW(nl, i, u.u1[i], u.u2[i]);
    const double s1 = -lap1[i] + (pots.b1[i] - lambda * pots.V1[i]) * u.u1[i] -
                      wt - lambda * pots.gamma[i] * u.u2[i];
    const double s2 = -lap2[i] + (pots.b2[i] - lambda * pots.V2[i]) * u.u2[i] -
                      ws - lambda * pots.gamma[i] * u.u1[i];
    out.res1 += grid.mass_weights[i] * s1 * s1;
    out.res2 += grid.mass_weights[i] * s2 * s2;
  }
  out.res1 = std::sqrt(out.res1);
  out.res2 = std::sqrt(out.res2);
  return out;
}

double dual_residual_nodal_norm(const FunctionalContext& ctx, const State& u,
                                double lambda) {
  const State r = dual_residual(ctx, u, lambda);
  const Eigen::VectorXd& w = ctx.grid().mass_weights;
  double acc = 0.0;
  for (int i = 0; i < ctx.n(); ++i)
    acc += (r.u1[i] * r.u1[i] + r.u2[i] * r.u2[i]) / w[i];
  return std::sqrt(acc);
}

double fd_gradient_check(const FunctionalContext& ctx, int count, double scale,
                         double lambda, unsigned long seed) {
  std::mt19937_64 rng(seed);
  const int n = ctx.n();
  double worst = 0.0;
  for (int k = 0; k < count; ++k) {
    const State u = random_state(n, scale, rng);
    const State v = random_state(n, scale, rng);
    const Eigen::VectorXd vflat = v.flat();
    const double eps = 6e-6 * std::max(1.0, scale);

    auto central = [&](auto&& f) {
      const State up = State::from_flat(u.flat() + eps * vflat);
      const State um = State::from_flat(u.flat() - eps * vflat);
      return (f(up) - f(um)) / (2.0 * eps);
    };

    const Eigen::VectorXd uflat = u.flat();
    const double pair_E = uflat.dot(ctx.A() * vflat);
    const double pair_J = uflat.dot(ctx.B() * vflat);
    double pair_P = 0.0;
    for (int i = 0; i < n; ++i) {
      auto [wt, ws] = eval_gradW(ctx.nonlinearity(), i, u.u1[i], u.u2[i]);
      pair_P += ctx.grid().mass_weights[i] * (wt * v.u1[i] + ws * v.u2[i]);
    }
    const double pair_Psi = dual_residual(ctx, u, lambda).flat().dot(vflat);

    const double fd_E = central([&](const State& s) { return energy_E(ctx, s); });
    const double fd_J =
        central([&](const State& s) { return functional_J(ctx, s); });
    const double fd_P =
        central([&](const State& s) { return functional_P(ctx, s); });
    const double fd_Psi =
        central([&](const State& s) { return psi(ctx, s, lambda); });

    auto rel = [](double fd, double pairing) {
      return std::abs(fd - pairing) / std::max(1.0, std::abs(pairing));
    };
    worst = std::max({worst, rel(fd_E, pair_E), rel(fd_J, pair_J),
                      rel(fd_P, pair_P), rel(fd_Psi, pair_Psi)});
  }
  return worst;
}

double norm_expansion_suite(const FunctionalContext& ctx, int count,
                     unsigned long seed) {
  std::mt19937_64 rng(seed);
  const int n = ctx.n();
  double min_slack = std::numeric_limits<double>::infinity();
  for (int k = 0; k < count; ++k) {
    const State u = random_state(n, 1.0, rng);
    const State v = random_state(n, 1.0, rng);
    const Eigen::VectorXd d = u.flat() - v.flat();
    const double lhs = d.dot(ctx.A() * d);
    const auto [u1, u2] = component_norms(ctx, u);
    const auto [v1, v2] = component_norms(ctx, v);
    const double rhs = (u1 - v1) * (u1 - v1) + (u2 - v2) * (u2 - v2);
    min_slack = std::min(min_slack, lhs - rhs);
  }
  return min_slack;
}

BruteForceComparison brute_force_solution_check(const FunctionalContext& ctx,
                                                double lambda,
                                                const CriticalPoint& candidate,
                                                unsigned long seed) {
  if (ctx.dim() > 12)
    throw std::invalid_argument(
        "brute force: total dimension above the enumeration cap of 12");
  SolverConfig cfg;
  cfg.residual_tol = 1e-11;
  cfg.newton_switch_tol = 1e-3;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  const int dim = ctx.dim();
  std::vector<State> seeds;
  seeds.push_back(State::zero(ctx.n()));
  for (int axis = 0; axis < dim; ++axis)
    for (double t : {-4.0, -2.0, -0.5, 0.5, 2.0, 4.0}) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
      x[axis] = t;
      seeds.push_back(State::from_flat(x));
    }
  // full coordinate lattice, three levels per coordinate when affordable,
  // two otherwise (dim <= 12 keeps both within bounds)
  const bool three_level = std::pow(3.0, dim) <= 20000.0;
  const int lattice_levels = three_level ? 3 : 2;
  const long total = static_cast<long>(std::pow(lattice_levels, dim));
  for (double amplitude : {0.8, 3.0}) {
    for (long code = 0; code < total; ++code) {
      Eigen::VectorXd x(dim);
      long rest = code;
      for (int i = 0; i < dim; ++i) {
        const int digit = static_cast<int>(rest % lattice_levels);
        rest /= lattice_levels;
        x[i] = three_level ? (digit - 1) * amplitude
                           : (digit == 0 ? -amplitude : amplitude);
      }
      seeds.push_back(State::from_flat(x));
    }
  }
  for (int k = 0; k < 1500; ++k) {
    Eigen::VectorXd x(dim);
    for (int i = 0; i < dim; ++i) x[i] = gauss(rng);
    const double r = 0.25 * std::pow(2.0, k % 6);  // radii 0.25 .. 8
    seeds.push_back(State::from_flat(r * x / std::max(1e-12, x.norm())));
  }

  std::vector<State> found;
  std::vector<double> levels;
  for (const State& s : seeds) {
    CriticalPoint cp = newton_refine(ctx, cfg, s, lambda, /*force=*/true);
    if (!cp.converged) continue;
    const Eigen::VectorXd x = cp.state.flat();
    bool fresh = true;
    for (const State& g : found) {
      const Eigen::VectorXd d = x - g.flat();
      if (std::sqrt(d.dot(ctx.A() * d)) <= 1e-6 * (1.0 + x.norm())) {
        fresh = false;
        break;
      }
    }
    if (fresh) {
      found.push_back(cp.state);
      levels.push_back(cp.level);
    }
  }

  BruteForceComparison out;
  out.n_critical_points = static_cast<int>(found.size());
  out.levels = levels;
  std::sort(out.levels.begin(), out.levels.end());
  out.state_distance = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd cand = candidate.state.flat();
  for (size_t i = 0; i < found.size(); ++i) {
    const Eigen::VectorXd d = cand - found[i].flat();
    const double dist = std::sqrt(d.dot(ctx.A() * d));
    if (dist < out.state_distance) {
      out.state_distance = dist;
      out.level_difference = std::abs(candidate.level - levels[i]);
    }
  }
  out.matched = out.state_distance <= 1e-6;
  return out;
}

std::vector<VerifySuiteResult> run_all_suites(const FunctionalContext& ctx,
                                              double lambda,
                                              const VerifyOptions& opts) {
  std::vector<VerifySuiteResult> rows;

  {
    VerifySuiteResult r{.name = "fd_gradient"};
    r.value = fd_gradient_check(ctx, opts.fd_count, 1.0, lambda, opts.seed);
    r.passed = r.value <= 1e-6;
    std::ostringstream os;
    os << "max relative error " << r.value << " over " << opts.fd_count
       << " samples (seed " << opts.seed << ")";
    r.detail = os.str();
    rows.push_back(std::move(r));
  }

  {
    VerifySuiteResult r{.name = "norm_expansion_inequality"};
    r.value = norm_expansion_suite(ctx, opts.expansion_count, opts.seed + 1);
    r.passed = r.value >= -1e-10;
    std::ostringstream os;
    os << "min slack " << r.value << " over " << opts.expansion_count << " pairs";
    r.detail = os.str();
    rows.push_back(std::move(r));
  }

  {
    VerifySuiteResult r{.name = "calW_floor"};
    std::mt19937_64 rng(opts.seed + 2);
    std::uniform_real_distribution<double> unif(-10.0, 10.0);
    std::uniform_int_distribution<int> node(0, ctx.n() - 1);
    double worst = std::numeric_limits<double>::infinity();
    bool dot_ok = true;
    for (int k = 0; k < opts.floor_count; ++k) {
      const int xi = node(rng);
      const double t = unif(rng), s = unif(rng);
      const double cw = eval_calW(ctx.nonlinearity(), xi, t, s);
      worst = std::min(worst, cw);
      auto [wt, ws] = eval_gradW(ctx.nonlinearity(), xi, t, s);
      if (wt * t + ws * s < 2.0 * eval_W(ctx.nonlinearity(), xi, t, s) - 1e-12)
        dot_ok = false;
    }
    r.value = worst;
    r.passed = worst >= -1e-12 && dot_ok;
    std::ostringstream os;
    os << "min calW " << worst << " over " << opts.floor_count << " samples";
    r.detail = os.str();
    rows.push_back(std::move(r));
  }

  {
    // eigenpairs of the linear pencil solve the strong equations with W = 0
    VerifySuiteResult r{.name = "eigenpair_strong_residual"};
    FunctionalContext linear_ctx(ctx.grid(), ctx.potentials(),
                                 make_zero_custom());
    linear_ctx.override_B(ctx.B());
    EigenSeq seq = solve_pencil(linear_ctx, 3);
    double worst = 0.0;
    for (size_t k = 0; k < seq.mus.size(); ++k) {
      const StrongResidual sr = residual_check(linear_ctx, seq.vectors[k],
                                               seq.mus[k], opts.corrupt_stencil);
      const double scale =
          std::max(1.0, a_norm(linear_ctx, seq.vectors[k]) * seq.mus[k]);
      worst = std::max(worst, std::max(sr.res1, sr.res2) / scale);
    }
    r.value = worst;
    r.passed = !seq.mus.empty() && worst <= 1e-10;
    std::ostringstream os;
    os << "worst scaled strong residual " << worst << " over "
       << seq.mus.size() << " pairs";
    if (seq.mus.empty()) os << " (no positive spectrum)";
    r.detail = os.str();
    rows.push_back(std::move(r));
  }

  {
    // the two residual routes must agree in order of magnitude
    VerifySuiteResult r{.name = "residual_route_agreement"};
    std::mt19937_64 rng(opts.seed + 3);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int k = 0; k < opts.ratio_count; ++k) {
      const State u = random_state(ctx.n(), 1.0, rng);
      const StrongResidual sr =
          residual_check(ctx, u, lambda, opts.corrupt_stencil);
      const double strong =
          std::sqrt(sr.res1 * sr.res1 + sr.res2 * sr.res2);
      const double dual = dual_residual_nodal_norm(ctx, u, lambda);
      if (dual <= 0.0) continue;
      const double ratio = strong / dual;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    r.value = hi;
    r.passed = lo >= 0.1 && hi <= 10.0;
    std::ostringstream os;
    os << "strong/dual ratio range [" << lo << ", " << hi << "]";
    r.detail = os.str();
    rows.push_back(std::move(r));
  }

  return rows;
}

}  // namespace cnls
