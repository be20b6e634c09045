#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cnls/solver.hpp"
#include "cnls/verify.hpp"
#include "testing_util.hpp"

using namespace cnls;
using cnls::testing::random_state;

namespace {

SolverConfig fast_config() {
  SolverConfig cfg;
  cfg.residual_tol = 1e-9;
  cfg.newton_switch_tol = 1e-2;
  cfg.max_iters = 4000;
  cfg.path_points = 21;
  cfg.probe_count = 120;
  cfg.seed = 7;
  return cfg;
}

FunctionalContext linear_benchmark(int n_nodes) {
  Grid grid = build_grid({3, 8.0, n_nodes, GridMode::Radial});
  return FunctionalContext(grid, testing::benchmark_potentials(grid),
                           make_zero_custom());
}

}  // namespace

TEST_CASE("rim estimate in the purely quadratic case") {
  FunctionalContext ctx = linear_benchmark(40);
  EigenSeq seq = solve_pencil(ctx, 6);
  ConeGeometry geom = locate_lambda(seq, 0.0);
  SolverConfig cfg = fast_config();
  const RimEstimate rim = estimate_r_plus(ctx, geom, 0.0, cfg);
  CHECK(rim.alpha > 0.0);
  // with no coupling term and lambda zero, Psi = E = r^2/2 on every probe
  CHECK(rim.alpha ==
        doctest::Approx(0.5 * rim.r_plus * rim.r_plus).epsilon(1e-9));
}

TEST_CASE("far radius does not exist without superquadratic growth") {
  FunctionalContext ctx = linear_benchmark(40);
  EigenSeq seq = solve_pencil(ctx, 6);
  ConeGeometry geom = locate_lambda(seq, 0.0);
  SolverConfig cfg = fast_config();
  cfg.radius_cap = 50.0;
  CHECK_THROWS_AS(
      estimate_r_minus(ctx, geom, geom.e_vector, 1.0, 0.0, cfg),
      GeometryError);
}

TEST_CASE("far radius exists for the quartic benchmark") {
  FunctionalContext ctx = testing::benchmark_context(3, 8.0, 40);
  EigenSeq seq = solve_pencil(ctx, 6);
  ConeGeometry geom = locate_lambda(seq, 0.0);
  SolverConfig cfg = fast_config();
  const RimEstimate rim = estimate_r_plus(ctx, geom, 0.0, cfg);
  const double r_minus =
      estimate_r_minus(ctx, geom, geom.e_vector, rim.r_plus, 0.0, cfg);
  CHECK(r_minus > rim.r_plus);
  // the returned shell really sits at or below zero along the ray
  const State ehat = State::from_flat(
      geom.e_vector.flat() / a_norm(ctx, geom.e_vector));
  CHECK(psi(ctx, State::from_flat(r_minus * ehat.flat()), 0.0) <= 0.0);
}

TEST_CASE("the rim is already positive at small radii for the benchmark") {
  FunctionalContext ctx = testing::benchmark_context(3, 8.0, 40);
  EigenSeq seq = solve_pencil(ctx, 6);
  ConeGeometry geom = locate_lambda(seq, 0.0);
  SolverConfig cfg = fast_config();
  cfg.r_scan_max = 1.0;  // restrict the scan to [1e-3, 1]
  const RimEstimate rim = estimate_r_plus(ctx, geom, 0.0, cfg);
  CHECK(rim.alpha > 0.0);
  CHECK(rim.r_plus <= 1.0 + 1e-12);  // scan endpoint up to roundoff
}

TEST_CASE("newton refuses rough starts unless forced") {
  FunctionalContext ctx = testing::benchmark_context(3, 8.0, 32);
  std::mt19937_64 rng(41);
  const State rough = State::from_flat(5.0 * random_state(ctx.n(), rng).flat());
  SolverConfig cfg = fast_config();
  const CriticalPoint cp = newton_refine(ctx, cfg, rough, 0.3);
  CHECK_FALSE(cp.converged);
  CHECK(cp.failure_reason.find("switch threshold") != std::string::npos);
}

TEST_CASE("rim height shrinks as lambda approaches the bracket top") {
  FunctionalContext ctx = testing::benchmark_context(3, 8.0, 40);
  EigenSeq seq = solve_pencil(ctx, 8);
  ConeGeometry geom = locate_lambda(seq, 0.0);
  SolverConfig cfg = fast_config();
  double prev = std::numeric_limits<double>::infinity();
  for (double frac : {0.0, 0.4, 0.8, 0.95}) {
    const double lambda = frac * seq.mus[0];
    const double alpha = estimate_r_plus(ctx, geom, lambda, cfg).alpha;
    CHECK(alpha > 0.0);
    CHECK(alpha < prev);
    prev = alpha;
  }
}

TEST_CASE("far radius regression on the coupled benchmark") {
  FunctionalContext ctx = testing::benchmark_context(3, 8.0, 40);
  EigenSeq seq = solve_pencil(ctx, 6);
  const double lambda = 0.5 * seq.mus[0];
  ConeGeometry geom = locate_lambda(seq, lambda);
  SolverConfig cfg = fast_config();
  const RimEstimate rim = estimate_r_plus(ctx, geom, lambda, cfg);
  const double r_minus =
      estimate_r_minus(ctx, geom, geom.e_vector, rim.r_plus, lambda, cfg);
  // golden value from the first verified run of this configuration
  CHECK(r_minus == doctest::Approx(19.5312).epsilon(1e-3));
}

TEST_CASE("upper-cone probes really live in the upper cone") {
  FunctionalContext ctx = testing::benchmark_context(3, 8.0, 40);
  EigenSeq seq = solve_pencil(ctx, 8);
  REQUIRE(seq.mus.size() >= 2);
  const double lambda = 0.5 * (seq.mus[0] + seq.mus[1]);
  ConeGeometry geom = locate_lambda(seq, lambda);
  REQUIRE(geom.m == 1);
  for (const State& u : sample_upper_cone(ctx, geom, 0.5, 64, 11)) {
    CHECK(a_norm(ctx, u) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(cone_test(geom, ctx, u).in_c_plus);
  }
  for (const State& u :
       sample_link_shell(ctx, geom, geom.e_vector, 2.0, 64, 13))
    CHECK(a_norm(ctx, u) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("mountain pass on the quartic benchmark at lambda zero") {
  FunctionalContext ctx = testing::benchmark_context(3, 8.0, 60);
  EigenSeq seq = solve_pencil(ctx, 8);
  ConeGeometry geom = locate_lambda(seq, 0.0);
  REQUIRE(geom.m == 0);
  SolverConfig cfg = fast_config();
  const CriticalPoint cp = mountain_pass(ctx, cfg, geom, 0.0);
  REQUIRE(cp.converged);
  CHECK(cp.nontrivial);
  CHECK(cp.level > 0.0);
  CHECK(cp.residual <= 1e-8);
  CHECK(cp.frozen_max_psi <= 1e-10);
  CHECK(psi(ctx, cp.state, 0.0) == doctest::Approx(cp.level).epsilon(1e-12));
  // strong-form residuals agree with the acceptance threshold
  const StrongResidual sr = residual_check(ctx, cp.state, 0.0);
  CHECK(sr.res1 <= 1e-6);
  CHECK(sr.res2 <= 1e-6);
}

TEST_CASE("coupled run keeps both components alive") {
  FunctionalContext ctx = testing::benchmark_context(3, 8.0, 60);
  EigenSeq seq = solve_pencil(ctx, 8);
  const double lambda = 0.5 * seq.mus[0];
  ConeGeometry geom = locate_lambda(seq, lambda);
  REQUIRE(geom.m == 0);
  const CriticalPoint cp = mountain_pass(ctx, fast_config(), geom, lambda);
  REQUIRE(cp.converged);
  CHECK(cp.level > 0.0);
  CHECK(cp.component_norms.first > 1e-6);
  CHECK(cp.component_norms.second > 1e-6);
}

TEST_CASE("newton needs no steps from an exact solution") {
  FunctionalContext ctx = testing::benchmark_context(3, 8.0, 40);
  EigenSeq seq = solve_pencil(ctx, 6);
  ConeGeometry geom = locate_lambda(seq, 0.0);
  SolverConfig cfg = fast_config();
  const CriticalPoint first = mountain_pass(ctx, cfg, geom, 0.0);
  REQUIRE(first.converged);
  const CriticalPoint again = newton_refine(ctx, cfg, first.state, 0.0);
  CHECK(again.converged);
  CHECK(again.iterations == 0);
}

TEST_CASE("newton contracts quadratically from the flow handoff") {
  FunctionalContext ctx = testing::benchmark_context(3, 8.0, 48);
  EigenSeq seq = solve_pencil(ctx, 6);
  ConeGeometry geom = locate_lambda(seq, 0.0);
  SolverConfig cfg = fast_config();
  const CriticalPoint cp = mountain_pass(ctx, cfg, geom, 0.0);
  REQUIRE(cp.converged);
  SolverConfig tight = cfg;
  tight.residual_tol = 1e-12;
  const CriticalPoint refined = newton_refine(ctx, tight, cp.state, 0.0);
  CHECK(refined.converged);
  CHECK(refined.residual <= 1e-12);
  CHECK(refined.iterations <= 12);
}

TEST_CASE("linear problem away from the spectrum has only the zero point") {
  FunctionalContext ctx = linear_benchmark(32);
  EigenSeq seq = solve_pencil(ctx, 6);
  const double lambda = 0.5 * seq.mus[0];  // not an eigenvalue
  SolverConfig cfg = fast_config();
  std::mt19937_64 rng(17);
  for (int k = 0; k < 5; ++k) {
    const State u0 = random_state(ctx.n(), rng);
    const CriticalPoint cp = newton_refine(ctx, cfg, u0, lambda, /*force=*/true);
    REQUIRE(cp.converged);
    CHECK(a_norm(ctx, cp.state) <= 1e-7);
  }
}

TEST_CASE("linking flow on a bracketed lambda") {
  FunctionalContext ctx = testing::benchmark_context(3, 8.0, 48);
  EigenSeq seq = solve_pencil(ctx, 10);
  REQUIRE(seq.mus.size() >= 2);
  const double lambda = 0.5 * (seq.mus[0] + seq.mus[1]);
  ConeGeometry geom = locate_lambda(seq, lambda);
  REQUIRE(geom.m == 1);

  SolverConfig cfg = fast_config();
  cfg.path_points = 15;
  const CriticalPoint cp = linking_flow(ctx, cfg, geom, lambda);
  REQUIRE(cp.converged);
  CHECK(cp.residual <= 1e-8);
  CHECK(cp.level >= cp.alpha * (1.0 - 1e-2));
  CHECK(cp.frozen_max_psi <= 1e-10);
  CHECK(cp.nontrivial);
  CHECK(cp.component_norms.first > 1e-6);
  CHECK(cp.component_norms.second > 1e-6);

  // sandwich: boundary samples below zero, rim samples above, level on top
  double sup_boundary = -1e300;
  for (const State& u :
       sample_link_shell(ctx, geom, geom.e_vector, cp.r_minus, 200, 19))
    sup_boundary = std::max(sup_boundary, psi(ctx, u, lambda));
  sup_boundary = std::max(sup_boundary, 0.0);  // the lower disc includes 0
  double inf_rim = 1e300;
  for (const State& u : sample_upper_cone(ctx, geom, cp.r_plus, 200, 23))
    inf_rim = std::min(inf_rim, psi(ctx, u, lambda));
  CHECK(sup_boundary < inf_rim);
  CHECK(cp.level >= inf_rim - 1e-8);
}

TEST_CASE("descent never increases psi") {
  FunctionalContext ctx = testing::benchmark_context(3, 8.0, 40);
  std::mt19937_64 rng(29);
  const State u0 = random_state(ctx.n(), rng);
  auto [end, trace] = run_descent_flow(ctx, u0, 0.7, 200, fast_config());
  REQUIRE(trace.size() >= 2);
  for (size_t k = 1; k < trace.size(); ++k)
    CHECK(trace[k].psi <= trace[k - 1].psi + 1e-14);
}

TEST_CASE("monitor on a healthy converged run") {
  FunctionalContext ctx = testing::benchmark_context(3, 8.0, 48);
  EigenSeq seq = solve_pencil(ctx, 6);
  ConeGeometry geom = locate_lambda(seq, 0.0);
  SolverConfig cfg = fast_config();
  const CriticalPoint cp = mountain_pass(ctx, cfg, geom, 0.0);
  REQUIRE(cp.converged);
  REQUIRE(!cp.cerami_trace.empty());
  const CeramiSample& last = cp.cerami_trace.back();
  CHECK(last.compactness <= (1.0 + last.norm) * cfg.residual_tol);
  const CeramiReport rep = cerami_monitor(cp.cerami_trace);
  CHECK_FALSE(rep.norm_blowup);
  CHECK_FALSE(rep.trivial_attractor);
}

TEST_CASE("monitor flags the trivial attractor") {
  FunctionalContext ctx = testing::benchmark_context(3, 8.0, 32);
  std::mt19937_64 rng(31);
  State u0 = random_state(ctx.n(), rng);
  u0 = State::from_flat(0.01 * u0.flat() / a_norm(ctx, u0));
  auto [end, trace] = run_descent_flow(ctx, u0, 0.0, 3000, fast_config());
  const CeramiReport rep = cerami_monitor(trace);
  CHECK(rep.trivial_attractor);
}

TEST_CASE("monitor flags the resonant linear flow") {
  FunctionalContext ctx = linear_benchmark(32);
  EigenSeq seq = solve_pencil(ctx, 4);
  REQUIRE(seq.mus.size() >= 2);
  const double lambda = seq.mus[0];  // exactly on the spectrum
  const State u0 = State::from_flat(seq.vectors[0].flat() +
                                    0.5 * seq.vectors[1].flat());
  auto [end, trace] = run_descent_flow(ctx, u0, lambda, 2000, fast_config());
  const CeramiReport rep = cerami_monitor(trace);
  // the flow parks on the eigenray: zero level, order-one norm
  CHECK(rep.zero_level_nontrivial);
}

TEST_CASE("configuration validation") {
  SolverConfig cfg = fast_config();
  cfg.r_plus = 2.0;
  cfg.r_minus = 1.0;
  CHECK_THROWS_AS(validate_solver_config(cfg), std::invalid_argument);
  cfg = fast_config();
  cfg.residual_tol = 1e-2;
  cfg.newton_switch_tol = 1e-3;
  CHECK_THROWS_AS(validate_solver_config(cfg), std::invalid_argument);
  cfg = fast_config();
  cfg.path_points = 2;
  CHECK_THROWS_AS(validate_solver_config(cfg), std::invalid_argument);
}
