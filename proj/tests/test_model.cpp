#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cnls/model.hpp"
#include "testing_util.hpp"

using namespace cnls;

namespace {

Nonlinearity unit_power_sum(int n, double p1, double p2) {
  return make_power_sum(Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(n), p1,
                        p2);
}

ProblemSpec tiny_problem(const Grid& grid, Nonlinearity nl, double v_value) {
  ProblemSpec spec;
  spec.grid_spec = grid.spec;
  spec.potentials = testing::constant_potentials(grid, 1.0, v_value, 1.0);
  spec.nonlinearity = std::move(nl);
  spec.lambda = 0.0;
  return spec;
}

}  // namespace

TEST_CASE("coupling term values") {
  Nonlinearity q = make_quartic_coupled();
  CHECK(eval_W(q, 0, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(eval_W(q, 0, 0.0, 0.0) == 0.0);

  Nonlinearity p = unit_power_sum(4, 4.0, 4.0);
  CHECK(eval_W(p, 2, 2.0, 0.0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(eval_W(p, 1, 0.0, 0.0) == 0.0);
}

TEST_CASE("gradient values and axis conditions") {
  Nonlinearity q = make_quartic_coupled();
  auto [wt, ws] = eval_gradW(q, 0, 1.0, 1.0);
  CHECK(wt == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(ws == doctest::Approx(2.0).epsilon(1e-15));

  for (double s : {-2.0, 0.5, 7.0}) {
    CHECK(eval_gradW(q, 0, 0.0, s).first == 0.0);
    CHECK(eval_gradW(q, 0, s, 0.0).second == 0.0);
  }

  Nonlinearity p3 = unit_power_sum(4, 3.0, 3.0);
  for (double t : {0.5, 1.5, 2.0}) {
    auto [gt, gs] = eval_gradW(p3, 0, t, 0.0);
    CHECK(gt == doctest::Approx(t * t).epsilon(1e-14));
    CHECK(gs == 0.0);
  }
}

TEST_CASE("calW identities") {
  Nonlinearity q = make_quartic_coupled();
  CHECK(eval_calW(q, 0, 1.0, 1.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(eval_calW(q, 0, 0.0, 0.0) == 0.0);
  // 4-homogeneity: calW = 2 W
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  for (int k = 0; k < 50; ++k) {
    const double t = unif(rng), s = unif(rng);
    CHECK(eval_calW(q, 0, t, s) ==
          doctest::Approx(2.0 * eval_W(q, 0, t, s)).epsilon(1e-12));
  }

  Nonlinearity p = unit_power_sum(4, 4.0, 4.0);
  CHECK(eval_calW(p, 0, 1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("calW floor and pairing inequality over random samples") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-10.0, 10.0);
  for (Nonlinearity nl : {make_quartic_coupled(), unit_power_sum(4, 3.1, 4.7)}) {
    for (int k = 0; k < 5000; ++k) {
      const double t = unif(rng), s = unif(rng);
      const double cw = eval_calW(nl, k % 4, t, s);
      CHECK(cw >= -1e-12);
      auto [wt, ws] = eval_gradW(nl, k % 4, t, s);
      CHECK(wt * t + ws * s >= 2.0 * eval_W(nl, k % 4, t, s) - 1e-12);
    }
  }
}

TEST_CASE("gradient consistent with central differences") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unif(-10.0, 10.0);
  double worst = 0.0;
  for (Nonlinearity nl : {make_quartic_coupled(), unit_power_sum(4, 3.5, 4.0)}) {
    for (int k = 0; k < 1000; ++k) {
      const double t = unif(rng), s = unif(rng);
      const int xi = k % 4;
      const double eps = 2e-5 * std::max(1.0, std::max(std::abs(t), std::abs(s)));
      const double fd_t =
          (eval_W(nl, xi, t + eps, s) - eval_W(nl, xi, t - eps, s)) / (2 * eps);
      const double fd_s =
          (eval_W(nl, xi, t, s + eps) - eval_W(nl, xi, t, s - eps)) / (2 * eps);
      auto [wt, ws] = eval_gradW(nl, xi, t, s);
      worst = std::max(worst,
                       std::abs(fd_t - wt) / std::max(1.0, std::abs(wt)));
      worst = std::max(worst,
                       std::abs(fd_s - ws) / std::max(1.0, std::abs(ws)));
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("analytic Hessians match differenced gradients") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(-5.0, 5.0);
  for (Nonlinearity nl : {make_quartic_coupled(), unit_power_sum(4, 4.0, 3.4)}) {
    for (int k = 0; k < 200; ++k) {
      const double t = unif(rng), s = unif(rng);
      const double eps = 1e-5 * std::max(1.0, std::max(std::abs(t), std::abs(s)));
      auto hess = eval_hessW(nl, 0, t, s);
      const double fd_tt = (eval_gradW(nl, 0, t + eps, s).first -
                            eval_gradW(nl, 0, t - eps, s).first) /
                           (2 * eps);
      const double fd_ts = (eval_gradW(nl, 0, t, s + eps).first -
                            eval_gradW(nl, 0, t, s - eps).first) /
                           (2 * eps);
      const double fd_ss = (eval_gradW(nl, 0, t, s + eps).second -
                            eval_gradW(nl, 0, t, s - eps).second) /
                           (2 * eps);
      CHECK(hess[0] == doctest::Approx(fd_tt).epsilon(1e-5).scale(1.0));
      CHECK(hess[1] == doctest::Approx(fd_ts).epsilon(1e-5).scale(1.0));
      CHECK(hess[2] == doctest::Approx(fd_ss).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("power sum separates exactly") {
  Nonlinearity p = unit_power_sum(4, 3.3, 4.2);
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> unif(-4.0, 4.0);
  for (int k = 0; k < 100; ++k) {
    const double t = unif(rng), s = unif(rng);
    CHECK(eval_W(p, 0, t, s) == eval_W(p, 0, t, 0.0) + eval_W(p, 0, 0.0, s));
  }
}

TEST_CASE("admissibility checks") {
  // quartic needs dimension <= 3
  CHECK_THROWS_AS(validate_nonlinearity(make_quartic_coupled(), 4, 4),
                  std::invalid_argument);
  CHECK_NOTHROW(validate_nonlinearity(make_quartic_coupled(), 3, 4));
  // exponents confined to (2, 2N/(N-2))
  CHECK_THROWS_AS(validate_nonlinearity(unit_power_sum(4, 2.0, 4.0), 3, 4),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_nonlinearity(unit_power_sum(4, 4.0, 6.5), 3, 4),
                  std::invalid_argument);
  CHECK_NOTHROW(validate_nonlinearity(unit_power_sum(4, 4.0, 6.5), 1, 4));
  // custom families need callbacks and an explicit theta
  Nonlinearity c = make_quadratic_custom();
  c.theta = 0.5;
  CHECK_THROWS_AS(validate_nonlinearity(c, 3, 4), std::invalid_argument);
  Nonlinearity missing;
  missing.kind = NonlinearityKind::Custom;
  CHECK_THROWS_AS(validate_nonlinearity(missing, 3, 4), std::invalid_argument);
}

TEST_CASE("potential validation") {
  Grid grid = build_grid({1, 1.0, 8, GridMode::Radial});
  PotentialSet pots = testing::constant_potentials(grid, 1.0, 1.0, 0.0);
  CHECK_NOTHROW(validate_potentials(pots, grid.n_interior));
  pots.b1[2] = 0.5;  // below the floor
  CHECK_THROWS_AS(validate_potentials(pots, grid.n_interior),
                  std::invalid_argument);
  pots = testing::constant_potentials(grid, 1.0, 1.0, 0.0);
  pots.V2[1] = std::nan("");
  CHECK_THROWS_AS(validate_potentials(pots, grid.n_interior),
                  std::invalid_argument);
}

TEST_CASE("hypothesis certificates on the benchmark") {
  Grid grid = build_grid({3, 6.0, 40, GridMode::Radial});
  ProblemSpec spec;
  spec.grid_spec = grid.spec;
  spec.potentials = testing::benchmark_potentials(grid);
  spec.nonlinearity = make_quartic_coupled();
  const HypothesisReport rep = check_hypotheses(spec, grid);
  for (const auto& c : rep.checks) {
    INFO(c.id, ": ", c.detail);
    CHECK(c.passed);
  }
}

TEST_CASE("quadratic growth fails the superquadratic certificate") {
  Grid grid = build_grid({3, 6.0, 24, GridMode::Radial});
  ProblemSpec spec = tiny_problem(grid, make_quadratic_custom(), 1.0);
  const HypothesisReport rep = check_hypotheses(spec, grid);
  const HypothesisCheck* growth = rep.find("superquadratic_growth");
  REQUIRE(growth != nullptr);
  CHECK_FALSE(growth->passed);
  CHECK_FALSE(rep.all_passed());
}

TEST_CASE("nonpositive V fails the positivity certificate") {
  Grid grid = build_grid({3, 6.0, 24, GridMode::Radial});
  ProblemSpec spec = tiny_problem(grid, make_quartic_coupled(), -1.0);
  const HypothesisReport rep = check_hypotheses(spec, grid);
  const HypothesisCheck* pos = rep.find("v_positive_somewhere");
  REQUIRE(pos != nullptr);
  CHECK_FALSE(pos->passed);
}

TEST_CASE("theta certificate accepts homogeneous families with theta one") {
  Grid grid = build_grid({3, 6.0, 24, GridMode::Radial});
  for (Nonlinearity nl :
       {make_quartic_coupled(), unit_power_sum(grid.n_interior, 3.0, 4.5)}) {
    ProblemSpec spec = tiny_problem(grid, nl, 1.0);
    const HypothesisReport rep = check_hypotheses(spec, grid);
    const HypothesisCheck* mono = rep.find("theta_monotonicity");
    REQUIRE(mono != nullptr);
    CHECK(mono->passed);
  }
}
