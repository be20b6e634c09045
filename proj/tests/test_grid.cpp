#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "cnls/grid.hpp"
#include "testing_util.hpp"

using namespace cnls;

TEST_CASE("full-line mesh layout and uniform weights") {
  Grid g = build_grid({1, 1.0, 8, GridMode::FullLine1D});
  CHECK(g.n_total() == 2 * 8 + 1);
  CHECK(g.n_interior == 2 * 8 - 1);
  for (int i = 0; i < g.n_interior; ++i)
    CHECK(g.mass_weights[i] == doctest::Approx(g.h).epsilon(1e-15));
  // measure of the interval
  CHECK(weighted_integral(g, Eigen::VectorXd::Ones(g.n_total())) ==
        doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("quadrature is exact on degree <= 1 in one dimension") {
  for (GridMode mode : {GridMode::FullLine1D, GridMode::Radial}) {
    Grid g = build_grid({1, 2.0, 16, mode});
    Eigen::VectorXd f(g.n_total());
    for (int i = 0; i < g.n_total(); ++i) f[i] = 3.0 - 0.25 * g.nodes[i];
    double exact;
    if (mode == GridMode::FullLine1D) {
      exact = 3.0 * 4.0;  // integral of 3 - x/4 over [-2, 2]
    } else {
      // radial N=1 carries the even-reflection factor 2
      exact = 2.0 * (3.0 * 2.0 - 0.25 * 2.0);
    }
    CHECK(weighted_integral(g, f) == doctest::Approx(exact).epsilon(1e-14));
  }
}

TEST_CASE("all quadrature weights positive, origin included") {
  for (int N : {1, 2, 3, 5}) {
    Grid g = build_grid({N, 1.5, 32, GridMode::Radial});
    CHECK(g.quad_weights.minCoeff() > 0.0);
  }
}

TEST_CASE("stiffness is exactly symmetric and positive semidefinite") {
  Grid g = build_grid({3, 4.0, 24, GridMode::Radial});
  Eigen::MatrixXd K(g.stiffness);
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd v(g.n_interior);
    for (int i = 0; i < g.n_interior; ++i) v[i] = gauss(rng);
    CHECK(v.dot(K * v) >= -1e-12 * v.squaredNorm());
  }
}

TEST_CASE("Dirichlet end makes constants cost energy") {
  Grid g = build_grid({2, 3.0, 16, GridMode::Radial});
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(g.n_interior);
  CHECK(ones.dot(g.stiffness * ones) > 0.0);
}

TEST_CASE("radial Dirichlet energy matches the closed-form integral") {
  const double R = 1.0;
  const int n = 800;
  Grid g = build_grid({3, R, n, GridMode::Radial});
  Eigen::VectorXd v(g.n_interior);
  for (int i = 0; i < g.n_interior; ++i)
    v[i] = std::sin(std::numbers::pi * g.interior_node(i) / R);
  const double discrete = v.dot(g.stiffness * v);
  const double c = std::numbers::pi / R;
  const double exact = 4.0 * std::numbers::pi *
                       testing::adaptive_simpson(
                           [&](double r) {
                             const double du = c * std::cos(c * r);
                             return du * du * r * r;
                           },
                           0.0, R);
  CHECK(discrete == doctest::Approx(exact).epsilon(0.01));
}

TEST_CASE("weighted integral of r^2 in three dimensions") {
  Grid g = build_grid({3, 1.0, 400, GridMode::Radial});
  Eigen::VectorXd f(g.n_total());
  for (int i = 0; i < g.n_total(); ++i) f[i] = g.nodes[i] * g.nodes[i];
  const double expect = 4.0 * std::numbers::pi / 5.0;
  const double oracle = 4.0 * std::numbers::pi *
                        testing::adaptive_simpson(
                            [](double r) { return r * r * r * r; }, 0.0, 1.0);
  CHECK(oracle == doctest::Approx(expect).epsilon(1e-10));
  CHECK(weighted_integral(g, f) == doctest::Approx(expect).epsilon(0.01));
}

TEST_CASE("quadrature converges at second order or better") {
  auto integrate = [&](int n) {
    Grid g = build_grid({3, 2.0, n, GridMode::Radial});
    Eigen::VectorXd f(g.n_total());
    for (int i = 0; i < g.n_total(); ++i) f[i] = std::cos(g.nodes[i]);
    return weighted_integral(g, f);
  };
  const double exact =
      4.0 * std::numbers::pi *
      testing::adaptive_simpson([](double r) { return std::cos(r) * r * r; },
                                0.0, 2.0);
  const double e1 = std::abs(integrate(50) - exact);
  const double e2 = std::abs(integrate(100) - exact);
  CHECK(e1 / e2 >= 3.5);  // order two gives 4
}

TEST_CASE("graph norm vanishes only at zero") {
  Grid g = build_grid({2, 3.0, 20, GridMode::Radial});
  const double b_floor = 0.7;
  auto norm2 = [&](const Eigen::VectorXd& u) {
    return u.dot(g.stiffness * u) + b_floor * u.dot(g.mass_weights.cwiseProduct(u));
  };
  CHECK(norm2(Eigen::VectorXd::Zero(g.n_interior)) == 0.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd u(g.n_interior);
    for (int i = 0; i < g.n_interior; ++i) u[i] = gauss(rng);
    if (u.norm() == 0.0) continue;
    CHECK(norm2(u) > 0.0);
  }
}

TEST_CASE("constructor rejections") {
  CHECK_THROWS_AS(build_grid({3, 1.0, 7, GridMode::Radial}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_grid({3, -1.0, 16, GridMode::Radial}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_grid({0, 1.0, 16, GridMode::Radial}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_grid({2, 1.0, 16, GridMode::FullLine1D}),
                  std::invalid_argument);
  CHECK_NOTHROW(build_grid_small({1, 1.0, 4, GridMode::Radial}));
  CHECK_THROWS_AS(build_grid_small({1, 1.0, 1, GridMode::Radial}),
                  std::invalid_argument);
}

TEST_CASE("weighted integral rejects length mismatch") {
  Grid g = build_grid({1, 1.0, 8, GridMode::Radial});
  CHECK_THROWS_AS(weighted_integral(g, Eigen::VectorXd::Zero(3)),
                  std::invalid_argument);
  CHECK(weighted_integral(g, Eigen::VectorXd::Zero(g.n_total())) == 0.0);
}
