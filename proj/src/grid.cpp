#include "cnls/grid.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace cnls {

namespace {

double unit_sphere_area(int dim) {
  // |S^{N-1}| = 2 pi^{N/2} / Gamma(N/2)
  return 2.0 * std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim);
}

void validate_spec(const GridSpec& spec, int min_nodes) {
  if (spec.dimension < 1)
    throw std::invalid_argument("grid: dimension must be >= 1");
  if (spec.radius <= 0.0)
    throw std::invalid_argument("grid: radius must be positive");
  if (spec.n_nodes < min_nodes)
    throw std::invalid_argument("grid: n_nodes below the allowed minimum");
  if (spec.mode == GridMode::FullLine1D && spec.dimension != 1)
    throw std::invalid_argument("grid: FullLine1D requires dimension == 1");
}

Grid assemble(const GridSpec& spec) {
  Grid g;
  g.spec = spec;
  g.h = spec.radius / spec.n_nodes;

  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> trips;

  if (spec.mode == GridMode::Radial) {
    const int n = spec.n_nodes;
    const int total = n + 1;
    const double omega = unit_sphere_area(spec.dimension);
    const int N = spec.dimension;
    g.sphere_area = omega;

    g.nodes.resize(total);
    g.quad_weights.resize(total);
    for (int i = 0; i <= n; ++i) g.nodes[i] = i * g.h;

    // Trapezoid weights with r^{N-1} folded in. The origin node gets the
    // exact measure of its half cell [0, h/2] so that every weight stays
    // positive (for N >= 2 the folded trapezoid weight would vanish there);
    // for N = 1 the two rules coincide.
    g.quad_weights[0] = omega * std::pow(0.5 * g.h, N) / N;
    for (int i = 1; i < n; ++i)
      g.quad_weights[i] = omega * std::pow(g.nodes[i], N - 1) * g.h;
    g.quad_weights[n] = 0.5 * omega * std::pow(g.nodes[n], N - 1) * g.h;

    g.interior_offset = 0;
    g.n_interior = n;  // Dirichlet eliminates node n

    // Flux form: edge (i, i+1) carries omega * r_{i+1/2}^{N-1} / h.
    // No edge to the left of r = 0 — zero flux through the origin.
    for (int i = 0; i < n; ++i) {
      const double rmid = (i + 0.5) * g.h;
      const double k = omega * std::pow(rmid, N - 1) / g.h;
      trips.emplace_back(i, i, k);
      if (i + 1 < n) {
        trips.emplace_back(i + 1, i + 1, k);
        trips.emplace_back(i, i + 1, -k);
        trips.emplace_back(i + 1, i, -k);
      }
      // i+1 == n: Dirichlet neighbour eliminated, diagonal term kept
    }
  } else {
    const int n = spec.n_nodes;
    const int total = 2 * n + 1;
    g.sphere_area = 1.0;

    g.nodes.resize(total);
    g.quad_weights.resize(total);
    for (int i = 0; i < total; ++i) g.nodes[i] = -spec.radius + i * g.h;
    for (int i = 0; i < total; ++i) g.quad_weights[i] = g.h;
    g.quad_weights[0] = 0.5 * g.h;
    g.quad_weights[total - 1] = 0.5 * g.h;

    g.interior_offset = 1;
    g.n_interior = total - 2;

    const double k = 1.0 / g.h;
    for (int e = 0; e < total - 1; ++e) {
      // edge between mesh nodes e and e+1; unknown index = mesh index - 1
      const int a = e - 1, b = e;
      if (a >= 0) trips.emplace_back(a, a, k);
      if (b < g.n_interior) trips.emplace_back(b, b, k);
      if (a >= 0 && b < g.n_interior) {
        trips.emplace_back(a, b, -k);
        trips.emplace_back(b, a, -k);
      }
    }
  }

  g.stiffness.resize(g.n_interior, g.n_interior);
  g.stiffness.setFromTriplets(trips.begin(), trips.end());
  g.mass_weights = g.quad_weights.segment(g.interior_offset, g.n_interior);
  return g;
}

}  // namespace

Eigen::VectorXd Grid::extend_with_boundary(const Eigen::VectorXd& interior) const {
  if (interior.size() != n_interior)
    throw std::invalid_argument("grid: interior vector has wrong length");
  Eigen::VectorXd full = Eigen::VectorXd::Zero(n_total());
  full.segment(interior_offset, n_interior) = interior;
  return full;
}

Grid build_grid(const GridSpec& spec) {
  validate_spec(spec, 8);
  return assemble(spec);
}

Grid build_grid_small(const GridSpec& spec) {
  validate_spec(spec, 2);
  return assemble(spec);
}

double weighted_integral(const Grid& grid, const Eigen::VectorXd& f_nodal) {
  if (f_nodal.size() != grid.nodes.size())
    throw std::invalid_argument("weighted_integral: length mismatch");
  return grid.quad_weights.dot(f_nodal);
}

}  // namespace cnls
