#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace cnls {

enum class GridMode { Radial, FullLine1D };

/// Mesh parameters for a truncated radial domain [0, R] in dimension N,
/// or the symmetric interval [-R, R] when mode is FullLine1D (N = 1 only).
struct GridSpec {
  int dimension = 1;       // spatial dimension N >= 1
  double radius = 1.0;     // truncation radius R > 0
  int n_nodes = 8;         // cells per radius; spacing h = R / n_nodes
  GridMode mode = GridMode::Radial;
};

/// Uniform mesh with quadrature weights for the measure r^{N-1} dr
/// (times the unit-sphere area) and the assembled second-order forms.
///
/// Node layout:
///   Radial:     r_i = i*h, i = 0..n_nodes; the last node carries the
///               homogeneous Dirichlet condition and is not an unknown.
///               Unknowns are i = 0..n_nodes-1 (the origin included,
///               zero-flux regularity there).
///   FullLine1D: x_i = -R + i*h, i = 0..2*n_nodes; both endpoints are
///               Dirichlet, unknowns are the 2*n_nodes-1 inner nodes.
///
/// `stiffness` realizes the Dirichlet form of the (radial) Laplacian on
/// unknown vectors: v^T K u = sum over mesh edges of the midpoint-weighted
/// flux product, which is symmetric positive semidefinite by construction.
/// `mass_weights` are the quadrature weights restricted to the unknowns, so
/// diag(mass_weights) is the lumped mass form M.
struct Grid {
  GridSpec spec;
  double h = 0.0;
  double sphere_area = 1.0;  // |S^{N-1}| folded into radial weights

  Eigen::VectorXd nodes;         // all mesh node coordinates
  Eigen::VectorXd quad_weights;  // all-node weights, every entry > 0

  int interior_offset = 0;  // index of the first unknown node
  int n_interior = 0;       // number of unknowns

  Eigen::SparseMatrix<double> stiffness;  // n_interior x n_interior
  Eigen::VectorXd mass_weights;           // quad weights on the unknowns

  int n_total() const { return static_cast<int>(nodes.size()); }
  double interior_node(int i) const { return nodes[interior_offset + i]; }

  /// Embed an unknown-vector into the full node set (Dirichlet zeros).
  Eigen::VectorXd extend_with_boundary(const Eigen::VectorXd& interior) const;
};

/// Assemble the mesh, weights and forms. Rejects n_nodes < 8, radius <= 0,
/// dimension < 1 and FullLine1D with dimension != 1.
Grid build_grid(const GridSpec& spec);

/// Same assembly with the node-count floor relaxed to 2. Tiny meshes are
/// needed by the exhaustive small-instance oracles (total unknowns <= 12),
/// which no user-facing configuration can reach.
Grid build_grid_small(const GridSpec& spec);

/// Quadrature of a full-length nodal sample: sum_i w_i f_i.
/// Exact for polynomials of degree <= 1 in one dimension.
double weighted_integral(const Grid& grid, const Eigen::VectorXd& f_nodal);

}  // namespace cnls
