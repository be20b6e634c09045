#pragma once

#include <memory>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "cnls/grid.hpp"
#include "cnls/model.hpp"

namespace cnls {

/// Discrete pair state (u1, u2) on the unknown nodes.
struct State {
  Eigen::VectorXd u1, u2;

  State() = default;
  State(Eigen::VectorXd a, Eigen::VectorXd b)
      : u1(std::move(a)), u2(std::move(b)) {}

  static State zero(int n) {
    return State(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n));
  }
  static State from_flat(const Eigen::VectorXd& x) {
    const int n = static_cast<int>(x.size()) / 2;
    return State(x.head(n), x.tail(n));
  }
  Eigen::VectorXd flat() const {
    Eigen::VectorXd x(u1.size() + u2.size());
    x << u1, u2;
    return x;
  }
  int n() const { return static_cast<int>(u1.size()); }
};

/// Assembled quadratic forms for one problem instance.
///
/// A is block diagonal with blocks K + diag(w .* b_i): the Gram matrix of the
/// product norm, positive definite whenever the b-floors hold. B collects the
/// indefinite coefficients, diag(w .* V_i) on the blocks and diag(w .* gamma)
/// across them. The Cholesky factor of A is kept for the lifted gradient.
class FunctionalContext {
 public:
  FunctionalContext(Grid grid, PotentialSet pots, Nonlinearity nl);

  const Grid& grid() const { return grid_; }
  const PotentialSet& potentials() const { return pots_; }
  const Nonlinearity& nonlinearity() const { return nl_; }
  const Eigen::SparseMatrix<double>& A() const { return A_; }
  const Eigen::SparseMatrix<double>& B() const { return B_; }
  int dim() const { return static_cast<int>(A_.rows()); }
  int n() const { return grid_.n_interior; }

  Eigen::VectorXd solve_A(const Eigen::VectorXd& rhs) const;

  /// Test hook: replace B (the indefinite form) wholesale, e.g. with a copy
  /// of A for the formal all-eigenvalues-one setting.
  void override_B(Eigen::SparseMatrix<double> B);

 private:
  Grid grid_;
  PotentialSet pots_;
  Nonlinearity nl_;
  Eigen::SparseMatrix<double> A_, B_;
  std::unique_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> A_llt_;
};

/// Builds the context from a sampled problem. Throws FactorizationError if
/// A fails to factorize (a floor violation in disguise).
FunctionalContext build_context(Grid grid, const ProblemSpec& spec);

struct FactorizationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double energy_E(const FunctionalContext& ctx, const State& u);
double functional_J(const FunctionalContext& ctx, const State& u);
double functional_P(const FunctionalContext& ctx, const State& u);
double psi(const FunctionalContext& ctx, const State& u, double lambda);

/// Nodal representation of Psi'(u): r = A u - lambda B u - p(u) with
/// p(u)_i = w_i grad W(x_i, u(x_i)). Zero exactly at discrete weak solutions.
State dual_residual(const FunctionalContext& ctx, const State& u,
                    double lambda);

/// A^{-1} applied to the dual residual: the descent direction in the problem
/// inner product. <g, v>_A equals the dual pairing <r, v> for all v.
State sobolev_gradient(const FunctionalContext& ctx, const State& u,
                       double lambda);

/// (|u1|_1, |u2|_2): the component norms of the product space.
std::pair<double, double> component_norms(const FunctionalContext& ctx,
                                          const State& u);

/// sqrt(r^T A^{-1} r) for the dual residual r: the operator norm of Psi'(u)
/// under the Riesz identification, i.e. the A-norm of the lifted gradient.
double residual_norm(const FunctionalContext& ctx, const State& u,
                     double lambda);

}  // namespace cnls
