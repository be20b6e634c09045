#include "cnls/functionals.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cnls {

namespace {

void check_dims(const FunctionalContext& ctx, const State& u) {
  if (u.u1.size() != ctx.n() || u.u2.size() != ctx.n())
    throw std::invalid_argument("state: dimension mismatch with grid");
}

}  // namespace

FunctionalContext::FunctionalContext(Grid grid, PotentialSet pots,
                                     Nonlinearity nl)
    : grid_(std::move(grid)), pots_(std::move(pots)), nl_(std::move(nl)) {
  const int n = grid_.n_interior;
  validate_potentials(pots_, n);
  validate_nonlinearity(nl_, grid_.spec.dimension, n);

  const Eigen::VectorXd& w = grid_.mass_weights;
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> a_trips, b_trips;
  a_trips.reserve(2 * grid_.stiffness.nonZeros() + 2 * n);
  for (int k = 0; k < grid_.stiffness.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(grid_.stiffness, k); it;
         ++it) {
      a_trips.emplace_back(it.row(), it.col(), it.value());
      a_trips.emplace_back(n + it.row(), n + it.col(), it.value());
    }
  for (int i = 0; i < n; ++i) {
    a_trips.emplace_back(i, i, w[i] * pots_.b1[i]);
    a_trips.emplace_back(n + i, n + i, w[i] * pots_.b2[i]);
    b_trips.emplace_back(i, i, w[i] * pots_.V1[i]);
    b_trips.emplace_back(n + i, n + i, w[i] * pots_.V2[i]);
    b_trips.emplace_back(i, n + i, w[i] * pots_.gamma[i]);
    b_trips.emplace_back(n + i, i, w[i] * pots_.gamma[i]);
  }
  A_.resize(2 * n, 2 * n);
  A_.setFromTriplets(a_trips.begin(), a_trips.end());
  B_.resize(2 * n, 2 * n);
  B_.setFromTriplets(b_trips.begin(), b_trips.end());

  A_llt_ = std::make_unique<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>();
  A_llt_->compute(A_);
  if (A_llt_->info() != Eigen::Success)
    throw FactorizationError(
        "context: Cholesky of A failed; the b-floor condition is violated");
}

Eigen::VectorXd FunctionalContext::solve_A(const Eigen::VectorXd& rhs) const {
  return A_llt_->solve(rhs);
}

void FunctionalContext::override_B(Eigen::SparseMatrix<double> B) {
  if (B.rows() != A_.rows() || B.cols() != A_.cols())
    throw std::invalid_argument("override_B: dimension mismatch");
  B_ = std::move(B);
}

FunctionalContext build_context(Grid grid, const ProblemSpec& spec) {
  return FunctionalContext(std::move(grid), spec.potentials,
                           spec.nonlinearity);
}

double energy_E(const FunctionalContext& ctx, const State& u) {
  check_dims(ctx, u);
  const Eigen::VectorXd x = u.flat();
  return 0.5 * x.dot(ctx.A() * x);
}

double functional_J(const FunctionalContext& ctx, const State& u) {
  check_dims(ctx, u);
  const Eigen::VectorXd x = u.flat();
  return 0.5 * x.dot(ctx.B() * x);
}

double functional_P(const FunctionalContext& ctx, const State& u) {
  check_dims(ctx, u);
  const Eigen::VectorXd& w = ctx.grid().mass_weights;
  const Nonlinearity& nl = ctx.nonlinearity();
  double acc = 0.0;
  for (int i = 0; i < ctx.n(); ++i)
    acc += w[i] * eval_W(nl, i, u.u1[i], u.u2[i]);
  return acc;
}

double psi(const FunctionalContext& ctx, const State& u, double lambda) {
  return energy_E(ctx, u) - lambda * functional_J(ctx, u) - functional_P(ctx, u);
}

State dual_residual(const FunctionalContext& ctx, const State& u,
                    double lambda) {
  check_dims(ctx, u);
  const Eigen::VectorXd x = u.flat();
  Eigen::VectorXd r = ctx.A() * x - lambda * (ctx.B() * x);
  const Eigen::VectorXd& w = ctx.grid().mass_weights;
  const Nonlinearity& nl = ctx.nonlinearity();
  const int n = ctx.n();
  for (int i = 0; i < n; ++i) {
    auto [wt, ws] = eval_gradW(nl, i, u.u1[i], u.u2[i]);
    r[i] -= w[i] * wt;
    r[n + i] -= w[i] * ws;
  }
  return State::from_flat(r);
}

State sobolev_gradient(const FunctionalContext& ctx, const State& u,
                       double lambda) {
  const State r = dual_residual(ctx, u, lambda);
  return State::from_flat(ctx.solve_A(r.flat()));
}

std::pair<double, double> component_norms(const FunctionalContext& ctx,
                                          const State& u) {
  check_dims(ctx, u);
  const Eigen::VectorXd& w = ctx.grid().mass_weights;
  const Eigen::SparseMatrix<double>& K = ctx.grid().stiffness;
  const double n1 =
      u.u1.dot(K * u.u1) + u.u1.dot(w.cwiseProduct(ctx.potentials().b1)
                                        .cwiseProduct(u.u1));
  const double n2 =
      u.u2.dot(K * u.u2) + u.u2.dot(w.cwiseProduct(ctx.potentials().b2)
                                        .cwiseProduct(u.u2));
  return {std::sqrt(std::max(0.0, n1)), std::sqrt(std::max(0.0, n2))};
}

double residual_norm(const FunctionalContext& ctx, const State& u,
                     double lambda) {
  const Eigen::VectorXd r = dual_residual(ctx, u, lambda).flat();
  const Eigen::VectorXd g = ctx.solve_A(r);
  return std::sqrt(std::max(0.0, g.dot(r)));
}

}  // namespace cnls
