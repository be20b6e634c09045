#include "cnls/pencil.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

namespace cnls {

namespace {

State make_fallback_direction(const FunctionalContext& ctx) {
  const Grid& grid = ctx.grid();
  const int n = grid.n_interior;
  Eigen::VectorXd bump(n);
  for (int i = 0; i < n; ++i) {
    const double x = 2.0 * grid.interior_node(i) / grid.spec.radius;
    bump[i] = std::exp(-x * x);
  }
  State e(bump, bump);
  Eigen::VectorXd x = e.flat();
  const double anorm = std::sqrt(x.dot(ctx.A() * x));
  x /= anorm;
  return State::from_flat(x);
}

double pencil_residual(const FunctionalContext& ctx, const Eigen::VectorXd& v,
                       double mu) {
  const Eigen::VectorXd av = ctx.A() * v;
  const Eigen::VectorXd res = av - mu * (ctx.B() * v);
  return res.norm() / av.norm();
}

void finalize_pair(const FunctionalContext& ctx, Eigen::VectorXd v, double mu,
                   EigenSeq& seq) {
  // scale onto {J = 1}
  const double uBu = v.dot(ctx.B() * v);
  if (uBu > 0.0) v *= std::sqrt(2.0 / uBu);
  seq.mus.push_back(mu);
  seq.vectors.push_back(State::from_flat(v));
  seq.residuals.push_back(pencil_residual(ctx, v, mu));
}

EigenSeq solve_dense(const FunctionalContext& ctx, const PencilOptions& opt) {
  EigenSeq seq;
  const int dim = ctx.dim();
  const Eigen::MatrixXd A = Eigen::MatrixXd(ctx.A());
  const Eigen::MatrixXd B = Eigen::MatrixXd(ctx.B());

  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success)
    throw FactorizationError("pencil: dense Cholesky of A failed");
  const Eigen::MatrixXd L = llt.matrixL();

  // S = L^{-1} B L^{-T}, symmetric with the same inertia as B
  Eigen::MatrixXd T = L.triangularView<Eigen::Lower>().solve(B);
  Eigen::MatrixXd S =
      L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd(T.transpose()));
  S = 0.5 * (S + S.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const Eigen::VectorXd nus = es.eigenvalues();
  const double max_abs = nus.cwiseAbs().maxCoeff();
  const double zero_tol = max_abs * 1e-12;

  std::vector<int> positive;
  for (int i = 0; i < dim; ++i) {
    if (nus[i] > zero_tol)
      positive.push_back(i);
    else if (nus[i] < -zero_tol)
      seq.neg_mus.push_back(1.0 / nus[i]);
    else
      ++seq.n_zero_modes;
  }
  std::sort(seq.neg_mus.begin(), seq.neg_mus.end());
  // largest nu first: ascending mu
  std::sort(positive.begin(), positive.end(),
            [&](int a, int b) { return nus[a] > nus[b]; });
  if (static_cast<int>(positive.size()) > opt.k_max)
    positive.resize(opt.k_max);

  for (int idx : positive) {
    Eigen::VectorXd y = es.eigenvectors().col(idx);
    Eigen::VectorXd v =
        L.transpose().triangularView<Eigen::Upper>().solve(y);
    finalize_pair(ctx, std::move(v), 1.0 / nus[idx], seq);
  }
  seq.positive_modes_found = !seq.mus.empty();
  seq.fallback_direction = make_fallback_direction(ctx);
  return seq;
}

// ---- iterative path -------------------------------------------------------

// A-orthonormalize the columns of V in place (modified Gram-Schmidt).
void a_orthonormalize(const FunctionalContext& ctx, Eigen::MatrixXd& V) {
  for (int j = 0; j < V.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (int k = 0; k < j; ++k) {
        const double proj = V.col(k).dot(ctx.A() * V.col(j));
        V.col(j) -= proj * V.col(k);
      }
    const double norm = std::sqrt(V.col(j).dot(ctx.A() * V.col(j)));
    V.col(j) /= norm;
  }
}

// Refine one approximate pair by shift-inverted iteration on the pencil,
// re-centering the shift at the current Rayleigh quotient.
std::pair<double, Eigen::VectorXd> shift_invert_polish(
    const FunctionalContext& ctx, double mu0, Eigen::VectorXd v) {
  double mu = mu0;
  v /= v.norm();
  for (int iter = 0; iter < 8; ++iter) {
    const double sigma = mu * (1.0 - 1e-7) - 1e-14;
    Eigen::SparseMatrix<double> shifted = ctx.A() - sigma * ctx.B();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(shifted);
    if (lu.info() != Eigen::Success) break;
    for (int inner = 0; inner < 3; ++inner) {
      Eigen::VectorXd w = lu.solve(ctx.B() * v);
      const double norm = w.norm();
      if (!(norm > 0.0) || !w.allFinite()) break;
      v = w / norm;
    }
    const double vBv = v.dot(ctx.B() * v);
    if (vBv == 0.0) break;
    mu = v.dot(ctx.A() * v) / vBv;
    if (pencil_residual(ctx, v, mu) < 1e-13) break;
  }
  return {mu, v};
}

EigenSeq solve_iterative(const FunctionalContext& ctx,
                         const PencilOptions& opt) {
  EigenSeq seq;
  const int dim = ctx.dim();
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss;

  auto apply_G = [&](const Eigen::VectorXd& x) {
    return ctx.solve_A(ctx.B() * x);
  };

  // crude bound on the reduced spectrum radius
  Eigen::VectorXd p(dim);
  for (int i = 0; i < dim; ++i) p[i] = gauss(rng);
  double radius = 0.0;
  for (int it = 0; it < 30; ++it) {
    Eigen::VectorXd q = apply_G(p);
    const double anorm = std::sqrt(q.dot(ctx.A() * q));
    const double pnorm = std::sqrt(p.dot(ctx.A() * p));
    radius = anorm / pnorm;
    if (anorm == 0.0) break;
    p = q / anorm;
  }
  const double shift = 1.5 * radius + 1e-8;

  const int block = std::min(dim, opt.k_max + 8);
  auto run_end = [&](double sign) {
    // subspace iteration on sign*(G) + shift*I in the A-inner product
    Eigen::MatrixXd V(dim, block);
    for (int j = 0; j < block; ++j)
      for (int i = 0; i < dim; ++i) V(i, j) = gauss(rng);
    a_orthonormalize(ctx, V);
    Eigen::VectorXd ritz_prev = Eigen::VectorXd::Zero(block);
    for (int sweep = 0; sweep < 400; ++sweep) {
      Eigen::MatrixXd W(dim, block);
      for (int j = 0; j < block; ++j)
        W.col(j) = sign * apply_G(V.col(j)) + shift * V.col(j);
      a_orthonormalize(ctx, W);
      V = W;
      Eigen::MatrixXd H(block, block);
      for (int j = 0; j < block; ++j) {
        const Eigen::VectorXd Bv = ctx.B() * V.col(j);
        for (int i = 0; i < block; ++i) H(i, j) = sign * V.col(i).dot(Bv);
      }
      H = 0.5 * (H + H.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
      V = (V * es.eigenvectors()).eval();
      Eigen::VectorXd ritz = es.eigenvalues();
      if (sweep > 20 && (ritz - ritz_prev).cwiseAbs().maxCoeff() <
                            1e-12 * (1.0 + ritz.cwiseAbs().maxCoeff()))
        break;
      ritz_prev = ritz;
    }
    // Ritz values of sign*G, descending
    std::vector<std::pair<double, Eigen::VectorXd>> out;
    Eigen::MatrixXd H(block, block);
    for (int j = 0; j < block; ++j) {
      const Eigen::VectorXd Bv = ctx.B() * V.col(j);
      for (int i = 0; i < block; ++i) H(i, j) = sign * V.col(i).dot(Bv);
    }
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    for (int j = block - 1; j >= 0; --j)
      out.emplace_back(es.eigenvalues()[j],
                       V * es.eigenvectors().col(j));
    return out;
  };

  const double nu_zero_tol = std::max(radius, 1e-30) * 1e-12;

  auto top = run_end(+1.0);  // largest nu -> smallest positive mu
  int kept = 0;
  for (auto& [nu, v] : top) {
    if (kept >= opt.k_max || nu <= nu_zero_tol) break;
    auto [mu, vec] = shift_invert_polish(ctx, 1.0 / nu, v);
    if (mu <= 0.0 || pencil_residual(ctx, vec, mu) > 1e-10) continue;
    finalize_pair(ctx, vec, mu, seq);
    ++kept;
  }
  // dedupe and order
  std::vector<int> order(seq.mus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return seq.mus[a] < seq.mus[b]; });
  EigenSeq sorted;
  for (int idx : order) {
    if (!sorted.mus.empty() &&
        std::abs(seq.mus[idx] - sorted.mus.back()) <
            1e-12 * std::abs(seq.mus[idx])) {
      const Eigen::VectorXd a = sorted.vectors.back().flat();
      const Eigen::VectorXd b = seq.vectors[idx].flat();
      const double align = std::abs(a.dot(ctx.A() * b)) /
                           (std::sqrt(a.dot(ctx.A() * a)) *
                            std::sqrt(b.dot(ctx.A() * b)));
      if (align > 1.0 - 1e-8) continue;  // same pair found twice
    }
    sorted.mus.push_back(seq.mus[idx]);
    sorted.vectors.push_back(seq.vectors[idx]);
    sorted.residuals.push_back(seq.residuals[idx]);
  }
  seq.mus = std::move(sorted.mus);
  seq.vectors = std::move(sorted.vectors);
  seq.residuals = std::move(sorted.residuals);

  auto bottom = run_end(-1.0);  // most negative nu
  for (auto& [negnu, v] : bottom) {
    const double nu = -negnu;
    if (nu >= -nu_zero_tol) break;
    if (static_cast<int>(seq.neg_mus.size()) >= opt.k_max) break;
    seq.neg_mus.push_back(1.0 / nu);
  }
  std::sort(seq.neg_mus.begin(), seq.neg_mus.end());

  seq.n_zero_modes = 0;  // the iterative path resolves only the extremes
  seq.positive_modes_found = !seq.mus.empty();
  seq.fallback_direction = make_fallback_direction(ctx);
  return seq;
}

}  // namespace

EigenSeq solve_pencil(const FunctionalContext& ctx, int k_max) {
  PencilOptions opt;
  opt.k_max = k_max;
  return solve_pencil(ctx, opt);
}

EigenSeq solve_pencil(const FunctionalContext& ctx,
                      const PencilOptions& options) {
  if (options.k_max < 1)
    throw std::invalid_argument("pencil: k_max must be positive");
  if (ctx.dim() <= options.dense_cutoff) return solve_dense(ctx, options);
  return solve_iterative(ctx, options);
}

// ---- min-max oracle --------------------------------------------------------

namespace {

constexpr double kInvalidSubspace = std::numeric_limits<double>::infinity();

// max of E over {J = 1} within span(Q), or +inf when J is not positive
// definite there (the slice is unbounded and the sup is not attained).
// Optionally exports all restricted eigenvectors, lifted.
double subspace_max(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                    const Eigen::MatrixXd& Q, Eigen::VectorXd* maximizer,
                    std::vector<std::pair<double, Eigen::VectorXd>>* pairs =
                        nullptr) {
  const Eigen::MatrixXd Ahat = Q.transpose() * A * Q;
  const Eigen::MatrixXd Bhat = Q.transpose() * B * Q;
  Eigen::LLT<Eigen::MatrixXd> llt(Bhat);
  if (llt.info() != Eigen::Success) return kInvalidSubspace;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Ahat, Bhat);
  if (es.info() != Eigen::Success) return kInvalidSubspace;
  const int last = static_cast<int>(es.eigenvalues().size()) - 1;
  if (maximizer) *maximizer = Q * es.eigenvectors().col(last);
  if (pairs) {
    pairs->clear();
    for (int j = 0; j <= last; ++j)
      pairs->emplace_back(es.eigenvalues()[j], Q * es.eigenvectors().col(j));
  }
  return es.eigenvalues()[last];
}

Eigen::MatrixXd orthonormal_columns(Eigen::MatrixXd M) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
  return Eigen::MatrixXd(qr.householderQ()).leftCols(M.cols());
}

}  // namespace

double minmax_oracle(const FunctionalContext& ctx, int n, unsigned long seed) {
  const int dim = ctx.dim();
  if (dim > 12)
    throw std::invalid_argument("minmax_oracle: total dimension above 12");
  if (n < 1 || n > dim)
    throw std::invalid_argument("minmax_oracle: bad subspace dimension");

  const Eigen::MatrixXd A = Eigen::MatrixXd(ctx.A());
  const Eigen::MatrixXd B = Eigen::MatrixXd(ctx.B());

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  auto random_basis = [&](int cols) {
    Eigen::MatrixXd M(dim, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < dim; ++i) M(i, j) = gauss(rng);
    return orthonormal_columns(std::move(M));
  };

  double best = kInvalidSubspace;
  Eigen::MatrixXd best_Q;
  {
    // guaranteed J-positive seed whenever one exists: the span of the
    // leading eigenvectors of B alone (no reduction machinery involved)
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
    Eigen::MatrixXd Q(dim, n);
    for (int j = 0; j < n; ++j) Q.col(j) = es.eigenvectors().col(dim - 1 - j);
    best = subspace_max(A, B, Q, nullptr);
    best_Q = Q;
  }
  for (int trial = 0; trial < 400; ++trial) {
    Eigen::MatrixXd Q = random_basis(n);
    const double val = subspace_max(A, B, Q, nullptr);
    if (val < best) {
      best = val;
      best_Q = Q;
    }
  }
  {
    // full-space contraction through the QZ route: the span of the n
    // lowest positive generalized eigenvectors is the optimal slice, and
    // its max re-evaluates through the symmetric-definite reduction above
    Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> qz;
    qz.compute(A, B);
    std::vector<std::pair<double, Eigen::VectorXd>> finite;
    for (int j = 0; j < qz.alphas().size(); ++j) {
      const std::complex<double> a = qz.alphas()[j];
      const double b = qz.betas()[j];
      if (b == 0.0) continue;
      if (std::abs(a.imag()) > 1e-9 * std::abs(a)) continue;
      const double kappa = a.real() / b;
      if (!(kappa > 0.0) || !std::isfinite(kappa)) continue;
      finite.emplace_back(kappa, qz.eigenvectors().col(j).real());
    }
    if (static_cast<int>(finite.size()) >= n) {
      std::sort(finite.begin(), finite.end(),
                [](const auto& x, const auto& y) { return x.first < y.first; });
      Eigen::MatrixXd Q(dim, n);
      for (int j = 0; j < n; ++j) Q.col(j) = finite[j].second;
      Q = orthonormal_columns(std::move(Q));
      const double val = subspace_max(A, B, Q, nullptr);
      if (val < best) {
        best = val;
        best_Q = Q;
      }
    }
  }
  if (!std::isfinite(best)) return best;  // no J-positive subspace exists

  // Local refinement: enlarge the best subspace with the residual directions
  // of every restricted eigenvector plus noise, then contract to the
  // n-dimensional sub-subspace with the smallest slice maximum. The small
  // pencil is solved by the QZ route, independent of the Cholesky reduction.
  int stagnant = 0;
  for (int round = 0; round < 400 && stagnant < 60; ++round) {
    std::vector<std::pair<double, Eigen::VectorXd>> pairs;
    subspace_max(A, B, best_Q, nullptr, &pairs);
    Eigen::MatrixXd aug(dim, 2 * n + 1);
    aug.leftCols(n) = best_Q;
    for (int j = 0; j < n; ++j)
      aug.col(n + j) = (A - pairs[j].first * B) * pairs[j].second;
    for (int i = 0; i < dim; ++i) aug(i, 2 * n) = gauss(rng);
    const Eigen::MatrixXd G = orthonormal_columns(std::move(aug));

    const Eigen::MatrixXd Ahat = G.transpose() * A * G;
    const Eigen::MatrixXd Bhat = G.transpose() * B * G;
    Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> qz;
    qz.compute(Ahat, Bhat);
    std::vector<std::pair<double, Eigen::VectorXd>> finite;
    for (int j = 0; j < qz.alphas().size(); ++j) {
      const std::complex<double> a = qz.alphas()[j];
      const double b = qz.betas()[j];
      if (b == 0.0) continue;
      if (std::abs(a.imag()) > 1e-9 * std::abs(a)) continue;
      const double kappa = a.real() / b;
      if (!(kappa > 0.0) || !std::isfinite(kappa)) continue;
      finite.emplace_back(kappa, qz.eigenvectors().col(j).real());
    }
    if (static_cast<int>(finite.size()) < n) {
      ++stagnant;
      continue;
    }
    std::sort(finite.begin(), finite.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    Eigen::MatrixXd C(G.cols(), n);
    for (int j = 0; j < n; ++j) C.col(j) = finite[j].second;
    Eigen::MatrixXd Qnew = orthonormal_columns(G * C);
    const double val = subspace_max(A, B, Qnew, nullptr);
    if (val < best - 1e-14 * (1.0 + std::abs(best))) {
      best = val;
      best_Q = Qnew;
      stagnant = 0;
    } else {
      if (val < best) {
        best = val;
        best_Q = Qnew;
      }
      ++stagnant;
    }
  }
  return best;
}

// ---- lambda bracketing and cones -------------------------------------------

ConeGeometry locate_lambda(const EigenSeq& seq, double lambda) {
  if (lambda < 0.0)
    throw std::invalid_argument("locate_lambda: lambda must be >= 0");

  ConeGeometry geom;
  if (seq.mus.empty()) {
    geom.m = 0;
    geom.mu_m1 = std::numeric_limits<double>::infinity();
    geom.e_vector = seq.fallback_direction;
    geom.spectrum_empty = true;
    return geom;
  }

  int m = 0;
  while (m < static_cast<int>(seq.mus.size()) && seq.mus[m] <= lambda) ++m;
  if (m == static_cast<int>(seq.mus.size()))
    throw SpectrumRangeError(
        "locate_lambda: lambda beyond the computed spectrum; increase k_max");
  const double mu_next = seq.mus[m];
  if (std::abs(lambda - mu_next) <= 1e-9 * std::max(1.0, std::abs(lambda)))
    throw ResonanceError(
        "locate_lambda: lambda is resonance-ambiguous against mu_{m+1}");

  geom.m = m;
  if (m >= 1) geom.mu_m = seq.mus[m - 1];
  geom.mu_m1 = mu_next;
  geom.basis_minus.assign(seq.vectors.begin(), seq.vectors.begin() + m);
  geom.e_vector = seq.vectors[m];
  geom.basis_plus.assign(seq.vectors.begin() + m, seq.vectors.end());
  return geom;
}

ProblemSpec sign_normalize(const ProblemSpec& problem) {
  if (problem.lambda >= 0.0) return problem;
  ProblemSpec flipped = problem;
  flipped.lambda = -problem.lambda;
  flipped.potentials.V1 = -problem.potentials.V1;
  flipped.potentials.V2 = -problem.potentials.V2;
  flipped.potentials.gamma = -problem.potentials.gamma;
  return flipped;
}

ConeMembership cone_test(const ConeGeometry& geom, const FunctionalContext& ctx,
                         const State& u) {
  const double E = energy_E(ctx, u);
  const double J = functional_J(ctx, u);
  const double tol = 1e-10 * (1.0 + E);

  ConeMembership result;
  if (geom.m == 0)
    result.in_c_minus = E <= tol;  // the lower cone degenerates to {0}
  else
    result.in_c_minus = E <= *geom.mu_m * J + tol;

  if (geom.m == 0 || geom.spectrum_empty)
    result.in_c_plus = true;  // the upper cone is the whole space
  else
    result.in_c_plus = E >= geom.mu_m1 * J - tol;
  return result;
}

}  // namespace cnls
