#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "cnls/functionals.hpp"

namespace cnls {

struct ResonanceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SpectrumRangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PencilOptions {
  int k_max = 12;
  /// Above this total dimension the dense reduction is replaced by subspace
  /// iteration plus shift-inverted refinement of each pair.
  int dense_cutoff = 2000;
  unsigned long seed = 7;
};

/// Positive spectrum of A u = mu B u sorted increasingly, with the
/// eigenvectors scaled onto {J = 1}. Negative eigenvalues and the kernel
/// count of the reduced operator are kept for diagnostics.
struct EigenSeq {
  std::vector<double> mus;
  std::vector<State> vectors;
  std::vector<double> residuals;  // |Av - mu Bv| / |Av| per kept pair
  std::vector<double> neg_mus;
  int n_zero_modes = 0;
  /// False means every reduced eigenvalue was <= 0: no direction with
  /// positive J exists discretely, so the positive-V condition fails.
  bool positive_modes_found = false;
  /// Scale-normalized bump used as the search direction when the spectrum
  /// is empty (the whole space plays the role of the upper cone then).
  State fallback_direction;
};

/// Reduce with the Cholesky factor of A to a symmetric problem and return
/// up to k_max positive eigenvalues mu = 1/nu. Dense up to
/// options.dense_cutoff unknowns, iterative beyond.
EigenSeq solve_pencil(const FunctionalContext& ctx, int k_max);
EigenSeq solve_pencil(const FunctionalContext& ctx, const PencilOptions& options);

/// Independent characterization of mu_n: minimum over sampled n-dimensional
/// subspaces U on which J is positive definite of the maximum of E over
/// {u in U | J(u) = 1}. Always an upper bound for mu_n, tight after
/// refinement. Requires a total dimension <= 12.
double minmax_oracle(const FunctionalContext& ctx, int n,
                     unsigned long seed = 99);

/// Bracketing data for lambda in the eigenvalue sequence, plus the discrete
/// cone scaffolding: the span of the first m eigenvectors generates the
/// lower cone, the (m+1)-th eigenvector leaves it.
struct ConeGeometry {
  int m = 0;
  std::optional<double> mu_m;        // absent when m = 0
  double mu_m1 = 0.0;                // +inf when the spectrum is empty
  std::vector<State> basis_minus;    // first m eigenvectors
  State e_vector;
  std::vector<State> basis_plus;     // eigenvectors from index m upward
  bool spectrum_empty = false;
};

/// Finds the largest m with mu_m <= lambda. Requires lambda >= 0 (apply
/// sign_normalize first). Throws SpectrumRangeError when lambda lies beyond
/// the computed sequence and ResonanceError when lambda falls within 1e-9
/// of mu_{m+1} without reaching it.
ConeGeometry locate_lambda(const EigenSeq& seq, double lambda);

/// Flips (lambda, V1, V2, gamma) to (-lambda, -V1, -V2, -gamma) when lambda
/// is negative. Psi is pointwise unchanged.
ProblemSpec sign_normalize(const ProblemSpec& problem);

struct ConeMembership {
  bool in_c_minus = false;
  bool in_c_plus = false;
};

/// Classifies u against the cones with tolerance 1e-10 (1 + E(u)). The zero
/// state belongs to both. For m = 0 the upper cone is the whole space and
/// the lower cone is the origin alone.
ConeMembership cone_test(const ConeGeometry& geom, const FunctionalContext& ctx,
                         const State& u);

}  // namespace cnls
