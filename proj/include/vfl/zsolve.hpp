#pragma once

#include <cstddef>
#include <vector>

#include "vfl/matrix.hpp"

namespace vfl {

// Per-sample objective the server minimizes for the auxiliary variables:
//   ℓ(z, y) − λᵀz + (ρ/2)‖pred − z‖²
// with ℓ the softmax cross-entropy by default. The quadratic hook swaps in
// ℓ = ½‖z − onehot(y)‖², whose minimizer has the closed form
// z = (onehot(y) + λ + ρ·pred)/(1 + ρ), used to validate the solver path.
struct ZSolveOptions {
  double tol = 1e-8;        // ∞-norm stationarity residual
  int max_newton = 100;     // damped Newton iterations before the fallback
  int max_fallback = 200000;  // backtracking gradient-descent iterations
  bool quadratic_loss = false;
};

// Vectorized over the batch: row j of the result minimizes the objective for
// (labels[j], lambda.row(j), pred.row(j)), warm-started from z_init.row(j).
// Newton directions come from the Sherman–Morrison form of
// (diag(p) − ppᵀ + ρI)⁻¹, which is always well-posed for ρ > 0. Throws
// std::runtime_error carrying the worst stationarity residual if any row
// fails to converge.
Matrix update_z(const std::vector<int>& labels, const Matrix& lambda, const Matrix& pred,
                const Matrix& z_init, double rho, const ZSolveOptions& opts = {});

// ‖∇ℓ(z) − λ − ρ(pred − z)‖∞ maximized over rows, with ∇ℓ(z) =
// softmax(z) − onehot(y) for cross-entropy and z − onehot(y) for the
// quadratic hook; exposed for diagnostics and tests.
double z_stationarity_residual(const std::vector<int>& labels, const Matrix& lambda,
                               const Matrix& pred, const Matrix& z, double rho,
                               bool quadratic_loss = false);

}  // namespace vfl
