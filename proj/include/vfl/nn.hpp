#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "vfl/matrix.hpp"
#include "vfl/rng.hpp"

namespace vfl {

// Fully connected network with ReLU on every layer except the last, which is
// identity (the usual embedding / logit producer). layer_dims = {in, out}
// degenerates to a single linear map, used by the convex-toy experiments.
// Parameters live in one flat vector, per layer: weight (in×out, row-major),
// then bias (out).
struct MlpModel {
  std::vector<std::size_t> layer_dims;
  std::vector<double> params;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  static std::size_t param_count(const std::vector<std::size_t>& dims);
};

// Weights and biases drawn uniform in ±1/√fan_in, layer by layer, weights
// first (row-major) then bias.
MlpModel make_mlp(std::vector<std::size_t> layer_dims, RngStream& rng);

Matrix mlp_forward(const MlpModel& model, const Matrix& x);

struct MlpGrads {
  std::vector<double> params;  // same layout as MlpModel::params
  Matrix inputs;               // b × input_dim
};

// Gradients of ⟨upstream, mlp_forward(model, x)⟩ with respect to the
// parameters and the inputs. Recomputes the forward pass internally.
MlpGrads mlp_backward(const MlpModel& model, const Matrix& x, const Matrix& upstream);

Matrix softmax_rows(const Matrix& logits);

struct CeResult {
  double loss;  // mean over the batch
  Matrix grad;  // ∂loss/∂logits, already divided by the batch size
};

// Numerically stabilized softmax cross-entropy (max subtraction per row).
CeResult softmax_ce(const Matrix& logits, const std::vector<int>& labels);

double accuracy(const Matrix& logits, const std::vector<int>& labels);
// Ties broken toward the lowest class index.
std::vector<int> argmax_rows(const Matrix& logits);

// Classic heavy-ball SGD: v ← momentum·v + g; p ← p − lr·v.
struct OptState {
  std::vector<double> velocity;
};

void sgd_momentum_step(std::vector<double>& params, const std::vector<double>& grads,
                       OptState& state, double lr, double momentum);
void sgd_step(std::vector<double>& params, const std::vector<double>& grads, double lr);

// Central finite differences (step 1e-5 by default): returns the max
// relative error between analytic and numeric gradients, with denominator
// max(|analytic|, |numeric|, 1e-8). Throws if the objective returns a
// non-finite value anywhere.
double finite_diff_check(const std::function<double(const std::vector<double>&)>& objective,
                         const std::vector<double>& x,
                         const std::vector<double>& analytic_grad,
                         double step = 1e-5);

// Gradient-based minimizer used by the exact-inner-solve mode: Barzilai-
// Borwein steps with an Armijo backtracking safeguard, run until
// ‖∇‖∞ ≤ tol. Throws std::runtime_error if the tolerance is not reached
// within max_iters.
void minimize_to_tolerance(
    const std::function<double(const std::vector<double>&, std::vector<double>&)>& value_and_grad,
    std::vector<double>& x, double tol, std::size_t max_iters = 200000);

}  // namespace vfl
