#include "vfl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vfl {

namespace {

// Per-layer views into the flat parameter vector.
struct LayerView {
  std::size_t in, out;
  std::size_t weight_offset;  // in*out doubles, row-major
  std::size_t bias_offset;    // out doubles
};

std::vector<LayerView> layer_views(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) {
    throw std::invalid_argument("MlpModel: need at least {in, out} layer dims");
  }
  std::vector<LayerView> views;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    LayerView v{dims[l], dims[l + 1], offset, offset + dims[l] * dims[l + 1]};
    offset = v.bias_offset + v.out;
    views.push_back(v);
  }
  return views;
}

// out = x · W + 1·bᵀ for one layer.
Matrix affine(const Matrix& x, const std::vector<double>& params, const LayerView& v) {
  Matrix w(v.in, v.out,
           std::vector<double>(params.begin() + v.weight_offset,
                               params.begin() + v.weight_offset + v.in * v.out));
  Matrix out = matmul(x, w);
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) {
      out(i, j) += params[v.bias_offset + j];
    }
  }
  return out;
}

}  // namespace

std::size_t MlpModel::param_count(const std::vector<std::size_t>& dims) {
  std::size_t n = 0;
  for (const LayerView& v : layer_views(dims)) n += v.in * v.out + v.out;
  return n;
}

MlpModel make_mlp(std::vector<std::size_t> layer_dims, RngStream& rng) {
  MlpModel model;
  model.layer_dims = std::move(layer_dims);
  model.params.resize(MlpModel::param_count(model.layer_dims));
  for (const LayerView& v : layer_views(model.layer_dims)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(v.in));
    for (std::size_t i = 0; i < v.in * v.out; ++i) {
      model.params[v.weight_offset + i] = rng.uniform(-bound, bound);
    }
    for (std::size_t j = 0; j < v.out; ++j) {
      model.params[v.bias_offset + j] = rng.uniform(-bound, bound);
    }
  }
  return model;
}

Matrix mlp_forward(const MlpModel& model, const Matrix& x) {
  if (x.cols != model.input_dim()) {
    throw std::invalid_argument("mlp_forward: input has " + std::to_string(x.cols) +
                                " features, model expects " +
                                std::to_string(model.input_dim()));
  }
  const auto views = layer_views(model.layer_dims);
  Matrix a = x;
  for (std::size_t l = 0; l < views.size(); ++l) {
    a = affine(a, model.params, views[l]);
    if (l + 1 < views.size()) {
      for (double& v : a.data) v = v > 0.0 ? v : 0.0;
    }
  }
  return a;
}

MlpGrads mlp_backward(const MlpModel& model, const Matrix& x, const Matrix& upstream) {
  const auto views = layer_views(model.layer_dims);
  if (x.cols != model.input_dim()) {
    throw std::invalid_argument("mlp_backward: input width mismatch");
  }
  if (upstream.rows != x.rows || upstream.cols != model.output_dim()) {
    throw std::invalid_argument("mlp_backward: upstream must be batch × output_dim");
  }

  // Forward pass, keeping post-activation inputs of each layer and the
  // pre-activation values needed for the ReLU masks.
  std::vector<Matrix> inputs;   // inputs[l] feeds layer l
  std::vector<Matrix> preacts;  // preacts[l] = inputs[l]·W_l + b_l
  inputs.push_back(x);
  for (std::size_t l = 0; l < views.size(); ++l) {
    preacts.push_back(affine(inputs.back(), model.params, views[l]));
    if (l + 1 < views.size()) {
      Matrix a = preacts.back();
      for (double& v : a.data) v = v > 0.0 ? v : 0.0;
      inputs.push_back(std::move(a));
    }
  }

  MlpGrads grads;
  grads.params.assign(model.params.size(), 0.0);
  Matrix g = upstream;
  for (std::size_t l = views.size(); l-- > 0;) {
    const LayerView& v = views[l];
    // dW = inputsᵀ · g, db = column sums of g
    const Matrix dw = matmul_tn(inputs[l], g);
    std::copy(dw.data.begin(), dw.data.end(), grads.params.begin() + v.weight_offset);
    for (std::size_t i = 0; i < g.rows; ++i) {
      for (std::size_t j = 0; j < g.cols; ++j) {
        grads.params[v.bias_offset + j] += g(i, j);
      }
    }
    // Propagate: g ← g · Wᵀ, masked by the previous layer's ReLU.
    Matrix w(v.in, v.out,
             std::vector<double>(model.params.begin() + v.weight_offset,
                                 model.params.begin() + v.weight_offset + v.in * v.out));
    g = matmul_nt(g, w);
    if (l > 0) {
      const Matrix& pre = preacts[l - 1];
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        if (pre.data[i] <= 0.0) g.data[i] = 0.0;
      }
    }
  }
  grads.inputs = std::move(g);
  return grads;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (std::size_t i = 0; i < p.rows; ++i) {
    double m = p(i, 0);
    for (std::size_t j = 1; j < p.cols; ++j) m = std::max(m, p(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < p.cols; ++j) {
      p(i, j) = std::exp(p(i, j) - m);
      sum += p(i, j);
    }
    for (std::size_t j = 0; j < p.cols; ++j) p(i, j) /= sum;
  }
  return p;
}

CeResult softmax_ce(const Matrix& logits, const std::vector<int>& labels) {
  if (logits.rows != labels.size()) {
    throw std::invalid_argument("softmax_ce: " + std::to_string(logits.rows) +
                                " logit rows vs " + std::to_string(labels.size()) +
                                " labels");
  }
  if (logits.rows == 0) throw std::invalid_argument("softmax_ce: empty batch");
  const double inv_b = 1.0 / static_cast<double>(logits.rows);
  CeResult result{0.0, softmax_rows(logits)};
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols) {
      throw std::invalid_argument("softmax_ce: label " + std::to_string(y) +
                                  " out of range for " + std::to_string(logits.cols) +
                                  " classes");
    }
    // loss_i = logsumexp(z) − z_y, computed from the stabilized softmax
    double m = logits(i, 0);
    for (std::size_t j = 1; j < logits.cols; ++j) m = std::max(m, logits(i, j));
    double lse = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) lse += std::exp(logits(i, j) - m);
    result.loss += (m + std::log(lse) - logits(i, static_cast<std::size_t>(y))) * inv_b;
    result.grad(i, static_cast<std::size_t>(y)) -= 1.0;
  }
  scale_in_place(result.grad, inv_b);
  return result;
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols; ++j) {
      if (logits(i, j) > logits(i, best)) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const Matrix& logits, const std::vector<int>& labels) {
  if (logits.rows != labels.size() || logits.rows == 0) {
    throw std::invalid_argument("accuracy: shape mismatch or empty batch");
  }
  const std::vector<int> preds = argmax_rows(logits);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

void sgd_momentum_step(std::vector<double>& params, const std::vector<double>& grads,
                       OptState& state, double lr, double momentum) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("sgd_momentum_step: param/grad length mismatch");
  }
  if (state.velocity.empty()) state.velocity.assign(params.size(), 0.0);
  if (state.velocity.size() != params.size()) {
    throw std::invalid_argument("sgd_momentum_step: stale velocity length");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.velocity[i] = momentum * state.velocity[i] + grads[i];
    params[i] -= lr * state.velocity[i];
  }
}

void sgd_step(std::vector<double>& params, const std::vector<double>& grads, double lr) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("sgd_step: param/grad length mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

double finite_diff_check(const std::function<double(const std::vector<double>&)>& objective,
                         const std::vector<double>& x,
                         const std::vector<double>& analytic_grad, double step) {
  if (x.size() != analytic_grad.size()) {
    throw std::invalid_argument("finite_diff_check: gradient length mismatch");
  }
  std::vector<double> probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double fp = objective(probe);
    probe[i] = x[i] - step;
    const double fm = objective(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::runtime_error("finite_diff_check: objective non-finite at index " +
                               std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double denom =
        std::max({std::abs(numeric), std::abs(analytic_grad[i]), 1e-8});
    worst = std::max(worst, std::abs(numeric - analytic_grad[i]) / denom);
  }
  return worst;
}

void minimize_to_tolerance(
    const std::function<double(const std::vector<double>&, std::vector<double>&)>& value_and_grad,
    std::vector<double>& x, double tol, std::size_t max_iters) {
  std::vector<double> grad(x.size(), 0.0);
  double f = value_and_grad(x, grad);
  if (max_abs(grad) <= tol) return;

  std::vector<double> x_prev = x, grad_prev = grad;
  double step = 1e-3;
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    // Armijo backtracking from the current (BB-proposed) step.
    double t = step;
    const double g2 = dot(grad, grad);
    std::vector<double> candidate;
    double f_new = 0.0;
    std::vector<double> grad_new(x.size(), 0.0);
    for (int back = 0; back < 60; ++back) {
      candidate = x;
      axpy(candidate, grad, -t);
      f_new = value_and_grad(candidate, grad_new);
      if (std::isfinite(f_new) && f_new <= f - 1e-4 * t * g2) break;
      t *= 0.5;
    }
    x_prev.swap(x);
    grad_prev.swap(grad);
    x = std::move(candidate);
    grad = grad_new;
    f = f_new;
    if (max_abs(grad) <= tol) return;

    // Barzilai-Borwein step for the next iteration.
    double sy = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double s = x[i] - x_prev[i];
      const double y = grad[i] - grad_prev[i];
      sy += s * y;
      yy += y * y;
    }
    step = (sy > 0.0 && yy > 0.0) ? sy / yy : t;
    if (!std::isfinite(step) || step <= 0.0) step = t;
  }
  throw std::runtime_error("minimize_to_tolerance: gradient norm " +
                           std::to_string(max_abs(grad)) + " above tolerance after " +
                           std::to_string(max_iters) + " iterations");
}

}  // namespace vfl
