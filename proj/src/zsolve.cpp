#include "vfl/zsolve.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace vfl {

namespace {

// Work on one row at a time; d_c is small (≤ 40 in practice) so everything
// stays in stack-friendly vectors.
struct RowProblem {
  int label;
  const double* lambda;
  const double* pred;
  double rho;
  bool quadratic;
  std::size_t d;
};

void softmax_into(const double* z, std::size_t d, std::vector<double>& p) {
  double mx = z[0];
  for (std::size_t i = 1; i < d; ++i) mx = std::max(mx, z[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    p[i] = std::exp(z[i] - mx);
    sum += p[i];
  }
  for (std::size_t i = 0; i < d; ++i) p[i] /= sum;
}

double objective(const RowProblem& rp, const std::vector<double>& z) {
  double loss;
  if (rp.quadratic) {
    loss = 0.0;
    for (std::size_t i = 0; i < rp.d; ++i) {
      double diff = z[i] - (static_cast<int>(i) == rp.label ? 1.0 : 0.0);
      loss += 0.5 * diff * diff;
    }
  } else {
    double mx = z[0];
    for (std::size_t i = 1; i < rp.d; ++i) mx = std::max(mx, z[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < rp.d; ++i) sum += std::exp(z[i] - mx);
    loss = mx + std::log(sum) - z[rp.label];
  }
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < rp.d; ++i) {
    lin += rp.lambda[i] * z[i];
    double r = rp.pred[i] - z[i];
    quad += r * r;
  }
  return loss - lin + 0.5 * rp.rho * quad;
}

// ∇ of the row objective; also fills p = softmax(z) when using CE loss.
double gradient(const RowProblem& rp, const std::vector<double>& z, std::vector<double>& p,
                std::vector<double>& g) {
  if (rp.quadratic) {
    for (std::size_t i = 0; i < rp.d; ++i)
      p[i] = 0.0;  // no softmax curvature term in the Hessian
  } else {
    softmax_into(z.data(), rp.d, p);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < rp.d; ++i) {
    double dloss = rp.quadratic ? z[i] - (static_cast<int>(i) == rp.label ? 1.0 : 0.0) : p[i];
    if (!rp.quadratic && static_cast<int>(i) == rp.label) dloss -= 1.0;
    g[i] = dloss - rp.lambda[i] - rp.rho * (rp.pred[i] - z[i]);
    worst = std::max(worst, std::abs(g[i]));
  }
  return worst;
}

// Newton direction for Hessian diag(p)·(1−…) structure: H = D − ppᵀ with
// D = diag(p) + ρI, inverted by Sherman–Morrison. pᵀD⁻¹p = Σ p_i²/(p_i+ρ)
// < Σ p_i = 1, so the correction denominator is always positive.
void newton_direction(const RowProblem& rp, const std::vector<double>& p,
                      const std::vector<double>& g, std::vector<double>& dir) {
  double denom_corr = 0.0, pg = 0.0;
  for (std::size_t i = 0; i < rp.d; ++i) {
    double di = (rp.quadratic ? 1.0 : p[i]) + rp.rho;
    dir[i] = g[i] / di;
    if (!rp.quadratic) {
      denom_corr += p[i] * p[i] / di;
      pg += p[i] * dir[i];
    }
  }
  if (!rp.quadratic) {
    double scale = pg / (1.0 - denom_corr);
    for (std::size_t i = 0; i < rp.d; ++i) dir[i] += p[i] / (p[i] + rp.rho) * scale;
  }
  for (double& v : dir) v = -v;
}

bool same_point(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

bool solve_row(const RowProblem& rp, const ZSolveOptions& opts, std::vector<double>& z,
               double* final_residual) {
  std::vector<double> p(rp.d), g(rp.d), dir(rp.d), trial(rp.d), pt(rp.d), gt(rp.d);
  double res = gradient(rp, z, p, g);
  // When the trial point along a descent direction rounds back to z itself,
  // no representable point improves on z: the exact minimizer sits within one
  // ulp and z is stationary at machine resolution. Since ‖dir‖∞ ≥ res/(1+ρ),
  // this can only happen once ‖z‖∞ ≳ res/ε — e.g. predictions blown past 1e8
  // by a divergent outer loop — never at ordinary magnitudes with res > tol.
  bool at_machine_resolution = false;
  for (int it = 0; it < opts.max_newton && res > opts.tol; ++it) {
    newton_direction(rp, p, g, dir);
    // Full step first: in the quadratic-convergence zone it crushes the
    // residual, and an Armijo test on the objective would only see rounding
    // noise there (the decrease is O(res²) while |f| stays O(1)).
    for (std::size_t i = 0; i < rp.d; ++i) trial[i] = z[i] + dir[i];
    if (same_point(trial, z)) {
      at_machine_resolution = true;
      break;
    }
    double res_trial = gradient(rp, trial, pt, gt);
    if (res_trial <= 0.5 * res) {
      z = trial;
      p.swap(pt);
      g.swap(gt);
      res = res_trial;
      continue;
    }
    // Otherwise damp with a standard backtracking line search.
    double f0 = objective(rp, z);
    double slope = 0.0;
    for (std::size_t i = 0; i < rp.d; ++i) slope += g[i] * dir[i];
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t i = 0; i < rp.d; ++i) trial[i] = z[i] + t * dir[i];
      if (same_point(trial, z)) break;  // halving further cannot move
      if (objective(rp, trial) <= f0 + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // leave the rest to the fallback
    z = trial;
    res = gradient(rp, z, p, g);
  }
  // Backtracking gradient descent fallback (also covers the rare case where
  // a damped Newton step is rejected by the line search).
  for (int it = 0; it < opts.max_fallback && res > opts.tol && !at_machine_resolution; ++it) {
    double f0 = objective(rp, z);
    double gnorm2 = 0.0;
    for (double v : g) gnorm2 += v * v;
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 200; ++bt) {
      for (std::size_t i = 0; i < rp.d; ++i) trial[i] = z[i] - t * g[i];
      if (same_point(trial, z)) break;  // halving further cannot move
      if (objective(rp, trial) <= f0 - 1e-4 * t * gnorm2) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // Objective differences are below rounding noise; retreat to damped
      // steps accepted on gradient-norm decrease alone.
      bool moved = false;
      t = 1.0;
      for (int bt = 0; bt < 60; ++bt) {
        for (std::size_t i = 0; i < rp.d; ++i) trial[i] = z[i] - t * g[i];
        if (same_point(trial, z)) {
          // Even an undamped steepest-descent step rounds back to z.
          if (bt == 0) at_machine_resolution = true;
          break;
        }
        double res_trial = gradient(rp, trial, pt, gt);
        if (res_trial < res) {
          z = trial;
          p.swap(pt);
          g.swap(gt);
          res = res_trial;
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) break;  // no measurable progress in any direction
      continue;
    }
    z = trial;
    res = gradient(rp, z, p, g);
  }
  *final_residual = res;
  return res <= opts.tol || at_machine_resolution;
}

}  // namespace

Matrix update_z(const std::vector<int>& labels, const Matrix& lambda, const Matrix& pred,
                const Matrix& z_init, double rho, const ZSolveOptions& opts) {
  if (rho <= 0.0) throw std::invalid_argument("rho must be positive, got " + std::to_string(rho));
  if (!lambda.same_shape(pred) || !lambda.same_shape(z_init)) throw_shape_error("update_z", lambda, pred);
  if (labels.size() != lambda.rows)
    throw std::invalid_argument("update_z: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(lambda.rows) + " rows");
  std::size_t d = lambda.cols;
  Matrix z = z_init;
  std::vector<double> row(d);
  for (std::size_t j = 0; j < lambda.rows; ++j) {
    int y = labels[j];
    if (y < 0 || static_cast<std::size_t>(y) >= d)
      throw std::invalid_argument("update_z: label " + std::to_string(y) + " out of range");
    for (std::size_t c = 0; c < d; ++c) {
      const char* bad = nullptr;
      if (!std::isfinite(pred.data[j * d + c])) bad = "prediction";
      else if (!std::isfinite(lambda.data[j * d + c])) bad = "multiplier";
      else if (!std::isfinite(z_init.data[j * d + c])) bad = "initial z";
      if (bad)
        throw std::invalid_argument("update_z: non-finite " + std::string(bad) + " in row " +
                                    std::to_string(j) + " (training has diverged)");
    }
    RowProblem rp{y, lambda.data.data() + j * d, pred.data.data() + j * d, rho,
                  opts.quadratic_loss, d};
    std::copy(z.data.data() + j * d, z.data.data() + (j + 1) * d, row.begin());
    double res = 0.0;
    if (!solve_row(rp, opts, row, &res)) {
      std::ostringstream msg;
      msg << "z-solver failed to converge on row " << j << ": stationarity residual "
          << std::scientific << res << " exceeds tolerance " << opts.tol;
      throw std::runtime_error(msg.str());
    }
    std::copy(row.begin(), row.end(), z.data.data() + j * d);
  }
  return z;
}

double z_stationarity_residual(const std::vector<int>& labels, const Matrix& lambda,
                               const Matrix& pred, const Matrix& z, double rho,
                               bool quadratic_loss) {
  std::size_t d = lambda.cols;
  std::vector<double> p(d), g(d), zrow(d);
  double worst = 0.0;
  for (std::size_t j = 0; j < lambda.rows; ++j) {
    RowProblem rp{labels[j], lambda.data.data() + j * d, pred.data.data() + j * d, rho,
                  quadratic_loss, d};
    std::copy(z.data.data() + j * d, z.data.data() + (j + 1) * d, zrow.begin());
    worst = std::max(worst, gradient(rp, zrow, p, g));
  }
  return worst;
}

}  // namespace vfl
