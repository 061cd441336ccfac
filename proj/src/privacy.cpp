#include "vfl/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vfl {

Matrix clip_frobenius(const Matrix& a, double clip) {
  if (clip <= 0.0) throw std::invalid_argument("clip norm must be positive, got " + std::to_string(clip));
  double norm = frobenius_norm(a);
  if (norm <= clip) return a;
  return scaled(a, clip / norm);
}

Matrix gaussian_perturb(const Matrix& a, double sigma, double clip, RngStream& rng) {
  if (sigma < 0.0) throw std::invalid_argument("noise multiplier must be non-negative");
  Matrix out = a;
  if (sigma == 0.0) return out;
  double stddev = sigma * clip;
  for (double& v : out.data) v += rng.normal(0.0, stddev);
  return out;
}

namespace {

// RDP-to-DP conversion objective at order α for T compositions of the
// Gaussian mechanism with noise multiplier σ (sensitivity 1 after clipping).
double rdp_objective(double alpha, std::size_t rounds, double sigma, double delta) {
  double t = static_cast<double>(rounds);
  return t * alpha / (2.0 * sigma * sigma) + std::log((alpha - 1.0) / alpha) -
         (std::log(delta) + std::log(alpha)) / (alpha - 1.0);
}

constexpr double kAlphaMax = 4096.0;

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  // Geometric coverage of α−1 catches minimizers close to 1 (high-noise or
  // long-horizon regimes); integer orders cover the rest of (1, 4096].
  for (double gap = 1e-6; gap < 1.0; gap *= 1.05) grid.push_back(1.0 + gap);
  for (int k = 2; k <= static_cast<int>(kAlphaMax); ++k) grid.push_back(static_cast<double>(k));
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

}  // namespace

RdpResult rdp_epsilon(std::size_t rounds, double sigma, double delta) {
  if (sigma <= 0.0) throw std::invalid_argument("sigma must be positive, got " + std::to_string(sigma));
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1), got " + std::to_string(delta));

  static const std::vector<double> grid = default_alpha_grid();
  std::size_t best = 0;
  double best_val = rdp_objective(grid[0], rounds, sigma, delta);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    double v = rdp_objective(grid[i], rounds, sigma, delta);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }

  // Golden-section refinement between the grid neighbors of the minimum.
  double lo = best > 0 ? grid[best - 1] : 1.0 + 1e-9;
  double hi = best + 1 < grid.size() ? grid[best + 1] : kAlphaMax;
  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = rdp_objective(x1, rounds, sigma, delta);
  double f2 = rdp_objective(x2, rounds, sigma, delta);
  for (int iter = 0; iter < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++iter) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = rdp_objective(x1, rounds, sigma, delta);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = rdp_objective(x2, rounds, sigma, delta);
    }
  }
  double mid = 0.5 * (lo + hi);
  double fmid = rdp_objective(mid, rounds, sigma, delta);

  RdpResult result;
  if (fmid < best_val) {
    result.epsilon = fmid;
    result.alpha = mid;
  } else {
    result.epsilon = best_val;
    result.alpha = grid[best];
  }
  return result;
}

double calibrate_sigma(std::size_t rounds, double target_epsilon, double delta) {
  if (target_epsilon <= 0.0) throw std::invalid_argument("target epsilon must be positive");
  constexpr double kSigmaLo = 1e-2;
  constexpr double kSigmaHi = 1e4;
  double band_lo = target_epsilon * (1.0 - 1e-3);

  double eps_at_lo = rdp_epsilon(rounds, kSigmaLo, delta).epsilon;
  double eps_at_hi = rdp_epsilon(rounds, kSigmaHi, delta).epsilon;
  if (eps_at_hi >= band_lo && eps_at_hi <= target_epsilon) return kSigmaHi;
  if (eps_at_lo < band_lo || eps_at_hi > target_epsilon)
    throw std::runtime_error("target epsilon " + std::to_string(target_epsilon) +
                             " unreachable within sigma bounds [1e-2, 1e4]");

  double lo = kSigmaLo;  // ε(lo) ≥ target
  double hi = kSigmaHi;  // ε(hi) < band
  for (int iter = 0; iter < 400; ++iter) {
    double mid = std::sqrt(lo * hi);
    double eps = rdp_epsilon(rounds, mid, delta).epsilon;
    if (eps <= target_epsilon && eps >= band_lo) return mid;
    if (eps > target_epsilon)
      lo = mid;
    else
      hi = mid;
  }
  throw std::runtime_error("sigma calibration failed to converge");
}

std::pair<std::vector<int>, double> label_dp_randomize(const std::vector<int>& labels,
                                                       std::size_t num_classes,
                                                       double lambda, RngStream& rng) {
  if (lambda <= 0.0) throw std::invalid_argument("laplace scale must be positive");
  if (num_classes == 0) throw std::invalid_argument("num_classes must be positive");
  std::vector<int> noisy(labels.size());
  std::vector<double> scores(num_classes);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    int y = labels[j];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw std::invalid_argument("label " + std::to_string(y) + " out of range for " +
                                  std::to_string(num_classes) + " classes");
    for (std::size_t c = 0; c < num_classes; ++c)
      scores[c] = (static_cast<int>(c) == y ? 1.0 : 0.0) + rng.laplace(lambda);
    noisy[j] = static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  }
  return {std::move(noisy), label_dp_epsilon(lambda)};
}

double label_dp_epsilon(double lambda) {
  if (lambda <= 0.0) throw std::invalid_argument("laplace scale must be positive");
  return 2.0 * std::sqrt(2.0) / lambda;
}

double global_epsilon(const std::vector<PrivacySpend>& spends) {
  double eps = 0.0;
  for (const auto& s : spends) eps = std::max(eps, s.epsilon);
  return eps;
}

}  // namespace vfl
