#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vfl/matrix.hpp"
#include "vfl/rng.hpp"

namespace vfl {

// Client-level DP mechanism parameters. When enabled, every transmitted
// client output matrix is Frobenius-clipped to C and perturbed with
// per-cell Gaussian noise of standard deviation σ·C.
struct DpPolicy {
  bool enabled = false;
  double clip = 0.0;            // C
  double sigma = 0.0;           // noise multiplier σ
  double delta = 1e-5;          // δ
  double target_epsilon = 0.0;  // >0 → σ is calibrated from this at run start
};

struct PrivacySpend {
  std::size_t rounds = 0;  // T
  double epsilon = 0.0;
  double alpha = 0.0;  // minimizing RDP order
};

struct LabelDpPolicy {
  bool enabled = false;
  double lambda = 1.0;  // Laplace scale λ_Lap
};

// A · min(1, C/‖A‖_F); zero matrices pass through unchanged.
Matrix clip_frobenius(const Matrix& a, double clip);

// Adds i.i.d. N(0, (σC)²) per cell, row-major draw order.
Matrix gaussian_perturb(const Matrix& a, double sigma, double clip, RngStream& rng);

struct RdpResult {
  double epsilon = 0.0;
  double alpha = 0.0;
};

// Minimizes f(α) = Tα/(2σ²) + log((α−1)/α) − (logδ + logα)/(α−1) over a
// geometric-plus-integer α grid in (1, 4096], refined by golden section in
// the bracketing interval. The composition is linear in the round count T;
// batch subsampling earns no amplification credit here.
RdpResult rdp_epsilon(std::size_t rounds, double sigma, double delta);

// Inverse of rdp_epsilon in σ: binary search over σ ∈ [1e-2, 1e4] until
// ε ∈ [ε_target·(1−1e-3), ε_target]. Throws if the target is unreachable
// within the bounds.
double calibrate_sigma(std::size_t rounds, double target_epsilon, double delta);

// One-hot + i.i.d. Laplace(λ_Lap) per coordinate + argmax, applied exactly
// once before training. Returns the noisy labels and ε_label = 2√2/λ_Lap.
std::pair<std::vector<int>, double> label_dp_randomize(const std::vector<int>& labels,
                                                       std::size_t num_classes,
                                                       double lambda, RngStream& rng);

double label_dp_epsilon(double lambda);

// Parallel composition across clients: the global guarantee is the max of
// the per-client spends.
double global_epsilon(const std::vector<PrivacySpend>& spends);

}  // namespace vfl
