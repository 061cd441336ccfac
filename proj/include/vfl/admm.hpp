#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vfl/data.hpp"
#include "vfl/ledger.hpp"
#include "vfl/matrix.hpp"
#include "vfl/nn.hpp"
#include "vfl/privacy.hpp"
#include "vfl/trainer.hpp"
#include "vfl/zsolve.hpp"

namespace vfl {

// Server-side coordination state for the with-model-splitting method. Rows
// of z and λ for never-yet-sampled indices stay at their zero init, so the
// first touch of an index sees λ_j = 0.
struct AdmmState {
  Matrix z;                   // N×d_c auxiliary variables
  Matrix lambda;              // N×d_c dual variables
  std::vector<Matrix> heads;  // M heads W_k, d_f×d_c
  double rho = 1.0;           // penalty factor
  std::vector<double> beta;   // per-client regularization weights β_k
  double head_lr = 0.1;       // step size of the inexact W update
};

// One client: feature extractor, optimizer state, and its slice of the
// training features. The model parameters never leave this struct — only
// embedding matrices are serialized (enforced by the ledger whitelist).
struct ClientSite {
  std::size_t id = 0;
  MlpModel model;
  OptState opt;
  const Matrix* features = nullptr;  // full N×d_k training block
  std::size_t tau = 1;               // local steps per round
  double local_lr = 0.1;             // η^k
  double momentum = 0.9;
  double beta = 0.005;               // β_k in the local objective
};

// Uplink payload: one client's embedding matrix for the round's batch.
struct EmbeddingBatch {
  std::size_t round = 0;
  Matrix embeddings;  // b×d_f
  std::size_t scalar_count() const { return embeddings.size(); }
};

// Downlink payload: dual rows, residual rows and the client's fresh head.
struct ServerToClientAdmmMsg {
  std::size_t round = 0;
  Matrix lambda;    // b×d_c
  Matrix residual;  // b×d_c, s^k
  Matrix head;      // d_f×d_c, W_k'
  std::size_t scalar_count() const {
    return lambda.size() + residual.size() + head.size();
  }
};

AdmmState init_admm_state(std::size_t n, std::size_t d_f, std::size_t d_c, std::size_t clients,
                          double rho, double beta, double head_lr, std::uint64_t seed);
std::vector<ClientSite> init_admm_clients(const std::vector<Matrix>& train_blocks,
                                          std::size_t hidden, std::size_t d_f, std::size_t tau,
                                          double local_lr, double momentum, double beta,
                                          std::uint64_t seed);

// P_k = H_k·W_k for every client.
std::vector<Matrix> client_contributions(const std::vector<Matrix>& embeddings,
                                         const std::vector<Matrix>& heads);
// Ascending-client-id sums — the fixed reduction order that keeps round
// outputs bit-reproducible.
Matrix sum_contributions(const std::vector<Matrix>& contributions);
Matrix sum_contributions_except(const std::vector<Matrix>& contributions, std::size_t skip);

// ŷ = Σ_k H_k·W_k
Matrix predict(const std::vector<Matrix>& embeddings, const std::vector<Matrix>& heads);

// Full augmented Lagrangian on clean all-N embeddings:
//   (1/N)Σℓ(z_j,y_j) + Σβ_k‖θ_k‖² + Σβ_k‖W_k‖²
//   + (1/N)Σλ_jᵀ(ŷ_j−z_j) + (ρ/2N)Σ‖ŷ_j−z_j‖²
double admm_loss(const AdmmState& state, const std::vector<ClientSite>& sites,
                 const std::vector<Matrix>& embeddings, const std::vector<int>& labels);

// λ' = λ + ρ(pred − z)
Matrix update_lambda(const Matrix& lambda, const Matrix& pred, const Matrix& z, double rho);

// One plain-SGD step per head with gradient
//   G_k = 2β_k·W_k + (1/b)H_kᵀΛ + (ρ/b)H_kᵀ(Ŷ−Z),
// where Ŷ is evaluated with the pre-step heads for every k (simultaneous
// update: all gradients read the same head values, then all apply).
std::vector<Matrix> update_heads(const AdmmState& state, const std::vector<Matrix>& embeddings,
                                 const Matrix& z, const Matrix& lambda);

// s_j^k = z_j − Σ_{i≠k} h_j^i·W_i' with the post-update heads.
Matrix residuals(const Matrix& z, const std::vector<Matrix>& embeddings,
                 const std::vector<Matrix>& heads, std::size_t k);

// τ momentum-SGD steps on
//   J(θ) = β_k‖θ‖² + (1/b)Σ_j λ_jᵀ f(x_j;θ)W_k' + (ρ/2b)Σ_j‖s_j^k − f(x_j;θ)W_k'‖²,
// recomputing clean embeddings at every step.
void client_update_theta(ClientSite& site, const Matrix& head, const Matrix& lambda_b,
                         const Matrix& s_b, const Matrix& x_b, double rho);

// J(θ) and its analytic gradient at an arbitrary parameter point; shared by
// the momentum steps, the exact-inner solver, the joint variant's θ step
// (whose Eq. 18 objective has the same shape) and the gradient tests.
double local_objective_value(const MlpModel& model, double beta, const Matrix& head,
                             const Matrix& lambda_b, const Matrix& s_b, const Matrix& x_b,
                             double rho);
std::vector<double> local_objective_grad(const MlpModel& model, double beta, const Matrix& head,
                                         const Matrix& lambda_b, const Matrix& s_b,
                                         const Matrix& x_b, double rho);

// Test-time prediction: ŷ = Σ f(x^k;θ_k)W_k, argmax with ties to the lowest
// class index. No z/λ involvement.
Matrix infer_logits(const std::vector<ClientSite>& sites, const std::vector<Matrix>& heads,
                    const std::vector<Matrix>& blocks);
std::vector<int> infer(const std::vector<ClientSite>& sites, const std::vector<Matrix>& heads,
                       const std::vector<Matrix>& blocks);

struct AdmmOptions {
  std::size_t hidden = 128;  // 0 → linear extractors
  std::size_t d_f = 60;
  std::size_t tau = 1;
  double rho = 1.0;
  double eta = 0.1;       // client learning rate η^k
  double head_lr = 0.1;
  double momentum = 0.9;
  double beta = 0.005;
  // Diagnostic regime for the monotonicity analysis: full-batch rounds,
  // heads solved in closed form block-by-block, client objectives minimized
  // to ‖∇‖∞ ≤ exact_tol with residuals refreshed between clients. Requires
  // linear extractors and no DP.
  bool exact_inner = false;
  double exact_tol = 1e-8;
  DpPolicy dp;
  std::size_t threads = 1;
};

class AdmmTrainer : public Trainer {
 public:
  AdmmTrainer(const VerticalDataset& data, const AdmmOptions& opts, CommLedger* ledger,
              std::uint64_t seed);

  RoundStats run_round(const BatchIndices& batch) override;
  Matrix eval_logits(const std::vector<Matrix>& blocks, std::size_t round) override;
  std::vector<Matrix> client_heads() const override { return state_.heads; }
  CheckpointData checkpoint() const override;
  double full_admm_loss() override;
  double full_constraint_residual() override;

  const AdmmState& state() const { return state_; }
  AdmmState& state() { return state_; }
  const std::vector<ClientSite>& sites() const { return sites_; }
  std::vector<ClientSite>& sites() { return sites_; }

  static std::vector<std::string> message_whitelist();

 private:
  RoundStats run_round_exact(const BatchIndices& batch);

  const VerticalDataset* data_;
  AdmmOptions opts_;
  CommLedger* ledger_;
  std::uint64_t seed_;
  AdmmState state_;
  std::vector<ClientSite> sites_;
};

}  // namespace vfl
