#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vfl/admm.hpp"
#include "vfl/data.hpp"
#include "vfl/ledger.hpp"
#include "vfl/matrix.hpp"
#include "vfl/nn.hpp"
#include "vfl/privacy.hpp"
#include "vfl/trainer.hpp"
#include "vfl/zsolve.hpp"

namespace vfl {

// Without-model-splitting client: holds both the feature extractor θ_k and
// the head W_k locally; only logit matrices o^k = f(x^k;θ_k)·W_k go on the
// wire. Neither parameter block is ever serialized.
struct JointClientSite {
  std::size_t id = 0;
  MlpModel model;    // θ_k
  Matrix head;       // W_k, d_f×d_c
  OptState opt_theta;
  OptState opt_head;
  const Matrix* features = nullptr;
  std::size_t tau = 1;
  double local_lr = 0.1;
  double momentum = 0.9;
  double beta = 0.005;
};

// The server keeps only the coordination variables.
struct JointServerState {
  Matrix z;       // N×d_c
  Matrix lambda;  // N×d_c
  double rho = 1.0;
};

struct LogitBatch {
  std::size_t round = 0;
  Matrix logits;  // b×d_c
  std::size_t scalar_count() const { return logits.size(); }
};

struct JointServerMsg {
  std::size_t round = 0;
  Matrix lambda;    // b×d_c
  Matrix residual;  // b×d_c
  std::size_t scalar_count() const { return lambda.size() + residual.size(); }
};

// Identical contracts to update_z / update_lambda with pred := Σ_k o^k.
Matrix update_z_joint(const std::vector<int>& labels, const Matrix& lambda,
                      const Matrix& logit_sum, const Matrix& z_init, double rho,
                      const ZSolveOptions& opts = {});
Matrix update_lambda_joint(const Matrix& lambda, const Matrix& logit_sum, const Matrix& z,
                           double rho);

// s_j^k = z_j − Σ_{i≠k} o_j^i, ascending-id summation.
Matrix residual_joint(const Matrix& z, const std::vector<Matrix>& logits, std::size_t k);

// Gradient of the local head objective
//   β‖W‖² + (1/b)Σ_j λ_jᵀ f(x_j;θ)W + (ρ/2b)Σ_j‖s_j − f(x_j;θ)W‖²
// at fixed embeddings h = f(x;θ):  2βW + (1/b)hᵀΛ + (ρ/b)hᵀ(hW − S).
Matrix joint_head_grad(const Matrix& h, const Matrix& head, double beta, const Matrix& lambda_b,
                       const Matrix& s_b, double rho);
double joint_head_objective(const Matrix& h, const Matrix& head, double beta,
                            const Matrix& lambda_b, const Matrix& s_b, double rho);

// τ alternating local steps: each step takes one momentum-SGD step on W_k at
// the current θ_k, then one on θ_k against the freshly updated head. The
// embedding matrix is computed once per step (the θ gradient re-derives it
// from the unchanged θ, so the two sub-steps see the same h).
void client_update_joint(JointClientSite& site, const Matrix& lambda_b, const Matrix& s_b,
                         const Matrix& x_b, double rho);

struct JointOptions {
  std::size_t hidden = 128;
  std::size_t d_f = 60;
  std::size_t tau = 1;
  double rho = 1.0;
  double eta = 0.1;
  double momentum = 0.9;
  double beta = 0.005;
  DpPolicy dp;
  std::size_t threads = 1;
};

class JointTrainer : public Trainer {
 public:
  JointTrainer(const VerticalDataset& data, const JointOptions& opts, CommLedger* ledger,
               std::uint64_t seed);

  RoundStats run_round(const BatchIndices& batch) override;
  // Clients submit eval logits in an explicit evaluation round (EvalLogitBatch,
  // excluded from training traffic totals).
  Matrix eval_logits(const std::vector<Matrix>& blocks, std::size_t round) override;
  std::vector<Matrix> client_heads() const override;
  CheckpointData checkpoint() const override;
  double full_admm_loss() override;
  double full_constraint_residual() override;

  const JointServerState& server() const { return server_; }
  const std::vector<JointClientSite>& sites() const { return sites_; }
  std::vector<JointClientSite>& sites() { return sites_; }

  static std::vector<std::string> message_whitelist();

 private:
  std::vector<Matrix> all_logits() const;  // clean full-train logits

  const VerticalDataset* data_;
  JointOptions opts_;
  CommLedger* ledger_;
  std::uint64_t seed_;
  JointServerState server_;
  std::vector<JointClientSite> sites_;
  std::vector<double> beta_;  // per-client, for the diagnostic loss
};

}  // namespace vfl
