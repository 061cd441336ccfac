#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vfl/admm.hpp"        // ClientSite
#include "vfl/admm_joint.hpp"  // JointClientSite (FDML's full local model)
#include "vfl/data.hpp"
#include "vfl/ledger.hpp"
#include "vfl/matrix.hpp"
#include "vfl/nn.hpp"
#include "vfl/privacy.hpp"
#include "vfl/trainer.hpp"

namespace vfl {

// Split Learning / FedBCD: one model over the concatenated embeddings
// (M·d_f → d_c, linear by default). VAFL: learnable per-client aggregation
// weights α_k plus a d_f → d_c layer. The server takes plain SGD steps;
// momentum is a client-side convention here.
struct ServerModel {
  MlpModel model;
  std::vector<double> alpha;  // VAFL only
  OptState opt;               // unused by plain SGD; kept for optimizer swaps
  double lr = 0.1;
  double beta = 0.005;
};

// Per-client gradient batch: w.r.t. embeddings (b×d_f, split family) or
// logits (b×d_c, FDML).
struct GradientBatchMsg {
  std::size_t round = 0;
  Matrix grad;
  std::size_t scalar_count() const { return grad.size(); }
};

// One Split Learning round: embeddings up (optionally clipped/perturbed),
// one plain-SGD server step on CE(θ_0) + β‖θ_0‖², per-client embedding
// gradients computed with the post-step server model, then site.tau
// client-side chain-rule momentum steps against that (stale) upstream,
// recomputing the local Jacobian each step. With tau = 1 this is exactly
// Split Learning; larger tau is FedBCD.
RoundStats split_learning_round(ServerModel& server, std::vector<ClientSite>& sites,
                                const VerticalDataset& data, const BatchIndices& batch,
                                const DpPolicy& dp, CommLedger* ledger, std::size_t threads,
                                std::uint64_t seed);
RoundStats fedbcd_round(ServerModel& server, std::vector<ClientSite>& sites,
                        const VerticalDataset& data, const BatchIndices& batch,
                        const DpPolicy& dp, CommLedger* ledger, std::size_t threads,
                        std::uint64_t seed);

// VAFL: aggregate h̄_j = Σ_k α_k h_j^k, joint plain-SGD step on (α, V, c),
// downlink gradient α_k'·∂ℓ/∂h̄ with post-step parameters, one client
// momentum step each.
RoundStats vafl_round(ServerModel& server, std::vector<ClientSite>& sites,
                      const VerticalDataset& data, const BatchIndices& batch,
                      const DpPolicy& dp, CommLedger* ledger, std::size_t threads,
                      std::uint64_t seed);

// FDML (server-sends-gradients variant; labels never leave the server):
// clients send logits o^k, server returns ∂ℓ/∂o (identical for every k),
// each client takes one joint momentum step on its extractor and head.
RoundStats fdml_round(std::vector<JointClientSite>& sites, const VerticalDataset& data,
                      const BatchIndices& batch, const DpPolicy& dp, CommLedger* ledger,
                      std::size_t threads, std::uint64_t seed);

struct BaselineOptions {
  std::size_t hidden = 128;        // client extractors
  std::size_t server_hidden = 0;   // 0 → linear server model (the default)
  std::size_t d_f = 60;
  std::size_t tau = 1;             // > 1 only for FedBCD
  double eta = 0.1;
  double server_lr = 0.1;
  double momentum = 0.9;
  double beta = 0.005;
  DpPolicy dp;
  std::size_t threads = 1;
};

class SplitTrainer : public Trainer {
 public:
  // method is "split" or "fedbcd" (identical code path; tau differs).
  SplitTrainer(const VerticalDataset& data, const BaselineOptions& opts, CommLedger* ledger,
               std::uint64_t seed, std::string method = "split");

  RoundStats run_round(const BatchIndices& batch) override;
  Matrix eval_logits(const std::vector<Matrix>& blocks, std::size_t round) override;
  // Per-client d_f-row slices of the server's first layer.
  std::vector<Matrix> client_heads() const override;
  CheckpointData checkpoint() const override;

  const ServerModel& server() const { return server_; }
  const std::vector<ClientSite>& sites() const { return sites_; }
  std::vector<ClientSite>& sites() { return sites_; }

  static std::vector<std::string> message_whitelist();

 private:
  const VerticalDataset* data_;
  BaselineOptions opts_;
  CommLedger* ledger_;
  std::uint64_t seed_;
  std::string method_;
  ServerModel server_;
  std::vector<ClientSite> sites_;
};

class VaflTrainer : public Trainer {
 public:
  VaflTrainer(const VerticalDataset& data, const BaselineOptions& opts, CommLedger* ledger,
              std::uint64_t seed);

  RoundStats run_round(const BatchIndices& batch) override;
  Matrix eval_logits(const std::vector<Matrix>& blocks, std::size_t round) override;
  // α_k · V — the effective per-client linear map.
  std::vector<Matrix> client_heads() const override;
  CheckpointData checkpoint() const override;

  const ServerModel& server() const { return server_; }
  const std::vector<ClientSite>& sites() const { return sites_; }
  std::vector<ClientSite>& sites() { return sites_; }

  static std::vector<std::string> message_whitelist();

 private:
  const VerticalDataset* data_;
  BaselineOptions opts_;
  CommLedger* ledger_;
  std::uint64_t seed_;
  ServerModel server_;
  std::vector<ClientSite> sites_;
};

class FdmlTrainer : public Trainer {
 public:
  FdmlTrainer(const VerticalDataset& data, const BaselineOptions& opts, CommLedger* ledger,
              std::uint64_t seed);

  RoundStats run_round(const BatchIndices& batch) override;
  Matrix eval_logits(const std::vector<Matrix>& blocks, std::size_t round) override;
  std::vector<Matrix> client_heads() const override;
  CheckpointData checkpoint() const override;

  const std::vector<JointClientSite>& sites() const { return sites_; }
  std::vector<JointClientSite>& sites() { return sites_; }

  static std::vector<std::string> message_whitelist();

 private:
  const VerticalDataset* data_;
  BaselineOptions opts_;
  CommLedger* ledger_;
  std::uint64_t seed_;
  std::vector<JointClientSite> sites_;
};

}  // namespace vfl
