#include "vfl/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "vfl/parallel.hpp"

namespace vfl {

namespace {

std::vector<int> batch_labels(const VerticalDataset& data, const BatchIndices& batch) {
  std::vector<int> labels(batch.indices.size());
  for (std::size_t j = 0; j < batch.indices.size(); ++j)
    labels[j] = data.train_labels[batch.indices[j]];
  return labels;
}

// Client phase 1 for the embedding-uplink methods: gather rows, run the
// extractor, apply the DP mechanism to the transmitted copy only.
void gather_embeddings(const std::vector<ClientSite>& sites, const BatchIndices& batch,
                       const DpPolicy& dp, std::uint64_t seed, std::size_t threads,
                       std::vector<Matrix>& x, std::vector<Matrix>& sent) {
  std::size_t m = sites.size();
  x.resize(m);
  sent.resize(m);
  parallel_for(m, threads, [&](std::size_t k) {
    x[k] = gather_rows(*sites[k].features, batch.indices);
    Matrix h = mlp_forward(sites[k].model, x[k]);
    if (dp.enabled) {
      RngStream noise = derive_stream(seed, StreamPurpose::kDpNoise, k, batch.round);
      h = gaussian_perturb(clip_frobenius(h, dp.clip), dp.sigma, dp.clip, noise);
    }
    sent[k] = std::move(h);
  });
}

// One chain-rule momentum step per iteration: ∇θ = Jᵀ·upstream + 2βθ with
// the Jacobian recomputed at the current parameters.
void client_chain_steps(ClientSite& site, const Matrix& x, const Matrix& upstream,
                        std::size_t steps) {
  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<double> grads = mlp_backward(site.model, x, upstream).params;
    axpy(grads, site.model.params, 2.0 * site.beta);
    sgd_momentum_step(site.model.params, grads, site.opt, site.local_lr, site.momentum);
  }
}

std::vector<ClientSite> make_baseline_clients(const VerticalDataset& data,
                                              const BaselineOptions& opts, std::uint64_t seed) {
  return init_admm_clients(data.train_blocks, opts.hidden, opts.d_f, opts.tau, opts.eta,
                           opts.momentum, opts.beta, seed);
}

MlpModel make_server_model(std::size_t in, std::size_t hidden, std::size_t out,
                           std::uint64_t seed) {
  std::vector<std::size_t> dims;
  if (hidden == 0)
    dims = {in, out};
  else
    dims = {in, hidden, out};
  RngStream rng = derive_stream(seed, StreamPurpose::kServerInit, 0, 0);
  return make_mlp(dims, rng);
}

}  // namespace

RoundStats split_learning_round(ServerModel& server, std::vector<ClientSite>& sites,
                                const VerticalDataset& data, const BatchIndices& batch,
                                const DpPolicy& dp, CommLedger* ledger, std::size_t threads,
                                std::uint64_t seed) {
  std::size_t m = sites.size();
  std::vector<int> labels = batch_labels(data, batch);

  std::vector<Matrix> x, sent;
  gather_embeddings(sites, batch, dp, seed, threads, x, sent);
  if (ledger)
    for (std::size_t k = 0; k < m; ++k)
      ledger->record(k, "EmbeddingBatch", Direction::kUplink, batch.round, sent[k].size());

  // Server step on CE + β‖θ₀‖² (plain SGD).
  Matrix hcat = hconcat(sent);
  CeResult ce = softmax_ce(mlp_forward(server.model, hcat), labels);
  RoundStats stats;
  stats.train_loss = ce.loss;
  std::vector<double> server_grads = mlp_backward(server.model, hcat, ce.grad).params;
  axpy(server_grads, server.model.params, 2.0 * server.beta);
  sgd_step(server.model.params, server_grads, server.lr);

  // Embedding gradients with the post-step server model.
  CeResult ce_post = softmax_ce(mlp_forward(server.model, hcat), labels);
  Matrix upstream = mlp_backward(server.model, hcat, ce_post.grad).inputs;  // b × M·d_f

  std::vector<GradientBatchMsg> msgs(m);
  std::size_t d_f = sites.empty() ? 0 : sites[0].model.output_dim();
  for (std::size_t k = 0; k < m; ++k) {
    msgs[k] = GradientBatchMsg{batch.round, slice_cols(upstream, k * d_f, (k + 1) * d_f)};
    if (ledger)
      ledger->record(k, "GradientBatchMsg", Direction::kDownlink, batch.round,
                     msgs[k].scalar_count());
  }

  parallel_for(m, threads, [&](std::size_t k) {
    client_chain_steps(sites[k], x[k], msgs[k].grad, sites[k].tau);
  });
  return stats;
}

RoundStats fedbcd_round(ServerModel& server, std::vector<ClientSite>& sites,
                        const VerticalDataset& data, const BatchIndices& batch,
                        const DpPolicy& dp, CommLedger* ledger, std::size_t threads,
                        std::uint64_t seed) {
  // Same protocol; the stale-gradient reuse lives in sites[k].tau.
  return split_learning_round(server, sites, data, batch, dp, ledger, threads, seed);
}

RoundStats vafl_round(ServerModel& server, std::vector<ClientSite>& sites,
                      const VerticalDataset& data, const BatchIndices& batch,
                      const DpPolicy& dp, CommLedger* ledger, std::size_t threads,
                      std::uint64_t seed) {
  std::size_t m = sites.size();
  std::vector<int> labels = batch_labels(data, batch);

  std::vector<Matrix> x, sent;
  gather_embeddings(sites, batch, dp, seed, threads, x, sent);
  if (ledger)
    for (std::size_t k = 0; k < m; ++k)
      ledger->record(k, "EmbeddingBatch", Direction::kUplink, batch.round, sent[k].size());

  auto aggregate = [&](const std::vector<double>& alpha) {
    Matrix hbar(sent[0].rows, sent[0].cols);
    for (std::size_t k = 0; k < m; ++k) add_in_place(hbar, sent[k], alpha[k]);
    return hbar;
  };

  // Joint plain-SGD step on (α, V, c): all gradients from pre-step values.
  Matrix hbar = aggregate(server.alpha);
  CeResult ce = softmax_ce(mlp_forward(server.model, hbar), labels);
  RoundStats stats;
  stats.train_loss = ce.loss;
  MlpGrads vgrads = mlp_backward(server.model, hbar, ce.grad);
  std::vector<double> server_grads = vgrads.params;
  axpy(server_grads, server.model.params, 2.0 * server.beta);
  std::vector<double> alpha_grads(m);
  for (std::size_t k = 0; k < m; ++k) alpha_grads[k] = dot(sent[k], vgrads.inputs);
  sgd_step(server.model.params, server_grads, server.lr);
  sgd_step(server.alpha, alpha_grads, server.lr);

  // Downlink α_k'·∂ℓ/∂h̄ with post-step parameters.
  Matrix hbar_post = aggregate(server.alpha);
  CeResult ce_post = softmax_ce(mlp_forward(server.model, hbar_post), labels);
  Matrix upstream = mlp_backward(server.model, hbar_post, ce_post.grad).inputs;

  std::vector<GradientBatchMsg> msgs(m);
  for (std::size_t k = 0; k < m; ++k) {
    msgs[k] = GradientBatchMsg{batch.round, scaled(upstream, server.alpha[k])};
    if (ledger)
      ledger->record(k, "GradientBatchMsg", Direction::kDownlink, batch.round,
                     msgs[k].scalar_count());
  }

  parallel_for(m, threads, [&](std::size_t k) {
    client_chain_steps(sites[k], x[k], msgs[k].grad, 1);
  });
  return stats;
}

RoundStats fdml_round(std::vector<JointClientSite>& sites, const VerticalDataset& data,
                      const BatchIndices& batch, const DpPolicy& dp, CommLedger* ledger,
                      std::size_t threads, std::uint64_t seed) {
  std::size_t m = sites.size();
  std::vector<int> labels = batch_labels(data, batch);

  std::vector<Matrix> x(m), sent(m);
  parallel_for(m, threads, [&](std::size_t k) {
    x[k] = gather_rows(*sites[k].features, batch.indices);
    Matrix o = matmul(mlp_forward(sites[k].model, x[k]), sites[k].head);
    if (dp.enabled) {
      RngStream noise = derive_stream(seed, StreamPurpose::kDpNoise, k, batch.round);
      o = gaussian_perturb(clip_frobenius(o, dp.clip), dp.sigma, dp.clip, noise);
    }
    sent[k] = std::move(o);
  });
  if (ledger)
    for (std::size_t k = 0; k < m; ++k)
      ledger->record(k, "LogitBatch", Direction::kUplink, batch.round, sent[k].size());

  // ∂ℓ/∂o^k is the softmax-of-sum gradient — one matrix, shared by all k.
  Matrix pred = sum_contributions(sent);
  CeResult ce = softmax_ce(pred, labels);
  RoundStats stats;
  stats.train_loss = ce.loss;

  if (ledger)
    for (std::size_t k = 0; k < m; ++k)
      ledger->record(k, "GradientBatchMsg", Direction::kDownlink, batch.round, ce.grad.size());

  parallel_for(m, threads, [&](std::size_t k) {
    JointClientSite& site = sites[k];
    Matrix h = mlp_forward(site.model, x[k]);
    Matrix head_grad = matmul_tn(h, ce.grad);
    add_in_place(head_grad, site.head, 2.0 * site.beta);
    std::vector<double> theta_grads =
        mlp_backward(site.model, x[k], matmul_nt(ce.grad, site.head)).params;
    axpy(theta_grads, site.model.params, 2.0 * site.beta);
    // One joint momentum step: both blocks read pre-step values, then apply.
    sgd_momentum_step(site.head.data, head_grad.data, site.opt_head, site.local_lr,
                      site.momentum);
    sgd_momentum_step(site.model.params, theta_grads, site.opt_theta, site.local_lr,
                      site.momentum);
  });
  return stats;
}

SplitTrainer::SplitTrainer(const VerticalDataset& data, const BaselineOptions& opts,
                           CommLedger* ledger, std::uint64_t seed, std::string method)
    : data_(&data), opts_(opts), ledger_(ledger), seed_(seed), method_(std::move(method)) {
  if (method_ != "split" && method_ != "fedbcd")
    throw std::invalid_argument("SplitTrainer method must be split or fedbcd");
  sites_ = make_baseline_clients(data, opts, seed);
  server_.model =
      make_server_model(data.clients() * opts.d_f, opts.server_hidden, data.num_classes, seed);
  server_.lr = opts.server_lr;
  server_.beta = opts.beta;
}

std::vector<std::string> SplitTrainer::message_whitelist() {
  return {"EmbeddingBatch", "GradientBatchMsg", "EvalEmbeddingBatch"};
}

RoundStats SplitTrainer::run_round(const BatchIndices& batch) {
  return split_learning_round(server_, sites_, *data_, batch, opts_.dp, ledger_, opts_.threads,
                              seed_);
}

Matrix SplitTrainer::eval_logits(const std::vector<Matrix>& blocks, std::size_t round) {
  std::size_t m = sites_.size();
  std::vector<Matrix> embeddings(m);
  parallel_for(m, opts_.threads, [&](std::size_t k) {
    embeddings[k] = mlp_forward(sites_[k].model, blocks[k]);
  });
  if (ledger_)
    for (std::size_t k = 0; k < m; ++k)
      ledger_->record(k, "EvalEmbeddingBatch", Direction::kUplink, round, embeddings[k].size());
  return mlp_forward(server_.model, hconcat(embeddings));
}

std::vector<Matrix> SplitTrainer::client_heads() const {
  std::size_t m = sites_.size();
  std::size_t d_f = opts_.d_f;
  std::size_t out = server_.model.layer_dims[1];
  std::vector<Matrix> heads;
  heads.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    Matrix block(d_f, out);
    // First-layer weight is (M·d_f)×out row-major at the front of params.
    std::copy(server_.model.params.begin() + static_cast<std::ptrdiff_t>(k * d_f * out),
              server_.model.params.begin() + static_cast<std::ptrdiff_t>((k + 1) * d_f * out),
              block.data.begin());
    heads.push_back(std::move(block));
  }
  return heads;
}

CheckpointData SplitTrainer::checkpoint() const {
  CheckpointData data;
  data.method = method_;
  for (const auto& site : sites_) data.client_models.push_back(site.model);
  data.server_layer_dims = server_.model.layer_dims;
  data.server_params = server_.model.params;
  return data;
}

VaflTrainer::VaflTrainer(const VerticalDataset& data, const BaselineOptions& opts,
                         CommLedger* ledger, std::uint64_t seed)
    : data_(&data), opts_(opts), ledger_(ledger), seed_(seed) {
  sites_ = make_baseline_clients(data, opts, seed);
  server_.model = make_server_model(opts.d_f, opts.server_hidden, data.num_classes, seed);
  server_.alpha.assign(data.clients(), 1.0 / static_cast<double>(data.clients()));
  server_.lr = opts.server_lr;
  server_.beta = opts.beta;
}

std::vector<std::string> VaflTrainer::message_whitelist() {
  return {"EmbeddingBatch", "GradientBatchMsg", "EvalEmbeddingBatch"};
}

RoundStats VaflTrainer::run_round(const BatchIndices& batch) {
  return vafl_round(server_, sites_, *data_, batch, opts_.dp, ledger_, opts_.threads, seed_);
}

Matrix VaflTrainer::eval_logits(const std::vector<Matrix>& blocks, std::size_t round) {
  std::size_t m = sites_.size();
  std::vector<Matrix> embeddings(m);
  parallel_for(m, opts_.threads, [&](std::size_t k) {
    embeddings[k] = mlp_forward(sites_[k].model, blocks[k]);
  });
  if (ledger_)
    for (std::size_t k = 0; k < m; ++k)
      ledger_->record(k, "EvalEmbeddingBatch", Direction::kUplink, round, embeddings[k].size());
  Matrix hbar(embeddings[0].rows, embeddings[0].cols);
  for (std::size_t k = 0; k < m; ++k) add_in_place(hbar, embeddings[k], server_.alpha[k]);
  return mlp_forward(server_.model, hbar);
}

std::vector<Matrix> VaflTrainer::client_heads() const {
  std::size_t out = server_.model.layer_dims[1];
  Matrix v(opts_.d_f, out);
  std::copy(server_.model.params.begin(),
            server_.model.params.begin() + static_cast<std::ptrdiff_t>(opts_.d_f * out),
            v.data.begin());
  std::vector<Matrix> heads;
  heads.reserve(sites_.size());
  for (std::size_t k = 0; k < sites_.size(); ++k) heads.push_back(scaled(v, server_.alpha[k]));
  return heads;
}

CheckpointData VaflTrainer::checkpoint() const {
  CheckpointData data;
  data.method = "vafl";
  for (const auto& site : sites_) data.client_models.push_back(site.model);
  data.server_layer_dims = server_.model.layer_dims;
  data.server_params = server_.model.params;
  data.alpha = server_.alpha;
  return data;
}

FdmlTrainer::FdmlTrainer(const VerticalDataset& data, const BaselineOptions& opts,
                         CommLedger* ledger, std::uint64_t seed)
    : data_(&data), opts_(opts), ledger_(ledger), seed_(seed) {
  std::size_t d_c = data.num_classes;
  double bound = 1.0 / std::sqrt(static_cast<double>(opts.d_f));
  sites_.resize(data.clients());
  for (std::size_t k = 0; k < data.clients(); ++k) {
    JointClientSite& site = sites_[k];
    std::vector<std::size_t> dims;
    if (opts.hidden == 0)
      dims = {data.train_blocks[k].cols, opts.d_f};
    else
      dims = {data.train_blocks[k].cols, opts.hidden, opts.d_f};
    RngStream wrng = derive_stream(seed, StreamPurpose::kWeightInit, k, 0);
    site.id = k;
    site.model = make_mlp(dims, wrng);
    RngStream hrng = derive_stream(seed, StreamPurpose::kHeadInit, k, 0);
    site.head = Matrix(opts.d_f, d_c);
    for (double& v : site.head.data) v = hrng.uniform(-bound, bound);
    site.features = &data.train_blocks[k];
    site.tau = 1;
    site.local_lr = opts.eta;
    site.momentum = opts.momentum;
    site.beta = opts.beta;
  }
}

std::vector<std::string> FdmlTrainer::message_whitelist() {
  return {"LogitBatch", "GradientBatchMsg", "EvalLogitBatch"};
}

RoundStats FdmlTrainer::run_round(const BatchIndices& batch) {
  return fdml_round(sites_, *data_, batch, opts_.dp, ledger_, opts_.threads, seed_);
}

Matrix FdmlTrainer::eval_logits(const std::vector<Matrix>& blocks, std::size_t round) {
  std::size_t m = sites_.size();
  std::vector<Matrix> logits(m);
  parallel_for(m, opts_.threads, [&](std::size_t k) {
    logits[k] = matmul(mlp_forward(sites_[k].model, blocks[k]), sites_[k].head);
  });
  if (ledger_)
    for (std::size_t k = 0; k < m; ++k)
      ledger_->record(k, "EvalLogitBatch", Direction::kUplink, round, logits[k].size());
  return sum_contributions(logits);
}

std::vector<Matrix> FdmlTrainer::client_heads() const {
  std::vector<Matrix> heads;
  heads.reserve(sites_.size());
  for (const auto& site : sites_) heads.push_back(site.head);
  return heads;
}

CheckpointData FdmlTrainer::checkpoint() const {
  CheckpointData data;
  data.method = "fdml";
  for (const auto& site : sites_) {
    data.client_models.push_back(site.model);
    data.heads.push_back(site.head);
  }
  return data;
}

}  // namespace vfl
