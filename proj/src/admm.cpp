#include "vfl/admm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "vfl/parallel.hpp"

namespace vfl {

AdmmState init_admm_state(std::size_t n, std::size_t d_f, std::size_t d_c, std::size_t clients,
                          double rho, double beta, double head_lr, std::uint64_t seed) {
  if (rho <= 0.0) throw std::invalid_argument("rho must be positive");
  AdmmState state;
  state.z = Matrix(n, d_c);
  state.lambda = Matrix(n, d_c);
  state.rho = rho;
  state.beta.assign(clients, beta);
  state.head_lr = head_lr;
  state.heads.reserve(clients);
  double bound = 1.0 / std::sqrt(static_cast<double>(d_f));
  for (std::size_t k = 0; k < clients; ++k) {
    RngStream rng = derive_stream(seed, StreamPurpose::kHeadInit, k, 0);
    Matrix head(d_f, d_c);
    for (double& v : head.data) v = rng.uniform(-bound, bound);
    state.heads.push_back(std::move(head));
  }
  return state;
}

std::vector<ClientSite> init_admm_clients(const std::vector<Matrix>& train_blocks,
                                          std::size_t hidden, std::size_t d_f, std::size_t tau,
                                          double local_lr, double momentum, double beta,
                                          std::uint64_t seed) {
  std::vector<ClientSite> sites(train_blocks.size());
  for (std::size_t k = 0; k < train_blocks.size(); ++k) {
    std::vector<std::size_t> dims;
    if (hidden == 0)
      dims = {train_blocks[k].cols, d_f};
    else
      dims = {train_blocks[k].cols, hidden, d_f};
    RngStream rng = derive_stream(seed, StreamPurpose::kWeightInit, k, 0);
    sites[k].id = k;
    sites[k].model = make_mlp(dims, rng);
    sites[k].features = &train_blocks[k];
    sites[k].tau = tau;
    sites[k].local_lr = local_lr;
    sites[k].momentum = momentum;
    sites[k].beta = beta;
  }
  return sites;
}

std::vector<Matrix> client_contributions(const std::vector<Matrix>& embeddings,
                                         const std::vector<Matrix>& heads) {
  if (embeddings.size() != heads.size())
    throw std::invalid_argument("client_contributions: " + std::to_string(embeddings.size()) +
                                " embedding blocks for " + std::to_string(heads.size()) +
                                " heads");
  std::vector<Matrix> out;
  out.reserve(embeddings.size());
  for (std::size_t k = 0; k < embeddings.size(); ++k)
    out.push_back(matmul(embeddings[k], heads[k]));
  return out;
}

Matrix sum_contributions(const std::vector<Matrix>& contributions) {
  if (contributions.empty()) throw std::invalid_argument("no contributions to sum");
  Matrix acc = contributions[0];
  for (std::size_t k = 1; k < contributions.size(); ++k) add_in_place(acc, contributions[k]);
  return acc;
}

Matrix sum_contributions_except(const std::vector<Matrix>& contributions, std::size_t skip) {
  if (contributions.empty()) throw std::invalid_argument("no contributions to sum");
  Matrix acc(contributions[0].rows, contributions[0].cols);
  for (std::size_t k = 0; k < contributions.size(); ++k)
    if (k != skip) add_in_place(acc, contributions[k]);
  return acc;
}

Matrix predict(const std::vector<Matrix>& embeddings, const std::vector<Matrix>& heads) {
  return sum_contributions(client_contributions(embeddings, heads));
}

double admm_loss(const AdmmState& state, const std::vector<ClientSite>& sites,
                 const std::vector<Matrix>& embeddings, const std::vector<int>& labels) {
  double n = static_cast<double>(labels.size());
  double loss = softmax_ce(state.z, labels).loss;
  for (std::size_t k = 0; k < sites.size(); ++k)
    loss += state.beta[k] * sum_squares(sites[k].model.params);
  for (std::size_t k = 0; k < state.heads.size(); ++k)
    loss += state.beta[k] * sum_squares(state.heads[k]);
  Matrix diff = sub(predict(embeddings, state.heads), state.z);
  loss += dot(state.lambda, diff) / n;
  loss += 0.5 * state.rho / n * sum_squares(diff);
  return loss;
}

Matrix update_lambda(const Matrix& lambda, const Matrix& pred, const Matrix& z, double rho) {
  Matrix out = lambda;
  add_in_place(out, pred, rho);
  add_in_place(out, z, -rho);
  return out;
}

std::vector<Matrix> update_heads(const AdmmState& state, const std::vector<Matrix>& embeddings,
                                 const Matrix& z, const Matrix& lambda) {
  double b = static_cast<double>(z.rows);
  Matrix gap = sub(predict(embeddings, state.heads), z);  // Ŷ − Z, pre-step heads
  std::vector<Matrix> updated;
  updated.reserve(state.heads.size());
  for (std::size_t k = 0; k < state.heads.size(); ++k) {
    Matrix grad = scaled(state.heads[k], 2.0 * state.beta[k]);
    add_in_place(grad, matmul_tn(embeddings[k], lambda), 1.0 / b);
    add_in_place(grad, matmul_tn(embeddings[k], gap), state.rho / b);
    Matrix next = state.heads[k];
    add_in_place(next, grad, -state.head_lr);
    updated.push_back(std::move(next));
  }
  return updated;
}

Matrix residuals(const Matrix& z, const std::vector<Matrix>& embeddings,
                 const std::vector<Matrix>& heads, std::size_t k) {
  if (k >= heads.size()) throw std::invalid_argument("residuals: client index out of range");
  return sub(z, sum_contributions_except(client_contributions(embeddings, heads), k));
}

namespace {

// dJ/dH = (1/b)·Λ·Wᵀ + (ρ/b)·(H·W − S)·Wᵀ
Matrix local_upstream(const Matrix& h, const Matrix& head, const Matrix& lambda_b,
                      const Matrix& s_b, double rho) {
  double b = static_cast<double>(h.rows);
  Matrix gap = sub(matmul(h, head), s_b);
  Matrix up = matmul_nt(lambda_b, head);
  scale_in_place(up, 1.0 / b);
  add_in_place(up, matmul_nt(gap, head), rho / b);
  return up;
}

}  // namespace

double local_objective_value(const MlpModel& model, double beta, const Matrix& head,
                             const Matrix& lambda_b, const Matrix& s_b, const Matrix& x_b,
                             double rho) {
  double b = static_cast<double>(x_b.rows);
  Matrix scores = matmul(mlp_forward(model, x_b), head);
  double value = beta * sum_squares(model.params);
  value += dot(lambda_b, scores) / b;
  value += 0.5 * rho / b * sum_squares(sub(scores, s_b));
  return value;
}

std::vector<double> local_objective_grad(const MlpModel& model, double beta, const Matrix& head,
                                         const Matrix& lambda_b, const Matrix& s_b,
                                         const Matrix& x_b, double rho) {
  Matrix h = mlp_forward(model, x_b);
  Matrix up = local_upstream(h, head, lambda_b, s_b, rho);
  std::vector<double> grads = mlp_backward(model, x_b, up).params;
  axpy(grads, model.params, 2.0 * beta);
  return grads;
}

void client_update_theta(ClientSite& site, const Matrix& head, const Matrix& lambda_b,
                         const Matrix& s_b, const Matrix& x_b, double rho) {
  for (std::size_t step = 0; step < site.tau; ++step) {
    std::vector<double> grads =
        local_objective_grad(site.model, site.beta, head, lambda_b, s_b, x_b, rho);
    sgd_momentum_step(site.model.params, grads, site.opt, site.local_lr, site.momentum);
  }
}

Matrix infer_logits(const std::vector<ClientSite>& sites, const std::vector<Matrix>& heads,
                    const std::vector<Matrix>& blocks) {
  std::vector<Matrix> embeddings(sites.size());
  for (std::size_t k = 0; k < sites.size(); ++k)
    embeddings[k] = mlp_forward(sites[k].model, blocks[k]);
  return predict(embeddings, heads);
}

std::vector<int> infer(const std::vector<ClientSite>& sites, const std::vector<Matrix>& heads,
                       const std::vector<Matrix>& blocks) {
  return argmax_rows(infer_logits(sites, heads, blocks));
}

AdmmTrainer::AdmmTrainer(const VerticalDataset& data, const AdmmOptions& opts,
                         CommLedger* ledger, std::uint64_t seed)
    : data_(&data), opts_(opts), ledger_(ledger), seed_(seed) {
  if (opts.exact_inner && opts.dp.enabled)
    throw std::invalid_argument("exact_inner is a clean diagnostic regime; DP is not supported there");
  if (opts.exact_inner && opts.hidden != 0)
    throw std::invalid_argument("exact_inner requires linear extractors (hidden = 0)");
  state_ = init_admm_state(data.n_train(), opts.d_f, data.num_classes, data.clients(), opts.rho,
                           opts.beta, opts.head_lr, seed);
  sites_ = init_admm_clients(data.train_blocks, opts.hidden, opts.d_f, opts.tau, opts.eta,
                             opts.momentum, opts.beta, seed);
}

std::vector<std::string> AdmmTrainer::message_whitelist() {
  return {"EmbeddingBatch", "ServerToClientAdmmMsg", "EvalEmbeddingBatch"};
}

RoundStats AdmmTrainer::run_round(const BatchIndices& batch) {
  if (opts_.exact_inner) return run_round_exact(batch);
  std::size_t m = sites_.size();
  std::size_t b = batch.indices.size();

  std::vector<int> labels_b(b);
  for (std::size_t j = 0; j < b; ++j) labels_b[j] = data_->train_labels[batch.indices[j]];

  // Client phase 1: embeddings for the shared batch (clean locally; clip +
  // perturb applies only to the transmitted copy).
  std::vector<Matrix> x(m);
  std::vector<EmbeddingBatch> sent(m);
  parallel_for(m, opts_.threads, [&](std::size_t k) {
    x[k] = gather_rows(*sites_[k].features, batch.indices);
    Matrix h = mlp_forward(sites_[k].model, x[k]);
    if (opts_.dp.enabled) {
      RngStream noise = derive_stream(seed_, StreamPurpose::kDpNoise, k, batch.round);
      h = gaussian_perturb(clip_frobenius(h, opts_.dp.clip), opts_.dp.sigma, opts_.dp.clip,
                           noise);
    }
    sent[k] = EmbeddingBatch{batch.round, std::move(h)};
  });
  if (ledger_)
    for (std::size_t k = 0; k < m; ++k)
      ledger_->record(k, "EmbeddingBatch", Direction::kUplink, batch.round,
                      sent[k].scalar_count());

  // Server phase: z (Eq. 5), λ (Eq. 6), heads (Eq. 7), residuals (Eq. 8).
  std::vector<Matrix> received(m);
  for (std::size_t k = 0; k < m; ++k) received[k] = sent[k].embeddings;
  Matrix pred = predict(received, state_.heads);
  RoundStats stats;
  stats.train_loss = softmax_ce(pred, labels_b).loss;

  Matrix z_b = gather_rows(state_.z, batch.indices);
  Matrix lambda_b = gather_rows(state_.lambda, batch.indices);
  z_b = update_z(labels_b, lambda_b, pred, z_b, state_.rho);
  lambda_b = update_lambda(lambda_b, pred, z_b, state_.rho);
  scatter_rows(state_.z, batch.indices, z_b);
  scatter_rows(state_.lambda, batch.indices, lambda_b);

  state_.heads = update_heads(state_, received, z_b, lambda_b);
  stats.constraint_residual = sum_squares(sub(pred, z_b)) / static_cast<double>(b);

  std::vector<ServerToClientAdmmMsg> msgs(m);
  parallel_for(m, opts_.threads, [&](std::size_t k) {
    msgs[k] = ServerToClientAdmmMsg{batch.round, lambda_b,
                                    residuals(z_b, received, state_.heads, k),
                                    state_.heads[k]};
  });
  if (ledger_)
    for (std::size_t k = 0; k < m; ++k)
      ledger_->record(k, "ServerToClientAdmmMsg", Direction::kDownlink, batch.round,
                      msgs[k].scalar_count());

  // Client phase 2: τ local steps against the broadcast coordination state.
  parallel_for(m, opts_.threads, [&](std::size_t k) {
    client_update_theta(sites_[k], msgs[k].head, msgs[k].lambda, msgs[k].residual, x[k],
                        state_.rho);
  });
  return stats;
}

RoundStats AdmmTrainer::run_round_exact(const BatchIndices& batch) {
  std::size_t m = sites_.size();
  std::size_t b = batch.indices.size();
  if (b != data_->n_train())
    throw std::invalid_argument("exact_inner requires full-batch rounds (b = N)");

  std::vector<int> labels_b(b);
  for (std::size_t j = 0; j < b; ++j) labels_b[j] = data_->train_labels[batch.indices[j]];

  std::vector<Matrix> x(m), h(m);
  parallel_for(m, opts_.threads, [&](std::size_t k) {
    x[k] = gather_rows(*sites_[k].features, batch.indices);
    h[k] = mlp_forward(sites_[k].model, x[k]);
  });
  if (ledger_)
    for (std::size_t k = 0; k < m; ++k)
      ledger_->record(k, "EmbeddingBatch", Direction::kUplink, batch.round, h[k].size());

  std::vector<Matrix> p = client_contributions(h, state_.heads);
  Matrix pred = sum_contributions(p);
  RoundStats stats;
  stats.train_loss = softmax_ce(pred, labels_b).loss;

  Matrix z_b = gather_rows(state_.z, batch.indices);
  Matrix lambda_b = gather_rows(state_.lambda, batch.indices);
  z_b = update_z(labels_b, lambda_b, pred, z_b, state_.rho);
  lambda_b = update_lambda(lambda_b, pred, z_b, state_.rho);
  scatter_rows(state_.z, batch.indices, z_b);
  scatter_rows(state_.lambda, batch.indices, lambda_b);
  stats.constraint_residual = sum_squares(sub(pred, z_b)) / static_cast<double>(b);

  // Heads in closed form, block after block: each solve is the exact argmin
  // of the augmented Lagrangian in W_k with everything else fixed, so every
  // block strictly decreases the objective.
  for (std::size_t k = 0; k < m; ++k) {
    Matrix gap = sub(sum_contributions_except(p, k), z_b);  // P₋ₖ − Z
    Matrix a = scaled(matmul_tn(h[k], h[k]), state_.rho / static_cast<double>(b));
    for (std::size_t i = 0; i < a.rows; ++i) a(i, i) += 2.0 * state_.beta[k];
    Matrix rhs = scaled(matmul_tn(h[k], lambda_b), -1.0 / static_cast<double>(b));
    add_in_place(rhs, matmul_tn(h[k], gap), -state_.rho / static_cast<double>(b));
    state_.heads[k] = solve_spd(a, rhs);
    p[k] = matmul(h[k], state_.heads[k]);
  }
  if (ledger_)
    for (std::size_t k = 0; k < m; ++k)
      ledger_->record(k, "ServerToClientAdmmMsg", Direction::kDownlink, batch.round,
                      2 * b * z_b.cols + state_.heads[k].size());

  // Client objectives minimized to tolerance, residuals refreshed after each
  // client so that every sub-step is an exact block-coordinate descent step.
  for (std::size_t k = 0; k < m; ++k) {
    Matrix s_k = sub(z_b, sum_contributions_except(p, k));
    ClientSite& site = sites_[k];
    std::vector<double> params = site.model.params;
    MlpModel probe = site.model;
    minimize_to_tolerance(
        [&](const std::vector<double>& theta, std::vector<double>& grad) {
          probe.params = theta;
          grad = local_objective_grad(probe, site.beta, state_.heads[k], lambda_b, s_k, x[k],
                                      state_.rho);
          return local_objective_value(probe, site.beta, state_.heads[k], lambda_b, s_k, x[k],
                                       state_.rho);
        },
        params, opts_.exact_tol);
    site.model.params = params;
    h[k] = mlp_forward(site.model, x[k]);
    p[k] = matmul(h[k], state_.heads[k]);
  }
  return stats;
}

Matrix AdmmTrainer::eval_logits(const std::vector<Matrix>& blocks, std::size_t round) {
  std::size_t m = sites_.size();
  std::vector<Matrix> embeddings(m);
  parallel_for(m, opts_.threads, [&](std::size_t k) {
    embeddings[k] = mlp_forward(sites_[k].model, blocks[k]);
  });
  if (ledger_)
    for (std::size_t k = 0; k < m; ++k)
      ledger_->record(k, "EvalEmbeddingBatch", Direction::kUplink, round, embeddings[k].size());
  return predict(embeddings, state_.heads);
}

CheckpointData AdmmTrainer::checkpoint() const {
  CheckpointData data;
  data.method = "vimadmm";
  for (const auto& site : sites_) data.client_models.push_back(site.model);
  data.heads = state_.heads;
  return data;
}

double AdmmTrainer::full_admm_loss() {
  std::size_t m = sites_.size();
  std::vector<Matrix> embeddings(m);
  parallel_for(m, opts_.threads, [&](std::size_t k) {
    embeddings[k] = mlp_forward(sites_[k].model, data_->train_blocks[k]);
  });
  return admm_loss(state_, sites_, embeddings, data_->train_labels);
}

double AdmmTrainer::full_constraint_residual() {
  std::size_t m = sites_.size();
  std::vector<Matrix> embeddings(m);
  parallel_for(m, opts_.threads, [&](std::size_t k) {
    embeddings[k] = mlp_forward(sites_[k].model, data_->train_blocks[k]);
  });
  Matrix diff = sub(predict(embeddings, state_.heads), state_.z);
  return sum_squares(diff) / static_cast<double>(data_->n_train());
}

}  // namespace vfl
