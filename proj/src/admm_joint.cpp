#include "vfl/admm_joint.hpp"

#include <cmath>
#include <stdexcept>

#include "vfl/parallel.hpp"

namespace vfl {

Matrix update_z_joint(const std::vector<int>& labels, const Matrix& lambda,
                      const Matrix& logit_sum, const Matrix& z_init, double rho,
                      const ZSolveOptions& opts) {
  return update_z(labels, lambda, logit_sum, z_init, rho, opts);
}

Matrix update_lambda_joint(const Matrix& lambda, const Matrix& logit_sum, const Matrix& z,
                           double rho) {
  return update_lambda(lambda, logit_sum, z, rho);
}

Matrix residual_joint(const Matrix& z, const std::vector<Matrix>& logits, std::size_t k) {
  if (k >= logits.size()) throw std::invalid_argument("residual_joint: client index out of range");
  return sub(z, sum_contributions_except(logits, k));
}

Matrix joint_head_grad(const Matrix& h, const Matrix& head, double beta, const Matrix& lambda_b,
                       const Matrix& s_b, double rho) {
  double b = static_cast<double>(h.rows);
  Matrix grad = scaled(head, 2.0 * beta);
  add_in_place(grad, matmul_tn(h, lambda_b), 1.0 / b);
  add_in_place(grad, matmul_tn(h, sub(matmul(h, head), s_b)), rho / b);
  return grad;
}

double joint_head_objective(const Matrix& h, const Matrix& head, double beta,
                            const Matrix& lambda_b, const Matrix& s_b, double rho) {
  double b = static_cast<double>(h.rows);
  Matrix scores = matmul(h, head);
  return beta * sum_squares(head) + dot(lambda_b, scores) / b +
         0.5 * rho / b * sum_squares(sub(scores, s_b));
}

void client_update_joint(JointClientSite& site, const Matrix& lambda_b, const Matrix& s_b,
                         const Matrix& x_b, double rho) {
  for (std::size_t step = 0; step < site.tau; ++step) {
    Matrix h = mlp_forward(site.model, x_b);
    Matrix head_grad = joint_head_grad(h, site.head, site.beta, lambda_b, s_b, rho);
    sgd_momentum_step(site.head.data, head_grad.data, site.opt_head, site.local_lr,
                      site.momentum);
    std::vector<double> theta_grad =
        local_objective_grad(site.model, site.beta, site.head, lambda_b, s_b, x_b, rho);
    sgd_momentum_step(site.model.params, theta_grad, site.opt_theta, site.local_lr,
                      site.momentum);
  }
}

JointTrainer::JointTrainer(const VerticalDataset& data, const JointOptions& opts,
                           CommLedger* ledger, std::uint64_t seed)
    : data_(&data), opts_(opts), ledger_(ledger), seed_(seed) {
  std::size_t d_c = data.num_classes;
  server_.z = Matrix(data.n_train(), d_c);
  server_.lambda = Matrix(data.n_train(), d_c);
  server_.rho = opts.rho;
  double bound = 1.0 / std::sqrt(static_cast<double>(opts.d_f));
  sites_.resize(data.clients());
  beta_.assign(data.clients(), opts.beta);
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
    site.tau = opts.tau;
    site.local_lr = opts.eta;
    site.momentum = opts.momentum;
    site.beta = opts.beta;
  }
}

std::vector<std::string> JointTrainer::message_whitelist() {
  return {"LogitBatch", "JointServerMsg", "EvalLogitBatch"};
}

RoundStats JointTrainer::run_round(const BatchIndices& batch) {
  std::size_t m = sites_.size();
  std::size_t b = batch.indices.size();

  std::vector<int> labels_b(b);
  for (std::size_t j = 0; j < b; ++j) labels_b[j] = data_->train_labels[batch.indices[j]];

  std::vector<Matrix> x(m);
  std::vector<LogitBatch> sent(m);
  parallel_for(m, opts_.threads, [&](std::size_t k) {
    x[k] = gather_rows(*sites_[k].features, batch.indices);
    Matrix o = matmul(mlp_forward(sites_[k].model, x[k]), sites_[k].head);
    if (opts_.dp.enabled) {
      RngStream noise = derive_stream(seed_, StreamPurpose::kDpNoise, k, batch.round);
      o = gaussian_perturb(clip_frobenius(o, opts_.dp.clip), opts_.dp.sigma, opts_.dp.clip,
                           noise);
    }
    sent[k] = LogitBatch{batch.round, std::move(o)};
  });
  if (ledger_)
    for (std::size_t k = 0; k < m; ++k)
      ledger_->record(k, "LogitBatch", Direction::kUplink, batch.round, sent[k].scalar_count());

  std::vector<Matrix> logits(m);
  for (std::size_t k = 0; k < m; ++k) logits[k] = sent[k].logits;
  Matrix pred = sum_contributions(logits);
  RoundStats stats;
  stats.train_loss = softmax_ce(pred, labels_b).loss;

  Matrix z_b = gather_rows(server_.z, batch.indices);
  Matrix lambda_b = gather_rows(server_.lambda, batch.indices);
  z_b = update_z_joint(labels_b, lambda_b, pred, z_b, server_.rho);
  lambda_b = update_lambda_joint(lambda_b, pred, z_b, server_.rho);
  scatter_rows(server_.z, batch.indices, z_b);
  scatter_rows(server_.lambda, batch.indices, lambda_b);
  stats.constraint_residual = sum_squares(sub(pred, z_b)) / static_cast<double>(b);

  std::vector<JointServerMsg> msgs(m);
  parallel_for(m, opts_.threads, [&](std::size_t k) {
    msgs[k] = JointServerMsg{batch.round, lambda_b, residual_joint(z_b, logits, k)};
  });
  if (ledger_)
    for (std::size_t k = 0; k < m; ++k)
      ledger_->record(k, "JointServerMsg", Direction::kDownlink, batch.round,
                      msgs[k].scalar_count());

  parallel_for(m, opts_.threads, [&](std::size_t k) {
    client_update_joint(sites_[k], msgs[k].lambda, msgs[k].residual, x[k], server_.rho);
  });
  return stats;
}

Matrix JointTrainer::eval_logits(const std::vector<Matrix>& blocks, std::size_t round) {
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

std::vector<Matrix> JointTrainer::client_heads() const {
  std::vector<Matrix> heads;
  heads.reserve(sites_.size());
  for (const auto& site : sites_) heads.push_back(site.head);
  return heads;
}

CheckpointData JointTrainer::checkpoint() const {
  CheckpointData data;
  data.method = "vimadmm-j";
  for (const auto& site : sites_) {
    data.client_models.push_back(site.model);
    data.heads.push_back(site.head);
  }
  return data;
}

std::vector<Matrix> JointTrainer::all_logits() const {
  std::size_t m = sites_.size();
  std::vector<Matrix> logits(m);
  parallel_for(m, opts_.threads, [&](std::size_t k) {
    logits[k] = matmul(mlp_forward(sites_[k].model, data_->train_blocks[k]), sites_[k].head);
  });
  return logits;
}

double JointTrainer::full_admm_loss() {
  double n = static_cast<double>(data_->n_train());
  double loss = softmax_ce(server_.z, data_->train_labels).loss;
  for (std::size_t k = 0; k < sites_.size(); ++k) {
    loss += beta_[k] * sum_squares(sites_[k].model.params);
    loss += beta_[k] * sum_squares(sites_[k].head);
  }
  Matrix diff = sub(sum_contributions(all_logits()), server_.z);
  loss += dot(server_.lambda, diff) / n;
  loss += 0.5 * server_.rho / n * sum_squares(diff);
  return loss;
}

double JointTrainer::full_constraint_residual() {
  Matrix diff = sub(sum_contributions(all_logits()), server_.z);
  return sum_squares(diff) / static_cast<double>(data_->n_train());
}

}  // namespace vfl
