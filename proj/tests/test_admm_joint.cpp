#include "vfl/admm_joint.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "vfl/data.hpp"
#include "vfl/ledger.hpp"
#include "vfl/matrix.hpp"
#include "vfl/nn.hpp"
#include "vfl/rng.hpp"
#include "vfl/zsolve.hpp"

namespace vfl {
namespace {

Matrix random_matrix(RngStream& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.normal(0.0, scale);
  return m;
}

std::vector<int> random_labels(RngStream& rng, std::size_t n, std::size_t classes) {
  std::vector<int> labels(n);
  for (auto& y : labels) y = static_cast<int>(rng.next_below(classes));
  return labels;
}

VerticalDataset make_toy_dataset(std::uint64_t seed, std::size_t n,
                                 const std::vector<std::size_t>& dims, std::size_t classes) {
  RngStream rng = derive_stream(seed, StreamPurpose::kSynthetic, 8, 8);
  VerticalDataset data;
  data.num_classes = classes;
  for (std::size_t d : dims) {
    data.train_blocks.push_back(random_matrix(rng, n, d));
    data.val_blocks.push_back(random_matrix(rng, 4, d));
    data.test_blocks.push_back(random_matrix(rng, 4, d));
  }
  data.train_labels = random_labels(rng, n, classes);
  data.val_labels = random_labels(rng, 4, classes);
  data.test_labels = random_labels(rng, 4, classes);
  return data;
}

BatchIndices full_batch(std::size_t n, std::size_t round = 0) {
  BatchIndices b;
  b.round = round;
  b.indices.resize(n);
  for (std::size_t i = 0; i < n; ++i) b.indices[i] = i;
  return b;
}

TEST(UpdateZJoint, AgreesWithSplitVariantOnSamePrediction) {
  RngStream rng = derive_stream(50, StreamPurpose::kGeneric, 0, 0);
  std::size_t n = 10, d_c = 4;
  std::vector<int> labels = random_labels(rng, n, d_c);
  Matrix lambda = random_matrix(rng, n, d_c);
  Matrix pred = random_matrix(rng, n, d_c);
  Matrix z_joint = update_z_joint(labels, lambda, pred, Matrix(n, d_c), 1.3);
  Matrix z_split = update_z(labels, lambda, pred, Matrix(n, d_c), 1.3);
  EXPECT_EQ(z_joint.data, z_split.data);
}

TEST(UpdateZJoint, CancellingLogitsSolveZeroPredictionProblem) {
  RngStream rng = derive_stream(51, StreamPurpose::kGeneric, 0, 0);
  std::size_t n = 6, d_c = 3;
  std::vector<int> labels = random_labels(rng, n, d_c);
  Matrix o1 = random_matrix(rng, n, d_c);
  Matrix o2 = scaled(o1, -1.0);
  Matrix logit_sum = add(o1, o2);
  Matrix lambda(n, d_c);
  Matrix z = update_z_joint(labels, lambda, logit_sum, Matrix(n, d_c), 1.0);
  Matrix z_ref = update_z(labels, lambda, Matrix(n, d_c), Matrix(n, d_c), 1.0);
  EXPECT_LE(max_abs(sub(z, z_ref)), 1e-12);
}

TEST(ResidualJoint, SingleClientIsZ) {
  RngStream rng = derive_stream(52, StreamPurpose::kGeneric, 0, 0);
  Matrix z = random_matrix(rng, 5, 3);
  Matrix s = residual_joint(z, {random_matrix(rng, 5, 3)}, 0);
  EXPECT_EQ(s.data, z.data);
}

TEST(ResidualJoint, MatchesNaiveLoopAndSumCheck) {
  RngStream rng = derive_stream(53, StreamPurpose::kGeneric, 0, 0);
  std::size_t b = 6, d_c = 3, m = 4;
  std::vector<Matrix> logits;
  for (std::size_t k = 0; k < m; ++k) logits.push_back(random_matrix(rng, b, d_c));
  Matrix z = random_matrix(rng, b, d_c);
  for (std::size_t k = 0; k < m; ++k) {
    Matrix s = residual_joint(z, logits, k);
    for (std::size_t j = 0; j < b; ++j)
      for (std::size_t c = 0; c < d_c; ++c) {
        double want = z(j, c);
        for (std::size_t i = 0; i < m; ++i)
          if (i != k) want -= logits[i](j, c);
        EXPECT_NEAR(s(j, c), want, 1e-12);
      }
    // o^k + s^k recovers z up to one rounding unit per addend.
    EXPECT_LE(max_abs(sub(add(s, sub(z, s)), z)), 1e-12);
  }
}

TEST(JointHeadGrad, MatchesFiniteDifferences) {
  RngStream rng = derive_stream(54, StreamPurpose::kGeneric, 0, 0);
  std::size_t b = 7, d_f = 4, d_c = 3;
  for (int rep = 0; rep < 20; ++rep) {
    Matrix h = random_matrix(rng, b, d_f);
    Matrix head = random_matrix(rng, d_f, d_c);
    Matrix lambda = random_matrix(rng, b, d_c, 0.5);
    Matrix s = random_matrix(rng, b, d_c);
    double beta = 0.005, rho = 1.4;
    Matrix g = joint_head_grad(h, head, beta, lambda, s, rho);
    auto objective = [&](const std::vector<double>& w) {
      Matrix probe = head;
      probe.data = w;
      return joint_head_objective(h, probe, beta, lambda, s, rho);
    };
    EXPECT_LE(finite_diff_check(objective, head.data, g.data), 1e-5);
  }
}

TEST(JointHeadGrad, ZeroAtConsensusWithoutDualOrRegularizer) {
  RngStream rng = derive_stream(55, StreamPurpose::kGeneric, 0, 0);
  std::size_t b = 5, d_f = 3, d_c = 2;
  Matrix h = random_matrix(rng, b, d_f);
  Matrix head = random_matrix(rng, d_f, d_c);
  Matrix s = matmul(h, head);  // s == hW: the penalty vanishes
  Matrix g = joint_head_grad(h, head, 0.0, Matrix(b, d_c), s, 2.0);
  EXPECT_LE(max_abs(g), 1e-10);
}

JointClientSite make_joint_site(RngStream& rng, std::size_t d_in, std::size_t hidden,
                                std::size_t d_f, std::size_t d_c, std::size_t tau, double lr) {
  JointClientSite site;
  site.model = hidden == 0 ? make_mlp({d_in, d_f}, rng) : make_mlp({d_in, hidden, d_f}, rng);
  site.head = random_matrix(rng, d_f, d_c, 1.0 / std::sqrt(static_cast<double>(d_f)));
  site.tau = tau;
  site.local_lr = lr;
  site.momentum = 0.9;
  site.beta = 0.005;
  return site;
}

TEST(ClientUpdateJoint, TauZeroLeavesEverythingUntouched) {
  RngStream rng = derive_stream(56, StreamPurpose::kGeneric, 0, 0);
  JointClientSite site = make_joint_site(rng, 4, 3, 3, 2, 0, 0.1);
  std::vector<double> theta = site.model.params;
  std::vector<double> head = site.head.data;
  Matrix x = random_matrix(rng, 6, 4);
  client_update_joint(site, random_matrix(rng, 6, 2), random_matrix(rng, 6, 2), x, 1.0);
  EXPECT_EQ(site.model.params, theta);
  EXPECT_EQ(site.head.data, head);
}

TEST(ClientUpdateJoint, MatchesManualAlternatingStep) {
  RngStream rng = derive_stream(57, StreamPurpose::kGeneric, 0, 0);
  std::size_t d_in = 4, d_f = 3, d_c = 2, b = 6;
  JointClientSite site = make_joint_site(rng, d_in, 3, d_f, d_c, 2, 0.15);
  JointClientSite manual = site;
  Matrix x = random_matrix(rng, b, d_in);
  Matrix lambda = random_matrix(rng, b, d_c);
  Matrix s = random_matrix(rng, b, d_c);
  double rho = 1.1;
  client_update_joint(site, lambda, s, x, rho);

  for (std::size_t step = 0; step < 2; ++step) {
    Matrix h = mlp_forward(manual.model, x);
    Matrix gw = joint_head_grad(h, manual.head, manual.beta, lambda, s, rho);
    sgd_momentum_step(manual.head.data, gw.data, manual.opt_head, manual.local_lr,
                      manual.momentum);
    std::vector<double> gt = local_objective_grad(manual.model, manual.beta, manual.head,
                                                  lambda, s, x, rho);
    sgd_momentum_step(manual.model.params, gt, manual.opt_theta, manual.local_lr,
                      manual.momentum);
  }
  EXPECT_EQ(site.model.params, manual.model.params);
  EXPECT_EQ(site.head.data, manual.head.data);
}

TEST(ClientUpdateJoint, RestsAtJointMinimum) {
  RngStream rng = derive_stream(58, StreamPurpose::kGeneric, 0, 0);
  std::size_t d_in = 4, d_f = 3, d_c = 2, b = 6;
  JointClientSite site = make_joint_site(rng, d_in, 0, d_f, d_c, 3, 0.1);
  site.beta = 0.0;
  Matrix x = random_matrix(rng, b, d_in);
  Matrix lambda(b, d_c);
  Matrix h = mlp_forward(site.model, x);
  Matrix s = matmul(h, site.head);  // both gradients vanish here
  EXPECT_LE(max_abs(joint_head_grad(h, site.head, 0.0, lambda, s, 1.0)), 1e-10);
  EXPECT_LE(max_abs(local_objective_grad(site.model, 0.0, site.head, lambda, s, x, 1.0)),
            1e-10);
  std::vector<double> theta = site.model.params;
  std::vector<double> head = site.head.data;
  client_update_joint(site, lambda, s, x, 1.0);
  EXPECT_EQ(site.model.params, theta);
  EXPECT_EQ(site.head.data, head);
}

JointOptions small_joint_options(std::size_t d_f, std::size_t tau) {
  JointOptions opts;
  opts.hidden = 0;
  opts.d_f = d_f;
  opts.tau = tau;
  opts.rho = 1.0;
  opts.eta = 0.1;
  opts.momentum = 0.9;
  opts.beta = 0.005;
  return opts;
}

TEST(JointRound, DeterministicAndThreadInvariant) {
  VerticalDataset data = make_toy_dataset(60, 18, {3, 4}, 3);
  JointOptions opts = small_joint_options(4, 2);
  JointTrainer a(data, opts, nullptr, 7);
  JointTrainer b(data, opts, nullptr, 7);
  JointOptions threaded = opts;
  threaded.threads = 4;
  JointTrainer c(data, threaded, nullptr, 7);
  for (int t = 0; t < 3; ++t) {
    BatchIndices batch = full_batch(18, static_cast<std::size_t>(t));
    a.run_round(batch);
    b.run_round(batch);
    c.run_round(batch);
  }
  EXPECT_EQ(a.server().z.data, b.server().z.data);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(a.sites()[k].model.params, b.sites()[k].model.params);
    EXPECT_EQ(a.sites()[k].head.data, b.sites()[k].head.data);
    EXPECT_EQ(a.sites()[k].model.params, c.sites()[k].model.params);
    EXPECT_EQ(a.sites()[k].head.data, c.sites()[k].head.data);
  }
}

TEST(JointRound, MatchesManualCompositionOfSubOps) {
  VerticalDataset data = make_toy_dataset(61, 12, {3, 2}, 3);
  JointOptions opts = small_joint_options(3, 1);
  JointTrainer run(data, opts, nullptr, 11);
  JointTrainer manual(data, opts, nullptr, 11);
  BatchIndices batch = full_batch(12);
  run.run_round(batch);

  std::size_t m = 2;
  std::vector<int> labels(12);
  for (std::size_t j = 0; j < 12; ++j) labels[j] = data.train_labels[batch.indices[j]];
  std::vector<Matrix> x(m), logits(m);
  for (std::size_t k = 0; k < m; ++k) {
    x[k] = gather_rows(data.train_blocks[k], batch.indices);
    logits[k] = matmul(mlp_forward(manual.sites()[k].model, x[k]), manual.sites()[k].head);
  }
  Matrix pred = add(logits[0], logits[1]);
  JointServerState& server = const_cast<JointServerState&>(manual.server());
  Matrix z_b = gather_rows(server.z, batch.indices);
  Matrix lam_b = gather_rows(server.lambda, batch.indices);
  z_b = update_z_joint(labels, lam_b, pred, z_b, server.rho);
  lam_b = update_lambda_joint(lam_b, pred, z_b, server.rho);
  scatter_rows(server.z, batch.indices, z_b);
  scatter_rows(server.lambda, batch.indices, lam_b);
  for (std::size_t k = 0; k < m; ++k) {
    Matrix s = residual_joint(z_b, logits, k);
    client_update_joint(manual.sites()[k], lam_b, s, x[k], server.rho);
  }

  EXPECT_EQ(run.server().z.data, manual.server().z.data);
  EXPECT_EQ(run.server().lambda.data, manual.server().lambda.data);
  for (std::size_t k = 0; k < m; ++k) {
    EXPECT_EQ(run.sites()[k].model.params, manual.sites()[k].model.params);
    EXPECT_EQ(run.sites()[k].head.data, manual.sites()[k].head.data);
  }
}

TEST(JointRound, LedgerRecordsExactWireSizes) {
  VerticalDataset data = make_toy_dataset(62, 20, {3, 4, 2}, 4);
  CommLedger ledger(JointTrainer::message_whitelist());
  JointOptions opts = small_joint_options(4, 1);
  JointTrainer trainer(data, opts, &ledger, 3);
  trainer.run_round(full_batch(20));
  trainer.run_round(full_batch(20, 1));
  std::size_t b = 20, d_c = 4;
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(ledger.client_total_bytes(k, Direction::kUplink), 2 * 4 * b * d_c);
    EXPECT_EQ(ledger.client_total_bytes(k, Direction::kDownlink), 2 * 4 * 2 * b * d_c);
  }
}

TEST(JointRound, LemmaIdentityHoldsAfterEachRound) {
  VerticalDataset data = make_toy_dataset(63, 24, {4, 3}, 4);
  JointOptions opts = small_joint_options(4, 2);
  JointTrainer trainer(data, opts, nullptr, 5);
  BatchSchedule schedule(24, 8, 5);
  for (std::size_t t = 0; t < 6; ++t) {
    BatchIndices batch = schedule.batch_for_round(t);
    trainer.run_round(batch);
    Matrix z_b = gather_rows(trainer.server().z, batch.indices);
    Matrix lam_b = gather_rows(trainer.server().lambda, batch.indices);
    Matrix p = softmax_rows(z_b);
    for (std::size_t j = 0; j < batch.indices.size(); ++j)
      p(j, static_cast<std::size_t>(data.train_labels[batch.indices[j]])) -= 1.0;
    EXPECT_LE(max_abs(sub(lam_b, p)), 1e-7) << "round " << t;
  }
}

TEST(JointRound, PassthroughDpConfigIsBitIdenticalToClean) {
  VerticalDataset data = make_toy_dataset(64, 14, {3, 3}, 3);
  JointOptions clean = small_joint_options(4, 1);
  JointOptions wide = clean;
  wide.dp.enabled = true;
  wide.dp.clip = 1e9;  // never binds at this scale
  wide.dp.sigma = 0.0;
  JointTrainer a(data, clean, nullptr, 9);
  JointTrainer b(data, wide, nullptr, 9);
  for (int t = 0; t < 3; ++t) {
    BatchIndices batch = full_batch(14, static_cast<std::size_t>(t));
    a.run_round(batch);
    b.run_round(batch);
  }
  EXPECT_EQ(a.server().z.data, b.server().z.data);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(a.sites()[k].model.params, b.sites()[k].model.params);
    EXPECT_EQ(a.sites()[k].head.data, b.sites()[k].head.data);
  }
}

TEST(JointRound, DpTouchesOnlyTransmittedState) {
  VerticalDataset data = make_toy_dataset(65, 14, {3, 3}, 3);
  JointOptions clean = small_joint_options(4, 0);
  JointOptions noisy = clean;
  noisy.dp.enabled = true;
  noisy.dp.clip = 0.5;
  noisy.dp.sigma = 2.0;
  JointTrainer a(data, clean, nullptr, 9);
  JointTrainer b(data, noisy, nullptr, 9);
  for (int t = 0; t < 2; ++t) {
    BatchIndices batch = full_batch(14, static_cast<std::size_t>(t));
    a.run_round(batch);
    b.run_round(batch);
  }
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(a.sites()[k].model.params, b.sites()[k].model.params);
    EXPECT_EQ(a.sites()[k].head.data, b.sites()[k].head.data);
  }
  EXPECT_NE(a.server().z.data, b.server().z.data);
}

TEST(JointEval, CleanLogitSumExcludedFromTrainingTotals) {
  VerticalDataset data = make_toy_dataset(66, 10, {3, 2}, 3);
  CommLedger ledger(JointTrainer::message_whitelist());
  JointOptions opts = small_joint_options(3, 1);
  JointTrainer trainer(data, opts, &ledger, 2);
  trainer.run_round(full_batch(10));
  std::size_t up_before = ledger.total_bytes(Direction::kUplink);

  Matrix eval = trainer.eval_logits(data.train_blocks, 0);
  EXPECT_EQ(ledger.total_bytes(Direction::kUplink), up_before);
  EXPECT_GT(ledger.client_series(0).at("EvalLogitBatch").total_bytes, 0u);

  // Clean sum of per-client logits, composed by hand.
  Matrix want = add(
      matmul(mlp_forward(trainer.sites()[0].model, data.train_blocks[0]),
             trainer.sites()[0].head),
      matmul(mlp_forward(trainer.sites()[1].model, data.train_blocks[1]),
             trainer.sites()[1].head));
  EXPECT_EQ(eval.data, want.data);
}

TEST(JointLoss, FullAdmmLossMatchesNaiveEvaluation) {
  VerticalDataset data = make_toy_dataset(67, 9, {2, 3}, 3);
  JointOptions opts = small_joint_options(3, 1);
  opts.beta = 0.02;
  JointTrainer trainer(data, opts, nullptr, 4);
  trainer.run_round(full_batch(9));

  double n = 9.0;
  std::vector<Matrix> logits;
  for (std::size_t k = 0; k < 2; ++k)
    logits.push_back(matmul(mlp_forward(trainer.sites()[k].model, data.train_blocks[k]),
                            trainer.sites()[k].head));
  Matrix pred = add(logits[0], logits[1]);
  const Matrix& z = trainer.server().z;
  const Matrix& lam = trainer.server().lambda;
  double want = softmax_ce(z, data.train_labels).loss;
  for (std::size_t k = 0; k < 2; ++k)
    want += 0.02 * (sum_squares(trainer.sites()[k].model.params) +
                    sum_squares(trainer.sites()[k].head));
  Matrix gap = sub(pred, z);
  want += dot(lam, gap) / n;
  want += 0.5 * trainer.server().rho / n * sum_squares(gap);
  EXPECT_NEAR(trainer.full_admm_loss(), want, 1e-10);
}

}  // namespace
}  // namespace vfl
