#include "vfl/config.hpp"

#include <gtest/gtest.h>

#include <stdexcept>
#include <string>

namespace {

using vfl::ExperimentConfig;
using vfl::expand_grid;
using vfl::effective_config_string;
using vfl::parse_config_text;
using vfl::partition_scheme;

std::string minimal_synthetic(const std::string& method) {
  return "method = " + method +
         "\n"
         "dataset.kind = synthetic\n"
         "dataset.synthetic.n = 100\n"
         "dataset.synthetic.informative_dims = 3,3\n"
         "train.max_rounds = 10\n";
}

// Expects parse to throw and the message to mention `needle`.
void expect_error(const std::string& text, const std::string& needle) {
  try {
    parse_config_text(text);
    FAIL() << "expected invalid_argument mentioning '" << needle << "'";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos)
        << "actual message: " << e.what();
  }
}

TEST(ParseConfig, MinimalSyntheticGetsDocumentedDefaults) {
  ExperimentConfig c = parse_config_text(minimal_synthetic("vimadmm"));
  EXPECT_EQ(c.method, "vimadmm");
  EXPECT_EQ(c.dataset_kind, "synthetic");
  EXPECT_EQ(c.synthetic.n, 100u);
  EXPECT_EQ(c.synthetic.classes, 2u);
  EXPECT_EQ(c.hidden, 128u);
  EXPECT_EQ(c.d_f, 60u);
  EXPECT_EQ(c.batch, 1024u);
  EXPECT_EQ(c.max_rounds, 10u);
  EXPECT_EQ(c.epochs, 0u);
  ASSERT_EQ(c.tau_list.size(), 1u);
  EXPECT_EQ(c.tau_list[0], 1u);
  ASSERT_EQ(c.rho_list.size(), 1u);
  EXPECT_DOUBLE_EQ(c.rho_list[0], 1.0);
  ASSERT_EQ(c.eta_list.size(), 1u);
  EXPECT_DOUBLE_EQ(c.eta_list[0], 0.1);
  EXPECT_DOUBLE_EQ(c.momentum, 0.9);
  EXPECT_DOUBLE_EQ(c.beta, 0.005);
  EXPECT_FALSE(c.dp.enabled);
  EXPECT_FALSE(c.label_dp.enabled);
  ASSERT_EQ(c.seeds.size(), 1u);
  EXPECT_EQ(c.seeds[0], 1u);
}

TEST(ParseConfig, CommentsWhitespaceAndCompactAssignments) {
  ExperimentConfig c = parse_config_text(
      "# experiment\n"
      "  method=split   # trailing comment\n"
      "\n"
      "dataset.kind =synthetic\n"
      "dataset.synthetic.n= 64\n"
      "dataset.synthetic.informative_dims=2\n"
      "train.epochs = 3\n"
      "seeds = 7, 8 ,9\n");
  EXPECT_EQ(c.method, "split");
  EXPECT_EQ(c.epochs, 3u);
  ASSERT_EQ(c.seeds.size(), 3u);
  EXPECT_EQ(c.seeds[1], 8u);
}

TEST(ParseConfig, UnknownKeyIsNamedInTheError) {
  expect_error(minimal_synthetic("split") + "train.learning_rate = 0.1\n",
               "train.learning_rate");
}

TEST(ParseConfig, DuplicateKeyRejected) {
  expect_error(minimal_synthetic("split") + "train.eta = 0.1\ntrain.eta = 0.2\n",
               "duplicate key 'train.eta'");
}

TEST(ParseConfig, MissingRequiredKeysRejected) {
  expect_error("dataset.kind = synthetic\ndataset.synthetic.n = 10\ntrain.epochs = 1\n",
               "method");
  expect_error("method = split\ntrain.epochs = 1\n", "dataset.kind");
  expect_error("method = split\ndataset.kind = synthetic\ntrain.epochs = 1\n",
               "dataset.synthetic.n");
}

TEST(ParseConfig, EpochsAndMaxRoundsAreMutuallyExclusive) {
  expect_error(minimal_synthetic("split") + "train.epochs = 2\n", "not both");
  expect_error(
      "method = split\ndataset.kind = synthetic\ndataset.synthetic.n = 10\n"
      "dataset.synthetic.informative_dims = 2\n",
      "train.epochs");
}

TEST(ParseConfig, MethodSpecificKeysAreRejectedElsewhere) {
  expect_error(minimal_synthetic("split") + "train.tau = 5\n", "train.tau");
  expect_error(minimal_synthetic("vafl") + "train.rho = 1.0\n", "train.rho");
  expect_error(minimal_synthetic("fdml") + "train.rho = 1.0\n", "train.rho");
  expect_error(minimal_synthetic("split") + "train.head_lr = 0.1\n", "train.head_lr");
  expect_error(minimal_synthetic("vimadmm-j") + "train.head_lr = 0.1\n", "train.head_lr");
  expect_error(minimal_synthetic("vimadmm") + "train.server_lr = 0.1\n", "train.server_lr");
  expect_error(minimal_synthetic("fdml") + "train.exact_inner = true\n", "train.exact_inner");
  expect_error(minimal_synthetic("split") + "eval.full_admm_loss = true\n",
               "eval.full_admm_loss");
}

TEST(ParseConfig, MethodSpecificKeysAcceptedWhereTheyApply) {
  EXPECT_NO_THROW(parse_config_text(minimal_synthetic("fedbcd") + "train.tau = 5\n"));
  EXPECT_NO_THROW(parse_config_text(minimal_synthetic("vimadmm-j") + "train.rho = 2.0\n"));
  EXPECT_NO_THROW(parse_config_text(minimal_synthetic("vimadmm") + "train.head_lr = 0.05\n"));
  EXPECT_NO_THROW(parse_config_text(minimal_synthetic("vafl") + "train.server_lr = 0.2\n"));
  EXPECT_NO_THROW(parse_config_text(minimal_synthetic("vimadmm") +
                                    "model.hidden = 0\ntrain.exact_inner = true\n"));
}

TEST(ParseConfig, ExactInnerRequiresLinearExtractors) {
  expect_error(minimal_synthetic("vimadmm") + "train.exact_inner = true\n", "model.hidden");
}

TEST(ParseConfig, DatasetSpecificKeysAreRejectedAcrossKinds) {
  expect_error(minimal_synthetic("split") + "partition.clients = 4\n", "partition.clients");
  expect_error(minimal_synthetic("split") + "dataset.mnist.dir = /data\n", "dataset.mnist.dir");
  expect_error(
      "method = split\ndataset.kind = mnist\ntrain.epochs = 1\n"
      "dataset.synthetic.n = 10\n",
      "dataset.synthetic.n");
}

TEST(ParseConfig, DpRequiresExactlyOneOfSigmaAndTargetEpsilon) {
  std::string base = minimal_synthetic("vimadmm") + "dp.enabled = true\ndp.clip = 2.0\n";
  expect_error(base, "dp.sigma");
  expect_error(base + "dp.sigma = 1.0\ndp.target_epsilon = 8.0\n", "not both");
  EXPECT_NO_THROW(parse_config_text(base + "dp.sigma = 1.0\n"));
  EXPECT_NO_THROW(parse_config_text(base + "dp.target_epsilon = 8.0\n"));
}

TEST(ParseConfig, DpKeysRequireDpEnabled) {
  expect_error(minimal_synthetic("vimadmm") + "dp.sigma = 1.0\n", "dp.enabled");
  expect_error(minimal_synthetic("vimadmm") + "label_dp.lambda = 2.0\n", "label_dp.enabled");
}

TEST(ParseConfig, ValueRangesEnforced) {
  expect_error(minimal_synthetic("vimadmm") + "train.rho = 0\n", "train.rho");
  expect_error(minimal_synthetic("split") + "train.eta = -0.1\n", "train.eta");
  expect_error(minimal_synthetic("split") + "train.momentum = 1.0\n", "train.momentum");
  expect_error(minimal_synthetic("split") + "train.batch = 0\n", "train.batch");
  expect_error(minimal_synthetic("split") + "stop.patience = 0\n", "stop.patience");
  expect_error(minimal_synthetic("split") + "seeds = 3,3\n", "seeds");
  expect_error(minimal_synthetic("vimadmm") +
                   "dp.enabled = true\ndp.clip = 1.0\ndp.sigma = 1.0\ndp.delta = 1.5\n",
               "dp.delta");
}

TEST(ParseConfig, MnistPartitionValidation) {
  std::string base = "method = split\ndataset.kind = mnist\ntrain.epochs = 1\n";
  ExperimentConfig c = parse_config_text(base);
  EXPECT_EQ(c.partition_kind, "row-bands");
  EXPECT_EQ(c.clients, 14u);
  expect_error(base + "partition.kind = patches\n", "grid_rows");
  expect_error(base + "partition.kind = dim-ranges\n", "partition.ranges");
  expect_error(base + "partition.ranges = 10-5\n", "reversed");
  c = parse_config_text(base + "partition.kind = dim-ranges\npartition.ranges = 0-392,392-784\n");
  ASSERT_EQ(c.ranges.size(), 2u);
  EXPECT_EQ(c.ranges[0].first, 0u);
  EXPECT_EQ(c.ranges[0].second, 392u);
  EXPECT_EQ(c.ranges[1].first, 392u);
  EXPECT_EQ(c.ranges[1].second, 784u);
}

TEST(EffectiveConfig, RoundTripReproducesEveryField) {
  std::string text = minimal_synthetic("vimadmm") +
                     "dataset.synthetic.noise_dims = 2,1\n"
                     "dataset.synthetic.noise_scale = 0.37\n"
                     "model.hidden = 16\nmodel.d_f = 7\ntrain.batch = 25\n"
                     "train.tau = 3\ntrain.rho = 0.75\ntrain.eta = 0.05\n"
                     "train.head_lr = 0.025\ntrain.momentum = 0.85\ntrain.beta = 0.004\n"
                     "eval.cadence = 2\neval.full_admm_loss = true\n"
                     "stop.drop_tol = 3.5\nstop.patience = 2\n"
                     "dp.enabled = true\ndp.clip = 2\ndp.sigma = 1.3\ndp.delta = 1e-06\n"
                     "label_dp.enabled = true\nlabel_dp.lambda = 1.4142135623730951\n"
                     "seeds = 11,12,13\nthreads = 4\nout = runs/demo\n";
  ExperimentConfig c = parse_config_text(text);
  std::string echo = effective_config_string(c);
  ExperimentConfig c2 = parse_config_text(echo);
  EXPECT_EQ(effective_config_string(c2), echo);
  EXPECT_EQ(c2.method, c.method);
  EXPECT_EQ(c2.synthetic.noise_dims, c.synthetic.noise_dims);
  EXPECT_DOUBLE_EQ(c2.synthetic.noise_scale, c.synthetic.noise_scale);
  EXPECT_EQ(c2.hidden, c.hidden);
  EXPECT_EQ(c2.tau_list, c.tau_list);
  EXPECT_EQ(c2.rho_list, c.rho_list);
  EXPECT_DOUBLE_EQ(c2.head_lr, c.head_lr);
  EXPECT_DOUBLE_EQ(c2.dp.sigma, c.dp.sigma);
  EXPECT_DOUBLE_EQ(c2.dp.delta, c.dp.delta);
  EXPECT_DOUBLE_EQ(c2.label_dp.lambda, c.label_dp.lambda);
  EXPECT_EQ(c2.seeds, c.seeds);
  EXPECT_EQ(c2.out, c.out);
}

TEST(EffectiveConfig, EchoOmitsKeysTheMethodCannotAccept) {
  ExperimentConfig c = parse_config_text(minimal_synthetic("split"));
  std::string echo = effective_config_string(c);
  EXPECT_EQ(echo.find("train.tau"), std::string::npos);
  EXPECT_EQ(echo.find("train.rho"), std::string::npos);
  EXPECT_EQ(echo.find("train.head_lr"), std::string::npos);
  EXPECT_EQ(echo.find("eval.full_admm_loss"), std::string::npos);
  EXPECT_NE(echo.find("train.server_lr"), std::string::npos);
  EXPECT_NO_THROW(parse_config_text(echo));

  c = parse_config_text(minimal_synthetic("fdml"));
  echo = effective_config_string(c);
  EXPECT_EQ(echo.find("train.server_lr"), std::string::npos);
  EXPECT_EQ(echo.find("train.tau"), std::string::npos);
  EXPECT_NO_THROW(parse_config_text(echo));
}

TEST(EffectiveConfig, SeventeenDigitDoublesSurviveTheTrip) {
  ExperimentConfig c = parse_config_text(minimal_synthetic("vimadmm") +
                                         "train.rho = 0.1\ntrain.eta = 0.30000000000000004\n");
  ExperimentConfig c2 = parse_config_text(effective_config_string(c));
  EXPECT_EQ(c2.rho_list[0], c.rho_list[0]);
  EXPECT_EQ(c2.eta_list[0], c.eta_list[0]);
}

TEST(ExpandGrid, SingletonConfigYieldsOneUnlabeledPoint) {
  ExperimentConfig c = parse_config_text(minimal_synthetic("vimadmm"));
  auto points = expand_grid(c);
  ASSERT_EQ(points.size(), 1u);
  EXPECT_TRUE(points[0].label.empty());
  EXPECT_EQ(points[0].tau, 1u);
  EXPECT_DOUBLE_EQ(points[0].rho, 1.0);
}

TEST(ExpandGrid, CartesianOrderAndLabels) {
  ExperimentConfig c = parse_config_text(minimal_synthetic("vimadmm") +
                                         "train.rho = 0.5,2\ntrain.tau = 1,20\n");
  auto points = expand_grid(c);
  ASSERT_EQ(points.size(), 4u);
  EXPECT_EQ(points[0].label, "rho=0.5_tau=1");
  EXPECT_EQ(points[1].label, "rho=0.5_tau=20");
  EXPECT_EQ(points[2].label, "rho=2_tau=1");
  EXPECT_EQ(points[3].label, "rho=2_tau=20");
  for (const auto& p : points) {
    ASSERT_EQ(p.config.rho_list.size(), 1u);
    ASSERT_EQ(p.config.tau_list.size(), 1u);
    EXPECT_DOUBLE_EQ(p.config.rho_list[0], p.rho);
    EXPECT_EQ(p.config.tau_list[0], p.tau);
  }
}

TEST(ExpandGrid, OnlyMultiValuedKeysContributeToLabels) {
  ExperimentConfig c = parse_config_text(minimal_synthetic("fedbcd") +
                                         "train.eta = 0.05,0.1\ntrain.tau = 10\n");
  auto points = expand_grid(c);
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[0].label, "eta=0.05");
  EXPECT_EQ(points[1].label, "eta=0.1");
}

TEST(ExpandGrid, DuplicateGridValuesRejectedAtParse) {
  expect_error(minimal_synthetic("vimadmm") + "train.rho = 1,1\n", "train.rho");
}

TEST(PartitionSchemeFromConfig, MapsKindAndGeometry) {
  ExperimentConfig c = parse_config_text(
      "method = split\ndataset.kind = mnist\ntrain.epochs = 1\n"
      "partition.kind = patches\npartition.grid_rows = 2\npartition.grid_cols = 2\n"
      "partition.overlap = 1\n");
  vfl::PartitionScheme s = partition_scheme(c);
  EXPECT_EQ(s.kind, vfl::PartitionKind::kPatches);
  EXPECT_EQ(s.grid_rows, 2u);
  EXPECT_EQ(s.grid_cols, 2u);
  EXPECT_EQ(s.overlap, 1u);
  EXPECT_EQ(s.image_rows, 28u);

  ExperimentConfig synth = parse_config_text(minimal_synthetic("split"));
  EXPECT_THROW(partition_scheme(synth), std::logic_error);
}

}  // namespace
