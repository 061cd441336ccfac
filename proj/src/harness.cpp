#include "vfl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "vfl/admm.hpp"
#include "vfl/admm_joint.hpp"
#include "vfl/baselines.hpp"
#include "vfl/privacy.hpp"

namespace vfl {

namespace fs = std::filesystem;

double accuracy_from_logits(const Matrix& logits, const std::vector<int>& labels) {
  if (logits.rows != labels.size())
    throw std::invalid_argument("accuracy: logit rows do not match label count");
  if (labels.empty()) throw std::invalid_argument("accuracy: empty label set");
  std::size_t hits = 0;
  for (std::size_t j = 0; j < logits.rows; ++j) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols; ++c)
      if (logits(j, c) > logits(j, best)) best = c;
    if (static_cast<int>(best) == labels[j]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

VerticalDataset build_dataset(const ExperimentConfig& config, std::uint64_t seed) {
  if (config.dataset_kind == "synthetic") return gen_synthetic(config.synthetic, seed);
  if (config.mnist_dir.empty())
    throw std::invalid_argument("config: dataset.kind=mnist requires dataset.mnist.dir");
  MnistPaths paths;
  paths.train_images = config.mnist_dir + "/train-images-idx3-ubyte";
  paths.train_labels = config.mnist_dir + "/train-labels-idx1-ubyte";
  paths.test_images = config.mnist_dir + "/t10k-images-idx3-ubyte";
  paths.test_labels = config.mnist_dir + "/t10k-labels-idx1-ubyte";
  return load_mnist_vertical(paths, partition_scheme(config), config.mnist_limit);
}

namespace {

void require_singleton(const ExperimentConfig& config) {
  if (config.tau_list.size() != 1 || config.rho_list.size() != 1 ||
      config.eta_list.size() != 1)
    throw std::logic_error("run_training takes grid-expanded configs (singleton lists)");
}

std::size_t resolved_threads(const ExperimentConfig& config) {
  return config.threads > 0 ? config.threads : 1;
}

}  // namespace

TrainerBundle make_trainer(const ExperimentConfig& config, const VerticalDataset& data,
                           std::uint64_t seed) {
  require_singleton(config);
  TrainerBundle bundle;
  double eta = config.eta_list[0];
  std::size_t threads = resolved_threads(config);
  if (config.method == "vimadmm") {
    AdmmOptions opts;
    opts.hidden = config.hidden;
    opts.d_f = config.d_f;
    opts.tau = config.tau_list[0];
    opts.rho = config.rho_list[0];
    opts.eta = eta;
    opts.head_lr = config.head_lr > 0.0 ? config.head_lr : eta;
    opts.momentum = config.momentum;
    opts.beta = config.beta;
    opts.exact_inner = config.exact_inner;
    opts.dp = config.dp;
    opts.threads = threads;
    bundle.ledger = std::make_unique<CommLedger>(AdmmTrainer::message_whitelist());
    bundle.trainer = std::make_unique<AdmmTrainer>(data, opts, bundle.ledger.get(), seed);
  } else if (config.method == "vimadmm-j") {
    JointOptions opts;
    opts.hidden = config.hidden;
    opts.d_f = config.d_f;
    opts.tau = config.tau_list[0];
    opts.rho = config.rho_list[0];
    opts.eta = eta;
    opts.momentum = config.momentum;
    opts.beta = config.beta;
    opts.dp = config.dp;
    opts.threads = threads;
    bundle.ledger = std::make_unique<CommLedger>(JointTrainer::message_whitelist());
    bundle.trainer = std::make_unique<JointTrainer>(data, opts, bundle.ledger.get(), seed);
  } else {
    BaselineOptions opts;
    opts.hidden = config.hidden;
    opts.d_f = config.d_f;
    opts.tau = config.method == "fedbcd" ? config.tau_list[0] : 1;
    opts.eta = eta;
    opts.server_lr = config.server_lr > 0.0 ? config.server_lr : eta;
    opts.momentum = config.momentum;
    opts.beta = config.beta;
    opts.dp = config.dp;
    opts.threads = threads;
    if (config.method == "split" || config.method == "fedbcd") {
      bundle.ledger = std::make_unique<CommLedger>(SplitTrainer::message_whitelist());
      bundle.trainer =
          std::make_unique<SplitTrainer>(data, opts, bundle.ledger.get(), seed, config.method);
    } else if (config.method == "vafl") {
      bundle.ledger = std::make_unique<CommLedger>(VaflTrainer::message_whitelist());
      bundle.trainer = std::make_unique<VaflTrainer>(data, opts, bundle.ledger.get(), seed);
    } else if (config.method == "fdml") {
      bundle.ledger = std::make_unique<CommLedger>(FdmlTrainer::message_whitelist());
      bundle.trainer = std::make_unique<FdmlTrainer>(data, opts, bundle.ledger.get(), seed);
    } else {
      throw std::invalid_argument("config: unknown method '" + config.method + "'");
    }
  }
  return bundle;
}

RunResult run_training(const ExperimentConfig& config, const VerticalDataset& data,
                       std::uint64_t seed, const std::atomic<bool>* cancel) {
  require_singleton(config);
  data.validate();
  std::size_t n = data.n_train();
  if (config.batch > n)
    throw std::invalid_argument("config: train.batch (" + std::to_string(config.batch) +
                                ") exceeds the training rows (" + std::to_string(n) + ")");

  BatchSchedule schedule(n, config.batch, seed);
  RunResult result;
  result.total_rounds = config.epochs > 0 ? config.epochs * schedule.rounds_per_epoch()
                                          : config.max_rounds;
  std::size_t cadence = config.cadence > 0 ? config.cadence : schedule.rounds_per_epoch();

  ExperimentConfig effective = config;
  if (effective.dp.enabled && effective.dp.target_epsilon > 0.0) {
    effective.dp.sigma =
        calibrate_sigma(result.total_rounds, effective.dp.target_epsilon, effective.dp.delta);
    effective.dp.target_epsilon = 0.0;
  }
  result.sigma = effective.dp.enabled ? effective.dp.sigma : 0.0;

  // Label DP randomizes a private copy of the training labels, exactly once.
  const VerticalDataset* active = &data;
  VerticalDataset noisy_labels;
  if (config.label_dp.enabled) {
    noisy_labels = data;
    RngStream stream = derive_stream(seed, StreamPurpose::kLabelDp, 0, 0);
    auto [labels, eps] = label_dp_randomize(data.train_labels, data.num_classes,
                                            config.label_dp.lambda, stream);
    noisy_labels.train_labels = std::move(labels);
    result.label_epsilon = eps;
    active = &noisy_labels;
  }

  TrainerBundle bundle = make_trainer(effective, *active, seed);
  StoppingRule stopping(result.total_rounds, config.drop_tol, config.patience);
  bool want_full_diag = config.full_admm_loss && effective.is_admm();

  for (std::size_t round = 0; round < result.total_rounds; ++round) {
    if (cancel && cancel->load()) {
      result.cancelled = true;
      break;
    }
    RoundStats stats;
    try {
      stats = bundle.trainer->run_round(schedule.batch_for_round(round));
    } catch (const std::exception& e) {
      result.error = "round " + std::to_string(round) + ": " + e.what();
      break;
    }
    result.rounds_run = round + 1;
    bool last = round + 1 == result.total_rounds;
    if ((round + 1) % cadence != 0 && !last) continue;

    RoundMetrics row;
    row.round = round + 1;
    row.train_loss = stats.train_loss;
    row.constraint_residual = stats.constraint_residual;
    try {
      if (data.n_val() > 0)
        row.val_acc =
            accuracy_from_logits(bundle.trainer->eval_logits(data.val_blocks, round),
                                 data.val_labels);
      if (data.n_test() > 0)
        row.test_acc =
            accuracy_from_logits(bundle.trainer->eval_logits(data.test_blocks, round),
                                 data.test_labels);
      if (want_full_diag) {
        row.admm_loss = bundle.trainer->full_admm_loss();
        row.constraint_residual = bundle.trainer->full_constraint_residual();
      }
    } catch (const std::exception& e) {
      result.error = "round " + std::to_string(round) + " (eval): " + e.what();
      break;
    }
    row.bytes_up = bundle.ledger->total_bytes(Direction::kUplink);
    row.bytes_down = bundle.ledger->total_bytes(Direction::kDownlink);
    if (effective.dp.enabled) {
      row.epsilon = rdp_epsilon(round + 1, effective.dp.sigma, effective.dp.delta).epsilon;
      if (!std::isnan(result.label_epsilon))
        row.epsilon = std::max(row.epsilon, result.label_epsilon);
    } else if (!std::isnan(result.label_epsilon)) {
      row.epsilon = result.label_epsilon;
    }
    result.metrics.push_back(row);
    result.epsilon = row.epsilon;

    if (!std::isnan(row.val_acc) && stopping.observe(round, row.val_acc) && !last) {
      result.stopped_early = true;
      break;
    }
  }

  result.checkpoint = bundle.trainer->checkpoint();
  result.heads = bundle.trainer->client_heads();
  result.ledger_json = bundle.ledger->report_json();
  return result;
}

bool dir_nonempty(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return false;
  return fs::directory_iterator(dir, ec) != fs::directory_iterator();
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw std::runtime_error("failed writing '" + path.string() + "'");
}

// Persists one finished (possibly partial) run into `dir`.
void write_run_artifacts(const fs::path& dir, const ExperimentConfig& singleton,
                         const VerticalDataset& data, const RunResult& run) {
  fs::create_directories(dir);
  ExperimentConfig echo = singleton;
  echo.out.clear();
  if (echo.dp.enabled && echo.dp.target_epsilon > 0.0) {
    echo.dp.sigma = run.sigma;  // resolved at run start; rerunning skips calibration
    echo.dp.target_epsilon = 0.0;
  }
  write_text(dir / "effective.conf", effective_config_string(echo));
  write_metrics_csv((dir / "metrics.csv").string(), run.metrics);
  write_text(dir / "ledger.json", run.ledger_json);
  write_checkpoint((dir / "checkpoint.bin").string(), run.checkpoint);
  if (singleton.export_embeddings && data.n_test() > 0)
    write_embeddings_csv((dir / "embeddings.csv").string(),
                         client_embeddings(run.checkpoint, data.test_blocks),
                         data.test_labels);
  if (singleton.export_csv && singleton.dataset_kind == "synthetic")
    write_features_csv((dir / "features.csv").string(), data.train_blocks, data.train_labels);
}

}  // namespace

void run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                    const std::atomic<bool>* cancel) {
  fs::path root(out_dir);
  fs::create_directories(root);
  {
    ExperimentConfig echo = config;
    echo.out.clear();
    write_text(root / "effective.conf", effective_config_string(echo));
  }

  std::string failure;
  for (const GridPoint& point : expand_grid(config)) {
    fs::path point_dir = point.label.empty() ? root : root / point.label;
    nlohmann::json seed_rows = nlohmann::json::array();
    std::vector<double> finals_val, finals_test;
    bool complete = true;
    for (std::uint64_t seed : config.seeds) {
      ExperimentConfig singleton = point.config;
      singleton.seeds = {seed};
      VerticalDataset data = build_dataset(singleton, seed);
      RunResult run;
      try {
        run = run_training(singleton, data, seed, cancel);
      } catch (const std::exception& e) {
        if (failure.empty()) failure = "seed " + std::to_string(seed) + ": " + e.what();
        complete = false;
        break;
      }
      fs::path seed_dir = point_dir / ("seed_" + std::to_string(seed));
      write_run_artifacts(seed_dir, singleton, data, run);
      if (run.cancelled) {
        if (failure.empty()) failure = "interrupted";
        complete = false;
        break;
      }
      if (!run.error.empty()) {
        if (failure.empty()) failure = "seed " + std::to_string(seed) + ": " + run.error;
        complete = false;
        break;
      }
      nlohmann::json row;
      row["seed"] = seed;
      row["rounds"] = run.rounds_run;
      row["stopped_early"] = run.stopped_early;
      if (!run.metrics.empty()) {
        const RoundMetrics& last = run.metrics.back();
        row["final_train_loss"] = last.train_loss;
        if (!std::isnan(last.val_acc)) {
          row["final_val_acc"] = last.val_acc;
          finals_val.push_back(last.val_acc);
        }
        if (!std::isnan(last.test_acc)) {
          row["final_test_acc"] = last.test_acc;
          finals_test.push_back(last.test_acc);
        }
        if (!std::isnan(last.epsilon)) row["epsilon"] = last.epsilon;
      }
      seed_rows.push_back(std::move(row));
    }

    auto mean_std = [](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      var /= static_cast<double>(v.size());  // population std across seeds
      return std::make_pair(mean, std::sqrt(var));
    };
    nlohmann::json summary;
    summary["seeds"] = std::move(seed_rows);
    summary["complete"] = complete;
    if (!finals_val.empty()) {
      auto [mean, sd] = mean_std(finals_val);
      summary["mean_val_acc"] = mean;
      summary["std_val_acc"] = sd;
    }
    if (!finals_test.empty()) {
      auto [mean, sd] = mean_std(finals_test);
      summary["mean_test_acc"] = mean;
      summary["std_test_acc"] = sd;
    }
    fs::create_directories(point_dir);
    write_text(point_dir / "summary.json", summary.dump(2) + "\n");
    if (!failure.empty()) break;
  }
  if (!failure.empty()) throw std::runtime_error(failure);
}

double noisy_test_validation(const CheckpointData& checkpoint,
                             const std::vector<Matrix>& test_blocks,
                             const std::vector<int>& test_labels, std::size_t client,
                             double sigma_bar, RngStream& rng) {
  if (client >= test_blocks.size())
    throw std::out_of_range("noisy_test_validation: no client " + std::to_string(client));
  if (sigma_bar < 0.0) throw std::invalid_argument("noisy_test_validation: negative sigma");
  if (sigma_bar == 0.0)
    return accuracy_from_logits(infer_logits(checkpoint, test_blocks), test_labels);
  std::vector<Matrix> noisy = test_blocks;
  Matrix& block = noisy[client];
  for (std::size_t i = 0; i < block.size(); ++i) block.data[i] += sigma_bar * rng.normal();
  return accuracy_from_logits(infer_logits(checkpoint, noisy), test_labels);
}

DenoiseResult client_denoise_experiment(const ExperimentConfig& config, std::size_t noisy_client,
                                        double sigma_tilde, std::uint64_t seed,
                                        const std::atomic<bool>* cancel) {
  require_singleton(config);
  if (sigma_tilde < 0.0)
    throw std::invalid_argument("client_denoise_experiment: negative sigma");
  VerticalDataset data = build_dataset(config, seed);
  if (noisy_client >= data.clients())
    throw std::out_of_range("client_denoise_experiment: no client " +
                            std::to_string(noisy_client));
  if (sigma_tilde > 0.0) {
    RngStream stream = derive_stream(seed, StreamPurpose::kDenoiseInject, noisy_client, 0);
    for (Matrix* block : {&data.train_blocks[noisy_client], &data.test_blocks[noisy_client]})
      for (std::size_t i = 0; i < block->size(); ++i)
        block->data[i] += sigma_tilde * stream.normal();
  }
  DenoiseResult result;
  result.run = run_training(config, data, seed, cancel);
  if (!result.run.error.empty())
    throw std::runtime_error("client_denoise_experiment: " + result.run.error);
  result.importance = head_importance(result.run.heads);
  return result;
}

SummarizeResult client_summarize(const ExperimentConfig& config, double ratio_percent,
                                 bool important, std::uint64_t seed,
                                 const std::atomic<bool>* cancel) {
  require_singleton(config);
  if (ratio_percent <= 0.0 || ratio_percent > 100.0)
    throw std::invalid_argument("client_summarize: ratio must lie in (0, 100]");
  if (config.dataset_kind != "synthetic")
    throw std::invalid_argument(
        "client_summarize retrains on feature subsets; only synthetic datasets rebuild "
        "deterministically from config here");

  VerticalDataset data = build_dataset(config, seed);
  SummarizeResult result;
  RunResult full = run_training(config, data, seed, cancel);
  if (!full.error.empty()) throw std::runtime_error("client_summarize: " + full.error);
  result.full_importance = head_importance(full.heads);

  std::size_t m = data.clients();
  std::size_t keep = static_cast<std::size_t>(
      std::ceil(ratio_percent / 100.0 * static_cast<double>(m) - 1e-12));
  keep = std::max<std::size_t>(1, std::min(keep, m));
  for (std::size_t i = 0; i < keep; ++i) {
    std::size_t idx = important ? i : result.full_importance.size() - 1 - i;
    result.selected.push_back(result.full_importance[idx].first);
  }
  std::sort(result.selected.begin(), result.selected.end());

  if (keep == m) {
    result.run = std::move(full);
    return result;
  }

  VerticalDataset subset;
  subset.train_labels = data.train_labels;
  subset.val_labels = data.val_labels;
  subset.test_labels = data.test_labels;
  subset.num_classes = data.num_classes;
  for (std::size_t id : result.selected) {
    subset.train_blocks.push_back(data.train_blocks[id]);
    subset.val_blocks.push_back(data.val_blocks[id]);
    subset.test_blocks.push_back(data.test_blocks[id]);
  }
  result.run = run_training(config, subset, seed, cancel);
  if (!result.run.error.empty())
    throw std::runtime_error("client_summarize (subset): " + result.run.error);
  return result;
}

}  // namespace vfl
