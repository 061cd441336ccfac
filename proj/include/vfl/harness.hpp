#pragma once

#include <atomic>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "vfl/checkpoint.hpp"
#include "vfl/config.hpp"
#include "vfl/data.hpp"
#include "vfl/ledger.hpp"
#include "vfl/metrics.hpp"
#include "vfl/trainer.hpp"

namespace vfl {

// Fraction of rows whose argmax logit (ties to the lowest class) matches
// the label.
double accuracy_from_logits(const Matrix& logits, const std::vector<int>& labels);

// The dataset a config describes: synthetic generation (seed-dependent) or
// an MNIST load + vertical partition (seed-independent).
VerticalDataset build_dataset(const ExperimentConfig& config, std::uint64_t seed);

// A method trainer bound to `data`, with a ledger restricted to the
// method's message-class whitelist. The ledger must outlive the trainer.
struct TrainerBundle {
  std::unique_ptr<CommLedger> ledger;
  std::unique_ptr<Trainer> trainer;
};
TrainerBundle make_trainer(const ExperimentConfig& config, const VerticalDataset& data,
                           std::uint64_t seed);

// One full training run for a singleton (grid-expanded) config and one seed.
struct RunResult {
  std::vector<RoundMetrics> metrics;  // one row per eval-cadence point
  CheckpointData checkpoint;
  std::vector<Matrix> heads;  // trained per-client linear maps (importance input)
  std::string ledger_json;
  std::size_t rounds_run = 0;
  std::size_t total_rounds = 0;  // the planned budget
  bool stopped_early = false;    // stopping rule fired before the budget
  bool cancelled = false;        // the cancel flag was observed
  std::string error;             // non-empty → a round failed (with context)
  double sigma = 0.0;            // resolved noise multiplier (0 → no DP)
  double epsilon = std::numeric_limits<double>::quiet_NaN();  // final spend
  double label_epsilon = std::numeric_limits<double>::quiet_NaN();
};

// Runs the configured method on `data` until the round budget, the stopping
// rule, a failure or cancellation ends it; label DP randomizes a private
// copy of the training labels first; dp.target_epsilon resolves to a sigma
// for the planned budget. Never throws for round failures — they come back
// in RunResult::error so partial metrics survive.
RunResult run_training(const ExperimentConfig& config, const VerticalDataset& data,
                       std::uint64_t seed, const std::atomic<bool>* cancel = nullptr);

// Grid × seed experiment tree rooted at `out_dir`:
//   out_dir/effective.conf
//   out_dir/[<grid label>/]seed_<seed>/{effective.conf, metrics.csv,
//       ledger.json, checkpoint.bin[, embeddings.csv][, features.csv]}
//   out_dir/[<grid label>/]summary.json           (mean/std across seeds)
// Per-seed effective.conf files are singleton configs (that seed, that grid
// point, no `out`), so re-running one reproduces its artifacts bit for bit.
// Throws std::runtime_error after flushing partial artifacts if any seed
// fails or the cancel flag fires.
void run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                    const std::atomic<bool>* cancel = nullptr);

// True if `dir` exists and holds at least one entry (the --force guard).
bool dir_nonempty(const std::string& dir);

// Test accuracy with N(0, σ̄²) noise added to client k's test features only
// (row-major draw order); σ̄ = 0 evaluates the clean test set, no draws.
double noisy_test_validation(const CheckpointData& checkpoint,
                             const std::vector<Matrix>& test_blocks,
                             const std::vector<int>& test_labels, std::size_t client,
                             double sigma_bar, RngStream& rng);

// Injects N(0, σ̃²) noise into client k's train+test features and retrains
// from scratch; σ̃ = 0 skips injection entirely and reduces to run_training.
struct DenoiseResult {
  RunResult run;
  std::vector<std::pair<std::size_t, double>> importance;  // post-retrain ranking
};
DenoiseResult client_denoise_experiment(const ExperimentConfig& config, std::size_t noisy_client,
                                        double sigma_tilde, std::uint64_t seed,
                                        const std::atomic<bool>* cancel = nullptr);

// Ranks clients by head importance from a full run, keeps ⌈ratio·M/100⌉ of
// them from the top (important) or bottom (unimportant) of the ranking, and
// retrains from scratch on that subset (original client order preserved, so
// ratio = 100 reproduces the full run exactly).
struct SummarizeResult {
  std::vector<std::pair<std::size_t, double>> full_importance;
  std::vector<std::size_t> selected;  // retained client ids, ascending
  RunResult run;                      // the retrained subset run
};
SummarizeResult client_summarize(const ExperimentConfig& config, double ratio_percent,
                                 bool important, std::uint64_t seed,
                                 const std::atomic<bool>* cancel = nullptr);

}  // namespace vfl
