#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vfl/data.hpp"
#include "vfl/privacy.hpp"

namespace vfl {

// Flat dotted-key experiment description. Defaults mirror the standard
// hyperparameters (β=0.005, momentum=0.9, b=1024, d_f=60); method-specific
// keys are rejected for methods they do not apply to, and the effective
// echo emits only applicable keys so it always re-parses cleanly.
struct ExperimentConfig {
  std::string method;  // vimadmm | vimadmm-j | split | vafl | fedbcd | fdml

  // dataset
  std::string dataset_kind;  // mnist | synthetic
  std::string mnist_dir;
  std::size_t mnist_limit = 0;  // 0 → all training rows
  SyntheticSpec synthetic;
  bool export_csv = false;

  // partition (MNIST only; synthetic splits come from its block dim lists)
  std::string partition_kind = "row-bands";  // row-bands | patches | dim-ranges
  std::size_t clients = 14;
  std::size_t image_rows = 28, image_cols = 28, image_channels = 1;
  std::size_t grid_rows = 0, grid_cols = 0;
  std::size_t overlap = 0;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;

  // model
  std::size_t hidden = 128;  // 0 → linear extractors
  std::size_t d_f = 60;

  // train (grids: rho/tau/eta may hold several values → cartesian runs)
  std::size_t batch = 1024;
  std::size_t epochs = 0;      // exactly one of epochs / max_rounds is set
  std::size_t max_rounds = 0;
  std::vector<std::size_t> tau_list{1};
  std::vector<double> rho_list{1.0};
  std::vector<double> eta_list{0.1};
  double head_lr = 0.0;    // 0 → eta (vimadmm server heads)
  double server_lr = 0.0;  // 0 → eta (split family server)
  double momentum = 0.9;
  double beta = 0.005;
  bool exact_inner = false;

  // eval
  std::size_t cadence = 0;  // 0 → once per epoch (⌈N/b⌉ rounds)
  bool full_admm_loss = false;
  bool export_embeddings = false;

  // stopping
  double drop_tol = 2.0;  // percentage points below the running best
  std::size_t patience = 1;

  DpPolicy dp;
  LabelDpPolicy label_dp;

  std::vector<std::uint64_t> seeds{1};
  std::size_t threads = 0;  // 0 → CLI decides (VFL_THREADS or 1)
  std::string out;

  bool is_admm() const { return method == "vimadmm" || method == "vimadmm-j"; }
  bool uses_tau() const { return is_admm() || method == "fedbcd"; }
  bool uses_server_lr() const {
    return method == "split" || method == "fedbcd" || method == "vafl";
  }
};

// key=value lines, '#' comments, blank lines ignored. Unknown keys, type
// errors, range violations and method/key mismatches all throw
// std::invalid_argument naming the key.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Effective config echo: every applicable key with its resolved value, in a
// fixed order; parse_config_text(effective_config_string(c)) reproduces c.
std::string effective_config_string(const ExperimentConfig& config);

// One training run pinned to scalar hyperparameters. `label` is the output
// subdirectory ("rho=0.5_tau=20"); empty when no key has several values.
struct GridPoint {
  ExperimentConfig config;  // tau/rho/eta lists reduced to singletons
  std::size_t tau = 1;
  double rho = 1.0;
  double eta = 0.1;
  std::string label;
};

std::vector<GridPoint> expand_grid(const ExperimentConfig& config);

// The PartitionScheme this config describes (MNIST datasets only).
PartitionScheme partition_scheme(const ExperimentConfig& config);

}  // namespace vfl
