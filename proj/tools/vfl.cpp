// vfl — vertical federated learning simulator CLI.
//
// Verbs:
//   run          train per the config; per-seed artifacts + cross-seed summary
//   dp-calibrate forward (σ→ε) or inverse (ε→σ) accountant query, JSON out
//   analyze      report generation on a finished run directory
//
// Exit codes: 0 success, 2 config/usage error, 3 runtime failure.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vfl/checkpoint.hpp"
#include "vfl/config.hpp"
#include "vfl/harness.hpp"
#include "vfl/ledger.hpp"
#include "vfl/metrics.hpp"
#include "vfl/privacy.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

std::atomic<bool> g_cancel(false);

void on_sigint(int) { g_cancel.store(true); }

// --threads flag > VFL_THREADS env > config value > 1.
std::size_t resolve_threads(std::size_t flag_threads, std::size_t config_threads) {
  if (flag_threads > 0) return flag_threads;
  if (const char* env = std::getenv("VFL_THREADS")) {
    char* end = nullptr;
    unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0')
      throw std::invalid_argument(std::string("VFL_THREADS is not a number: '") + env + "'");
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return config_threads > 0 ? config_threads : 1;
}

struct RunArgs {
  std::string config_path;
  std::string out;
  std::vector<std::uint64_t> seeds;
  bool force = false;
  std::size_t threads = 0;
};

int cmd_run(const RunArgs& args) {
  vfl::ExperimentConfig config = vfl::parse_config_file(args.config_path);
  if (!args.out.empty()) config.out = args.out;
  if (!args.seeds.empty()) config.seeds = args.seeds;
  config.threads = resolve_threads(args.threads, config.threads);
  if (config.out.empty())
    throw std::invalid_argument("config: no output directory (--out or the out key)");
  if (vfl::dir_nonempty(config.out) && !args.force)
    throw std::invalid_argument("output directory '" + config.out +
                                "' is not empty; pass --force to write into it");
  vfl::run_experiment(config, config.out, &g_cancel);
  std::cout << "run complete: " << config.out << "\n";
  return kOk;
}

struct CalibrateArgs {
  std::size_t rounds = 0;
  double sigma = 0.0;
  double epsilon = 0.0;
  double delta = 1e-5;
};

int cmd_dp_calibrate(const CalibrateArgs& args) {
  if ((args.sigma > 0.0) == (args.epsilon > 0.0))
    throw std::invalid_argument("give exactly one of --sigma (forward) and --epsilon (inverse)");
  nlohmann::json out;
  out["rounds"] = args.rounds;
  out["delta"] = args.delta;
  if (args.sigma > 0.0) {
    vfl::RdpResult r = vfl::rdp_epsilon(args.rounds, args.sigma, args.delta);
    out["sigma"] = args.sigma;
    out["epsilon"] = r.epsilon;
    out["alpha"] = r.alpha;
  } else {
    double sigma = vfl::calibrate_sigma(args.rounds, args.epsilon, args.delta);
    vfl::RdpResult r = vfl::rdp_epsilon(args.rounds, sigma, args.delta);
    out["target_epsilon"] = args.epsilon;
    out["sigma"] = sigma;
    out["epsilon"] = r.epsilon;
    out["alpha"] = r.alpha;
  }
  std::cout << out.dump(2) << "\n";
  return kOk;
}

struct AnalyzeArgs {
  std::string verb;
  std::string run_dir;
  std::string out;  // default: inside run_dir
  std::size_t client = 0;
  double sigma = 1.0;
  double ratio = 50.0;
  double target = -1.0;
  std::size_t threads = 0;
};

// The seed a run directory was produced with, from its effective config.
std::uint64_t run_seed(const vfl::ExperimentConfig& config) {
  if (config.seeds.size() != 1)
    throw std::invalid_argument("run directory config lists " +
                                std::to_string(config.seeds.size()) +
                                " seeds; analyze works on one seed directory");
  return config.seeds[0];
}

void write_importance_csv(const std::string& path,
                          const std::vector<std::pair<std::size_t, double>>& ranked) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << "rank,client,frobenius_norm\n";
  char buf[64];
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%.12g\n", i + 1, ranked[i].first,
                  ranked[i].second);
    f << buf;
  }
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

int cmd_analyze(const AnalyzeArgs& args) {
  fs::path run_dir(args.run_dir);
  fs::path conf_path = run_dir / "effective.conf";
  if (!fs::exists(conf_path))
    throw std::invalid_argument("no effective.conf under '" + args.run_dir +
                                "' (point --run at a finished seed directory)");
  vfl::ExperimentConfig config = vfl::parse_config_file(conf_path.string());
  config.threads = resolve_threads(args.threads, config.threads);
  fs::path out_dir = args.out.empty() ? run_dir : fs::path(args.out);
  fs::create_directories(out_dir);

  if (args.verb == "importance") {
    vfl::CheckpointData ckpt = vfl::read_checkpoint((run_dir / "checkpoint.bin").string());
    auto ranked = vfl::head_importance(vfl::client_head_maps(ckpt));
    write_importance_csv((out_dir / "importance.csv").string(), ranked);
    std::cout << "importance: " << (out_dir / "importance.csv").string() << "\n";
    return kOk;
  }

  if (args.verb == "comm-report") {
    vfl::CommLedger ledger = vfl::CommLedger::read_report((run_dir / "ledger.json").string());
    std::vector<vfl::RoundMetrics> metrics =
        vfl::read_metrics_csv((run_dir / "metrics.csv").string());
    vfl::CommReport report = vfl::ledger_report(ledger, metrics, args.target);
    std::string json = vfl::comm_report_json(report);
    std::ofstream f(out_dir / "comm_report.json", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write comm_report.json");
    f << json;
    f.close();
    std::cout << json;
    return kOk;
  }

  if (args.verb == "noisy-test") {
    vfl::CheckpointData ckpt = vfl::read_checkpoint((run_dir / "checkpoint.bin").string());
    std::uint64_t seed = run_seed(config);
    vfl::VerticalDataset data = vfl::build_dataset(config, seed);
    if (args.client >= data.clients())
      throw std::invalid_argument("no client " + std::to_string(args.client));
    vfl::RngStream rng =
        vfl::derive_stream(seed, vfl::StreamPurpose::kNoisyTest, args.client, 0);
    double noisy = vfl::noisy_test_validation(ckpt, data.test_blocks, data.test_labels,
                                              args.client, args.sigma, rng);
    double clean = vfl::accuracy_from_logits(vfl::infer_logits(ckpt, data.test_blocks),
                                             data.test_labels);
    nlohmann::json out;
    out["client"] = args.client;
    out["sigma"] = args.sigma;
    out["clean_test_acc"] = clean;
    out["noisy_test_acc"] = noisy;
    std::cout << out.dump(2) << "\n";
    return kOk;
  }

  if (args.verb == "denoise") {
    std::uint64_t seed = run_seed(config);
    vfl::DenoiseResult result =
        vfl::client_denoise_experiment(config, args.client, args.sigma, seed, &g_cancel);
    write_importance_csv((out_dir / "denoise_importance.csv").string(), result.importance);
    vfl::write_metrics_csv((out_dir / "denoise_metrics.csv").string(), result.run.metrics);
    nlohmann::json out;
    out["client"] = args.client;
    out["sigma"] = args.sigma;
    out["final_test_acc"] = result.run.metrics.empty()
                                ? nlohmann::json()
                                : nlohmann::json(result.run.metrics.back().test_acc);
    std::cout << out.dump(2) << "\n";
    return kOk;
  }

  if (args.verb == "summarize") {
    std::uint64_t seed = run_seed(config);
    nlohmann::json out;
    for (bool important : {true, false}) {
      vfl::SummarizeResult result =
          vfl::client_summarize(config, args.ratio, important, seed, &g_cancel);
      const char* arm = important ? "important" : "unimportant";
      vfl::write_metrics_csv(
          (out_dir / (std::string("summarize_") + arm + "_metrics.csv")).string(),
          result.run.metrics);
      nlohmann::json arm_json;
      arm_json["selected"] = result.selected;
      if (!result.run.metrics.empty())
        arm_json["final_test_acc"] = result.run.metrics.back().test_acc;
      out[arm] = std::move(arm_json);
    }
    out["ratio_percent"] = args.ratio;
    std::cout << out.dump(2) << "\n";
    return kOk;
  }

  if (args.verb == "export-embeddings") {
    vfl::CheckpointData ckpt = vfl::read_checkpoint((run_dir / "checkpoint.bin").string());
    std::uint64_t seed = run_seed(config);
    vfl::VerticalDataset data = vfl::build_dataset(config, seed);
    vfl::write_embeddings_csv((out_dir / "embeddings.csv").string(),
                              vfl::client_embeddings(ckpt, data.test_blocks),
                              data.test_labels);
    std::cout << "embeddings: " << (out_dir / "embeddings.csv").string() << "\n";
    return kOk;
  }

  throw std::invalid_argument("unknown analyze verb '" + args.verb + "'");
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_sigint);
  std::signal(SIGTERM, on_sigint);

  CLI::App app{"vertical federated learning simulator"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "train a configured experiment");
  run->add_option("--config", run_args.config_path, "experiment config file")->required();
  run->add_option("--out", run_args.out, "output directory (overrides the config)");
  run->add_option("--seed", run_args.seeds, "seed override (repeatable)");
  run->add_flag("--force", run_args.force, "write into a non-empty output directory");
  run->add_option("--threads", run_args.threads, "worker threads (VFL_THREADS as fallback)");

  CalibrateArgs cal_args;
  CLI::App* cal = app.add_subcommand("dp-calibrate", "RDP accountant forward/inverse query");
  cal->add_option("--rounds", cal_args.rounds, "composition length T")->required();
  cal->add_option("--sigma", cal_args.sigma, "noise multiplier (forward query)");
  cal->add_option("--epsilon", cal_args.epsilon, "target epsilon (inverse query)");
  cal->add_option("--delta", cal_args.delta, "delta (default 1e-5)");

  AnalyzeArgs an_args;
  CLI::App* an = app.add_subcommand("analyze", "reports on a finished run directory");
  an->add_option("verb", an_args.verb,
                 "importance | summarize | denoise | noisy-test | comm-report | "
                 "export-embeddings")
      ->required();
  an->add_option("--run", an_args.run_dir, "seed directory of a finished run")->required();
  an->add_option("--out", an_args.out, "where to write report files (default: the run dir)");
  an->add_option("--client", an_args.client, "client id (noisy-test, denoise)");
  an->add_option("--sigma", an_args.sigma, "noise level (noisy-test σ̄, denoise σ̃)");
  an->add_option("--ratio", an_args.ratio, "summarize retention percentage (default 50)");
  an->add_option("--target", an_args.target, "comm-report target accuracy in [0,1]");
  an->add_option("--threads", an_args.threads, "worker threads (VFL_THREADS as fallback)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*cal) return cmd_dp_calibrate(cal_args);
    if (*an) return cmd_analyze(an_args);
    std::cerr << "error: no verb\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}
