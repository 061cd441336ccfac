#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "vfl/ledger.hpp"
#include "vfl/matrix.hpp"

namespace vfl {

// One eval-cadence row. NaN marks a column that does not apply to the run
// (serialized as an empty CSV field). Byte counters are cumulative training
// traffic; MiB conversions happen only in reports.
struct RoundMetrics {
  std::size_t round = 0;
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double val_acc = std::numeric_limits<double>::quiet_NaN();
  double test_acc = std::numeric_limits<double>::quiet_NaN();
  double admm_loss = std::numeric_limits<double>::quiet_NaN();
  double constraint_residual = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;
  double epsilon = std::numeric_limits<double>::quiet_NaN();
};

// Exact header: round,train_loss,val_acc,test_acc,admm_loss,
// constraint_residual,bytes_up,bytes_down,epsilon — doubles as %.12g.
std::string metrics_csv_string(const std::vector<RoundMetrics>& rows);
void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& rows);

// Inverse of write_metrics_csv (report-time analyses read persisted runs);
// empty fields come back as NaN.
std::vector<RoundMetrics> read_metrics_csv(const std::string& path);

// Early stopping: halt when validation accuracy (fraction in [0,1]) sits
// more than drop_tol percentage points below its running best for
// `patience` consecutive evaluations, or when max_rounds is exhausted.
class StoppingRule {
 public:
  StoppingRule(std::size_t max_rounds, double drop_tol = 2.0, std::size_t patience = 1);

  // Feed one evaluation; returns true if training should stop now.
  bool observe(std::size_t round, double val_acc);
  bool exhausted(std::size_t rounds_done) const { return rounds_done >= max_rounds_; }
  std::size_t max_rounds() const { return max_rounds_; }
  double best() const { return best_; }

 private:
  std::size_t max_rounds_;
  double drop_tol_;
  std::size_t patience_;
  double best_ = -1.0;
  std::size_t strikes_ = 0;
};

// (client id, ‖W_k‖_F), descending norm, ties broken by ascending id.
std::vector<std::pair<std::size_t, double>> head_importance(const std::vector<Matrix>& heads);

// Population standard deviation of per-class accuracies, over the classes
// that actually appear in `labels`.
double classwise_accuracy_std(const std::vector<int>& predictions,
                              const std::vector<int>& labels);

// Table-style communication summary, all in MiB (2²⁰ bytes), training
// traffic only. `target_accuracy` < 0 disables the bytes-to-target lookup;
// otherwise the first metrics row with test_acc ≥ target supplies it.
struct CommReport {
  struct RoundRow {
    std::size_t round = 0;
    double mib_up = 0.0;
    double mib_down = 0.0;
  };
  std::vector<RoundRow> per_round;
  double total_mib_up = 0.0;
  double total_mib_down = 0.0;
  bool has_target = false;
  bool target_reached = false;
  double target_accuracy = 0.0;
  double mib_to_target = 0.0;
};

CommReport ledger_report(const CommLedger& ledger, const std::vector<RoundMetrics>& metrics,
                         double target_accuracy = -1.0);
std::string comm_report_json(const CommReport& report);

// t-SNE-ready embedding dump: header client,sample_idx,label,e0..e{d_f-1}.
void write_embeddings_csv(const std::string& path, const std::vector<Matrix>& embeddings,
                          const std::vector<int>& labels);

}  // namespace vfl
