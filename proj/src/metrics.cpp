#include "vfl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace vfl {

namespace {

void append_double(std::string& out, double v) {
  if (std::isnan(v)) return;  // empty field
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  out += buf;
}

}  // namespace

std::string metrics_csv_string(const std::vector<RoundMetrics>& rows) {
  std::string out =
      "round,train_loss,val_acc,test_acc,admm_loss,constraint_residual,bytes_up,bytes_down,"
      "epsilon\n";
  for (const RoundMetrics& r : rows) {
    out += std::to_string(r.round);
    out += ',';
    append_double(out, r.train_loss);
    out += ',';
    append_double(out, r.val_acc);
    out += ',';
    append_double(out, r.test_acc);
    out += ',';
    append_double(out, r.admm_loss);
    out += ',';
    append_double(out, r.constraint_residual);
    out += ',';
    out += std::to_string(r.bytes_up);
    out += ',';
    out += std::to_string(r.bytes_down);
    out += ',';
    append_double(out, r.epsilon);
    out += '\n';
  }
  return out;
}

void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << metrics_csv_string(rows);
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<RoundMetrics> read_metrics_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("empty metrics file: " + path);
  std::vector<RoundMetrics> rows;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 9)
      throw std::runtime_error("metrics row with " + std::to_string(fields.size()) +
                               " fields in " + path);
    auto opt = [](const std::string& s) {
      return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
    };
    RoundMetrics r;
    r.round = std::stoul(fields[0]);
    r.train_loss = opt(fields[1]);
    r.val_acc = opt(fields[2]);
    r.test_acc = opt(fields[3]);
    r.admm_loss = opt(fields[4]);
    r.constraint_residual = opt(fields[5]);
    r.bytes_up = std::stoull(fields[6]);
    r.bytes_down = std::stoull(fields[7]);
    r.epsilon = opt(fields[8]);
    rows.push_back(r);
  }
  return rows;
}

StoppingRule::StoppingRule(std::size_t max_rounds, double drop_tol, std::size_t patience)
    : max_rounds_(max_rounds), drop_tol_(drop_tol), patience_(patience) {
  if (max_rounds == 0) throw std::invalid_argument("StoppingRule: max_rounds must be positive");
  if (drop_tol < 0.0) throw std::invalid_argument("StoppingRule: negative drop tolerance");
  if (patience == 0) throw std::invalid_argument("StoppingRule: patience must be positive");
}

bool StoppingRule::observe(std::size_t round, double val_acc) {
  if (val_acc > best_) {
    best_ = val_acc;
    strikes_ = 0;
  } else if (val_acc < best_ - drop_tol_ / 100.0) {
    ++strikes_;
    if (strikes_ >= patience_) return true;
  } else {
    strikes_ = 0;
  }
  return round + 1 >= max_rounds_;
}

std::vector<std::pair<std::size_t, double>> head_importance(const std::vector<Matrix>& heads) {
  std::vector<std::pair<std::size_t, double>> ranked;
  ranked.reserve(heads.size());
  for (std::size_t k = 0; k < heads.size(); ++k)
    ranked.emplace_back(k, frobenius_norm(heads[k]));
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

double classwise_accuracy_std(const std::vector<int>& predictions,
                              const std::vector<int>& labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("classwise_accuracy_std: " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw std::invalid_argument("classwise_accuracy_std: empty labels");
  std::map<int, std::pair<std::size_t, std::size_t>> tally;  // class → (correct, total)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& t = tally[labels[i]];
    ++t.second;
    if (predictions[i] == labels[i]) ++t.first;
  }
  std::vector<double> accs;
  accs.reserve(tally.size());
  for (const auto& [cls, t] : tally)
    accs.push_back(static_cast<double>(t.first) / static_cast<double>(t.second));
  double mean = 0.0;
  for (double a : accs) mean += a;
  mean /= static_cast<double>(accs.size());
  double var = 0.0;
  for (double a : accs) var += (a - mean) * (a - mean);
  var /= static_cast<double>(accs.size());
  return std::sqrt(var);
}

CommReport ledger_report(const CommLedger& ledger, const std::vector<RoundMetrics>& metrics,
                         double target_accuracy) {
  constexpr double kMib = 1024.0 * 1024.0;
  CommReport report;
  std::map<std::size_t, std::pair<std::uint64_t, std::uint64_t>> per_round;  // round → (up, down)
  for (std::size_t k = 0; k < ledger.num_clients(); ++k) {
    for (const auto& [name, series] : ledger.client_series(k)) {
      if (name.rfind("Eval", 0) == 0) continue;
      for (std::size_t i = 0; i < series.rounds.size(); ++i) {
        auto& slot = per_round[series.rounds[i]];
        if (series.direction == Direction::kUplink)
          slot.first += series.bytes[i];
        else
          slot.second += series.bytes[i];
      }
    }
  }
  for (const auto& [round, updown] : per_round) {
    report.per_round.push_back({round, static_cast<double>(updown.first) / kMib,
                                static_cast<double>(updown.second) / kMib});
  }
  report.total_mib_up = static_cast<double>(ledger.total_bytes(Direction::kUplink)) / kMib;
  report.total_mib_down = static_cast<double>(ledger.total_bytes(Direction::kDownlink)) / kMib;
  if (target_accuracy >= 0.0) {
    report.has_target = true;
    report.target_accuracy = target_accuracy;
    for (const RoundMetrics& r : metrics) {
      if (!std::isnan(r.test_acc) && r.test_acc >= target_accuracy) {
        report.target_reached = true;
        report.mib_to_target = static_cast<double>(r.bytes_up + r.bytes_down) / kMib;
        break;
      }
    }
  }
  return report;
}

std::string comm_report_json(const CommReport& report) {
  nlohmann::json j;
  j["total_mib_up"] = report.total_mib_up;
  j["total_mib_down"] = report.total_mib_down;
  j["per_round"] = nlohmann::json::array();
  for (const auto& row : report.per_round)
    j["per_round"].push_back({{"round", row.round}, {"mib_up", row.mib_up},
                              {"mib_down", row.mib_down}});
  if (report.has_target) {
    j["target_accuracy"] = report.target_accuracy;
    if (report.target_reached)
      j["mib_to_target"] = report.mib_to_target;
    else
      j["mib_to_target"] = "not reached";
  }
  return j.dump(2) + "\n";
}

void write_embeddings_csv(const std::string& path, const std::vector<Matrix>& embeddings,
                          const std::vector<int>& labels) {
  if (embeddings.empty()) throw std::invalid_argument("write_embeddings_csv: no embeddings");
  for (const Matrix& e : embeddings) {
    if (e.rows != labels.size())
      throw std::invalid_argument("write_embeddings_csv: row/label count mismatch");
    if (e.cols != embeddings[0].cols)
      throw std::invalid_argument("write_embeddings_csv: ragged embedding widths");
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  std::size_t d_f = embeddings[0].cols;
  f << "client,sample_idx,label";
  for (std::size_t c = 0; c < d_f; ++c) f << ",e" << c;
  f << "\n";
  char buf[40];
  for (std::size_t k = 0; k < embeddings.size(); ++k) {
    const Matrix& e = embeddings[k];
    for (std::size_t j = 0; j < e.rows; ++j) {
      f << k << ',' << j << ',' << labels[j];
      for (std::size_t c = 0; c < e.cols; ++c) {
        std::snprintf(buf, sizeof(buf), "%.12g", e(j, c));
        f << ',' << buf;
      }
      f << "\n";
    }
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace vfl
