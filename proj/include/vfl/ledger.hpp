#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace vfl {

enum class Direction { kUplink, kDownlink };
const char* direction_name(Direction dir);

// Every transmitted scalar is a 4-byte float on the wire.
constexpr std::size_t kBytesPerScalar = 4;

// One (client, message-class) traffic series.
struct LedgerSeries {
  Direction direction = Direction::kUplink;
  // Parallel arrays, one entry per round the class was sent in.
  std::vector<std::size_t> rounds;
  std::vector<std::size_t> counts;  // messages recorded in that round
  std::vector<std::size_t> bytes;   // bytes recorded in that round
  std::size_t total_count = 0;
  std::size_t total_bytes = 0;
};

// Byte-exact per-client, per-message-class traffic accounting. A ledger is
// constructed with the method's message-class whitelist; recording any other
// class throws, which is what structurally guarantees that model parameters
// (never whitelisted) cannot be serialized. Classes whose name starts with
// "Eval" carry evaluation traffic and are excluded from training totals.
class CommLedger {
 public:
  CommLedger() = default;
  explicit CommLedger(std::vector<std::string> whitelist);

  // Records one message of `scalars` 4-byte scalars.
  void record(std::size_t client, const std::string& message_class, Direction dir,
              std::size_t round, std::size_t scalars);

  const std::vector<std::string>& whitelist() const { return whitelist_; }
  std::size_t num_clients() const;

  // Training traffic only (Eval* classes excluded).
  std::size_t client_total_bytes(std::size_t client, Direction dir) const;
  std::size_t total_bytes(Direction dir) const;  // summed over clients

  // Per-client series, keyed by message class (sorted keys).
  const std::map<std::string, LedgerSeries>& client_series(std::size_t client) const;

  // {"client_0000": {message_class: {direction, per_round: [[round, count,
  // bytes], ...], total_bytes, total_count}}, ...}
  std::string report_json() const;
  void write_report(const std::string& path) const;

  // Rebuilds a ledger from report_json output (report-time analyses read
  // persisted run artifacts). The whitelist becomes the set of classes seen.
  static CommLedger from_report_json(const std::string& json);
  static CommLedger read_report(const std::string& path);

 private:
  static bool is_eval_class(const std::string& message_class);

  std::vector<std::string> whitelist_;
  std::vector<std::map<std::string, LedgerSeries>> per_client_;
};

}  // namespace vfl
