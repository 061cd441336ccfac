#include "vfl/ledger.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "json.hpp"

namespace vfl {

const char* direction_name(Direction dir) {
  return dir == Direction::kUplink ? "uplink" : "downlink";
}

CommLedger::CommLedger(std::vector<std::string> whitelist) : whitelist_(std::move(whitelist)) {}

void CommLedger::record(std::size_t client, const std::string& message_class, Direction dir,
                        std::size_t round, std::size_t scalars) {
  if (!whitelist_.empty() &&
      std::find(whitelist_.begin(), whitelist_.end(), message_class) == whitelist_.end())
    throw std::logic_error("message class '" + message_class +
                           "' is not on this method's wire whitelist");
  if (client >= per_client_.size()) per_client_.resize(client + 1);
  LedgerSeries& series = per_client_[client][message_class];
  if (series.rounds.empty() && series.total_count == 0) series.direction = dir;
  if (series.direction != dir)
    throw std::logic_error("message class '" + message_class + "' recorded in both directions");
  std::size_t b = scalars * kBytesPerScalar;
  if (!series.rounds.empty() && series.rounds.back() == round) {
    series.counts.back() += 1;
    series.bytes.back() += b;
  } else {
    series.rounds.push_back(round);
    series.counts.push_back(1);
    series.bytes.push_back(b);
  }
  series.total_count += 1;
  series.total_bytes += b;
}

std::size_t CommLedger::num_clients() const { return per_client_.size(); }

bool CommLedger::is_eval_class(const std::string& message_class) {
  return message_class.rfind("Eval", 0) == 0;
}

std::size_t CommLedger::client_total_bytes(std::size_t client, Direction dir) const {
  if (client >= per_client_.size()) return 0;
  std::size_t total = 0;
  for (const auto& [name, series] : per_client_[client])
    if (series.direction == dir && !is_eval_class(name)) total += series.total_bytes;
  return total;
}

std::size_t CommLedger::total_bytes(Direction dir) const {
  std::size_t total = 0;
  for (std::size_t c = 0; c < per_client_.size(); ++c) total += client_total_bytes(c, dir);
  return total;
}

const std::map<std::string, LedgerSeries>& CommLedger::client_series(std::size_t client) const {
  if (client >= per_client_.size())
    throw std::out_of_range("ledger has no client " + std::to_string(client));
  return per_client_[client];
}

std::string CommLedger::report_json() const {
  nlohmann::json root = nlohmann::json::object();
  for (std::size_t c = 0; c < per_client_.size(); ++c) {
    char key[16];
    std::snprintf(key, sizeof(key), "client_%04zu", c);
    nlohmann::json classes = nlohmann::json::object();
    for (const auto& [name, series] : per_client_[c]) {
      nlohmann::json per_round = nlohmann::json::array();
      for (std::size_t i = 0; i < series.rounds.size(); ++i)
        per_round.push_back({series.rounds[i], series.counts[i], series.bytes[i]});
      classes[name] = {{"direction", direction_name(series.direction)},
                       {"per_round", per_round},
                       {"total_count", series.total_count},
                       {"total_bytes", series.total_bytes}};
    }
    root[key] = std::move(classes);
  }
  return root.dump(2) + "\n";
}

void CommLedger::write_report(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << report_json();
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

CommLedger CommLedger::from_report_json(const std::string& json) {
  nlohmann::json root = nlohmann::json::parse(json);
  if (!root.is_object()) throw std::runtime_error("ledger report: expected a JSON object");
  CommLedger ledger;
  for (const auto& [key, classes] : root.items()) {
    if (key.rfind("client_", 0) != 0)
      throw std::runtime_error("ledger report: unexpected key '" + key + "'");
    std::size_t client = std::stoul(key.substr(7));
    if (client >= ledger.per_client_.size()) ledger.per_client_.resize(client + 1);
    for (const auto& [name, entry] : classes.items()) {
      LedgerSeries series;
      std::string dir = entry.at("direction").get<std::string>();
      if (dir != "uplink" && dir != "downlink")
        throw std::runtime_error("ledger report: bad direction '" + dir + "'");
      series.direction = dir == "uplink" ? Direction::kUplink : Direction::kDownlink;
      for (const auto& row : entry.at("per_round")) {
        if (!row.is_array() || row.size() != 3)
          throw std::runtime_error("ledger report: per_round rows are [round, count, bytes]");
        series.rounds.push_back(row[0].get<std::size_t>());
        series.counts.push_back(row[1].get<std::size_t>());
        series.bytes.push_back(row[2].get<std::size_t>());
      }
      series.total_count = entry.at("total_count").get<std::size_t>();
      series.total_bytes = entry.at("total_bytes").get<std::size_t>();
      ledger.per_client_[client][name] = std::move(series);
      if (std::find(ledger.whitelist_.begin(), ledger.whitelist_.end(), name) ==
          ledger.whitelist_.end())
        ledger.whitelist_.push_back(name);
    }
  }
  return ledger;
}

CommLedger CommLedger::read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string json((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_report_json(json);
}

}  // namespace vfl
