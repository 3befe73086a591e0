#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "orag/error.hpp"
#include "orag/io.hpp"
#include "orag/snapshot.hpp"

namespace orag {

namespace {

using nlohmann::ordered_json;

constexpr std::string_view kRequired[] = {"t", "query_id", "chosen", "success", "propensity", "eta"};
constexpr std::string_view kOptional[] = {"loss", "generation"};

[[noreturn]] void schema(std::size_t line, const std::string& why) {
  throw Error(ErrorCode::kSchemaError, "line " + std::to_string(line) + ": " + why);
}

EventRecord parse_record(const std::string& text, std::size_t line) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error&) {
    schema(line, "not valid JSON");
  }
  if (!j.is_object()) schema(line, "expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::find(std::begin(kRequired), std::end(kRequired), key) != std::end(kRequired) ||
                       std::find(std::begin(kOptional), std::end(kOptional), key) != std::end(kOptional);
    if (!known) schema(line, "unexpected key '" + key + "'");
  }
  for (std::string_view key : kRequired) {
    if (!j.contains(std::string(key))) schema(line, "missing key '" + std::string(key) + "'");
  }
  EventRecord r;
  const auto& t = j["t"];
  if (!t.is_number_unsigned()) schema(line, "t must be a non-negative integer");
  r.t = t.get<std::uint64_t>();
  if (!j["query_id"].is_string()) schema(line, "query_id must be a string");
  r.query_id = j["query_id"].get<std::string>();
  if (!j["chosen"].is_string()) schema(line, "chosen must be a string");
  r.chosen = j["chosen"].get<std::string>();
  if (!j["success"].is_boolean()) schema(line, "success must be a boolean");
  r.success = j["success"].get<bool>();
  if (!j["propensity"].is_number()) schema(line, "propensity must be a number");
  r.propensity = j["propensity"].get<double>();
  if (!(r.propensity > 0.0 && r.propensity <= 1.0)) schema(line, "propensity must lie in (0, 1]");
  if (!j["eta"].is_number()) schema(line, "eta must be a number");
  r.eta = j["eta"].get<double>();
  if (j.contains("loss")) {
    if (!j["loss"].is_number()) schema(line, "loss must be a number");
    r.loss = j["loss"].get<double>();
  }
  if (j.contains("generation")) {
    if (!j["generation"].is_number_unsigned()) schema(line, "generation must be a non-negative integer");
    r.generation = j["generation"].get<std::uint64_t>();
  }
  return r;
}

}  // namespace

std::vector<EventRecord> to_event_records(const EpisodeLog& log) {
  std::vector<EventRecord> out;
  out.reserve(log.records.size());
  for (const auto& r : log.records) {
    out.push_back({r.step, r.query_id, r.chosen.str(), r.success, r.propensity, r.eta, r.loss, r.generation});
  }
  return out;
}

void write_event_log(std::ostream& out, std::span<const EventRecord> records) {
  std::uint64_t previous = 0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    if (k > 0 && r.t <= previous) {
      throw Error(ErrorCode::kSchemaError, "record " + std::to_string(k + 1) + ": t must strictly increase");
    }
    previous = r.t;
    ordered_json j;
    j["t"] = r.t;
    j["query_id"] = r.query_id;
    j["chosen"] = r.chosen;
    j["success"] = r.success;
    j["propensity"] = r.propensity;
    j["eta"] = r.eta;
    if (r.loss) j["loss"] = *r.loss;
    if (r.generation) j["generation"] = *r.generation;
    out << j.dump() << '\n';
  }
}

void write_event_log(const std::filesystem::path& path, std::span<const EventRecord> records) {
  write_file_atomically(path, [&](std::ostream& out) { write_event_log(out, records); });
}

std::vector<EventRecord> read_event_log(std::istream& in) {
  std::vector<EventRecord> records;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) schema(line, "empty line");
    auto record = parse_record(text, line);
    if (!records.empty() && record.t <= records.back().t) schema(line, "t must strictly increase");
    records.push_back(std::move(record));
  }
  if (in.bad()) throw Error(ErrorCode::kIoError, "read failed");
  return records;
}

std::vector<EventRecord> read_event_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return read_event_log(in);
}

void write_text_atomically(const std::filesystem::path& path, const std::string& contents) {
  write_file_atomically(path, [&](std::ostream& out) { out << contents; });
}

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::string regret_csv(const RegretLedger& ledger) {
  std::ostringstream out;
  out << "t,online_loss,oracle_loss,cum_regret\n";
  for (std::size_t t = 0; t < ledger.size(); ++t) {
    out << (t + 1) << ',' << format_double(ledger.online_loss[t]) << ',' << format_double(ledger.oracle_loss[t])
        << ',' << format_double(ledger.cumulative_regret[t]) << '\n';
  }
  return out.str();
}

}  // namespace orag
