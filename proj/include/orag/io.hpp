#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "orag/catalog.hpp"
#include "orag/metrics.hpp"
#include "orag/simulator.hpp"

namespace orag {

/// Everything a CLI run needs. Loaded from a single JSON object; unknown keys
/// are rejected.
struct RunConfig {
  EpisodeConfig episode;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out;
  std::size_t oracle_passes = 10000;
  double oracle_lr = 1.0;
  std::size_t k = 10;
  std::optional<std::size_t> window;
  // Replay inputs (all three or none).
  std::optional<std::filesystem::path> queries;
  std::optional<std::filesystem::path> items;
  std::optional<std::filesystem::path> labels;
};

/// Keys accepted by parse_config, in documentation order.
std::span<const std::string_view> config_keys();

/// Throws kParseError for malformed JSON and kValidationError (message starts
/// with the field name) for bad or unknown fields.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);

/// One line of the JSONL event log.
struct EventRecord {
  std::uint64_t t = 0;
  std::string query_id;
  std::string chosen;
  bool success = false;
  double propensity = 0.0;
  double eta = 0.0;
  std::optional<double> loss;
  std::optional<std::uint64_t> generation;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

std::vector<EventRecord> to_event_records(const EpisodeLog& log);

void write_event_log(std::ostream& out, std::span<const EventRecord> records);
void write_event_log(const std::filesystem::path& path, std::span<const EventRecord> records);
/// Throws kSchemaError naming the 1-based line, kIoError if unreadable.
std::vector<EventRecord> read_event_log(std::istream& in);
std::vector<EventRecord> read_event_log(const std::filesystem::path& path);

struct ReplayQuery {
  QueryEmbedding query;
  ItemId target;
};

struct ReplayDump {
  std::vector<ReplayQuery> stream;  // query-file order
  Catalog catalog;
  std::vector<std::pair<std::string, ItemId>> ground_truth;  // label-file order
};

/// Queries and items use the snapshot layout; labels hold one
/// "query_id item_id" pair per line (whitespace, comma or tab separated).
ReplayDump ingest_embedding_dump(const std::filesystem::path& queries_path, const std::filesystem::path& items_path,
                                 const std::filesystem::path& labels_path,
                                 ProjectionMode projection = ProjectionMode::kNone);

/// Runs the single-item learner over the dump's stream (cycled repeat_passes
/// times, reshuffled after the first pass).
EpisodeLog run_replay(const ReplayDump& dump, const EpisodeConfig& episode, std::uint64_t seed);

/// Writes via a sibling temp file and rename.
void write_text_atomically(const std::filesystem::path& path, const std::string& contents);

std::string regret_csv(const RegretLedger& ledger);
std::string format_double(double value);

/// Command-line entry point. Exit codes: 0 ok, 1 validation/usage error, 2 runtime error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace orag
