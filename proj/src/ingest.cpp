#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "orag/error.hpp"
#include "orag/io.hpp"
#include "orag/snapshot.hpp"

namespace orag {

namespace {

std::vector<std::pair<std::string, std::string>> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    std::replace(text.begin(), text.end(), ',', ' ');
    std::istringstream fields(text);
    std::string query;
    std::string item;
    std::string extra;
    if (!(fields >> query)) continue;  // blank line
    if (!(fields >> item) || (fields >> extra)) {
      throw Error(ErrorCode::kSchemaError,
                  path.string() + " line " + std::to_string(line) + ": expected 'query_id item_id'");
    }
    pairs.emplace_back(std::move(query), std::move(item));
  }
  return pairs;
}

}  // namespace

ReplayDump ingest_embedding_dump(const std::filesystem::path& queries_path, const std::filesystem::path& items_path,
                                 const std::filesystem::path& labels_path, ProjectionMode projection) {
  const VectorTable queries = load_vector_table(queries_path);
  const VectorTable items = load_vector_table(items_path);
  if (queries.dim != items.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "query dim " + std::to_string(queries.dim) + " vs item dim " +
                                                   std::to_string(items.dim));
  }
  Catalog catalog = to_catalog(items, projection);

  std::unordered_map<std::string, std::size_t> query_row;
  for (std::size_t r = 0; r < queries.rows(); ++r) {
    if (!query_row.emplace(queries.ids[r], r).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate query id '" + queries.ids[r] + "'");
    }
  }

  ReplayDump dump{{}, std::move(catalog), {}};
  std::unordered_map<std::string, ItemId> truth;
  for (auto& [query, item] : read_labels(labels_path)) {
    if (!query_row.contains(query)) throw Error(ErrorCode::kUnknownId, "label names unknown query '" + query + "'");
    ItemId id(item);
    if (!dump.catalog.contains(id)) throw Error(ErrorCode::kUnknownId, "label names unknown item '" + item + "'");
    if (!truth.emplace(query, id).second) {
      throw Error(ErrorCode::kSchemaError, "query '" + query + "' has more than one label");
    }
    dump.ground_truth.emplace_back(query, std::move(id));
  }

  for (std::size_t r = 0; r < queries.rows(); ++r) {
    auto found = truth.find(queries.ids[r]);
    if (found == truth.end()) {
      throw Error(ErrorCode::kMissingGroundTruth, "query '" + queries.ids[r] + "' has no label");
    }
    const auto first = queries.values.begin() + static_cast<std::ptrdiff_t>(r * queries.dim);
    ReplayQuery rq;
    rq.query.values.assign(first, first + static_cast<std::ptrdiff_t>(queries.dim));
    rq.query.query_id = queries.ids[r];
    rq.target = found->second;
    dump.stream.push_back(std::move(rq));
  }
  return dump;
}

EpisodeLog run_replay(const ReplayDump& dump, const EpisodeConfig& episode, std::uint64_t seed) {
  if (dump.stream.empty()) throw Error(ErrorCode::kEmptyEvents, "replay stream is empty");
  if (episode.repeat_passes < 1) throw Error(ErrorCode::kInvalidConfig, "repeat_passes: must be at least 1");
  if (episode.variant != Variant::kPlain) {
    throw Error(ErrorCode::kInvalidConfig, "variant: replay runs the plain single-item learner");
  }
  RandomSource rng(seed);
  RandomSource shuffle(seed ^ 0x5DEECE66DULL);
  OnlineLearner learner({episode.schedule, episode.update_mode, episode.gradient});
  Catalog catalog = dump.catalog;
  EpisodeLog log{{}, catalog, catalog, 0.0, std::nullopt};

  std::vector<std::size_t> order(dump.stream.size());
  std::uint64_t t = 0;
  for (std::size_t pass = 0; pass < episode.repeat_passes; ++pass) {
    std::iota(order.begin(), order.end(), 0);
    if (pass > 0) std::shuffle(order.begin(), order.end(), shuffle.engine());
    for (std::size_t index : order) {
      const auto& rq = dump.stream[index];
      ++t;
      double norm = 0.0;
      for (double x : rq.query.values) norm += x * x;
      log.query_norm_bound = std::max(log.query_norm_bound, std::sqrt(norm));
      auto r = learner.step(rq.query, catalog, rng, t, [&](const ItemId& chosen) { return chosen == rq.target; });
      EpisodeRecord rec;
      rec.step = t;
      rec.round = t;
      rec.query_id = rq.query.query_id;
      rec.query = rq.query.values;
      rec.target = rq.target;
      rec.chosen = r.feedback.chosen;
      rec.success = r.feedback.success;
      rec.propensity = r.feedback.propensity;
      rec.eta = r.eta;
      rec.loss = -std::log(r.p.at(rq.target));
      rec.generation = r.generation;
      log.records.push_back(std::move(rec));
    }
  }
  learner.flush(catalog, t);
  log.final_catalog = std::move(catalog);
  return log;
}

}  // namespace orag
