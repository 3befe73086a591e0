#include "orag/variants.hpp"

#include <algorithm>
#include <unordered_set>

#include "orag/error.hpp"

namespace orag {

Reranker make_stub_reranker(double alpha, std::function<std::optional<ItemId>()> target) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "reranker accuracy must lie in [0, 1]");
  }
  return [alpha, target = std::move(target)](std::span<const double>, std::span<const ItemId> candidates,
                                             RandomSource& rng) -> ItemId {
    if (candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "reranker received no candidates");
    // One uniform for the coin, one for the fallback pick, every call.
    const bool informed = rng.uniform() < alpha;
    const std::size_t fallback = rng.index(candidates.size());
    if (informed) {
      if (auto truth = target()) {
        if (std::find(candidates.begin(), candidates.end(), *truth) != candidates.end()) return *truth;
      }
    }
    return candidates[fallback];
  };
}

Reranker make_uniform_reranker() {
  return [](std::span<const double>, std::span<const ItemId> candidates, RandomSource& rng) -> ItemId {
    if (candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "reranker received no candidates");
    // A singleton needs no draw, so K=1 keeps the plain learner's random stream.
    if (candidates.size() == 1) return candidates.front();
    return candidates[rng.index(candidates.size())];
  };
}

RoundRecord step_with_rerank(const QueryEmbedding& q, Catalog& catalog, std::size_t k, const Reranker& reranker,
                             RandomSource& rng, OnlineLearner& learner, std::uint64_t t,
                             const FeedbackOracle& oracle) {
  if (t == 0) throw Error(ErrorCode::kInvalidArgument, "round index starts at 1");
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "K must be at least 1");
  RoundRecord record;
  record.t = t;
  record.generation = catalog.generation();
  record.p = score(q.values, catalog);
  record.candidates = sample_k_without_replacement(record.p, k, rng);
  ItemId chosen = reranker(q.values, record.candidates, rng);
  if (std::find(record.candidates.begin(), record.candidates.end(), chosen) == record.candidates.end()) {
    throw Error(ErrorCode::kUnknownId, "reranker returned '" + chosen.str() + "' outside the candidate set");
  }
  record.feedback.propensity = record.p.at(chosen);
  record.feedback.chosen = std::move(chosen);
  record.feedback.success = oracle(record.feedback.chosen);
  record.eta = learner.config().schedule.eta(t);
  record.applied = learner.observe(catalog, record.p, q.values, record.feedback, t);
  return record;
}

void apply_delta(Catalog& catalog, const CatalogDelta& delta, const InitEmbedder& init, RandomSource& rng) {
  std::unordered_set<ItemId, ItemIdHash> removed(delta.removed.begin(), delta.removed.end());
  for (const auto& id : delta.added) {
    if (removed.contains(id)) {
      throw Error(ErrorCode::kInvalidArgument, "item '" + id.str() + "' is both added and removed");
    }
  }
  for (const auto& id : delta.removed) {
    if (!catalog.contains(id)) throw Error(ErrorCode::kUnknownId, "cannot remove absent item '" + id.str() + "'");
  }
  for (const auto& id : delta.removed) catalog.remove_item(id);
  for (const auto& id : delta.added) catalog.add_item(id, init(id, rng));
}

RoundRecord step_dynamic(const CatalogDelta& delta, const QueryEmbedding& q, Catalog& catalog,
                         const InitEmbedder& init, RandomSource& rng, OnlineLearner& learner, std::uint64_t t,
                         const FeedbackOracle& oracle) {
  if (delta.effective_at != t) {
    throw Error(ErrorCode::kInvalidArgument, "delta is effective at round " + std::to_string(delta.effective_at) +
                                                 ", not " + std::to_string(t));
  }
  if (!delta.empty()) {
    // A pending batch was scored against the old item set.
    learner.flush(catalog, t);
    apply_delta(catalog, delta, init, rng);
  }
  return learner.step(q, catalog, rng, t, oracle);
}

std::vector<RoundRecord> step_multihop(const MultiHopRound& round, Catalog& catalog, RandomSource& rng,
                                       OnlineLearner& learner, std::uint64_t t) {
  if (round.subqueries.empty()) throw Error(ErrorCode::kInvalidArgument, "multi-hop round has no subqueries");
  if (learner.config().update_mode.kind == UpdateKind::kBatched) {
    throw Error(ErrorCode::kInvalidConfig, "multi-hop rounds need per-hop updates, not batched");
  }
  for (const auto& sub : round.subqueries) {
    if (sub.values.size() != catalog.dim()) {
      throw Error(ErrorCode::kDimensionMismatch, "subquery dimension does not match catalog");
    }
  }
  std::vector<RoundRecord> hops;
  hops.reserve(round.subqueries.size());
  for (std::size_t h = 0; h < round.subqueries.size(); ++h) {
    const auto& sub = round.subqueries[h];
    hops.push_back(learner.step(sub, catalog, rng, t,
                                [&](const ItemId& chosen) { return round.judge(h, sub, chosen); }));
  }
  return hops;
}

}  // namespace orag
