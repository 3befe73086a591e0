#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "orag/catalog.hpp"
#include "orag/learner.hpp"
#include "orag/policy.hpp"

namespace orag {

/// Picks the final item from K sampled candidates. Must return a member of
/// `candidates`.
using Reranker =
    std::function<ItemId(std::span<const double> query, std::span<const ItemId> candidates, RandomSource& rng)>;

/// Simulation reranker: with probability alpha returns the target when it is
/// among the candidates, otherwise a uniform candidate. `target` reports the
/// current round's correct item (nullopt when unknown).
Reranker make_stub_reranker(double alpha, std::function<std::optional<ItemId>()> target);

/// Uniform choice among the candidates. Consumes no randomness for a singleton.
Reranker make_uniform_reranker();

/// One round with K candidates: sample K without replacement, rerank, then the
/// standard single-item update using the softmax propensity of the final pick.
RoundRecord step_with_rerank(const QueryEmbedding& q, Catalog& catalog, std::size_t k, const Reranker& reranker,
                             RandomSource& rng, OnlineLearner& learner, std::uint64_t t,
                             const FeedbackOracle& oracle);

struct CatalogDelta {
  std::vector<ItemId> added;
  std::vector<ItemId> removed;
  std::uint64_t effective_at = 0;

  bool empty() const noexcept { return added.empty() && removed.empty(); }
};

/// Produces the initial row for an item entering the catalog.
using InitEmbedder = std::function<std::vector<double>(const ItemId& id, RandomSource& rng)>;

/// Applies `delta` (removals first, then additions via `init`) without running a round.
void apply_delta(Catalog& catalog, const CatalogDelta& delta, const InitEmbedder& init, RandomSource& rng);

/// Dynamic catalog round: apply the delta, then the standard step over the
/// current item set.
RoundRecord step_dynamic(const CatalogDelta& delta, const QueryEmbedding& q, Catalog& catalog,
                         const InitEmbedder& init, RandomSource& rng, OnlineLearner& learner, std::uint64_t t,
                         const FeedbackOracle& oracle);

/// Per-hop judge: returns y in {0,1} for (hop index, subquery, chosen item).
using Judge = std::function<bool(std::size_t hop, const QueryEmbedding& subquery, const ItemId& chosen)>;

struct MultiHopRound {
  std::vector<QueryEmbedding> subqueries;
  Judge judge;
};

/// Multi-hop round: each hop scores against the catalog as updated by the
/// previous hop. All hops use eta_t for the task round t. Batched learners are
/// rejected since hop h+1 must see hop h's update.
std::vector<RoundRecord> step_multihop(const MultiHopRound& round, Catalog& catalog, RandomSource& rng,
                                       OnlineLearner& learner, std::uint64_t t);

}  // namespace orag
