#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "orag/catalog.hpp"
#include "orag/policy.hpp"
#include "orag/simulator.hpp"

namespace orag {

/// -ln p_{i*}.
double cross_entropy_loss(const ProbabilityVector& p, const ItemId& target);

/// One fully labelled interaction (q_t, i*_t).
struct LabeledEvent {
  std::vector<double> query;
  ItemId target;
};

/// Sum over events of -log p_{i*}(q, theta).
double total_loss(const Catalog& catalog, std::span<const LabeledEvent> events);

/// Full-information gradient of total_loss: for each row i,
/// sum_t (p_{t,i} - 1{i = i*_t}) q_t. Row-major I x d. Returns the loss too.
double total_loss_and_gradient(const Catalog& catalog, std::span<const LabeledEvent> events,
                               std::vector<double>& gradient);

struct OracleOptions {
  std::size_t max_passes = 10000;
  double learning_rate = 1.0;  // initial step on the mean loss; adapted by backtracking
  double tolerance = 1e-9;     // stop when a pass improves the total loss by less than this
};

struct OracleResult {
  Catalog theta;
  double loss = 0.0;  // total loss at theta
  double initial_loss = 0.0;
  std::size_t passes = 0;
};

/// Approximates the hindsight optimum argmin_Theta sum_t -log p_{i*_t}(q_t, Theta)
/// by deterministic full-batch gradient descent from `init`. A step that would
/// raise the loss is retried at half the step size; accepted steps grow it.
OracleResult train_oracle(std::span<const LabeledEvent> events, const Catalog& init, const OracleOptions& options = {});

/// Ground-truth events in log order. Throws kMissingGroundTruth if any record
/// lacks a target.
std::vector<LabeledEvent> labeled_events(const EpisodeLog& log);

struct RegretLedger {
  std::vector<double> online_loss;
  std::vector<double> oracle_loss;
  std::vector<double> cumulative_regret;

  std::size_t size() const noexcept { return online_loss.size(); }
  double final_regret() const { return cumulative_regret.empty() ? 0.0 : cumulative_regret.back(); }
};

RegretLedger regret_curve(std::span<const double> online_loss, std::span<const double> oracle_loss);
/// Online losses come from the log; oracle losses are evaluated at `oracle`.
RegretLedger regret_curve(const EpisodeLog& log, const Catalog& oracle);

/// Items by descending probability, ties by ItemId.
struct RankedList {
  std::vector<ItemId> order;
  std::vector<ItemId> relevant;  // sorted
};

RankedList rank(const ProbabilityVector& p, std::vector<ItemId> relevant);

double recall_at_k(const RankedList& list, std::size_t k);
/// Binary gain, discount 1/log2(rank + 1), ranks from 1.
double ndcg_at_k(const RankedList& list, std::size_t k);

/// Windowed means of success bits; one value per full window.
std::vector<double> rolling_accuracy(const std::vector<bool>& successes, std::size_t window);
std::vector<bool> success_bits(const EpisodeLog& log);

struct RetrievalSummary {
  std::size_t k = 0;
  double recall = 0.0;
  double ndcg = 0.0;
  double accuracy = 0.0;  // top-1 of the static ranking
  std::size_t queries = 0;
};

/// Averages R@k, N@k and top-1 accuracy of the catalog's ranking over the events.
RetrievalSummary evaluate_retrieval(const Catalog& catalog, std::span<const LabeledEvent> events, std::size_t k);

}  // namespace orag
