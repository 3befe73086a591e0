#include "orag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "orag/error.hpp"

namespace orag {

double cross_entropy_loss(const ProbabilityVector& p, const ItemId& target) { return -std::log(p.at(target)); }

namespace {

struct Problem {
  std::size_t items = 0;
  std::size_t dim = 0;
  std::vector<std::size_t> target_rows;
};

Problem index_events(const Catalog& catalog, std::span<const LabeledEvent> events) {
  Problem problem{catalog.size(), catalog.dim(), {}};
  if (catalog.empty()) throw Error(ErrorCode::kEmptyCatalog, "loss over an empty catalog");
  problem.target_rows.reserve(events.size());
  for (const auto& e : events) {
    if (e.query.size() != catalog.dim()) throw Error(ErrorCode::kDimensionMismatch, "event query dimension");
    problem.target_rows.push_back(catalog.index_of(e.target));
  }
  return problem;
}

// Total loss at `theta` (row-major I x d); accumulates the gradient when asked.
double evaluate(const Problem& problem, std::span<const double> theta, std::span<const LabeledEvent> events,
                std::vector<double>* gradient) {
  const std::size_t items = problem.items;
  const std::size_t d = problem.dim;
  if (gradient) gradient->assign(items * d, 0.0);
  std::vector<double> logits(items);
  double total = 0.0;
  for (std::size_t t = 0; t < events.size(); ++t) {
    const auto& q = events[t].query;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < items; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += q[j] * theta[i * d + j];
      logits[i] = dot;
      top = std::max(top, dot);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < items; ++i) norm += std::exp(logits[i] - top);
    const double log_norm = top + std::log(norm);
    const std::size_t target = problem.target_rows[t];
    total += log_norm - logits[target];
    if (gradient) {
      for (std::size_t i = 0; i < items; ++i) {
        const double coef = std::exp(logits[i] - log_norm) - (i == target ? 1.0 : 0.0);
        double* row = gradient->data() + i * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += coef * q[j];
      }
    }
  }
  return total;
}

}  // namespace

double total_loss(const Catalog& catalog, std::span<const LabeledEvent> events) {
  const auto problem = index_events(catalog, events);
  return evaluate(problem, catalog.data(), events, nullptr);
}

double total_loss_and_gradient(const Catalog& catalog, std::span<const LabeledEvent> events,
                               std::vector<double>& gradient) {
  const auto problem = index_events(catalog, events);
  return evaluate(problem, catalog.data(), events, &gradient);
}

OracleResult train_oracle(std::span<const LabeledEvent> events, const Catalog& init, const OracleOptions& options) {
  if (events.empty()) throw Error(ErrorCode::kEmptyEvents, "oracle training needs at least one event");
  if (!(options.learning_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "oracle learning rate must be > 0");
  const auto problem = index_events(init, events);
  const std::size_t d = problem.dim;
  const double scale = 1.0 / static_cast<double>(events.size());

  std::vector<double> theta(init.data().begin(), init.data().end());
  std::vector<double> gradient;
  std::vector<double> trial(theta.size());
  double loss = evaluate(problem, theta, events, &gradient);
  const double initial_loss = loss;
  double lr = options.learning_rate;

  std::size_t passes = 1;
  while (passes < options.max_passes) {
    for (std::size_t k = 0; k < theta.size(); ++k) trial[k] = theta[k] - lr * scale * gradient[k];
    for (std::size_t i = 0; i < problem.items; ++i) {
      project_row_inplace(std::span<double>(trial.data() + i * d, d), init.projection());
    }
    const double trial_loss = evaluate(problem, trial, events, nullptr);
    ++passes;
    if (!(trial_loss < loss)) {
      lr *= 0.5;
      if (lr < 1e-12) break;
      continue;
    }
    const double improvement = loss - trial_loss;
    theta.swap(trial);
    loss = evaluate(problem, theta, events, &gradient);
    lr *= 1.2;
    if (improvement < options.tolerance) break;
  }

  Catalog result = init;
  {
    auto editor = result.edit();
    for (std::size_t i = 0; i < problem.items; ++i) {
      auto row = editor.row_at(i);
      std::copy_n(theta.begin() + static_cast<std::ptrdiff_t>(i * d), d, row.begin());
    }
  }
  // Re-evaluate on the stored rows (precision or projection may round them).
  loss = total_loss(result, events);
  return {std::move(result), loss, initial_loss, passes};
}

std::vector<LabeledEvent> labeled_events(const EpisodeLog& log) {
  std::vector<LabeledEvent> events;
  events.reserve(log.records.size());
  for (const auto& r : log.records) {
    if (!r.target) {
      throw Error(ErrorCode::kMissingGroundTruth, "record " + std::to_string(r.step) + " has no ground truth");
    }
    events.push_back({r.query, *r.target});
  }
  return events;
}

RegretLedger regret_curve(std::span<const double> online_loss, std::span<const double> oracle_loss) {
  if (online_loss.size() != oracle_loss.size()) {
    throw Error(ErrorCode::kInvalidArgument, "online and oracle loss sequences differ in length");
  }
  RegretLedger ledger;
  ledger.online_loss.assign(online_loss.begin(), online_loss.end());
  ledger.oracle_loss.assign(oracle_loss.begin(), oracle_loss.end());
  ledger.cumulative_regret.reserve(online_loss.size());
  double running = 0.0;
  for (std::size_t t = 0; t < online_loss.size(); ++t) {
    running += online_loss[t] - oracle_loss[t];
    ledger.cumulative_regret.push_back(running);
  }
  return ledger;
}

RegretLedger regret_curve(const EpisodeLog& log, const Catalog& oracle) {
  std::vector<double> online;
  std::vector<double> offline;
  online.reserve(log.records.size());
  offline.reserve(log.records.size());
  for (const auto& r : log.records) {
    if (!r.target || !r.loss) {
      throw Error(ErrorCode::kMissingGroundTruth, "record " + std::to_string(r.step) + " has no ground truth");
    }
    online.push_back(*r.loss);
    offline.push_back(cross_entropy_loss(score(r.query, oracle), *r.target));
  }
  return regret_curve(online, offline);
}

RankedList rank(const ProbabilityVector& p, std::vector<ItemId> relevant) {
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  // p.ids is ascending, so a stable sort leaves ties in id order.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p.probs[a] > p.probs[b]; });
  RankedList list;
  list.order.reserve(order.size());
  for (std::size_t i : order) list.order.push_back(p.ids[i]);
  std::sort(relevant.begin(), relevant.end());
  relevant.erase(std::unique(relevant.begin(), relevant.end()), relevant.end());
  list.relevant = std::move(relevant);
  return list;
}

namespace {

void check_ranked(const RankedList& list, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  if (list.relevant.empty()) throw Error(ErrorCode::kNoRelevantItems, "ranked list has no relevant items");
}

bool is_relevant(const RankedList& list, const ItemId& id) {
  return std::binary_search(list.relevant.begin(), list.relevant.end(), id);
}

}  // namespace

double recall_at_k(const RankedList& list, std::size_t k) {
  check_ranked(list, k);
  const std::size_t depth = std::min(k, list.order.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < depth; ++r) hits += is_relevant(list, list.order[r]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(list.relevant.size());
}

double ndcg_at_k(const RankedList& list, std::size_t k) {
  check_ranked(list, k);
  const std::size_t depth = std::min(k, list.order.size());
  double dcg = 0.0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (is_relevant(list, list.order[r])) dcg += 1.0 / std::log2(static_cast<double>(r + 2));
  }
  double ideal = 0.0;
  const std::size_t ideal_hits = std::min(k, list.relevant.size());
  for (std::size_t r = 0; r < ideal_hits; ++r) ideal += 1.0 / std::log2(static_cast<double>(r + 2));
  return dcg / ideal;
}

std::vector<double> rolling_accuracy(const std::vector<bool>& successes, std::size_t window) {
  if (window < 1) throw Error(ErrorCode::kInvalidArgument, "window must be at least 1");
  if (window > successes.size()) {
    throw Error(ErrorCode::kWindowTooLarge, "window " + std::to_string(window) + " exceeds " +
                                                std::to_string(successes.size()) + " rounds");
  }
  std::vector<double> out;
  out.reserve(successes.size() - window + 1);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < successes.size(); ++t) {
    hits += successes[t] ? 1 : 0;
    if (t >= window) hits -= successes[t - window] ? 1 : 0;
    if (t + 1 >= window) out.push_back(static_cast<double>(hits) / static_cast<double>(window));
  }
  return out;
}

std::vector<bool> success_bits(const EpisodeLog& log) {
  std::vector<bool> bits;
  bits.reserve(log.records.size());
  for (const auto& r : log.records) bits.push_back(r.success);
  return bits;
}

RetrievalSummary evaluate_retrieval(const Catalog& catalog, std::span<const LabeledEvent> events, std::size_t k) {
  if (events.empty()) throw Error(ErrorCode::kEmptyEvents, "no events to evaluate");
  RetrievalSummary summary;
  summary.k = k;
  summary.queries = events.size();
  for (const auto& e : events) {
    const auto list = rank(score(e.query, catalog), {e.target});
    summary.recall += recall_at_k(list, k);
    summary.ndcg += ndcg_at_k(list, k);
    summary.accuracy += list.order.front() == e.target ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(events.size());
  summary.recall /= n;
  summary.ndcg /= n;
  summary.accuracy /= n;
  return summary;
}

}  // namespace orag
