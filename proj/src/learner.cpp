#include "orag/learner.hpp"

#include <cmath>

#include "orag/error.hpp"

namespace orag {

namespace {

constexpr double kPropensityTolerance = 1e-12;

// Validates the feedback against p and returns the chosen row index.
std::size_t check_feedback(const ProbabilityVector& p, std::span<const double> query, const Feedback& fb) {
  if (p.size() == 0) throw Error(ErrorCode::kEmptyCatalog, "empty probability vector");
  const std::size_t chosen = p.index_of(fb.chosen);
  if (!(fb.propensity > 0.0)) {
    throw Error(ErrorCode::kZeroPropensity, "propensity of '" + fb.chosen.str() + "' is not positive");
  }
  if (std::abs(fb.propensity - p.probs[chosen]) > kPropensityTolerance) {
    throw Error(ErrorCode::kPropensityMismatch, "propensity " + std::to_string(fb.propensity) +
                                                    " does not match p=" + std::to_string(p.probs[chosen]));
  }
  for (double x : query) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kNonFiniteInput, "query has a non-finite entry");
  }
  return chosen;
}

double importance_weight(const Feedback& fb, const GradientOptions& options) {
  if (!fb.success) return 0.0;
  const double denom = options.propensity_floor ? std::max(fb.propensity, *options.propensity_floor) : fb.propensity;
  return 1.0 / denom;
}

}  // namespace

double LearningRateSchedule::eta(std::uint64_t t) const {
  if (t == 0) throw Error(ErrorCode::kInvalidArgument, "round index starts at 1");
  if (!(c > 0.0)) throw Error(ErrorCode::kInvalidArgument, "schedule constant must be positive");
  switch (kind) {
    case ScheduleKind::kConstant: return c;
    case ScheduleKind::kInverseSqrt: return c / std::sqrt(static_cast<double>(t));
  }
  return c;
}

double balanced_step_size(double theta_bar, double p_min, double q_bar, std::uint64_t horizon) {
  if (!(theta_bar > 0.0) || !(p_min > 0.0 && p_min < 1.0) || !(q_bar > 0.0) || horizon == 0) {
    throw Error(ErrorCode::kInvalidArgument, "step size needs theta_bar>0, p_min in (0,1), q_bar>0, T>=1");
  }
  return std::sqrt(p_min * theta_bar /
                   (q_bar * (1.0 - p_min) * (1.0 + 2.0 * p_min) * static_cast<double>(horizon)));
}

GradientBatch estimate_gradient_full(const ProbabilityVector& p, std::span<const double> query,
                                     const Feedback& fb, const GradientOptions& options) {
  const std::size_t chosen = check_feedback(p, query, fb);
  const double weight = importance_weight(fb, options);
  const std::size_t d = query.size();
  GradientBatch g;
  g.dim = d;
  g.ids = p.ids;
  g.values.resize(p.size() * d);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double coef = p.probs[i] - (i == chosen ? weight : 0.0);
    auto row = g.direction(i);
    for (std::size_t j = 0; j < d; ++j) row[j] = coef * query[j];
  }
  return g;
}

GradientBatch estimate_gradient_chosen_only(const ProbabilityVector& p, std::span<const double> query,
                                            const Feedback& fb, const GradientOptions& options) {
  check_feedback(p, query, fb);
  const double coef = 1.0 - importance_weight(fb, options);
  GradientBatch g;
  g.dim = query.size();
  g.ids = {fb.chosen};
  g.values.resize(query.size());
  for (std::size_t j = 0; j < query.size(); ++j) g.values[j] = coef * query[j];
  return g;
}

GradientBatch estimate_gradient_batched(std::span<const BatchEvent> events, const GradientOptions& options) {
  if (events.empty()) throw Error(ErrorCode::kEmptyBatch, "batched gradient needs at least one event");
  const auto generation = events.front().p.generation;
  GradientBatch total;
  for (const auto& event : events) {
    if (event.p.generation != generation || event.p.ids != events.front().p.ids) {
      throw Error(ErrorCode::kGenerationMismatch, "batch mixes catalog generations");
    }
    auto g = estimate_gradient_full(event.p, event.query, event.feedback, options);
    if (total.values.empty()) {
      total = std::move(g);
      continue;
    }
    if (g.dim != total.dim) throw Error(ErrorCode::kDimensionMismatch, "batch mixes query dimensions");
    for (std::size_t k = 0; k < total.values.size(); ++k) total.values[k] += g.values[k];
  }
  const double scale = 1.0 / static_cast<double>(events.size());
  for (double& x : total.values) x *= scale;
  return total;
}

void apply_update(Catalog& catalog, const GradientBatch& g, double eta) {
  if (!(eta > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive");
  if (g.dim != catalog.dim() || g.values.size() != g.ids.size() * g.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "gradient dimension does not match catalog");
  }
  for (double x : g.values) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kNonFiniteInput, "gradient has a non-finite entry");
  }
  std::vector<std::size_t> rows;
  rows.reserve(g.ids.size());
  for (const auto& id : g.ids) rows.push_back(catalog.index_of(id));

  auto editor = catalog.edit();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto row = editor.row_at(rows[k]);
    const auto dir = g.direction(k);
    for (std::size_t j = 0; j < g.dim; ++j) row[j] -= eta * dir[j];
  }
}

OnlineLearner::OnlineLearner(LearnerConfig config) : config_(std::move(config)) {
  if (config_.update_mode.kind == UpdateKind::kBatched && config_.update_mode.batch_size == 0) {
    throw Error(ErrorCode::kInvalidConfig, "batch size must be positive");
  }
}

bool OnlineLearner::observe(Catalog& catalog, const ProbabilityVector& p, std::span<const double> query,
                            const Feedback& fb, std::uint64_t t) {
  switch (config_.update_mode.kind) {
    case UpdateKind::kFull:
      apply_update(catalog, estimate_gradient_full(p, query, fb, config_.gradient), config_.schedule.eta(t));
      return true;
    case UpdateKind::kChosenOnly:
      apply_update(catalog, estimate_gradient_chosen_only(p, query, fb, config_.gradient),
                   config_.schedule.eta(t));
      return true;
    case UpdateKind::kBatched:
      check_feedback(p, query, fb);
      pending_.push_back({p, std::vector<double>(query.begin(), query.end()), fb});
      if (pending_.size() >= config_.update_mode.batch_size) return flush(catalog, t);
      return false;
  }
  return false;
}

bool OnlineLearner::flush(Catalog& catalog, std::uint64_t t) {
  if (pending_.empty()) return false;
  auto g = estimate_gradient_batched(pending_, config_.gradient);
  g.round = t;
  pending_.clear();
  apply_update(catalog, g, config_.schedule.eta(t));
  return true;
}

RoundRecord OnlineLearner::step(const QueryEmbedding& q, Catalog& catalog, RandomSource& rng, std::uint64_t t,
                                const FeedbackOracle& oracle) {
  if (t == 0) throw Error(ErrorCode::kInvalidArgument, "round index starts at 1");
  RoundRecord record;
  record.t = t;
  record.generation = catalog.generation();
  record.p = score(q.values, catalog);
  const std::size_t chosen = sample_index(record.p.probs, rng);
  record.feedback.chosen = record.p.ids[chosen];
  record.feedback.propensity = record.p.probs[chosen];
  record.feedback.success = oracle(record.feedback.chosen);
  record.candidates = {record.feedback.chosen};
  record.eta = config_.schedule.eta(t);
  record.applied = observe(catalog, record.p, q.values, record.feedback, t);
  return record;
}

RoundRecord step(const QueryEmbedding& q, Catalog& catalog, RandomSource& rng, const LearnerConfig& config,
                 std::uint64_t t, const FeedbackOracle& oracle) {
  if (config.update_mode.kind == UpdateKind::kBatched) {
    throw Error(ErrorCode::kInvalidConfig, "batched updates need an OnlineLearner to hold the buffer");
  }
  OnlineLearner learner(config);
  return learner.step(q, catalog, rng, t, oracle);
}

}  // namespace orag
