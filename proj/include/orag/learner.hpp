#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "orag/catalog.hpp"
#include "orag/policy.hpp"

namespace orag {

/// Bandit feedback for one decision.
struct Feedback {
  ItemId chosen;
  bool success = false;
  double propensity = 0.0;  // p_{t,i_t} at decision time
};

/// Per-item update directions for one round (or one batch), in row order.
struct GradientBatch {
  std::size_t dim = 0;
  std::uint64_t round = 0;
  std::vector<ItemId> ids;
  std::vector<double> values;  // ids.size() x dim, row-major

  std::span<const double> direction(std::size_t k) const { return {values.data() + k * dim, dim}; }
  std::span<double> direction(std::size_t k) { return {values.data() + k * dim, dim}; }
};

enum class ScheduleKind { kConstant, kInverseSqrt };

struct LearningRateSchedule {
  ScheduleKind kind = ScheduleKind::kInverseSqrt;
  double c = 1e-5;

  /// eta_t for t >= 1.
  double eta(std::uint64_t t) const;
};

/// Fixed step size that balances the two terms of the regret bound, given
/// ||Theta_1 - Theta*||_F^2 <= theta_bar, p_{t,i*} >= p_min, ||q_t||^2 <= q_bar.
double balanced_step_size(double theta_bar, double p_min, double q_bar, std::uint64_t horizon);

enum class UpdateKind { kFull, kChosenOnly, kBatched };

struct UpdateMode {
  UpdateKind kind = UpdateKind::kFull;
  std::size_t batch_size = 1;  // only meaningful for kBatched

  static UpdateMode full() { return {UpdateKind::kFull, 1}; }
  static UpdateMode chosen_only() { return {UpdateKind::kChosenOnly, 1}; }
  static UpdateMode batched(std::size_t size) { return {UpdateKind::kBatched, size}; }
};

struct GradientOptions {
  /// When set, the importance weight uses max(propensity, floor). This breaks
  /// exact unbiasedness; off by default.
  std::optional<double> propensity_floor;
};

/// g_i = (p_i - 1{i = i_t} 1{success} / p_{i_t}) q for every item.
GradientBatch estimate_gradient_full(const ProbabilityVector& p, std::span<const double> query,
                                     const Feedback& fb, const GradientOptions& options = {});

/// Support {i_t}: g = (1 - 1{success} / p_{i_t}) q.
GradientBatch estimate_gradient_chosen_only(const ProbabilityVector& p, std::span<const double> query,
                                            const Feedback& fb, const GradientOptions& options = {});

struct BatchEvent {
  ProbabilityVector p;
  std::vector<double> query;
  Feedback feedback;
};

/// Mean of per-event full gradients. All events must share a catalog generation.
GradientBatch estimate_gradient_batched(std::span<const BatchEvent> events, const GradientOptions& options = {});

/// theta_i <- project(theta_i - eta g_i) for items in g; others untouched.
/// Projection follows the catalog's mode.
void apply_update(Catalog& catalog, const GradientBatch& g, double eta);

/// Returns whether `chosen` was the right item for this round.
using FeedbackOracle = std::function<bool(const ItemId& chosen)>;

struct LearnerConfig {
  LearningRateSchedule schedule;
  UpdateMode update_mode;
  GradientOptions gradient;
};

/// Everything one decision produced.
struct RoundRecord {
  std::uint64_t t = 0;
  ProbabilityVector p;
  std::vector<ItemId> candidates;  // K-sampled set; just {chosen} for single draws
  Feedback feedback;
  double eta = 0.0;
  std::uint64_t generation = 0;  // catalog generation the decision was made on
  bool applied = false;          // false while a batched update is still pending
};

/// Applies the configured update rule to observed feedback. Batched mode
/// buffers events (all scored against the same catalog) and applies the mean
/// gradient when the buffer fills.
class OnlineLearner {
 public:
  explicit OnlineLearner(LearnerConfig config);

  const LearnerConfig& config() const noexcept { return config_; }
  std::size_t pending() const noexcept { return pending_.size(); }

  /// Estimates the gradient for one decision and updates `catalog` (or buffers
  /// it). Returns true if the catalog changed.
  bool observe(Catalog& catalog, const ProbabilityVector& p, std::span<const double> query,
               const Feedback& fb, std::uint64_t t);

  /// Applies any buffered partial batch. Returns true if the catalog changed.
  bool flush(Catalog& catalog, std::uint64_t t);

  /// score -> sample_one -> oracle -> observe.
  RoundRecord step(const QueryEmbedding& q, Catalog& catalog, RandomSource& rng, std::uint64_t t,
                   const FeedbackOracle& oracle);

 private:
  LearnerConfig config_;
  std::vector<BatchEvent> pending_;
};

/// Single-round convenience wrapper (non-batched modes).
RoundRecord step(const QueryEmbedding& q, Catalog& catalog, RandomSource& rng, const LearnerConfig& config,
                 std::uint64_t t, const FeedbackOracle& oracle);

}  // namespace orag
