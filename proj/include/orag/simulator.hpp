#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "orag/catalog.hpp"
#include "orag/learner.hpp"
#include "orag/policy.hpp"

namespace orag {

enum class Variant { kPlain, kRerank, kDynamic, kMultihop };

struct EpisodeConfig {
  std::uint64_t T = 1;
  std::size_t I = 1;
  std::size_t d = 1;
  std::size_t K = 1;
  Variant variant = Variant::kPlain;
  UpdateMode update_mode;
  LearningRateSchedule schedule;
  ProjectionMode projection = ProjectionMode::kNone;
  GradientOptions gradient;
  std::size_t repeat_passes = 1;

  double query_noise = 0.0;     // sigma: query = normalize(latent + sigma * N(0, I))
  double init_noise = 0.0;      // sigma_init for the starting catalog
  double reranker_alpha = 1.0;  // rerank variant only

  std::optional<std::uint64_t> shift_round;  // rounds >= shift_round use the remapped targets
  double shift_fraction = 0.5;

  std::size_t hops = 2;  // multihop variant only

  double withheld_fraction = 0.5;              // dynamic variant: share of items absent at t=1
  std::optional<std::uint64_t> insert_round;   // defaults to total_rounds()/2
  std::optional<double> insert_noise;          // defaults to init_noise

  std::uint64_t total_rounds() const noexcept { return T * repeat_passes; }
  std::size_t hops_per_round() const noexcept { return variant == Variant::kMultihop ? hops : 1; }
  /// Throws kInvalidConfig naming the offending field.
  void validate() const;
};

struct LabeledQuery {
  QueryEmbedding query;
  std::size_t cluster = 0;
  ItemId target;
};

/// Synthetic online environment: unit-norm latent item directions, and a
/// fixed list of T tasks (each H queries) drawn from those directions.
class Environment {
 public:
  Environment(EpisodeConfig config, std::uint64_t seed);

  const EpisodeConfig& config() const noexcept { return config_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t dim() const noexcept { return config_.d; }
  std::size_t num_items() const noexcept { return ids_.size(); }
  std::span<const ItemId> item_ids() const noexcept { return ids_; }
  std::span<const double> latent(std::size_t item) const { return {latent_.data() + item * config_.d, config_.d}; }

  /// Item that answers queries from `cluster` at round t (after any shift).
  const ItemId& target(std::size_t cluster, std::uint64_t t) const;
  /// Queries of round t (1-based, up to total_rounds()); throws kUndefinedRound.
  std::vector<LabeledQuery> round(std::uint64_t t) const;
  /// Single-query rounds; hop 0 of round(t).
  LabeledQuery query(std::uint64_t t) const { return round(t).front(); }
  /// A fresh noisy query from `cluster`, independent of the task list.
  std::vector<double> sample_query(std::size_t cluster, RandomSource& rng) const;

 private:
  EpisodeConfig config_;
  std::uint64_t seed_;
  std::vector<ItemId> ids_;
  std::vector<double> latent_;                // I x d
  std::vector<std::size_t> shifted_target_;   // cluster -> item index after the shift
  std::vector<std::size_t> task_clusters_;    // T x H
  std::vector<std::vector<double>> task_queries_;
  std::vector<std::vector<std::size_t>> pass_order_;  // per pass, base task order
};

Environment make_environment(const EpisodeConfig& config, std::uint64_t seed);

/// Row i = normalize(latent_i + init_noise * N(0, I)); init_noise = 0 copies the latents.
Catalog initial_catalog(const Environment& env, double init_noise);
/// Same rule restricted to the listed item indices.
Catalog initial_catalog(const Environment& env, double init_noise, std::span<const std::size_t> items);

/// success = (chosen == i*_t) for single-query rounds.
bool feedback_oracle(const Environment& env, std::uint64_t t, const ItemId& chosen);

struct EpisodeRecord {
  std::uint64_t step = 0;   // strictly increasing across the log
  std::uint64_t round = 0;  // task round t (equal to step unless multihop)
  std::size_t hop = 0;
  std::string query_id;
  std::vector<double> query;
  std::optional<ItemId> target;  // set when the correct item is in the catalog
  ItemId chosen;
  bool success = false;
  double propensity = 0.0;
  double eta = 0.0;
  std::optional<double> loss;  // -log p_{i*} under the decision-time catalog
  std::uint64_t generation = 0;
};

struct InsertionProbe {
  double mean_probability = 0.0;         // added items on their own queries, right after insertion
  double counterfactual_probability = 0.0;  // same rows inserted into the t=1 catalog
};

struct EpisodeLog {
  std::vector<EpisodeRecord> records;
  Catalog initial;
  Catalog final_catalog;
  double query_norm_bound = 0.0;  // max ||q_t|| over the stream
  std::optional<InsertionProbe> insertion;
};

/// Runs the configured variant over every round of the environment. The
/// starting catalog is initial_catalog(env, config.init_noise) unless given.
EpisodeLog run_episode(const Environment& env, const EpisodeConfig& episode);
EpisodeLog run_episode(const Environment& env, const EpisodeConfig& episode, Catalog start);

std::string format_item_id(std::size_t index, std::size_t count);

}  // namespace orag
