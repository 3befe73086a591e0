#include "orag/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "orag/error.hpp"
#include "orag/variants.hpp"

namespace orag {

namespace {

// Independent stream per purpose so that, e.g., changing the init noise does
// not perturb the query stream.
enum class Stream : std::uint64_t {
  kLatent = 1,
  kTasks = 2,
  kShift = 3,
  kPasses = 4,
  kInitNoise = 5,
  kPolicy = 6,
  kWithheld = 7,
  kInsertNoise = 8,
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream)) ^ index);
}

void normalize(std::span<double> v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) return;
  for (double& x : v) x /= norm;
}

std::vector<double> noisy_direction(std::span<const double> base, double noise, RandomSource& rng) {
  std::vector<double> out(base.begin(), base.end());
  if (noise == 0.0) return out;
  for (double& x : out) x += noise * rng.normal();
  normalize(out);
  return out;
}

void fail(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kInvalidConfig, field + ": " + why);
}

}  // namespace

std::string format_item_id(std::size_t index, std::size_t count) {
  std::size_t width = 4;
  for (std::size_t n = count; n >= 10000; n /= 10) ++width;
  std::string digits = std::to_string(index);
  return "item" + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

void EpisodeConfig::validate() const {
  if (T < 1) fail("T", "must be at least 1");
  if (I < 1) fail("I", "must be at least 1");
  if (d < 1) fail("d", "must be at least 1");
  if (K < 1 || K > I) fail("K", "must satisfy 1 <= K <= I");
  if (repeat_passes < 1) fail("repeat_passes", "must be at least 1");
  if (!(query_noise >= 0.0) || !std::isfinite(query_noise)) fail("sigma", "must be finite and >= 0");
  if (!(init_noise >= 0.0) || !std::isfinite(init_noise)) fail("sigma_init", "must be finite and >= 0");
  if (!(reranker_alpha >= 0.0 && reranker_alpha <= 1.0)) fail("alpha", "must lie in [0, 1]");
  if (!(schedule.c > 0.0) || !std::isfinite(schedule.c)) fail("c", "must be positive");
  if (update_mode.kind == UpdateKind::kBatched && update_mode.batch_size < 1) fail("batch_size", "must be >= 1");
  if (!(shift_fraction >= 0.0 && shift_fraction <= 1.0)) fail("shift_fraction", "must lie in [0, 1]");
  if (shift_round && *shift_round < 1) fail("shift_round", "must be >= 1");
  if (variant == Variant::kMultihop) {
    if (hops < 1) fail("hops", "must be at least 1");
    if (hops > I) fail("hops", "cannot exceed I (hops use distinct clusters)");
    if (update_mode.kind == UpdateKind::kBatched) fail("update_mode", "multihop needs per-hop updates");
  }
  if (variant == Variant::kDynamic) {
    if (!(withheld_fraction >= 0.0 && withheld_fraction < 1.0)) fail("withheld_fraction", "must lie in [0, 1)");
    if (insert_round && (*insert_round < 1 || *insert_round > total_rounds())) {
      fail("insert_round", "must be within the episode");
    }
    if (insert_noise && !(*insert_noise >= 0.0)) fail("insert_noise", "must be >= 0");
  }
}

Environment::Environment(EpisodeConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
  config_.validate();
  const std::size_t items = config_.I;
  const std::size_t d = config_.d;

  for (std::size_t i = 0; i < items; ++i) ids_.emplace_back(format_item_id(i, items));

  RandomSource latent_rng(derive_seed(seed, Stream::kLatent));
  latent_.resize(items * d);
  for (std::size_t i = 0; i < items; ++i) {
    std::span<double> row(latent_.data() + i * d, d);
    double norm = 0.0;
    do {
      for (double& x : row) x = latent_rng.normal();
      norm = 0.0;
      for (double x : row) norm += x * x;
    } while (norm == 0.0);
    normalize(row);
  }

  shifted_target_.resize(items);
  std::iota(shifted_target_.begin(), shifted_target_.end(), 0);
  if (config_.shift_round && items > 1) {
    RandomSource shift_rng(derive_seed(seed, Stream::kShift));
    std::vector<std::size_t> order(items);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shift_rng.engine());
    const auto moved = static_cast<std::size_t>(std::llround(config_.shift_fraction * static_cast<double>(items)));
    if (moved == 1) {
      shifted_target_[order[0]] = order[1];
    } else if (moved > 1) {
      // Rotate targets among the moved clusters so each one changes.
      for (std::size_t k = 0; k < moved; ++k) shifted_target_[order[k]] = order[(k + 1) % moved];
    }
  }

  const std::size_t hops = config_.hops_per_round();
  RandomSource task_rng(derive_seed(seed, Stream::kTasks));
  task_clusters_.reserve(config_.T * hops);
  task_queries_.reserve(config_.T * hops);
  std::vector<std::size_t> pool(items);
  for (std::uint64_t k = 0; k < config_.T; ++k) {
    if (hops == 1) {
      task_clusters_.push_back(task_rng.index(items));
    } else {
      // Distinct clusters per chain: partial Fisher-Yates.
      std::iota(pool.begin(), pool.end(), 0);
      for (std::size_t h = 0; h < hops; ++h) {
        const std::size_t pick = h + task_rng.index(items - h);
        std::swap(pool[h], pool[pick]);
        task_clusters_.push_back(pool[h]);
      }
    }
    for (std::size_t h = 0; h < hops; ++h) {
      task_queries_.push_back(sample_query(task_clusters_[k * hops + h], task_rng));
    }
  }

  RandomSource pass_rng(derive_seed(seed, Stream::kPasses));
  for (std::size_t pass = 0; pass < config_.repeat_passes; ++pass) {
    std::vector<std::size_t> order(config_.T);
    std::iota(order.begin(), order.end(), 0);
    if (pass > 0) std::shuffle(order.begin(), order.end(), pass_rng.engine());
    pass_order_.push_back(std::move(order));
  }
}

std::vector<double> Environment::sample_query(std::size_t cluster, RandomSource& rng) const {
  return noisy_direction(latent(cluster), config_.query_noise, rng);
}

const ItemId& Environment::target(std::size_t cluster, std::uint64_t t) const {
  if (cluster >= ids_.size()) throw Error(ErrorCode::kUnknownId, "cluster index out of range");
  if (config_.shift_round && t >= *config_.shift_round) return ids_[shifted_target_[cluster]];
  return ids_[cluster];
}

std::vector<LabeledQuery> Environment::round(std::uint64_t t) const {
  if (t < 1 || t > config_.total_rounds()) {
    throw Error(ErrorCode::kUndefinedRound, "round " + std::to_string(t) + " is outside 1.." +
                                                std::to_string(config_.total_rounds()));
  }
  const std::uint64_t pass = (t - 1) / config_.T;
  const std::size_t task = pass_order_[pass][(t - 1) % config_.T];
  const std::size_t hops = config_.hops_per_round();
  std::vector<LabeledQuery> out;
  out.reserve(hops);
  for (std::size_t h = 0; h < hops; ++h) {
    const std::size_t slot = task * hops + h;
    LabeledQuery q;
    q.query.values = task_queries_[slot];
    q.query.query_id = "q" + std::to_string(task) + (hops > 1 ? "h" + std::to_string(h) : "");
    q.cluster = task_clusters_[slot];
    q.target = target(q.cluster, t);
    out.push_back(std::move(q));
  }
  return out;
}

Environment make_environment(const EpisodeConfig& config, std::uint64_t seed) { return Environment(config, seed); }

Catalog initial_catalog(const Environment& env, double init_noise, std::span<const std::size_t> items) {
  if (!(init_noise >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "sigma_init: must be >= 0");
  std::vector<CatalogEntry> entries;
  entries.reserve(items.size());
  for (std::size_t i : items) {
    if (i >= env.num_items()) throw Error(ErrorCode::kUnknownId, "item index out of range");
    RandomSource rng(derive_seed(env.seed(), Stream::kInitNoise, i));
    entries.push_back({env.item_ids()[i], noisy_direction(env.latent(i), init_noise, rng)});
  }
  return Catalog(env.dim(), std::move(entries), env.config().projection);
}

Catalog initial_catalog(const Environment& env, double init_noise) {
  std::vector<std::size_t> all(env.num_items());
  std::iota(all.begin(), all.end(), 0);
  return initial_catalog(env, init_noise, all);
}

bool feedback_oracle(const Environment& env, std::uint64_t t, const ItemId& chosen) {
  return chosen == env.query(t).target;
}

namespace {

void check_compatible(const Environment& env, const EpisodeConfig& episode) {
  episode.validate();
  const auto& base = env.config();
  if (episode.I != base.I) fail("I", "episode and environment disagree");
  if (episode.d != base.d) fail("d", "episode and environment disagree");
  if (episode.T != base.T) fail("T", "episode and environment disagree");
  if (episode.repeat_passes != base.repeat_passes) fail("repeat_passes", "episode and environment disagree");
  if (episode.hops_per_round() != base.hops_per_round()) fail("hops", "episode and environment disagree");
}

EpisodeRecord make_record(const RoundRecord& r, const LabeledQuery& lq, std::uint64_t step, std::size_t hop) {
  EpisodeRecord rec;
  rec.step = step;
  rec.round = r.t;
  rec.hop = hop;
  rec.query_id = lq.query.query_id;
  rec.query = lq.query.values;
  rec.chosen = r.feedback.chosen;
  rec.success = r.feedback.success;
  rec.propensity = r.feedback.propensity;
  rec.eta = r.eta;
  rec.generation = r.generation;
  auto it = std::lower_bound(r.p.ids.begin(), r.p.ids.end(), lq.target);
  if (it != r.p.ids.end() && *it == lq.target) {
    rec.target = lq.target;
    rec.loss = -std::log(r.p.probs[static_cast<std::size_t>(it - r.p.ids.begin())]);
  }
  return rec;
}

double mean_probability_of(const Catalog& catalog, const ItemId& item, std::span<const std::vector<double>> queries) {
  double total = 0.0;
  for (const auto& q : queries) total += score(q, catalog).at(item);
  return queries.empty() ? 0.0 : total / static_cast<double>(queries.size());
}

}  // namespace

EpisodeLog run_episode(const Environment& env, const EpisodeConfig& episode) {
  return run_episode(env, episode, initial_catalog(env, episode.init_noise));
}

EpisodeLog run_episode(const Environment& env, const EpisodeConfig& episode, Catalog start) {
  check_compatible(env, episode);
  if (start.dim() != env.dim()) throw Error(ErrorCode::kDimensionMismatch, "start catalog dimension");

  const std::uint64_t total = episode.total_rounds();
  RandomSource rng(derive_seed(env.seed(), Stream::kPolicy));
  OnlineLearner learner({episode.schedule, episode.update_mode, episode.gradient});

  // Dynamic variant: hold back a random share of the items until insert_round.
  std::vector<ItemId> withheld;
  std::vector<std::size_t> withheld_index;
  Catalog catalog = std::move(start);
  if (episode.variant == Variant::kDynamic) {
    RandomSource pick(derive_seed(env.seed(), Stream::kWithheld));
    std::vector<std::size_t> order(env.num_items());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), pick.engine());
    const auto count = static_cast<std::size_t>(
        std::floor(episode.withheld_fraction * static_cast<double>(env.num_items())));
    withheld_index.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(withheld_index.begin(), withheld_index.end());
    for (std::size_t i : withheld_index) withheld.push_back(env.item_ids()[i]);

    std::vector<CatalogEntry> kept;
    for (std::size_t r = 0; r < catalog.size(); ++r) {
      if (std::binary_search(withheld.begin(), withheld.end(), catalog.id_at(r))) continue;
      auto row = catalog.row_at(r);
      kept.push_back({catalog.id_at(r), std::vector<double>(row.begin(), row.end())});
    }
    catalog = Catalog(catalog.dim(), std::move(kept), catalog.projection(), catalog.precision());
  }

  EpisodeLog log{{}, catalog, catalog, 0.0, std::nullopt};
  log.records.reserve(total * episode.hops_per_round());

  const std::uint64_t insert_round = episode.insert_round.value_or(std::max<std::uint64_t>(1, total / 2));
  const double insert_noise = episode.insert_noise.value_or(episode.init_noise);
  InitEmbedder embed = [&](const ItemId& id, RandomSource&) {
    const std::size_t i = static_cast<std::size_t>(
        std::lower_bound(env.item_ids().begin(), env.item_ids().end(), id) - env.item_ids().begin());
    RandomSource noise(derive_seed(env.seed(), Stream::kInsertNoise, i));
    return noisy_direction(env.latent(i), insert_noise, noise);
  };

  std::optional<ItemId> current_target;
  Reranker reranker = make_stub_reranker(episode.reranker_alpha, [&] { return current_target; });

  std::uint64_t step = 0;
  for (std::uint64_t t = 1; t <= total; ++t) {
    const auto queries = env.round(t);
    for (const auto& lq : queries) {
      double norm = 0.0;
      for (double x : lq.query.values) norm += x * x;
      log.query_norm_bound = std::max(log.query_norm_bound, std::sqrt(norm));
    }
    const LabeledQuery& first = queries.front();
    auto oracle = [&](const ItemId& chosen) { return chosen == first.target; };

    switch (episode.variant) {
      case Variant::kPlain: {
        auto r = learner.step(first.query, catalog, rng, t, oracle);
        log.records.push_back(make_record(r, first, ++step, 0));
        break;
      }
      case Variant::kRerank: {
        current_target = first.target;
        auto r = step_with_rerank(first.query, catalog, episode.K, reranker, rng, learner, t, oracle);
        log.records.push_back(make_record(r, first, ++step, 0));
        break;
      }
      case Variant::kDynamic: {
        CatalogDelta delta;
        delta.effective_at = t;
        if (t == insert_round && !withheld.empty()) {
          delta.added = withheld;
          // Probe: each added item's probability on its own queries, now and
          // in a catalog that had received the same insertion at t=1.
          std::unordered_map<std::size_t, std::vector<std::vector<double>>> own_queries;
          for (std::uint64_t s = 1; s <= total; ++s) {
            const auto lq = env.query(s);
            if (std::binary_search(withheld.begin(), withheld.end(), lq.target)) {
              own_queries[static_cast<std::size_t>(
                  std::lower_bound(withheld.begin(), withheld.end(), lq.target) - withheld.begin())]
                  .push_back(lq.query.values);
            }
          }
          learner.flush(catalog, t);
          apply_delta(catalog, delta, embed, rng);
          delta.added.clear();

          // Same membership as now, but the retained rows are still at t=1.
          Catalog baseline = log.initial;
          for (const auto& id : withheld) baseline.add_item(id, catalog.row(id));
          double now = 0.0;
          double counterfactual = 0.0;
          std::size_t probed = 0;
          for (std::size_t k = 0; k < withheld.size(); ++k) {
            auto found = own_queries.find(k);
            if (found == own_queries.end()) continue;
            now += mean_probability_of(catalog, withheld[k], found->second);
            counterfactual += mean_probability_of(baseline, withheld[k], found->second);
            ++probed;
          }
          if (probed > 0) {
            log.insertion = InsertionProbe{now / static_cast<double>(probed),
                                           counterfactual / static_cast<double>(probed)};
          }
        }
        auto r = step_dynamic(delta, first.query, catalog, embed, rng, learner, t, oracle);
        log.records.push_back(make_record(r, first, ++step, 0));
        break;
      }
      case Variant::kMultihop: {
        MultiHopRound round;
        for (const auto& lq : queries) round.subqueries.push_back(lq.query);
        round.judge = [&](std::size_t hop, const QueryEmbedding&, const ItemId& chosen) {
          return chosen == queries[hop].target;
        };
        auto hops = step_multihop(round, catalog, rng, learner, t);
        for (std::size_t h = 0; h < hops.size(); ++h) {
          log.records.push_back(make_record(hops[h], queries[h], ++step, h));
        }
        break;
      }
    }
  }
  learner.flush(catalog, total);
  log.final_catalog = std::move(catalog);
  return log;
}

}  // namespace orag
