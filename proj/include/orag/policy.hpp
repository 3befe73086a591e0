#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "orag/catalog.hpp"

namespace orag {

struct QueryEmbedding {
  std::vector<double> values;
  std::string query_id;
};

/// Softmax retrieval distribution over the catalog's items, in catalog row order.
struct ProbabilityVector {
  std::vector<ItemId> ids;
  std::vector<double> probs;
  std::uint64_t generation = 0;

  std::size_t size() const noexcept { return probs.size(); }
  /// Probability of `id`; throws kUnknownId if it is not in the support.
  double at(const ItemId& id) const;
  std::size_t index_of(const ItemId& id) const;
};

/// Seeded randomness. Same seed and same call sequence give the same draws.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  /// Uniform on [0, 1).
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Softmax of raw logits with max-logit subtraction. Entries that would
/// underflow to 0 are floored at the smallest positive double.
std::vector<double> softmax(std::span<const double> logits);

/// p_i = exp(q.theta_i) / sum_i' exp(q.theta_i').
ProbabilityVector score(std::span<const double> query, const Catalog& catalog);

/// Inverse-CDF draw over the support in row order; consumes one uniform.
ItemId sample_one(const ProbabilityVector& p, RandomSource& rng);
std::size_t sample_index(std::span<const double> probs, RandomSource& rng);

/// Sequential draws with renormalization (Plackett-Luce order); one uniform
/// per draw. Output is in draw order.
std::vector<ItemId> sample_k_without_replacement(const ProbabilityVector& p, std::size_t k, RandomSource& rng);

}  // namespace orag
