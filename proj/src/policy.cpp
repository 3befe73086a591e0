#include "orag/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "orag/error.hpp"

namespace orag {

double ProbabilityVector::at(const ItemId& id) const { return probs[index_of(id)]; }

std::size_t ProbabilityVector::index_of(const ItemId& id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) {
    throw Error(ErrorCode::kUnknownId, "item '" + id.str() + "' not in probability support");
  }
  return static_cast<std::size_t>(it - ids.begin());
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw Error(ErrorCode::kEmptyCatalog, "softmax over zero items");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& x : out) x = std::max(x / total, std::numeric_limits<double>::denorm_min());
  return out;
}

ProbabilityVector score(std::span<const double> query, const Catalog& catalog) {
  if (catalog.empty()) throw Error(ErrorCode::kEmptyCatalog, "cannot score against an empty catalog");
  if (query.size() != catalog.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "query has length " + std::to_string(query.size()) +
                                                   ", catalog dim is " + std::to_string(catalog.dim()));
  }
  for (double x : query) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kNonFiniteInput, "query has a non-finite entry");
  }
  const std::size_t d = catalog.dim();
  const auto data = catalog.data();
  std::vector<double> logits(catalog.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += query[j] * data[i * d + j];
    logits[i] = dot;
  }
  for (double x : logits) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kNonFiniteInput, "non-finite logit");
  }
  ProbabilityVector p;
  p.ids.assign(catalog.ids().begin(), catalog.ids().end());
  p.probs = softmax(logits);
  p.generation = catalog.generation();
  return p;
}

std::size_t sample_index(std::span<const double> probs, RandomSource& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  // Rounding left the total a hair below u; fall back to the last positive entry.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

ItemId sample_one(const ProbabilityVector& p, RandomSource& rng) {
  if (p.probs.empty()) throw Error(ErrorCode::kEmptyCatalog, "cannot sample from an empty distribution");
  return p.ids[sample_index(p.probs, rng)];
}

std::vector<ItemId> sample_k_without_replacement(const ProbabilityVector& p, std::size_t k, RandomSource& rng) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "K must be at least 1");
  if (k > p.size()) {
    throw Error(ErrorCode::kKTooLarge,
                "K=" + std::to_string(k) + " exceeds " + std::to_string(p.size()) + " items");
  }
  std::vector<double> weights = p.probs;
  std::vector<bool> taken(weights.size(), false);
  std::vector<ItemId> out;
  out.reserve(k);
  for (std::size_t draw = 0; draw < k; ++draw) {
    if (draw == 0) {
      // The first slot is exactly a sample_one draw.
      const std::size_t first = sample_index(weights, rng);
      out.push_back(p.ids[first]);
      weights[first] = 0.0;
      taken[first] = true;
      continue;
    }
    double total = 0.0;
    for (double w : weights) total += w;
    const double target = rng.uniform() * total;
    double cumulative = 0.0;
    std::size_t chosen = weights.size();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] == 0.0) continue;
      cumulative += weights[i];
      chosen = i;
      if (target < cumulative) break;
    }
    // Only zero-mass items left: take them in row order.
    if (chosen == weights.size()) {
      chosen = static_cast<std::size_t>(std::find(taken.begin(), taken.end(), false) - taken.begin());
    }
    out.push_back(p.ids[chosen]);
    weights[chosen] = 0.0;
    taken[chosen] = true;
  }
  return out;
}

}  // namespace orag
