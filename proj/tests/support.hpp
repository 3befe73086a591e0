#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "orag/catalog.hpp"
#include "orag/learner.hpp"
#include "orag/policy.hpp"

namespace orag::testing {

// Small random problem: catalog, query and the correct item.
struct Instance {
  Catalog catalog;
  std::vector<double> query;
  ItemId target;
};

inline Instance random_instance(std::mt19937_64& gen, std::size_t max_items, std::size_t max_dim) {
  std::uniform_int_distribution<std::size_t> items(1, max_items);
  std::uniform_int_distribution<std::size_t> dims(1, max_dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = items(gen);
  const std::size_t d = dims(gen);
  std::vector<CatalogEntry> rows;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(d);
    for (auto& x : v) x = normal(gen);
    rows.push_back({ItemId("i" + std::to_string(i)), std::move(v)});
  }
  std::vector<double> q(d);
  for (auto& x : q) x = normal(gen);
  const auto star = std::uniform_int_distribution<std::size_t>(0, n - 1)(gen);
  return {Catalog(d, std::move(rows)), std::move(q), ItemId("i" + std::to_string(star))};
}

// (p_i - 1{i = i*}) q for every row, row-major.
inline std::vector<double> exact_gradient(const Catalog& catalog, const std::vector<double>& q, const ItemId& target) {
  const auto p = score(q, catalog);
  const std::size_t d = catalog.dim();
  std::vector<double> g(catalog.size() * d);
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const double w = p.probs[i] - (catalog.id_at(i) == target ? 1.0 : 0.0);
    for (std::size_t k = 0; k < d; ++k) g[i * d + k] = w * q[k];
  }
  return g;
}

enum class Estimator { kFull, kChosenOnly };

// Sum over every possible draw i_t of p_{i_t} * g(i_t), with feedback 1{i_t = i*}.
inline std::vector<double> enumerated_expectation(const Catalog& catalog, const std::vector<double>& q,
                                                  const ItemId& target, Estimator which) {
  const auto p = score(q, catalog);
  const std::size_t d = catalog.dim();
  std::vector<double> expected(catalog.size() * d, 0.0);
  for (std::size_t c = 0; c < catalog.size(); ++c) {
    const Feedback fb{catalog.id_at(c), catalog.id_at(c) == target, p.probs[c]};
    const auto g = which == Estimator::kFull ? estimate_gradient_full(p, q, fb) : estimate_gradient_chosen_only(p, q, fb);
    for (std::size_t k = 0; k < g.ids.size(); ++k) {
      const auto row = catalog.index_of(g.ids[k]);
      const auto dir = g.direction(k);
      for (std::size_t j = 0; j < d; ++j) expected[row * d + j] += p.probs[c] * dir[j];
    }
  }
  return expected;
}

// Central differences of -log p_{i*}(q, Theta) in every coordinate of Theta.
inline std::vector<double> finite_difference_gradient(const Catalog& catalog, const std::vector<double>& q,
                                                      const ItemId& target, double h) {
  const std::size_t d = catalog.dim();
  std::vector<double> g(catalog.size() * d);
  auto loss_with = [&](std::size_t i, std::size_t k, double delta) {
    Catalog moved = catalog;
    {
      auto editor = moved.edit();
      editor.row_at(i)[k] += delta;
    }
    return -std::log(score(q, moved).at(target));
  };
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      g[i * d + k] = (loss_with(i, k, h) - loss_with(i, k, -h)) / (2.0 * h);
    }
  }
  return g;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  return a.size() == b.size() ? worst : INFINITY;
}

}  // namespace orag::testing
