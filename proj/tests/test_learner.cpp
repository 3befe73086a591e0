#include <cmath>
#include <random>

#include "checks.hpp"
#include "doctest.h"
#include "orag/learner.hpp"
#include "support.hpp"

using namespace orag;
using orag::testing::Estimator;

namespace {

ProbabilityVector two_items() {
  ProbabilityVector p;
  p.ids = {ItemId("a"), ItemId("b")};
  p.probs = {0.5, 0.5};
  return p;
}

std::vector<double> dir(const GradientBatch& g, const char* id) {
  for (std::size_t k = 0; k < g.ids.size(); ++k) {
    if (g.ids[k] == ItemId(id)) return {g.direction(k).begin(), g.direction(k).end()};
  }
  FAIL("id missing from gradient");
  return {};
}

}  // namespace

TEST_CASE("full gradient examples") {
  const auto p = two_items();
  const std::vector<double> q{1, 0};
  auto g = estimate_gradient_full(p, q, {ItemId("a"), true, 0.5});
  CHECK(dir(g, "a") == std::vector<double>{-1.5, 0});
  CHECK(dir(g, "b") == std::vector<double>{0.5, 0});

  g = estimate_gradient_full(p, q, {ItemId("a"), false, 0.5});
  CHECK(dir(g, "a") == std::vector<double>{0.5, 0});
  CHECK(dir(g, "b") == std::vector<double>{0.5, 0});
}

TEST_CASE("gradient vanishes at a certain correct choice") {
  ProbabilityVector p;
  p.ids = {ItemId("a")};
  p.probs = {1.0};
  const std::vector<double> q{0.4, -2.0};
  const auto full = estimate_gradient_full(p, q, {ItemId("a"), true, 1.0});
  for (double x : full.values) CHECK(x == 0.0);
  const auto chosen = estimate_gradient_chosen_only(p, q, {ItemId("a"), true, 1.0});
  for (double x : chosen.values) CHECK(x == 0.0);
}

TEST_CASE("chosen-only gradient examples") {
  ProbabilityVector p;
  p.ids = {ItemId("a"), ItemId("b")};
  p.probs = {0.25, 0.75};
  auto g = estimate_gradient_chosen_only(p, std::vector<double>{2}, {ItemId("a"), true, 0.25});
  REQUIRE(g.ids.size() == 1);
  CHECK(g.values == std::vector<double>{-6});

  g = estimate_gradient_chosen_only(p, std::vector<double>{2}, {ItemId("b"), false, 0.75});
  CHECK(g.ids == std::vector<ItemId>{ItemId("b")});
  CHECK(g.values == std::vector<double>{2});
}

TEST_CASE("feedback validation") {
  const auto p = two_items();
  const std::vector<double> q{1, 0};
  CHECK_CODE(estimate_gradient_full(p, q, {ItemId("a"), true, 0.4}), ErrorCode::kPropensityMismatch);
  CHECK_CODE(estimate_gradient_full(p, q, {ItemId("a"), true, 0.0}), ErrorCode::kZeroPropensity);
  CHECK_CODE(estimate_gradient_chosen_only(p, q, {ItemId("a"), true, 0.5 + 1e-9}), ErrorCode::kPropensityMismatch);
  CHECK_CODE(estimate_gradient_full(p, q, {ItemId("zz"), true, 0.5}), ErrorCode::kUnknownId);
  CHECK_CODE(estimate_gradient_full(p, std::vector<double>{NAN, 0}, {ItemId("a"), true, 0.5}),
             ErrorCode::kNonFiniteInput);
}

TEST_CASE("propensity floor caps the importance weight") {
  ProbabilityVector p;
  p.ids = {ItemId("a"), ItemId("b")};
  p.probs = {0.01, 0.99};
  GradientOptions options;
  options.propensity_floor = 0.1;
  const auto g = estimate_gradient_chosen_only(p, std::vector<double>{1}, {ItemId("a"), true, 0.01}, options);
  CHECK(g.values[0] == doctest::Approx(1.0 - 10.0));
}

TEST_CASE("both estimators are unbiased by enumeration") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = orag::testing::random_instance(gen, 6, 4);
    const auto exact = orag::testing::exact_gradient(inst.catalog, inst.query, inst.target);
    for (auto which : {Estimator::kFull, Estimator::kChosenOnly}) {
      const auto expected = orag::testing::enumerated_expectation(inst.catalog, inst.query, inst.target, which);
      CHECK(orag::testing::max_abs_diff(expected, exact) <= 1e-10);
    }
  }
}

TEST_CASE("expected gradient matches finite differences of the loss") {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = orag::testing::random_instance(gen, 6, 4);
    const auto expected = orag::testing::enumerated_expectation(inst.catalog, inst.query, inst.target, Estimator::kFull);
    const auto fd = orag::testing::finite_difference_gradient(inst.catalog, inst.query, inst.target, 1e-6);
    CHECK(orag::testing::max_abs_diff(expected, fd) <= 1e-5);
  }
}

TEST_CASE("batched gradient") {
  std::mt19937_64 gen(4);
  const auto inst = orag::testing::random_instance(gen, 5, 3);
  const auto p = score(inst.query, inst.catalog);
  auto event = [&](std::size_t chosen, bool success) {
    return BatchEvent{p, inst.query, {p.ids[chosen], success, p.probs[chosen]}};
  };
  const std::vector<BatchEvent> one{event(0, true)};
  const auto single = estimate_gradient_full(one[0].p, one[0].query, one[0].feedback);
  CHECK(estimate_gradient_batched(one).values == single.values);

  const std::vector<BatchEvent> twice{event(0, true), event(0, true)};
  const auto pair = estimate_gradient_batched(twice);
  for (std::size_t k = 0; k < single.values.size(); ++k) CHECK(pair.values[k] == doctest::Approx(single.values[k]).epsilon(1e-15));

  const std::vector<BatchEvent> mixed{event(0, true), event(p.size() - 1, false), event(0, false)};
  const auto mean = estimate_gradient_batched(mixed);
  std::vector<double> sum(single.values.size(), 0.0);
  for (const auto& e : mixed) {
    const auto g = estimate_gradient_full(e.p, e.query, e.feedback);
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += g.values[k];
  }
  for (std::size_t k = 0; k < sum.size(); ++k) CHECK(std::abs(mean.values[k] - sum[k] / 3.0) <= 1e-14);

  CHECK_CODE(estimate_gradient_batched(std::span<const BatchEvent>{}), ErrorCode::kEmptyBatch);
  auto stale = mixed;
  stale[1].p.generation += 1;
  CHECK_CODE(estimate_gradient_batched(stale), ErrorCode::kGenerationMismatch);
}

TEST_CASE("learning rate schedules") {
  CHECK(LearningRateSchedule{ScheduleKind::kConstant, 0.3}.eta(1000) == 0.3);
  CHECK(LearningRateSchedule{ScheduleKind::kInverseSqrt, 2.0}.eta(4) == 1.0);
  CHECK(LearningRateSchedule{}.eta(1) == 1e-5);
  CHECK_CODE(LearningRateSchedule{}.eta(0), ErrorCode::kInvalidArgument);
  CHECK_CODE((LearningRateSchedule{ScheduleKind::kConstant, 0.0}.eta(1)), ErrorCode::kInvalidArgument);
}

TEST_CASE("balanced step size") {
  const double eta = balanced_step_size(2.0, 0.5, 1.0, 100);
  CHECK(eta == doctest::Approx(std::sqrt(0.5 * 2.0 / (1.0 * 0.5 * 2.0 * 100.0))));
  CHECK(balanced_step_size(2.0, 0.5, 1.0, 400) == doctest::Approx(eta / 2.0));
  CHECK_CODE(balanced_step_size(2.0, 1.0, 1.0, 100), ErrorCode::kInvalidArgument);
  CHECK_CODE(balanced_step_size(2.0, 0.5, 1.0, 0), ErrorCode::kInvalidArgument);
}

TEST_CASE("apply_update") {
  Catalog c(2, {{ItemId("a"), {0, 0}}, {ItemId("b"), {5, 5}}});
  GradientBatch g{2, 1, {ItemId("a")}, {1, 0}};
  apply_update(c, g, 0.1);
  CHECK(c.row(ItemId("a"))[0] == doctest::Approx(-0.1));
  CHECK(c.row(ItemId("b"))[0] == 5.0);
  CHECK(c.generation() == 1);

  GradientBatch zero{2, 2, {ItemId("a"), ItemId("b")}, {0, 0, 0, 0}};
  const std::vector<double> before(c.data().begin(), c.data().end());
  apply_update(c, zero, 0.5);
  CHECK(std::vector<double>(c.data().begin(), c.data().end()) == before);
  CHECK(c.generation() == 2);

  Catalog ball(2, {{ItemId("a"), {1, 0}}}, ProjectionMode::kUnitBall);
  apply_update(ball, GradientBatch{2, 1, {ItemId("a")}, {-10, 0}}, 0.2);
  CHECK(ball.row(ItemId("a"))[0] == 1.0);
  CHECK(ball.row(ItemId("a"))[1] == 0.0);

  CHECK_CODE(apply_update(c, GradientBatch{3, 1, {ItemId("a")}, {0, 0, 0}}, 0.1), ErrorCode::kDimensionMismatch);
  CHECK_CODE(apply_update(c, g, 0.0), ErrorCode::kInvalidArgument);
  CHECK_CODE(apply_update(c, GradientBatch{2, 1, {ItemId("zz")}, {0, 0}}, 0.1), ErrorCode::kUnknownId);
}

TEST_CASE("step on a one-item catalog leaves it unchanged") {
  Catalog c(2, {{ItemId("only"), {0.3, 0.1}}});
  RandomSource rng(1);
  LearnerConfig config;
  config.schedule = {ScheduleKind::kConstant, 0.5};
  const auto r = step({{1.0, 2.0}, "q"}, c, rng, config, 1, [](const ItemId&) { return true; });
  CHECK(r.feedback.chosen == ItemId("only"));
  CHECK(r.feedback.propensity == 1.0);
  CHECK(c.row(ItemId("only"))[0] == 0.3);
  CHECK(c.row(ItemId("only"))[1] == 0.1);
}

TEST_CASE("step is deterministic per seed") {
  auto run = [] {
    std::mt19937_64 gen(10);
    auto inst = orag::testing::random_instance(gen, 6, 3);
    while (inst.catalog.size() < 3) inst = orag::testing::random_instance(gen, 6, 3);
    RandomSource rng(99);
    LearnerConfig config;
    config.schedule = {ScheduleKind::kInverseSqrt, 0.5};
    for (std::uint64_t t = 1; t <= 100; ++t) {
      step({inst.query, "q"}, inst.catalog, rng, config, t, [&](const ItemId& c) { return c == inst.target; });
    }
    return std::vector<double>(inst.catalog.data().begin(), inst.catalog.data().end());
  };
  CHECK(run() == run());
}

TEST_CASE("learning lowers the loss on a misaligned two-item instance") {
  // Item a answers q_a but starts pointing at q_b, and vice versa.
  Catalog c(2, {{ItemId("a"), {0.0, 1.0}}, {ItemId("b"), {1.0, 0.0}}});
  const std::vector<double> qa{1.0, 0.0};
  const std::vector<double> qb{0.0, 1.0};
  auto loss = [&] {
    return -std::log(score(qa, c).at(ItemId("a"))) - std::log(score(qb, c).at(ItemId("b")));
  };
  const double before = loss();
  RandomSource rng(3);
  LearnerConfig config;
  config.schedule = {ScheduleKind::kInverseSqrt, 0.5};
  for (std::uint64_t t = 1; t <= 2000; ++t) {
    const bool use_a = t % 2 == 1;
    const ItemId target(use_a ? "a" : "b");
    step({use_a ? qa : qb, "q"}, c, rng, config, t, [&](const ItemId& chosen) { return chosen == target; });
  }
  CHECK(loss() < before);
}

TEST_CASE("batched learner buffers until the batch fills") {
  std::mt19937_64 gen(12);
  auto inst = orag::testing::random_instance(gen, 6, 3);
  LearnerConfig config;
  config.schedule = {ScheduleKind::kConstant, 0.1};
  config.update_mode = UpdateMode::batched(3);
  OnlineLearner learner(config);
  RandomSource rng(5);
  auto oracle = [&](const ItemId& c) { return c == inst.target; };
  const auto g0 = inst.catalog.generation();
  CHECK_FALSE(learner.step({inst.query, "q"}, inst.catalog, rng, 1, oracle).applied);
  CHECK_FALSE(learner.step({inst.query, "q"}, inst.catalog, rng, 2, oracle).applied);
  CHECK(inst.catalog.generation() == g0);
  CHECK(learner.pending() == 2);
  CHECK(learner.step({inst.query, "q"}, inst.catalog, rng, 3, oracle).applied);
  CHECK(inst.catalog.generation() == g0 + 1);
  CHECK(learner.pending() == 0);

  learner.step({inst.query, "q"}, inst.catalog, rng, 4, oracle);
  CHECK(learner.flush(inst.catalog, 4));
  CHECK_FALSE(learner.flush(inst.catalog, 4));

  CHECK_CODE(step({inst.query, "q"}, inst.catalog, rng, config, 5, oracle), ErrorCode::kInvalidConfig);
  CHECK_CODE(OnlineLearner(LearnerConfig{{}, UpdateMode::batched(0), {}}), ErrorCode::kInvalidConfig);
}

TEST_CASE("chosen-only update touches one row") {
  std::mt19937_64 gen(21);
  auto inst = orag::testing::random_instance(gen, 6, 3);
  while (inst.catalog.size() < 3) inst = orag::testing::random_instance(gen, 6, 3);
  const Catalog before = inst.catalog;
  LearnerConfig config;
  config.schedule = {ScheduleKind::kConstant, 0.1};
  config.update_mode = UpdateMode::chosen_only();
  RandomSource rng(8);
  const auto r = step({inst.query, "q"}, inst.catalog, rng, config, 1, [](const ItemId&) { return false; });
  for (std::size_t i = 0; i < before.size(); ++i) {
    const bool same = std::equal(before.row_at(i).begin(), before.row_at(i).end(), inst.catalog.row_at(i).begin());
    CHECK(same == (before.id_at(i) != r.feedback.chosen));
  }
}
