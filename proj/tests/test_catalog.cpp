#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>
#include <thread>

#include "checks.hpp"
#include "doctest.h"
#include "orag/catalog.hpp"
#include "orag/snapshot.hpp"

using namespace orag;

namespace {

ItemId id(const char* s) { return ItemId(s); }

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("create catalog") {
  Catalog c(2, {{id("b"), {1, 0}}, {id("a"), {0, 0}}});
  CHECK(c.size() == 2);
  CHECK(c.dim() == 2);
  CHECK(c.generation() == 0);
  // Rows are ordered by id regardless of input order.
  CHECK(c.id_at(0) == id("a"));
  CHECK(c.row(id("b"))[0] == 1.0);

  CHECK(Catalog(3).empty());
  CHECK_CODE(Catalog(2, {{id("a"), {0, 0, 0}}}), ErrorCode::kDimensionMismatch);
  CHECK_CODE(Catalog(0), ErrorCode::kDimensionMismatch);
  CHECK_CODE(Catalog(1, {{id("a"), {0}}, {id("a"), {1}}}), ErrorCode::kDuplicateId);
}

TEST_CASE("add item") {
  Catalog ball(2, {}, ProjectionMode::kUnitBall);
  ball.add_item(id("c"), std::vector<double>{3, 4});
  CHECK(ball.row(id("c"))[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(ball.row(id("c"))[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(ball.generation() == 1);

  Catalog plain(2);
  plain.add_item(id("c"), std::vector<double>{0.1, 0.2});
  CHECK(plain.row(id("c"))[0] == 0.1);
  CHECK(plain.row(id("c"))[1] == 0.2);
  CHECK_CODE(plain.add_item(id("c"), std::vector<double>{0, 0}), ErrorCode::kDuplicateId);
  CHECK_CODE(plain.add_item(id("d"), std::vector<double>{0}), ErrorCode::kDimensionMismatch);
  CHECK_CODE(plain.add_item(id("d"), std::vector<double>{NAN, 0}), ErrorCode::kNonFiniteInput);
  CHECK(plain.generation() == 1);
}

TEST_CASE("remove item and id retirement") {
  Catalog c(2, {{id("a"), {0, 0}}, {id("b"), {1, 0}}});
  c.remove_item(id("b"));
  CHECK(c.size() == 1);
  CHECK_FALSE(c.contains(id("b")));
  CHECK(c.is_retired(id("b")));
  CHECK(c.generation() == 1);
  CHECK_CODE(c.add_item(id("b"), std::vector<double>{0, 0}), ErrorCode::kIdRetired);
  CHECK_CODE(c.remove_item(id("b")), ErrorCode::kUnknownId);
  CHECK_CODE(Catalog(2).remove_item(id("a")), ErrorCode::kUnknownId);
  CHECK_CODE(c.index_of(id("zz")), ErrorCode::kUnknownId);
}

TEST_CASE("project_row") {
  const std::vector<double> big{3, 4};
  const std::vector<double> small{0.3, 0.4};
  CHECK(project_row(big, ProjectionMode::kUnitBall) == std::vector<double>{0.6, 0.8});
  CHECK(project_row(small, ProjectionMode::kUnitBall) == small);
  CHECK(project_row(big, ProjectionMode::kNone) == big);
  CHECK_CODE(project_row(std::vector<double>{INFINITY, 0}, ProjectionMode::kNone), ErrorCode::kNonFiniteInput);
}

TEST_CASE("project_row is idempotent") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> normal(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + trial % 7);
    for (auto& x : v) x = normal(gen);
    const auto once = project_row(v, ProjectionMode::kUnitBall);
    const auto twice = project_row(once, ProjectionMode::kUnitBall);
    for (std::size_t k = 0; k < v.size(); ++k) CHECK(std::abs(once[k] - twice[k]) <= 1e-15);
    CHECK(project_row(project_row(v, ProjectionMode::kNone), ProjectionMode::kNone) == v);
  }
}

TEST_CASE("unit ball invariant survives random add/remove/edit sequences") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> normal(0.0, 4.0);
  Catalog c(3, {}, ProjectionMode::kUnitBall);
  std::uint64_t last_generation = 0;
  int next = 0;
  for (int op = 0; op < 500; ++op) {
    const auto kind = gen() % 3;
    if (kind == 0 || c.empty()) {
      std::vector<double> v{normal(gen), normal(gen), normal(gen)};
      c.add_item(ItemId("x" + std::to_string(next++)), v);
    } else if (kind == 1) {
      c.remove_item(c.id_at(gen() % c.size()));
    } else {
      auto editor = c.edit();
      auto row = editor.row_at(gen() % c.size());
      for (auto& x : row) x += normal(gen);
    }
    CHECK(c.generation() > last_generation);
    last_generation = c.generation();
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(norm(c.row_at(i)) <= 1.0 + 1e-12);
    for (std::size_t i = 1; i < c.size(); ++i) CHECK(c.id_at(i - 1) < c.id_at(i));
  }
}

TEST_CASE("f32 storage rounds through float") {
  Catalog c(1, {{id("a"), {0.1}}}, ProjectionMode::kNone, Precision::kF32);
  CHECK(c.row(id("a"))[0] == static_cast<double>(0.1f));
  CHECK(c.row(id("a"))[0] != 0.1);
}

TEST_CASE("second writer is rejected") {
  Catalog c(1, {{id("a"), {0}}});
  auto editor = c.edit();
  CHECK_CODE(c.add_item(id("b"), std::vector<double>{1}), ErrorCode::kConcurrentMutation);
  CHECK_CODE(c.edit(), ErrorCode::kConcurrentMutation);
}

TEST_CASE("concurrent writers never both succeed") {
  for (int trial = 0; trial < 50; ++trial) {
    Catalog c(1);
    std::atomic<int> done{0};
    std::atomic<int> rejected{0};
    auto writer = [&] {
      try {
        auto editor = c.edit();
        done.fetch_add(1);
        while (done.load() < 2 && rejected.load() == 0) std::this_thread::yield();
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kConcurrentMutation) rejected.fetch_add(1);
        done.fetch_add(1);
      }
    };
    std::thread a(writer);
    std::thread b(writer);
    a.join();
    b.join();
    // The first writer holds the slot until the other has tried.
    CHECK(done.load() == 2);
    CHECK(rejected.load() == 1);
  }
}

TEST_CASE("frobenius distance") {
  Catalog a(2, {{id("a"), {0, 0}}, {id("b"), {1, 1}}});
  Catalog b(2, {{id("a"), {3, 4}}, {id("b"), {1, 1}}});
  CHECK(frobenius_distance(a, b) == doctest::Approx(5.0));
  CHECK(frobenius_distance(a, a) == 0.0);
}

TEST_CASE("snapshot round trip is bitwise") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<CatalogEntry> rows;
  for (int i = 0; i < 17; ++i) {
    std::vector<double> v(5);
    for (auto& x : v) x = normal(gen);
    rows.push_back({ItemId("item/" + std::to_string(i) + "-\xc3\xa9"), v});
  }
  const Catalog original(5, rows);
  std::stringstream buffer;
  write_snapshot(buffer, original);
  const auto back = read_snapshot(buffer);
  REQUIRE(back.size() == original.size());
  CHECK(std::equal(back.ids().begin(), back.ids().end(), original.ids().begin()));
  CHECK(std::memcmp(back.data().data(), original.data().data(), original.data().size() * sizeof(double)) == 0);
}

TEST_CASE("snapshot f32 mode") {
  const Catalog original(2, {{id("a"), {0.1, -2.5}}}, ProjectionMode::kNone, Precision::kF32);
  std::stringstream buffer;
  write_snapshot(buffer, original);
  // 4 magic + 4 version + 8 rows + 8 dim + 1 dtype + (4 + 1) id + 2 * 4 values
  CHECK(buffer.str().size() == 38);
  const auto back = read_snapshot(buffer);
  CHECK(back.precision() == Precision::kF32);
  CHECK(back.row(id("a"))[0] == static_cast<double>(0.1f));
  CHECK(back.row(id("a"))[1] == -2.5);
}

TEST_CASE("snapshot format errors") {
  std::stringstream bad_magic("XXXX");
  CHECK_CODE(read_snapshot(bad_magic), ErrorCode::kFormatError);

  const Catalog c(1, {{id("a"), {1.0}}});
  std::stringstream buffer;
  write_snapshot(buffer, c);
  const auto bytes = buffer.str();
  for (std::size_t cut : {std::size_t{6}, std::size_t{20}, bytes.size() - 1}) {
    std::stringstream truncated(bytes.substr(0, cut));
    CHECK_CODE(read_snapshot(truncated), ErrorCode::kFormatError);
  }
  auto wrong_version = bytes;
  wrong_version[4] = 9;
  std::stringstream v(wrong_version);
  CHECK_CODE(read_snapshot(v), ErrorCode::kFormatError);
  auto wrong_dtype = bytes;
  wrong_dtype[24] = 7;
  std::stringstream dt(wrong_dtype);
  CHECK_CODE(read_snapshot(dt), ErrorCode::kFormatError);
}

TEST_CASE("failed snapshot write leaves the target untouched") {
  const auto dir = std::filesystem::temp_directory_path() / "orag_test_catalog_atomic";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto path = dir / "cat.orag";
  const Catalog c(1, {{id("a"), {1.0}}});
  save_snapshot(path, c);
  const auto before = std::filesystem::file_size(path);

  CHECK_THROWS(write_file_atomically(path, [](std::ostream& out) {
    out << "partial";
    throw Error(ErrorCode::kIoError, "simulated failure");
  }));
  CHECK(std::filesystem::file_size(path) == before);
  CHECK_FALSE(std::filesystem::exists(dir / "cat.orag.tmp"));
  CHECK(load_snapshot(path).row(id("a"))[0] == 1.0);
  std::filesystem::remove_all(dir);
}
