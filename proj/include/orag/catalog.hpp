#pragma once

#include <atomic>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace orag {

/// Stable identity of a catalog item (tool, document, function).
class ItemId {
 public:
  ItemId() = default;
  explicit ItemId(std::string value) : value_(std::move(value)) {}

  const std::string& str() const noexcept { return value_; }

  friend bool operator==(const ItemId&, const ItemId&) = default;
  friend auto operator<=>(const ItemId&, const ItemId&) = default;

 private:
  std::string value_;
};

struct ItemIdHash {
  std::size_t operator()(const ItemId& id) const noexcept { return std::hash<std::string>{}(id.str()); }
};

enum class ProjectionMode { kNone, kUnitBall };

/// Storage precision. In kF32 mode every stored value is rounded to the
/// nearest float on write; arithmetic still happens in double.
enum class Precision : std::uint8_t { kF64 = 0, kF32 = 1 };

/// Projects `v` according to `mode`. Unit ball: v if ||v|| <= 1, else v / ||v||.
/// Throws kNonFiniteInput for NaN/inf entries.
std::vector<double> project_row(std::span<const double> v, ProjectionMode mode);

/// In-place variant of project_row used on the update path.
void project_row_inplace(std::span<double> v, ProjectionMode mode);

struct CatalogEntry {
  ItemId id;
  std::vector<double> embedding;
};

/// The live item-embedding matrix. Rows are kept dense and contiguous, sorted
/// by ItemId, so row index order is the deterministic item order used by the
/// sampling policy.
///
/// Single writer: a mutation that starts while another is in flight throws
/// kConcurrentMutation. Readers identify the snapshot they saw by generation().
class Catalog {
 public:
  class RowEditor;

  Catalog(std::size_t dim, std::vector<CatalogEntry> items = {},
          ProjectionMode projection = ProjectionMode::kNone, Precision precision = Precision::kF64);

  Catalog(const Catalog& other);
  Catalog& operator=(const Catalog& other);
  Catalog(Catalog&& other) noexcept;
  Catalog& operator=(Catalog&& other) noexcept;
  ~Catalog() = default;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  std::uint64_t generation() const noexcept { return generation_; }
  ProjectionMode projection() const noexcept { return projection_; }
  Precision precision() const noexcept { return precision_; }

  /// Ids in row order (ascending).
  std::span<const ItemId> ids() const noexcept { return ids_; }
  const ItemId& id_at(std::size_t index) const { return ids_.at(index); }

  bool contains(const ItemId& id) const;
  bool is_retired(const ItemId& id) const { return retired_.contains(id); }
  /// Row index of `id`; throws kUnknownId.
  std::size_t index_of(const ItemId& id) const;

  std::span<const double> row(const ItemId& id) const { return row_at(index_of(id)); }
  std::span<const double> row_at(std::size_t index) const;
  /// Row-major I x d values.
  std::span<const double> data() const noexcept { return values_; }

  void add_item(const ItemId& id, std::span<const double> init);
  void remove_item(const ItemId& id);

  /// Opens a batch of row edits. The editor holds the writer slot; on
  /// destruction it projects every touched row and bumps the generation once.
  RowEditor edit();

  /// Frobenius distance between two catalogs over the same id set.
  friend double frobenius_distance(const Catalog& a, const Catalog& b);

  class RowEditor {
   public:
    RowEditor(const RowEditor&) = delete;
    RowEditor& operator=(const RowEditor&) = delete;
    RowEditor(RowEditor&& other) noexcept;
    RowEditor& operator=(RowEditor&&) = delete;
    ~RowEditor();

    std::span<double> row_at(std::size_t index);

   private:
    friend class Catalog;
    explicit RowEditor(Catalog* owner);

    Catalog* owner_;
    std::vector<bool> touched_;
  };

 private:
  class WriterSlot;

  void store(std::span<double> dst, std::span<const double> src) const;
  void finish_row(std::span<double> row) const;

  std::size_t dim_;
  ProjectionMode projection_;
  Precision precision_;
  std::vector<ItemId> ids_;
  std::vector<double> values_;
  std::unordered_set<ItemId, ItemIdHash> retired_;
  std::uint64_t generation_ = 0;
  std::atomic<bool> writer_active_{false};
};

}  // namespace orag
