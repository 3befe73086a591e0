#include "orag/catalog.hpp"

#include <algorithm>
#include <cmath>

#include "orag/error.hpp"

namespace orag {

namespace {

void require_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::kNonFiniteInput, "vector contains a non-finite entry");
    }
  }
}

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

}  // namespace

void project_row_inplace(std::span<double> v, ProjectionMode mode) {
  require_finite(v);
  if (mode == ProjectionMode::kNone) return;
  const double norm = l2_norm(v);
  if (norm <= 1.0) return;
  for (double& x : v) x /= norm;
}

std::vector<double> project_row(std::span<const double> v, ProjectionMode mode) {
  std::vector<double> out(v.begin(), v.end());
  project_row_inplace(out, mode);
  return out;
}

// Holds the writer flag for the duration of one mutation.
class Catalog::WriterSlot {
 public:
  explicit WriterSlot(std::atomic<bool>& flag) : flag_(flag) {
    if (flag_.exchange(true, std::memory_order_acquire)) {
      throw Error(ErrorCode::kConcurrentMutation, "catalog already has an active writer");
    }
  }
  ~WriterSlot() { flag_.store(false, std::memory_order_release); }
  WriterSlot(const WriterSlot&) = delete;
  WriterSlot& operator=(const WriterSlot&) = delete;

 private:
  std::atomic<bool>& flag_;
};

Catalog::Catalog(std::size_t dim, std::vector<CatalogEntry> items, ProjectionMode projection,
                 Precision precision)
    : dim_(dim), projection_(projection), precision_(precision) {
  if (dim == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "catalog dimension must be at least 1");
  }
  std::sort(items.begin(), items.end(),
            [](const CatalogEntry& a, const CatalogEntry& b) { return a.id < b.id; });
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (k > 0 && items[k].id == items[k - 1].id) {
      throw Error(ErrorCode::kDuplicateId, "duplicate item id '" + items[k].id.str() + "'");
    }
    if (items[k].embedding.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "item '" + items[k].id.str() + "' has length " +
                      std::to_string(items[k].embedding.size()) + ", expected " + std::to_string(dim));
    }
  }
  ids_.reserve(items.size());
  values_.resize(items.size() * dim);
  for (std::size_t k = 0; k < items.size(); ++k) {
    ids_.push_back(std::move(items[k].id));
    std::span<double> dst(values_.data() + k * dim, dim);
    store(dst, items[k].embedding);
    finish_row(dst);
  }
}

Catalog::Catalog(const Catalog& other)
    : dim_(other.dim_),
      projection_(other.projection_),
      precision_(other.precision_),
      ids_(other.ids_),
      values_(other.values_),
      retired_(other.retired_),
      generation_(other.generation_) {}

Catalog& Catalog::operator=(const Catalog& other) {
  if (this == &other) return *this;
  WriterSlot slot(writer_active_);
  dim_ = other.dim_;
  projection_ = other.projection_;
  precision_ = other.precision_;
  ids_ = other.ids_;
  values_ = other.values_;
  retired_ = other.retired_;
  generation_ = other.generation_;
  return *this;
}

Catalog::Catalog(Catalog&& other) noexcept
    : dim_(other.dim_),
      projection_(other.projection_),
      precision_(other.precision_),
      ids_(std::move(other.ids_)),
      values_(std::move(other.values_)),
      retired_(std::move(other.retired_)),
      generation_(other.generation_) {}

Catalog& Catalog::operator=(Catalog&& other) noexcept {
  dim_ = other.dim_;
  projection_ = other.projection_;
  precision_ = other.precision_;
  ids_ = std::move(other.ids_);
  values_ = std::move(other.values_);
  retired_ = std::move(other.retired_);
  generation_ = other.generation_;
  return *this;
}

bool Catalog::contains(const ItemId& id) const {
  return std::binary_search(ids_.begin(), ids_.end(), id);
}

std::size_t Catalog::index_of(const ItemId& id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) {
    throw Error(ErrorCode::kUnknownId, "no item '" + id.str() + "' in catalog");
  }
  return static_cast<std::size_t>(it - ids_.begin());
}

std::span<const double> Catalog::row_at(std::size_t index) const {
  if (index >= ids_.size()) {
    throw Error(ErrorCode::kUnknownId, "row index " + std::to_string(index) + " out of range");
  }
  return {values_.data() + index * dim_, dim_};
}

void Catalog::add_item(const ItemId& id, std::span<const double> init) {
  WriterSlot slot(writer_active_);
  if (init.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "init vector has length " + std::to_string(init.size()) +
                                                   ", expected " + std::to_string(dim_));
  }
  if (retired_.contains(id)) {
    throw Error(ErrorCode::kIdRetired, "item id '" + id.str() + "' was removed earlier in this run");
  }
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it != ids_.end() && *it == id) {
    throw Error(ErrorCode::kDuplicateId, "item '" + id.str() + "' already present");
  }
  std::vector<double> row(dim_);
  store(row, init);
  finish_row(row);

  const auto index = static_cast<std::size_t>(it - ids_.begin());
  ids_.insert(it, id);
  values_.insert(values_.begin() + static_cast<std::ptrdiff_t>(index * dim_), row.begin(), row.end());
  ++generation_;
}

void Catalog::remove_item(const ItemId& id) {
  WriterSlot slot(writer_active_);
  const std::size_t index = index_of(id);
  ids_.erase(ids_.begin() + static_cast<std::ptrdiff_t>(index));
  auto first = values_.begin() + static_cast<std::ptrdiff_t>(index * dim_);
  values_.erase(first, first + static_cast<std::ptrdiff_t>(dim_));
  retired_.insert(id);
  ++generation_;
}

Catalog::RowEditor Catalog::edit() { return RowEditor(this); }

void Catalog::store(std::span<double> dst, std::span<const double> src) const {
  for (std::size_t j = 0; j < dim_; ++j) {
    dst[j] = precision_ == Precision::kF32 ? static_cast<double>(static_cast<float>(src[j])) : src[j];
  }
}

void Catalog::finish_row(std::span<double> row) const {
  project_row_inplace(row, projection_);
  if (precision_ == Precision::kF32) store(row, row);
}

Catalog::RowEditor::RowEditor(Catalog* owner) : owner_(owner), touched_(owner->size(), false) {
  if (owner_->writer_active_.exchange(true, std::memory_order_acquire)) {
    throw Error(ErrorCode::kConcurrentMutation, "catalog already has an active writer");
  }
}

Catalog::RowEditor::RowEditor(RowEditor&& other) noexcept
    : owner_(std::exchange(other.owner_, nullptr)), touched_(std::move(other.touched_)) {}

std::span<double> Catalog::RowEditor::row_at(std::size_t index) {
  if (index >= owner_->size()) {
    throw Error(ErrorCode::kUnknownId, "row index " + std::to_string(index) + " out of range");
  }
  touched_[index] = true;
  return {owner_->values_.data() + index * owner_->dim_, owner_->dim_};
}

Catalog::RowEditor::~RowEditor() {
  if (owner_ == nullptr) return;
  for (std::size_t k = 0; k < touched_.size(); ++k) {
    if (!touched_[k]) continue;
    std::span<double> row(owner_->values_.data() + k * owner_->dim_, owner_->dim_);
    // Non-finite rows are left as-is here; destructors must not throw.
    bool finite = std::all_of(row.begin(), row.end(), [](double x) { return std::isfinite(x); });
    if (finite) owner_->finish_row(row);
  }
  ++owner_->generation_;
  owner_->writer_active_.store(false, std::memory_order_release);
}

double frobenius_distance(const Catalog& a, const Catalog& b) {
  if (a.dim() != b.dim() || a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "catalogs differ in shape");
  }
  if (!std::equal(a.ids_.begin(), a.ids_.end(), b.ids_.begin())) {
    throw Error(ErrorCode::kUnknownId, "catalogs hold different item sets");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < a.values_.size(); ++k) {
    const double diff = a.values_[k] - b.values_[k];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

}  // namespace orag
