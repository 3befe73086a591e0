#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "orag/catalog.hpp"

namespace orag {

// Binary layout, all integers little-endian:
//   "ORAG" | u32 version | u64 rows | u64 dim | u8 dtype (0=f64, 1=f32)
//   | rows x (u32 byte length, UTF-8 id) | rows*dim row-major values
inline constexpr char kSnapshotMagic[4] = {'O', 'R', 'A', 'G'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

/// Labelled rows in file order. Used for catalogs and for query dumps.
struct VectorTable {
  std::size_t dim = 0;
  Precision precision = Precision::kF64;
  std::vector<std::string> ids;
  std::vector<double> values;

  std::size_t rows() const noexcept { return ids.size(); }
};

void write_vector_table(std::ostream& out, const VectorTable& table);
VectorTable read_vector_table(std::istream& in);

VectorTable to_table(const Catalog& catalog);
Catalog to_catalog(const VectorTable& table, ProjectionMode projection = ProjectionMode::kNone);

void write_snapshot(std::ostream& out, const Catalog& catalog);
Catalog read_snapshot(std::istream& in, ProjectionMode projection = ProjectionMode::kNone);

/// Writes to a sibling temp file and renames it into place, so a failed write
/// never leaves a partial snapshot at `path`.
void save_snapshot(const std::filesystem::path& path, const Catalog& catalog);
Catalog load_snapshot(const std::filesystem::path& path, ProjectionMode projection = ProjectionMode::kNone);

/// Runs `writer` against `path`.tmp, then renames over `path`. On any failure
/// the temp file is removed and `path` is untouched.
void write_file_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);

void save_vector_table(const std::filesystem::path& path, const VectorTable& table);
VectorTable load_vector_table(const std::filesystem::path& path);

}  // namespace orag
