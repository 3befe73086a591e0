#include "orag/snapshot.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <system_error>

#include "orag/error.hpp"

namespace orag {

namespace {

template <typename UInt>
void put_le(std::ostream& out, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t k = 0; k < sizeof(UInt); ++k) {
    bytes[k] = static_cast<char>((value >> (8 * k)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename UInt>
UInt get_le(std::istream& in) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw Error(ErrorCode::kFormatError, "truncated snapshot");
  UInt value = 0;
  for (std::size_t k = 0; k < sizeof(UInt); ++k) {
    value |= static_cast<UInt>(bytes[k]) << (8 * k);
  }
  return value;
}

}  // namespace

void write_file_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot open " + tmp.string() + " for writing");
    try {
      writer(out);
      out.flush();
      if (!out) throw Error(ErrorCode::kIoError, "write to " + tmp.string() + " failed");
    } catch (...) {
      out.close();
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw;
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kIoError, "cannot move output into " + path.string());
  }
}

void write_vector_table(std::ostream& out, const VectorTable& table) {
  if (table.values.size() != table.rows() * table.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "table values do not match rows x dim");
  }
  out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
  put_le<std::uint32_t>(out, kSnapshotVersion);
  put_le<std::uint64_t>(out, table.rows());
  put_le<std::uint64_t>(out, table.dim);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(table.precision));
  for (const auto& id : table.ids) {
    if (id.size() > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorCode::kFormatError, "item id too long");
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  for (double v : table.values) {
    if (table.precision == Precision::kF64) {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    } else {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
}

VectorTable read_vector_table(std::istream& in) {
  char magic[4] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::kFormatError, "missing ORAG magic bytes");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kSnapshotVersion) {
    throw Error(ErrorCode::kFormatError, "unsupported snapshot version " + std::to_string(version));
  }
  const auto rows = get_le<std::uint64_t>(in);
  const auto dim = get_le<std::uint64_t>(in);
  const auto dtype = get_le<std::uint8_t>(in);
  if (dtype > 1) throw Error(ErrorCode::kFormatError, "unknown dtype tag " + std::to_string(dtype));
  if (dim == 0) throw Error(ErrorCode::kFormatError, "zero dimension");

  VectorTable table;
  table.dim = dim;
  table.precision = static_cast<Precision>(dtype);
  for (std::uint64_t r = 0; r < rows; ++r) {
    const auto len = get_le<std::uint32_t>(in);
    std::string id(len, '\0');
    in.read(id.data(), len);
    if (!in) throw Error(ErrorCode::kFormatError, "truncated id");
    table.ids.push_back(std::move(id));
  }
  for (std::uint64_t k = 0; k < rows * dim; ++k) {
    if (table.precision == Precision::kF64) {
      table.values.push_back(std::bit_cast<double>(get_le<std::uint64_t>(in)));
    } else {
      table.values.push_back(static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in))));
    }
  }
  return table;
}

VectorTable to_table(const Catalog& catalog) {
  VectorTable table;
  table.dim = catalog.dim();
  table.precision = catalog.precision();
  for (const auto& id : catalog.ids()) table.ids.push_back(id.str());
  table.values.assign(catalog.data().begin(), catalog.data().end());
  return table;
}

Catalog to_catalog(const VectorTable& table, ProjectionMode projection) {
  std::vector<CatalogEntry> items;
  items.reserve(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto first = table.values.begin() + static_cast<std::ptrdiff_t>(r * table.dim);
    items.push_back({ItemId(table.ids[r]), std::vector<double>(first, first + static_cast<std::ptrdiff_t>(table.dim))});
  }
  return Catalog(table.dim, std::move(items), projection, table.precision);
}

void write_snapshot(std::ostream& out, const Catalog& catalog) { write_vector_table(out, to_table(catalog)); }

Catalog read_snapshot(std::istream& in, ProjectionMode projection) {
  return to_catalog(read_vector_table(in), projection);
}

void save_vector_table(const std::filesystem::path& path, const VectorTable& table) {
  write_file_atomically(path, [&](std::ostream& out) { write_vector_table(out, table); });
}

VectorTable load_vector_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return read_vector_table(in);
}

void save_snapshot(const std::filesystem::path& path, const Catalog& catalog) {
  save_vector_table(path, to_table(catalog));
}

Catalog load_snapshot(const std::filesystem::path& path, ProjectionMode projection) {
  return to_catalog(load_vector_table(path), projection);
}

}  // namespace orag
