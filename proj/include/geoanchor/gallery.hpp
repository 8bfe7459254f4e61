/*
 * Copyright 2026 The geoanchor Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoanchor/geodesy.hpp"

namespace geoanchor {

// Gallery file layout (little-endian):
//   [0, 8)   magic "IMG2LOC1"
//   [8, 12)  u32 version (1)
//   [12, 16) u32 dim
//   [16, 24) u64 count
//   [24, 32) u64 CRC-64/XZ over the data blocks that follow
//   vectors:     count * dim * f32
//   coordinates: count * (f64 lat, f64 lon)
//   ids:         count * u64, strictly increasing
// Query files reuse the header and carry only the vector block.
inline constexpr char kGalleryMagic[8] = {'I', 'M', 'G', '2', 'L', 'O', 'C', '1'};
inline constexpr std::uint32_t kGalleryVersion = 1;
inline constexpr std::size_t kHeaderSize = 32;
inline constexpr std::size_t kMagicOffset = 0;
inline constexpr std::size_t kVersionOffset = 8;
inline constexpr std::size_t kDimOffset = 12;
inline constexpr std::size_t kCountOffset = 16;
inline constexpr std::size_t kChecksumOffset = 24;
inline constexpr std::uint32_t kDefaultDim = 768;
inline constexpr double kNormTolerance = 1e-3;

/// Byte offset of record `index`'s latitude within a gallery file.
std::size_t latitude_offset(std::uint64_t count, std::uint32_t dim, std::uint64_t index);

/// CRC-64/XZ (ECMA-182 polynomial, reflected, all-ones init and xorout).
class Crc64 {
 public:
  void update(std::span<const std::byte> bytes);
  std::uint64_t value() const noexcept;

 private:
  std::uint64_t state_ = ~std::uint64_t{0};
};

std::uint64_t crc64(std::span<const std::byte> bytes);

struct EmbeddingRecord {
  std::uint64_t id = 0;
  std::vector<float> vector;
  GeoCoordinate location;
  std::string source_tag;  // not persisted
};

struct BuildSummary {
  std::uint64_t count = 0;
  std::uint32_t dim = 0;
  std::uint64_t checksum = 0;
};

/// Columnar, normalized, id-sorted gallery contents.
struct GalleryBlocks {
  std::uint32_t dim = 0;
  std::vector<float> vectors;
  std::vector<GeoCoordinate> locations;
  std::vector<std::uint64_t> ids;

  std::size_t size() const noexcept { return ids.size(); }
};

/// Validates records, L2-normalizes vectors and sorts by id. Rejects an empty
/// input, dimension mismatches, duplicate ids and zero-norm vectors.
GalleryBlocks prepare_gallery(std::span<const EmbeddingRecord> records, std::uint32_t dim);

BuildSummary write_gallery(const GalleryBlocks& blocks, const std::filesystem::path& output);

BuildSummary build_gallery(std::span<const EmbeddingRecord> records, std::uint32_t dim,
                           const std::filesystem::path& output);

/// Immutable gallery. Opened files keep the vector block memory-mapped; copies
/// share the same storage.
class Gallery {
 public:
  static Gallery open(const std::filesystem::path& path);
  static Gallery from_blocks(GalleryBlocks blocks);

  std::uint32_t dim() const noexcept;
  std::size_t size() const noexcept;
  std::uint64_t checksum() const noexcept;
  const std::filesystem::path& path() const noexcept;

  /// All vectors, row-major, size() * dim() floats.
  std::span<const float> vectors() const noexcept;
  std::span<const float> vector(std::size_t index) const noexcept;
  const GeoCoordinate& location(std::size_t index) const noexcept;
  std::uint64_t id(std::size_t index) const noexcept;
  std::span<const std::uint64_t> ids() const noexcept;

  /// Record position for an id, by binary search.
  std::optional<std::size_t> find(std::uint64_t id) const;

  struct Storage;

 private:
  explicit Gallery(std::shared_ptr<const Storage> storage) : storage_(std::move(storage)) {}
  std::shared_ptr<const Storage> storage_;
};

inline Gallery open_gallery(const std::filesystem::path& path) { return Gallery::open(path); }

enum class CheckStatus { kPass, kFail, kSkipped };

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::kPass;
  std::string detail;
};

struct ValidationReport {
  std::filesystem::path path;
  std::vector<CheckResult> checks;

  bool ok() const;
  const CheckResult* find(const std::string& name) const;
};

/// Runs magic, version, block_sizes, checksum, norms, id_uniqueness and
/// coordinate_ranges checks. Checks that need a readable data section are
/// skipped when block sizes are inconsistent. Throws only if the file cannot be
/// read at all.
ValidationReport validate_gallery(const std::filesystem::path& path);

struct QuerySet {
  std::uint32_t dim = 0;
  std::vector<float> vectors;  // row-major
  std::vector<std::string> labels;  // from the optional sidecar, else empty

  std::size_t size() const noexcept { return dim == 0 ? 0 : vectors.size() / dim; }
  std::span<const float> query(std::size_t index) const noexcept {
    return {vectors.data() + index * dim, dim};
  }
};

/// Writes a query-embedding file: gallery header plus the vector block.
BuildSummary write_query_file(std::span<const float> vectors, std::uint32_t dim,
                              const std::filesystem::path& output);

/// Reads a query-embedding file (or a full gallery, whose vectors are used as
/// queries). If `sidecar` is given, it must hold one label per query.
QuerySet read_query_file(const std::filesystem::path& path,
                         const std::optional<std::filesystem::path>& sidecar = std::nullopt);

/// Reads `id,lat,lon,v0,...,v{dim-1}` lines. Comma, tab or whitespace
/// delimited; blank lines and lines starting with '#' are ignored. When `dim`
/// is 0 it is inferred from the first record.
std::vector<EmbeddingRecord> read_ingestion_text(const std::filesystem::path& path,
                                                 std::uint32_t dim = 0);

}  // namespace geoanchor
