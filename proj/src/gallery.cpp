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


#include "geoanchor/gallery.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <boost/crc.hpp>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "geoanchor/error.hpp"

namespace geoanchor {

static_assert(std::endian::native == std::endian::little,
              "gallery I/O assumes a little-endian host");

namespace {

using Crc64Engine = boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true>;

// Read-only private mapping of a whole file.
class MappedFile {
 public:
  explicit MappedFile(const std::filesystem::path& path) {
    fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd_ < 0) {
      throw Error(ErrorCode::kIo, "cannot open " + path.string() + ": " + std::strerror(errno));
    }
    struct stat st {};
    if (::fstat(fd_, &st) != 0) {
      const int err = errno;
      ::close(fd_);
      throw Error(ErrorCode::kIo, "cannot stat " + path.string() + ": " + std::strerror(err));
    }
    size_ = static_cast<std::size_t>(st.st_size);
    if (size_ > 0) {
      void* addr = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd_, 0);
      if (addr == MAP_FAILED) {
        const int err = errno;
        ::close(fd_);
        throw Error(ErrorCode::kIo, "cannot map " + path.string() + ": " + std::strerror(err));
      }
      data_ = static_cast<const std::byte*>(addr);
    }
  }

  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;

  ~MappedFile() {
    if (data_ != nullptr) ::munmap(const_cast<std::byte*>(data_), size_);
    if (fd_ >= 0) ::close(fd_);
  }

  std::span<const std::byte> bytes() const noexcept { return {data_, size_}; }

 private:
  int fd_ = -1;
  const std::byte* data_ = nullptr;
  std::size_t size_ = 0;
};

template <typename T>
T load(std::span<const std::byte> bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

template <typename T>
void append(std::string& out, const T& value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

struct Header {
  bool magic_ok = false;
  std::uint32_t version = 0;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  std::uint64_t checksum = 0;
};

Header parse_header(std::span<const std::byte> bytes) {
  Header h;
  h.magic_ok = bytes.size() >= sizeof(kGalleryMagic) &&
               std::memcmp(bytes.data(), kGalleryMagic, sizeof(kGalleryMagic)) == 0;
  if (bytes.size() >= kHeaderSize) {
    h.version = load<std::uint32_t>(bytes, kVersionOffset);
    h.dim = load<std::uint32_t>(bytes, kDimOffset);
    h.count = load<std::uint64_t>(bytes, kCountOffset);
    h.checksum = load<std::uint64_t>(bytes, kChecksumOffset);
  }
  return h;
}

// Sizes of the three data blocks; nullopt on arithmetic overflow.
struct BlockSizes {
  std::size_t vectors = 0;
  std::size_t coordinates = 0;
  std::size_t ids = 0;
  std::size_t total() const { return vectors + coordinates + ids; }
};

std::optional<BlockSizes> block_sizes(std::uint64_t count, std::uint32_t dim) {
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 62;
  if (count > kLimit / 32) return std::nullopt;
  const std::uint64_t vec_bytes = count * std::uint64_t{dim} * sizeof(float);
  if (dim != 0 && vec_bytes / dim / sizeof(float) != count) return std::nullopt;
  if (vec_bytes > kLimit) return std::nullopt;
  return BlockSizes{static_cast<std::size_t>(vec_bytes), static_cast<std::size_t>(count * 16),
                    static_cast<std::size_t>(count * 8)};
}

void write_file(const std::filesystem::path& output, const std::string& header,
                std::span<const std::span<const std::byte>> blocks) {
  std::ofstream out(output, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot create " + output.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& block : blocks) {
    out.write(reinterpret_cast<const char*>(block.data()),
              static_cast<std::streamsize>(block.size()));
  }
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + output.string());
}

std::string make_header(std::uint32_t dim, std::uint64_t count, std::uint64_t checksum) {
  std::string header(kGalleryMagic, sizeof(kGalleryMagic));
  append(header, kGalleryVersion);
  append(header, dim);
  append(header, count);
  append(header, checksum);
  return header;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  char delim = 0;
  if (line.find(',') != std::string_view::npos) {
    delim = ',';
  } else if (line.find('\t') != std::string_view::npos) {
    delim = '\t';
  }
  if (delim != 0) {
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(delim, start);
      fields.push_back(line.substr(start, pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
  } else {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      const std::size_t start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i > start) fields.push_back(line.substr(start, i - start));
    }
  }
  for (auto& f : fields) {
    while (!f.empty() && std::isspace(static_cast<unsigned char>(f.front()))) f.remove_prefix(1);
    while (!f.empty() && std::isspace(static_cast<unsigned char>(f.back()))) f.remove_suffix(1);
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view field, const std::string& where) {
  T value{};
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::kParse, where + ": cannot parse '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::size_t latitude_offset(std::uint64_t count, std::uint32_t dim, std::uint64_t index) {
  return kHeaderSize + count * dim * sizeof(float) + index * 2 * sizeof(double);
}

void Crc64::update(std::span<const std::byte> bytes) {
  Crc64Engine engine(state_);
  engine.process_bytes(bytes.data(), bytes.size());
  // Keep the un-finalized register so updates can be chained.
  state_ = engine.get_interim_remainder();
}

std::uint64_t Crc64::value() const noexcept { return Crc64Engine(state_).checksum(); }

std::uint64_t crc64(std::span<const std::byte> bytes) {
  Crc64 crc;
  crc.update(bytes);
  return crc.value();
}

GalleryBlocks prepare_gallery(std::span<const EmbeddingRecord> records, std::uint32_t dim) {
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "gallery dimension must be positive");
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "no records to index");

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].id < records[b].id;
  });

  GalleryBlocks blocks;
  blocks.dim = dim;
  blocks.vectors.reserve(records.size() * dim);
  blocks.locations.reserve(records.size());
  blocks.ids.reserve(records.size());

  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const EmbeddingRecord& r = records[order[pos]];
    const std::string name = "record id " + std::to_string(r.id);
    if (pos > 0 && blocks.ids.back() == r.id) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate " + name);
    }
    if (r.vector.size() != dim) {
      throw Error(ErrorCode::kInvalidArgument, name + " has dimension " +
                                                   std::to_string(r.vector.size()) +
                                                   ", expected " + std::to_string(dim));
    }
    double sq = 0.0;
    for (float v : r.vector) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, name + " has a non-finite component");
      sq += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(sq);
    if (norm == 0.0) throw Error(ErrorCode::kInvalidArgument, name + " has a zero-norm vector");
    for (float v : r.vector) blocks.vectors.push_back(static_cast<float>(v / norm));
    blocks.locations.push_back(r.location);
    blocks.ids.push_back(r.id);
  }
  return blocks;
}

BuildSummary write_gallery(const GalleryBlocks& blocks, const std::filesystem::path& output) {
  std::vector<double> coords;
  coords.reserve(blocks.size() * 2);
  for (const auto& c : blocks.locations) {
    coords.push_back(c.lat());
    coords.push_back(c.lon());
  }
  const std::span<const std::byte> parts[] = {
      std::as_bytes(std::span(blocks.vectors)),
      std::as_bytes(std::span(coords)),
      std::as_bytes(std::span(blocks.ids)),
  };
  Crc64 crc;
  for (const auto& part : parts) crc.update(part);

  BuildSummary summary{blocks.size(), blocks.dim, crc.value()};
  write_file(output, make_header(summary.dim, summary.count, summary.checksum), parts);
  return summary;
}

BuildSummary build_gallery(std::span<const EmbeddingRecord> records, std::uint32_t dim,
                           const std::filesystem::path& output) {
  return write_gallery(prepare_gallery(records, dim), output);
}

struct Gallery::Storage {
  std::filesystem::path path;
  std::uint32_t dim = 0;
  std::uint64_t checksum = 0;
  std::unique_ptr<MappedFile> mapping;
  std::vector<float> owned_vectors;
  std::span<const float> vectors;
  std::vector<GeoCoordinate> locations;
  std::vector<std::uint64_t> ids;
};

Gallery Gallery::open(const std::filesystem::path& path) {
  auto storage = std::make_shared<Storage>();
  storage->path = path;
  storage->mapping = std::make_unique<MappedFile>(path);
  const auto bytes = storage->mapping->bytes();
  const Header h = parse_header(bytes);
  const std::string where = path.string();

  if (!h.magic_ok) throw Error(ErrorCode::kFormat, where + ": not a gallery file (bad magic)");
  if (bytes.size() < kHeaderSize) throw Error(ErrorCode::kCorruption, where + ": truncated header");
  if (h.version != kGalleryVersion) {
    throw Error(ErrorCode::kFormat, where + ": unsupported version " + std::to_string(h.version));
  }
  if (h.dim == 0) throw Error(ErrorCode::kFormat, where + ": dimension is zero");
  if (h.count == 0) throw Error(ErrorCode::kFormat, where + ": gallery has no records");
  const auto sizes = block_sizes(h.count, h.dim);
  if (!sizes || bytes.size() != kHeaderSize + sizes->total()) {
    throw Error(ErrorCode::kCorruption,
                where + ": file size " + std::to_string(bytes.size()) +
                    " does not match header (count " + std::to_string(h.count) + ", dim " +
                    std::to_string(h.dim) + ")");
  }

  storage->dim = h.dim;
  storage->checksum = h.checksum;
  storage->vectors = {reinterpret_cast<const float*>(bytes.data() + kHeaderSize),
                      static_cast<std::size_t>(h.count) * h.dim};

  const std::size_t coord_base = kHeaderSize + sizes->vectors;
  const std::size_t id_base = coord_base + sizes->coordinates;
  storage->locations.reserve(h.count);
  storage->ids.resize(h.count);
  std::memcpy(storage->ids.data(), bytes.data() + id_base, sizes->ids);
  for (std::uint64_t i = 0; i < h.count; ++i) {
    const double lat = load<double>(bytes, coord_base + i * 16);
    const double lon = load<double>(bytes, coord_base + i * 16 + 8);
    if (!(lat >= -90.0 && lat <= 90.0) || !(lon > -180.0 && lon <= 180.0)) {
      throw Error(ErrorCode::kCorruption,
                  where + ": record " + std::to_string(i) + " has an invalid coordinate");
    }
    storage->locations.emplace_back(lat, lon);
    if (i > 0 && storage->ids[i] <= storage->ids[i - 1]) {
      throw Error(ErrorCode::kCorruption, where + ": ids are not strictly increasing");
    }
  }
  return Gallery(std::move(storage));
}

Gallery Gallery::from_blocks(GalleryBlocks blocks) {
  if (blocks.dim == 0 || blocks.size() == 0 ||
      blocks.vectors.size() != blocks.size() * blocks.dim ||
      blocks.locations.size() != blocks.size()) {
    throw Error(ErrorCode::kInvalidArgument, "inconsistent gallery blocks");
  }
  if (!std::is_sorted(blocks.ids.begin(), blocks.ids.end()) ||
      std::adjacent_find(blocks.ids.begin(), blocks.ids.end()) != blocks.ids.end()) {
    throw Error(ErrorCode::kInvalidArgument, "gallery ids must be strictly increasing");
  }
  auto storage = std::make_shared<Storage>();
  storage->path = "<memory>";
  storage->dim = blocks.dim;
  storage->owned_vectors = std::move(blocks.vectors);
  storage->vectors = storage->owned_vectors;
  storage->locations = std::move(blocks.locations);
  storage->ids = std::move(blocks.ids);

  std::vector<double> coords;
  coords.reserve(storage->locations.size() * 2);
  for (const auto& c : storage->locations) {
    coords.push_back(c.lat());
    coords.push_back(c.lon());
  }
  Crc64 crc;
  crc.update(std::as_bytes(storage->vectors));
  crc.update(std::as_bytes(std::span(coords)));
  crc.update(std::as_bytes(std::span(storage->ids)));
  storage->checksum = crc.value();
  return Gallery(std::move(storage));
}

std::uint32_t Gallery::dim() const noexcept { return storage_->dim; }
std::size_t Gallery::size() const noexcept { return storage_->ids.size(); }
std::uint64_t Gallery::checksum() const noexcept { return storage_->checksum; }
const std::filesystem::path& Gallery::path() const noexcept { return storage_->path; }
std::span<const float> Gallery::vectors() const noexcept { return storage_->vectors; }

std::span<const float> Gallery::vector(std::size_t index) const noexcept {
  return storage_->vectors.subspan(index * storage_->dim, storage_->dim);
}

const GeoCoordinate& Gallery::location(std::size_t index) const noexcept {
  return storage_->locations[index];
}

std::uint64_t Gallery::id(std::size_t index) const noexcept { return storage_->ids[index]; }
std::span<const std::uint64_t> Gallery::ids() const noexcept { return storage_->ids; }

std::optional<std::size_t> Gallery::find(std::uint64_t id) const {
  const auto& ids = storage_->ids;
  const auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

bool ValidationReport::ok() const {
  return std::none_of(checks.begin(), checks.end(),
                      [](const CheckResult& c) { return c.status == CheckStatus::kFail; });
}

const CheckResult* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

ValidationReport validate_gallery(const std::filesystem::path& path) {
  const MappedFile file(path);
  const auto bytes = file.bytes();
  const Header h = parse_header(bytes);

  ValidationReport report;
  report.path = path;
  auto add = [&](std::string name, bool pass, std::string detail) {
    report.checks.push_back({std::move(name), pass ? CheckStatus::kPass : CheckStatus::kFail,
                             std::move(detail)});
  };
  auto skip = [&](std::string name, std::string detail) {
    report.checks.push_back({std::move(name), CheckStatus::kSkipped, std::move(detail)});
  };

  add("magic", h.magic_ok, h.magic_ok ? "IMG2LOC1" : "first 8 bytes are not IMG2LOC1");
  const bool header_present = bytes.size() >= kHeaderSize;
  if (header_present) {
    add("version", h.version == kGalleryVersion, "version " + std::to_string(h.version));
  } else {
    add("version", false, "file shorter than the 32-byte header");
  }

  const auto sizes = block_sizes(h.count, h.dim);
  const bool sizes_ok = header_present && h.dim > 0 && h.count > 0 && sizes &&
                        bytes.size() == kHeaderSize + sizes->total();
  {
    std::ostringstream detail;
    detail << "dim " << h.dim << ", count " << h.count << ", file size " << bytes.size();
    if (sizes) detail << ", expected " << kHeaderSize + sizes->total();
    add("block_sizes", sizes_ok, detail.str());
  }
  if (!sizes_ok) {
    for (const char* name : {"checksum", "norms", "id_uniqueness", "coordinate_ranges"}) {
      skip(name, "block sizes inconsistent");
    }
    return report;
  }

  const auto data = bytes.subspan(kHeaderSize);
  const std::uint64_t actual_crc = crc64(data);
  {
    std::ostringstream detail;
    detail << std::hex << "stored 0x" << h.checksum << ", computed 0x" << actual_crc;
    add("checksum", actual_crc == h.checksum, detail.str());
  }

  std::uint64_t bad_norms = 0;
  std::uint64_t first_bad_norm = 0;
  for (std::uint64_t i = 0; i < h.count; ++i) {
    double sq = 0.0;
    for (std::uint32_t d = 0; d < h.dim; ++d) {
      const auto v = static_cast<double>(load<float>(data, (i * h.dim + d) * sizeof(float)));
      sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (!(std::abs(norm - 1.0) <= kNormTolerance)) {
      if (bad_norms++ == 0) first_bad_norm = i;
    }
  }
  add("norms", bad_norms == 0,
      bad_norms == 0 ? "all vectors unit-norm within 1e-3"
                     : std::to_string(bad_norms) + " vectors off unit norm (first at record " +
                           std::to_string(first_bad_norm) + ")");

  const std::size_t id_base = sizes->vectors + sizes->coordinates;
  std::uint64_t order_breaks = 0;
  std::unordered_set<std::uint64_t> seen;
  std::uint64_t duplicates = 0;
  for (std::uint64_t i = 0; i < h.count; ++i) {
    const auto id = load<std::uint64_t>(data, id_base + i * 8);
    if (!seen.insert(id).second) ++duplicates;
    if (i > 0 && id <= load<std::uint64_t>(data, id_base + (i - 1) * 8)) ++order_breaks;
  }
  add("id_uniqueness", duplicates == 0 && order_breaks == 0,
      std::to_string(duplicates) + " duplicate ids, " + std::to_string(order_breaks) +
          " ordering violations");

  std::uint64_t bad_coords = 0;
  std::uint64_t first_bad_coord = 0;
  for (std::uint64_t i = 0; i < h.count; ++i) {
    const double lat = load<double>(data, sizes->vectors + i * 16);
    const double lon = load<double>(data, sizes->vectors + i * 16 + 8);
    if (!(lat >= -90.0 && lat <= 90.0) || !(lon > -180.0 && lon <= 180.0)) {
      if (bad_coords++ == 0) first_bad_coord = i;
    }
  }
  add("coordinate_ranges", bad_coords == 0,
      bad_coords == 0 ? "all coordinates in range"
                      : std::to_string(bad_coords) + " out-of-range coordinates (first at record " +
                            std::to_string(first_bad_coord) + ")");
  return report;
}

BuildSummary write_query_file(std::span<const float> vectors, std::uint32_t dim,
                              const std::filesystem::path& output) {
  if (dim == 0 || vectors.empty() || vectors.size() % dim != 0) {
    throw Error(ErrorCode::kInvalidArgument, "query vectors must be a non-empty multiple of dim");
  }
  for (float v : vectors) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "query vector has a non-finite component");
  }
  const std::span<const std::byte> parts[] = {std::as_bytes(vectors)};
  BuildSummary summary{vectors.size() / dim, dim, crc64(parts[0])};
  write_file(output, make_header(dim, summary.count, summary.checksum), parts);
  return summary;
}

QuerySet read_query_file(const std::filesystem::path& path,
                         const std::optional<std::filesystem::path>& sidecar) {
  const MappedFile file(path);
  const auto bytes = file.bytes();
  const Header h = parse_header(bytes);
  const std::string where = path.string();
  if (!h.magic_ok) throw Error(ErrorCode::kFormat, where + ": not an embedding file (bad magic)");
  if (bytes.size() < kHeaderSize) throw Error(ErrorCode::kCorruption, where + ": truncated header");
  if (h.version != kGalleryVersion) {
    throw Error(ErrorCode::kFormat, where + ": unsupported version " + std::to_string(h.version));
  }
  if (h.dim == 0 || h.count == 0) throw Error(ErrorCode::kFormat, where + ": empty embedding file");
  const auto sizes = block_sizes(h.count, h.dim);
  if (!sizes) throw Error(ErrorCode::kCorruption, where + ": header sizes overflow");
  const std::size_t data_size = bytes.size() - kHeaderSize;
  if (data_size != sizes->vectors && data_size != sizes->total()) {
    throw Error(ErrorCode::kCorruption, where + ": file size does not match header");
  }
  if (crc64(bytes.subspan(kHeaderSize)) != h.checksum) {
    throw Error(ErrorCode::kCorruption, where + ": checksum mismatch");
  }

  QuerySet set;
  set.dim = h.dim;
  set.vectors.resize(static_cast<std::size_t>(h.count) * h.dim);
  std::memcpy(set.vectors.data(), bytes.data() + kHeaderSize, sizes->vectors);

  if (sidecar) {
    std::ifstream in(*sidecar);
    if (!in) throw Error(ErrorCode::kIo, "cannot open " + sidecar->string());
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) set.labels.push_back(line);
    }
    if (set.labels.size() != set.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  sidecar->string() + " has " + std::to_string(set.labels.size()) +
                      " labels for " + std::to_string(set.size()) + " queries");
    }
  }
  return set;
}

std::vector<EmbeddingRecord> read_ingestion_text(const std::filesystem::path& path,
                                                 std::uint32_t dim) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());

  std::vector<EmbeddingRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;

    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = split_fields(line);
    if (fields.size() < 4) throw Error(ErrorCode::kParse, where + ": expected id,lat,lon,v0,...");

    EmbeddingRecord rec;
    rec.id = parse_number<std::uint64_t>(fields[0], where);
    const double lat = parse_number<double>(fields[1], where);
    const double lon = parse_number<double>(fields[2], where);
    try {
      rec.location = GeoCoordinate(lat, lon);
    } catch (const Error& e) {
      throw Error(ErrorCode::kRange, where + ": " + e.what());
    }
    rec.vector.reserve(fields.size() - 3);
    for (std::size_t i = 3; i < fields.size(); ++i) {
      rec.vector.push_back(parse_number<float>(fields[i], where));
    }
    if (dim == 0) dim = static_cast<std::uint32_t>(rec.vector.size());
    if (rec.vector.size() != dim) {
      throw Error(ErrorCode::kInvalidArgument,
                  where + ": record id " + std::to_string(rec.id) + " has dimension " +
                      std::to_string(rec.vector.size()) + ", expected " + std::to_string(dim));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace geoanchor
