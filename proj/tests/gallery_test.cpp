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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>

#include "geoanchor/error.hpp"
#include "support/test_support.hpp"

namespace geoanchor {
namespace {

using testing::random_records;
using testing::slurp;
using testing::TempDir;

std::vector<EmbeddingRecord> three_records() {
  return {
      {3, {0, 0, 1, 0}, {48.8566, 2.3522}, "paris"},
      {1, {1, 0, 0, 0}, {35.6895, 139.6917}, "tokyo"},
      {2, {0, 1, 0, 0}, {-33.865143, 151.2099}, "sydney"},
  };
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInvalidArgument;
}

TEST(Crc64Test, StandardCheckValueAndChaining) {
  const std::string check = "123456789";
  EXPECT_EQ(crc64(std::as_bytes(std::span(check))), 0x995DC9BBDF1939FAULL);

  Crc64 chained;
  chained.update(std::as_bytes(std::span(check.data(), 4)));
  chained.update(std::as_bytes(std::span(check.data() + 4, 5)));
  EXPECT_EQ(chained.value(), 0x995DC9BBDF1939FAULL);
  EXPECT_EQ(Crc64().value(), 0u);
}

TEST(BuildGalleryTest, MinimalGallery) {
  TempDir dir;
  const auto summary = build_gallery(three_records(), 4, dir / "g.bin");
  EXPECT_EQ(summary.count, 3u);
  EXPECT_EQ(summary.dim, 4u);
  EXPECT_EQ(std::filesystem::file_size(dir / "g.bin"), kHeaderSize + 3 * (4 * 4 + 16 + 8));

  const auto g = Gallery::open(dir / "g.bin");
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g.id(0), 1u);
  EXPECT_EQ(g.id(1), 2u);
  EXPECT_EQ(g.id(2), 3u);
  EXPECT_EQ(g.location(2), GeoCoordinate(48.8566, 2.3522));
  EXPECT_EQ(g.checksum(), summary.checksum);
  EXPECT_EQ(g.find(2), std::optional<std::size_t>(1));
  EXPECT_EQ(g.find(7), std::nullopt);
}

TEST(BuildGalleryTest, RejectsBadInput) {
  TempDir dir;
  auto records = three_records();
  records[1].vector.assign(4, 0.0f);
  try {
    build_gallery(records, 4, dir / "g.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("zero-norm"), std::string::npos);
  }

  records = three_records();
  records[2].vector.push_back(1.0f);
  try {
    build_gallery(records, 4, dir / "g.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("record id 2"), std::string::npos) << e.what();
  }

  records = three_records();
  records[0].id = 1;
  EXPECT_EQ(code_of([&] { build_gallery(records, 4, dir / "g.bin"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { build_gallery({}, 4, dir / "g.bin"); }), ErrorCode::kInvalidArgument);

  try {
    build_gallery(three_records(), 4, dir / "missing" / "g.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
    EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
  }
}

TEST(BuildGalleryTest, NormalizesVectors) {
  TempDir dir;
  std::vector<EmbeddingRecord> records{{5, {3, 4}, {0, 0}, {}}};
  build_gallery(records, 2, dir / "g.bin");
  const auto g = Gallery::open(dir / "g.bin");
  EXPECT_FLOAT_EQ(g.vector(0)[0], 0.6f);
  EXPECT_FLOAT_EQ(g.vector(0)[1], 0.8f);
}

TEST(BuildGalleryTest, LargeRoundTripIsBitIdentical) {
  TempDir dir;
  const auto records = random_records(10000, 768, 1234);
  const auto blocks = prepare_gallery(records, 768);
  const auto summary = write_gallery(blocks, dir / "g.bin");

  // Recompute the checksum straight from the file bytes.
  const std::string bytes = slurp(dir / "g.bin");
  EXPECT_EQ(crc64(std::as_bytes(std::span(bytes)).subspan(kHeaderSize)), summary.checksum);

  const auto before = bytes;
  const auto g = Gallery::open(dir / "g.bin");
  ASSERT_EQ(g.size(), 10000u);
  EXPECT_EQ(std::memcmp(g.vectors().data(), blocks.vectors.data(), blocks.vectors.size() * sizeof(float)), 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    ASSERT_EQ(g.location(i), blocks.locations[i]);
    ASSERT_EQ(g.id(i), blocks.ids[i]);
    double sq = 0;
    for (float v : g.vector(i)) sq += double(v) * v;
    ASSERT_NEAR(std::sqrt(sq), 1.0, 1e-3);
  }
  EXPECT_EQ(slurp(dir / "g.bin"), before);

  const auto report = validate_gallery(dir / "g.bin");
  EXPECT_TRUE(report.ok());
}

TEST(OpenGalleryTest, FormatAndCorruptionErrors) {
  TempDir dir;
  build_gallery(three_records(), 4, dir / "g.bin");
  const std::string good = slurp(dir / "g.bin");

  auto write = [&](const std::string& bytes) {
    std::ofstream(dir / "bad.bin", std::ios::binary) << bytes;
    return dir / "bad.bin";
  };
  std::string bad = good;
  bad[0] ^= 0x01;
  EXPECT_EQ(code_of([&] { Gallery::open(write(bad)); }), ErrorCode::kFormat);

  bad = good;
  bad[kVersionOffset] = 2;
  EXPECT_EQ(code_of([&] { Gallery::open(write(bad)); }), ErrorCode::kFormat);

  EXPECT_EQ(code_of([&] { Gallery::open(write(good.substr(0, good.size() - 1))); }), ErrorCode::kCorruption);
  EXPECT_EQ(code_of([&] { Gallery::open(write(good.substr(0, 20))); }), ErrorCode::kCorruption);
  EXPECT_EQ(code_of([&] { Gallery::open(write("")); }), ErrorCode::kFormat);
  EXPECT_EQ(code_of([&] { Gallery::open(dir / "nope.bin"); }), ErrorCode::kIo);
}

class ValidateTest : public ::testing::Test {
 protected:
  void SetUp() override {
    build_gallery(random_records(50, 16, 77), 16, path_);
  }

  // Names of the checks with the given status.
  std::vector<std::string> with_status(const ValidationReport& r, CheckStatus s) {
    std::vector<std::string> names;
    for (const auto& c : r.checks) {
      if (c.status == s) names.push_back(c.name);
    }
    return names;
  }

  TempDir dir_;
  std::filesystem::path path_ = dir_ / "g.bin";
};

TEST_F(ValidateTest, CleanFilePassesEveryCheck) {
  const auto r = validate_gallery(path_);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.checks.size(), 7u);
  EXPECT_EQ(with_status(r, CheckStatus::kPass).size(), 7u);
}

TEST_F(ValidateTest, FlippedMagicByte) {
  const char flipped = 'X';
  testing::overwrite(path_, 0, &flipped, 1);
  const auto r = validate_gallery(path_);
  EXPECT_EQ(with_status(r, CheckStatus::kFail), std::vector<std::string>{"magic"});
}

TEST_F(ValidateTest, LatitudePatchedTo95) {
  const double lat = 95.0;
  testing::overwrite(path_, latitude_offset(50, 16, 17), &lat, sizeof(lat));
  // Without a checksum refresh both the checksum and the range check fail.
  auto r = validate_gallery(path_);
  EXPECT_EQ(with_status(r, CheckStatus::kFail),
            (std::vector<std::string>{"checksum", "coordinate_ranges"}));

  testing::refresh_checksum(path_);
  r = validate_gallery(path_);
  EXPECT_EQ(with_status(r, CheckStatus::kFail), std::vector<std::string>{"coordinate_ranges"});
  EXPECT_NE(r.find("coordinate_ranges")->detail.find("record 17"), std::string::npos);
}

TEST_F(ValidateTest, TruncationSkipsDataChecks) {
  std::filesystem::resize_file(path_, std::filesystem::file_size(path_) - 8);
  const auto r = validate_gallery(path_);
  EXPECT_EQ(with_status(r, CheckStatus::kFail), std::vector<std::string>{"block_sizes"});
  EXPECT_EQ(with_status(r, CheckStatus::kSkipped).size(), 4u);
  EXPECT_FALSE(r.ok());
}

TEST_F(ValidateTest, UnnormalizedVectorAndDuplicateIds) {
  const float big = 3.0f;
  testing::overwrite(path_, kHeaderSize + 5 * 16 * sizeof(float), &big, sizeof(big));
  const std::uint64_t dup = 3;
  testing::overwrite(path_, kHeaderSize + 50 * (16 * 4 + 16) + 4 * 8, &dup, sizeof(dup));
  testing::refresh_checksum(path_);
  const auto r = validate_gallery(path_);
  EXPECT_EQ(with_status(r, CheckStatus::kFail), (std::vector<std::string>{"norms", "id_uniqueness"}));
}

TEST_F(ValidateTest, UnreadableFileIsFatal) {
  EXPECT_THROW(validate_gallery(dir_ / "missing.bin"), Error);
}

TEST(QueryFileTest, RoundTripWithSidecar) {
  TempDir dir;
  std::vector<float> vectors{1, 0, 0, 0, 1, 0, 0.5f, 0.5f, 0};
  const auto summary = write_query_file(vectors, 3, dir / "q.bin");
  EXPECT_EQ(summary.count, 3u);
  std::ofstream(dir / "q.ids") << "a\nb\nc\n";
  const auto q = read_query_file(dir / "q.bin", dir / "q.ids");
  EXPECT_EQ(q.size(), 3u);
  EXPECT_EQ(q.vectors, vectors);
  EXPECT_EQ(q.labels, (std::vector<std::string>{"a", "b", "c"}));

  std::ofstream(dir / "short.ids") << "a\n";
  EXPECT_THROW(read_query_file(dir / "q.bin", dir / "short.ids"), Error);

  // A gallery can be used as a query file.
  build_gallery(three_records(), 4, dir / "g.bin");
  EXPECT_EQ(read_query_file(dir / "g.bin").size(), 3u);

  std::string bytes = slurp(dir / "q.bin");
  bytes[kHeaderSize] ^= 0x10;
  std::ofstream(dir / "q.bin", std::ios::binary) << bytes;
  EXPECT_EQ(code_of([&] { read_query_file(dir / "q.bin"); }), ErrorCode::kCorruption);
}

TEST(IngestionTextTest, ParsesDelimitedRows) {
  TempDir dir;
  std::ofstream(dir / "in.csv") << "# id,lat,lon,v...\n"
                                   "1,48.8566,2.3522,1,0,0,0\n"
                                   "\n"
                                   "2\t-33.8\t151.2\t0\t1\t0\t0\n"
                                   "3 10 370 0 0 1 0\r\n";
  const auto records = read_ingestion_text(dir / "in.csv");
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[1].location, GeoCoordinate(-33.8, 151.2));
  EXPECT_DOUBLE_EQ(records[2].location.lon(), 10.0);
  EXPECT_EQ(records[2].vector, (std::vector<float>{0, 0, 1, 0}));

  EXPECT_THROW(read_ingestion_text(dir / "in.csv", 5), Error);

  std::ofstream(dir / "bad.csv") << "1,95,0,1,0\n";
  EXPECT_EQ(code_of([&] { read_ingestion_text(dir / "bad.csv"); }), ErrorCode::kRange);
  std::ofstream(dir / "junk.csv") << "1,abc,0,1,0\n";
  EXPECT_EQ(code_of([&] { read_ingestion_text(dir / "junk.csv"); }), ErrorCode::kParse);
}

TEST(GalleryFromBlocksTest, ChecksumMatchesFile) {
  TempDir dir;
  auto blocks = prepare_gallery(three_records(), 4);
  const auto summary = write_gallery(blocks, dir / "g.bin");
  const auto g = Gallery::from_blocks(std::move(blocks));
  EXPECT_EQ(g.checksum(), summary.checksum);
  EXPECT_EQ(g.size(), 3u);
}

}  // namespace
}  // namespace geoanchor
