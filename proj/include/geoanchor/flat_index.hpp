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
#include <span>
#include <vector>

#include "geoanchor/gallery.hpp"
#include "geoanchor/geodesy.hpp"

namespace geoanchor {

inline constexpr int kDefaultPositiveK = 16;
inline constexpr int kDefaultNegativeK = 16;

/// Inner product with a fixed accumulation order: eight interleaved float
/// partial sums (lane j takes dimensions j, j+8, ...) reduced pairwise as
/// ((l0+l1)+(l2+l3))+((l4+l5)+(l6+l7)). The order never depends on threading.
float inner_product(std::span<const float> a, std::span<const float> b) noexcept;

struct NeighborHit {
  std::uint64_t id = 0;
  float score = 0.0f;
  GeoCoordinate location;

  friend bool operator==(const NeighborHit&, const NeighborHit&) = default;
};

struct NeighborSet {
  std::vector<NeighborHit> positives;  // non-increasing score
  std::vector<NeighborHit> negatives;  // non-decreasing score
  int k_pos = 0;
  int k_neg = 0;
};

struct SearchOptions {
  /// Worker threads for one search; 0 means hardware concurrency.
  unsigned threads = 1;
  /// Records per scan chunk.
  std::size_t chunk_size = 16384;
};

/// Exhaustive exact maximum-inner-product search over a gallery. Ties are
/// broken by ascending record id; results do not depend on `threads`.
class FlatIndex {
 public:
  explicit FlatIndex(Gallery gallery, SearchOptions options = {});

  const Gallery& gallery() const noexcept { return gallery_; }
  const SearchOptions& options() const noexcept { return options_; }

  /// The k records with the largest inner product, best first.
  std::vector<NeighborHit> top_k(std::span<const float> query, int k) const;

  /// The k records with the smallest inner product, most dissimilar first.
  /// Defined as top_k of the negated query with scores negated back.
  std::vector<NeighborHit> bottom_k(std::span<const float> query, int k) const;

  NeighborSet search(std::span<const float> query, int k_pos, int k_neg) const;

 private:
  std::vector<float> prepare_query(std::span<const float> query) const;
  std::vector<NeighborHit> scan(std::span<const float> unit_query, int k) const;

  Gallery gallery_;
  SearchOptions options_;
};

}  // namespace geoanchor
