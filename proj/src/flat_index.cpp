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


#include "geoanchor/flat_index.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <queue>
#include <string>
#include <thread>

#include "geoanchor/error.hpp"

namespace geoanchor {
namespace {

struct Candidate {
  float score;
  std::size_t index;  // position in the gallery; ascending index == ascending id
};

// True when `a` ranks ahead of `b`.
inline bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.index < b.index;
}

// Bounded selection of the k best candidates. The heap top is the current worst.
class TopKCollector {
 public:
  explicit TopKCollector(std::size_t k) : k_(k) { heap_.reserve(k); }

  void offer(float score, std::size_t index) {
    const Candidate c{score, index};
    if (heap_.size() < k_) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    } else if (ranks_before(c, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    }
  }

  std::vector<Candidate> take() && { return std::move(heap_); }

 private:
  std::size_t k_;
  std::vector<Candidate> heap_;
};

}  // namespace

float inner_product(std::span<const float> a, std::span<const float> b) noexcept {
  float lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  const std::size_t n = a.size();
  const std::size_t full = n - n % 8;
  const float* pa = a.data();
  const float* pb = b.data();
  for (std::size_t i = 0; i < full; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) lanes[j] += pa[i + j] * pb[i + j];
  }
  for (std::size_t i = full; i < n; ++i) lanes[i - full] += pa[i] * pb[i];
  return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
         ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
}

FlatIndex::FlatIndex(Gallery gallery, SearchOptions options)
    : gallery_(std::move(gallery)), options_(options) {
  if (options_.chunk_size == 0) options_.chunk_size = 16384;
  if (options_.threads == 0) options_.threads = std::max(1u, std::thread::hardware_concurrency());
}

std::vector<float> FlatIndex::prepare_query(std::span<const float> query) const {
  if (query.size() != gallery_.dim()) {
    throw Error(ErrorCode::kInvalidArgument, "query dimension " + std::to_string(query.size()) +
                                                 " does not match gallery dimension " +
                                                 std::to_string(gallery_.dim()));
  }
  double sq = 0.0;
  for (float v : query) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "query has a non-finite component");
    sq += static_cast<double>(v) * v;
  }
  const double norm = std::sqrt(sq);
  if (norm == 0.0) throw Error(ErrorCode::kInvalidArgument, "query vector has zero norm");
  std::vector<float> unit(query.begin(), query.end());
  if (std::abs(norm - 1.0) > kNormTolerance) {
    for (float& v : unit) v = static_cast<float>(v / norm);
  }
  return unit;
}

std::vector<NeighborHit> FlatIndex::scan(std::span<const float> unit_query, int k) const {
  const std::size_t n = gallery_.size();
  const std::size_t want = std::min(static_cast<std::size_t>(k), n);
  const std::size_t chunk = options_.chunk_size;
  const std::size_t chunks = (n + chunk - 1) / chunk;
  std::vector<std::vector<Candidate>> partial(chunks);

  auto run_chunk = [&](std::size_t c) {
    TopKCollector collector(want);
    const std::size_t end = std::min(n, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      collector.offer(inner_product(unit_query, gallery_.vector(i)), i);
    }
    partial[c] = std::move(collector).take();
  };

  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(options_.threads, chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < chunks; c = next++) run_chunk(c);
      });
    }
  }

  // Merge in chunk order; the final sort fixes the order independently of it.
  std::vector<Candidate> merged;
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  std::sort(merged.begin(), merged.end(), ranks_before);
  merged.resize(std::min(merged.size(), want));

  std::vector<NeighborHit> hits;
  hits.reserve(merged.size());
  for (const auto& c : merged) {
    hits.push_back({gallery_.id(c.index), c.score, gallery_.location(c.index)});
  }
  return hits;
}

std::vector<NeighborHit> FlatIndex::top_k(std::span<const float> query, int k) const {
  if (k <= 0) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  const auto unit = prepare_query(query);
  return scan(unit, k);
}

std::vector<NeighborHit> FlatIndex::bottom_k(std::span<const float> query, int k) const {
  if (k <= 0) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  auto unit = prepare_query(query);
  for (float& v : unit) v = -v;
  auto hits = scan(unit, k);
  for (auto& h : hits) h.score = -h.score;
  return hits;
}

NeighborSet FlatIndex::search(std::span<const float> query, int k_pos, int k_neg) const {
  NeighborSet set;
  set.k_pos = k_pos;
  set.k_neg = k_neg;
  set.positives = top_k(query, k_pos);
  set.negatives = bottom_k(query, k_neg);
  return set;
}

}  // namespace geoanchor
