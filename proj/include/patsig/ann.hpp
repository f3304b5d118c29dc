// Copyright 2026 The patsig Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Random-projection forest for approximate cosine k-nearest-neighbor search,
// plus the exhaustive search it is measured against.
//
// Every internal node splits its items by the perpendicular bisector of two
// sampled items. Queries walk all trees at once through one priority queue
// keyed by the smallest hyperplane margin seen on the path, collect
// candidates until the search breadth is reached, and rank the distinct
// candidates by exact cosine.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "patsig/common.hpp"
#include "patsig/embedding.hpp"

namespace patsig::ann {

using embedding::VectorStore;

struct TreeBuilder;

struct ForestParams {
  std::uint32_t n_trees = 100;
  std::uint32_t leaf_capacity = 16;
  std::uint64_t seed = 42;
  /// Trees are independent given the seed, so any value yields the same forest.
  unsigned threads = 1;
};

struct Neighbor {
  std::uint32_t index = 0;
  std::string id;
  double score = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct NeighborList {
  std::string query_id;  // empty for vector queries
  std::vector<Neighbor> items;
  std::size_t k = 0;
  std::size_t search_breadth = 0;

  bool empty() const noexcept { return items.empty(); }
  std::size_t size() const noexcept { return items.size(); }

  friend bool operator==(const NeighborList&, const NeighborList&) = default;
};

/// x.y / (|x||y|) in double precision, clamped to [-1, 1]. Returns nullopt
/// when either vector has zero norm. Exactly symmetric in its arguments.
std::optional<double> exact_cosine(std::span<const float> x, std::span<const float> y);

class RpTree {
 public:
  struct Node {
    bool leaf = false;
    float offset = 0.0f;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    /// Internal: start of the normal in normals(). Leaf: start in items().
    std::uint32_t first = 0;
    /// Leaf item count (0 for internal nodes).
    std::uint32_t count = 0;
  };

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::span<const float> normal(const Node& n, std::uint32_t dim) const {
    return {normals_.data() + n.first, dim};
  }
  std::span<const std::uint32_t> leaf_items(const Node& n) const {
    return {items_.data() + n.first, n.count};
  }
  std::size_t depth() const;

 private:
  friend class RpForest;
  friend struct TreeBuilder;
  std::vector<Node> nodes_;  // root at 0
  std::vector<float> normals_;
  std::vector<std::uint32_t> items_;
};

class RpForest {
 public:
  static constexpr std::uint32_t kVersion = 1;

  /// Throws kData when no non-sentinel item exists.
  static RpForest build(const VectorStore& store, const ForestParams& params);

  std::uint32_t dim() const noexcept { return items_.dim(); }
  std::uint32_t n_trees() const noexcept { return static_cast<std::uint32_t>(trees_.size()); }
  std::uint32_t leaf_capacity() const noexcept { return leaf_capacity_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t size() const noexcept { return items_.size(); }
  const VectorStore& items() const noexcept { return items_; }
  const std::vector<RpTree>& trees() const noexcept { return trees_; }
  std::optional<std::uint32_t> index_of(std::string_view id) const;

  /// Top-k by exact cosine among forest candidates. search_breadth 0 selects
  /// n_trees * k. A zero query yields an empty list. Throws kConfig if k < 1.
  NeighborList query(std::span<const float> q, std::size_t k, std::size_t search_breadth = 0,
                     std::optional<std::uint32_t> exclude = std::nullopt) const;

  /// Query by an indexed item; the item itself is excluded from the result.
  NeighborList query_item(std::uint32_t index, std::size_t k,
                          std::size_t search_breadth = 0) const;

  /// Raw candidate multiset gathered by the traversal, before de-duplication.
  std::vector<std::uint32_t> candidates(std::span<const float> q,
                                        std::size_t search_breadth) const;

  std::string serialize() const;
  static RpForest deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static RpForest load(const std::filesystem::path& path);

 private:
  void index_ids();
  static RpForest parse_index(ByteReader& r, std::string_view bytes);

  VectorStore items_;
  std::vector<RpTree> trees_;
  std::uint32_t leaf_capacity_ = 16;
  std::uint64_t seed_ = 0;
  std::unordered_map<std::string, std::uint32_t> id_index_;
};

/// Exact top-k by cosine over all non-sentinel items; ties by ascending id.
NeighborList brute_force_knn(const VectorStore& store, std::span<const float> q, std::size_t k,
                             std::optional<std::uint32_t> exclude = std::nullopt);

/// Fraction of `truth` ids present in `found`.
double recall(const NeighborList& found, const NeighborList& truth);

}  // namespace patsig::ann
