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

#include "patsig/ann.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>
#include <unordered_set>

#include "patsig/common.hpp"

namespace patsig::ann {

using embedding::NormFlag;

namespace {

constexpr std::string_view kIndexMagic = "RPF1";
constexpr std::uint8_t kInternalTag = 0;
constexpr std::uint8_t kLeafTag = 1;
// Extra attempts after the first failed bisector before falling back to a
// random balanced partition.
constexpr int kSplitRetries = 3;

double margin(std::span<const float> normal, float offset, std::span<const float> x) {
  double s = 0.0;
  for (std::size_t d = 0; d < normal.size(); ++d)
    s += static_cast<double>(normal[d]) * static_cast<double>(x[d]);
  return s - static_cast<double>(offset);
}

bool rank_before(const Neighbor& a, const Neighbor& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

void keep_top_k(std::vector<Neighbor>& scored, std::size_t k) {
  if (scored.size() > k) {
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                      scored.end(), rank_before);
    scored.resize(k);
  } else {
    std::sort(scored.begin(), scored.end(), rank_before);
  }
}

bool is_zero(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; });
}

}  // namespace

std::optional<double> exact_cosine(std::span<const float> x, std::span<const float> y) {
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double a = x[d], b = y[d];
    dot += a * b;
    nx += a * a;
    ny += b * b;
  }
  if (!(nx > 0.0) || !(ny > 0.0)) return std::nullopt;
  // nx * ny is commutative, so swapping x and y gives the identical value.
  return std::clamp(dot / std::sqrt(nx * ny), -1.0, 1.0);
}

std::size_t RpTree::depth() const {
  if (nodes_.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 1}};
  while (!stack.empty()) {
    auto [n, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes_[n].leaf) {
      stack.emplace_back(nodes_[n].left, d + 1);
      stack.emplace_back(nodes_[n].right, d + 1);
    }
  }
  return best;
}

struct TreeBuilder {
  const VectorStore& items;
  std::uint32_t leaf_capacity;
  Rng rng;

  // Returns the partition (left, right) plus the hyperplane that produced it.
  bool try_bisector(const std::vector<std::uint32_t>& set, std::vector<float>& normal,
                    float& offset, std::vector<std::uint32_t>& left,
                    std::vector<std::uint32_t>& right) {
    const std::size_t n = set.size();
    const auto ia = uniform_index(rng, n);
    auto ib = uniform_index(rng, n - 1);
    if (ib >= ia) ++ib;
    const auto a = items.vector(set[ia]);
    const auto b = items.vector(set[ib]);
    const std::size_t dim = a.size();
    std::vector<double> diff(dim);
    double norm2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      diff[d] = static_cast<double>(a[d]) - static_cast<double>(b[d]);
      norm2 += diff[d] * diff[d];
    }
    if (!(norm2 > 0.0)) return false;
    const double inv = 1.0 / std::sqrt(norm2);
    normal.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) normal[d] = static_cast<float>(diff[d] * inv);
    double off = 0.0;
    for (std::size_t d = 0; d < dim; ++d)
      off += static_cast<double>(normal[d]) * 0.5 * (static_cast<double>(a[d]) + b[d]);
    offset = static_cast<float>(off);
    left.clear();
    right.clear();
    for (auto i : set) (margin(normal, offset, items.vector(i)) > 0.0 ? right : left).push_back(i);
    return !left.empty() && !right.empty();
  }

  RpTree build(std::vector<std::uint32_t> all) {
    RpTree tree;
    const std::uint32_t dim = items.dim();
    struct Task {
      std::uint32_t node;
      std::vector<std::uint32_t> set;
    };
    std::vector<Task> stack;
    tree.nodes_.emplace_back();
    stack.push_back({0, std::move(all)});
    std::vector<float> normal;
    std::vector<std::uint32_t> left, right;
    while (!stack.empty()) {
      Task task = std::move(stack.back());
      stack.pop_back();
      if (task.set.size() <= leaf_capacity) {
        auto& node = tree.nodes_[task.node];
        node.leaf = true;
        node.first = static_cast<std::uint32_t>(tree.items_.size());
        node.count = static_cast<std::uint32_t>(task.set.size());
        tree.items_.insert(tree.items_.end(), task.set.begin(), task.set.end());
        continue;
      }
      float offset = 0.0f;
      bool ok = false;
      for (int attempt = 0; attempt <= kSplitRetries && !ok; ++attempt)
        ok = try_bisector(task.set, normal, offset, left, right);
      if (!ok) {
        // No separating bisector: split at random into halves. A zero normal
        // gives both children margin 0, so queries explore them equally.
        std::vector<std::uint32_t> shuffled = task.set;
        for (std::size_t i = shuffled.size(); i > 1; --i)
          std::swap(shuffled[i - 1], shuffled[uniform_index(rng, i)]);
        const auto half = static_cast<std::ptrdiff_t>(shuffled.size() / 2);
        left.assign(shuffled.begin(), shuffled.begin() + half);
        right.assign(shuffled.begin() + half, shuffled.end());
        normal.assign(dim, 0.0f);
        offset = 0.0f;
      }
      const auto left_id = static_cast<std::uint32_t>(tree.nodes_.size());
      const auto right_id = left_id + 1;
      tree.nodes_.emplace_back();
      tree.nodes_.emplace_back();
      auto& node = tree.nodes_[task.node];
      node.leaf = false;
      node.offset = offset;
      node.first = static_cast<std::uint32_t>(tree.normals_.size());
      node.left = left_id;
      node.right = right_id;
      tree.normals_.insert(tree.normals_.end(), normal.begin(), normal.end());
      stack.push_back({right_id, right});
      stack.push_back({left_id, left});
    }
    return tree;
  }
};

RpForest RpForest::build(const VectorStore& store, const ForestParams& params) {
  require(params.n_trees >= 1, ErrorKind::kConfig, "n_trees must be >= 1");
  require(params.leaf_capacity >= 1, ErrorKind::kConfig, "leaf_capacity must be >= 1");
  require(store.dim() >= 1, ErrorKind::kConfig, "vector dimension must be >= 1");
  RpForest forest;
  forest.leaf_capacity_ = params.leaf_capacity;
  forest.seed_ = params.seed;
  forest.items_ = VectorStore(store.dim());
  std::vector<std::uint32_t> live;
  std::vector<float> unit(store.dim());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto v = store.vector(i);
    if (is_zero(v)) {
      forest.items_.add(store.id(i), v, NormFlag::kRaw);
      continue;
    }
    double n2 = 0.0;
    for (float x : v) n2 += static_cast<double>(x) * x;
    if (!std::isfinite(n2)) fail(ErrorKind::kData, "non-finite vector for '" + store.id(i) + "'");
    if (store.norm(i) == NormFlag::kUnit) {
      forest.items_.add(store.id(i), v, NormFlag::kUnit);
    } else {
      const double inv = 1.0 / std::sqrt(n2);
      for (std::size_t d = 0; d < v.size(); ++d) unit[d] = static_cast<float>(v[d] * inv);
      forest.items_.add(store.id(i), unit, NormFlag::kUnit);
    }
    live.push_back(static_cast<std::uint32_t>(i));
  }
  if (live.empty()) fail(ErrorKind::kData, "no indexable (non-zero) vectors in the store");
  forest.index_ids();

  forest.trees_.resize(params.n_trees);
  parallel_for(params.n_trees, params.threads, [&](std::size_t t) {
    TreeBuilder builder{forest.items_, params.leaf_capacity, Rng(derive_seed(params.seed, t))};
    forest.trees_[t] = builder.build(live);
  });
  return forest;
}

void RpForest::index_ids() {
  id_index_.clear();
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (!id_index_.emplace(items_.id(i), static_cast<std::uint32_t>(i)).second)
      fail(ErrorKind::kData, "duplicate id '" + items_.id(i) + "' in vector store");
  }
}

std::optional<std::uint32_t> RpForest::index_of(std::string_view id) const {
  auto it = id_index_.find(std::string(id));
  if (it == id_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::uint32_t> RpForest::candidates(std::span<const float> q,
                                                std::size_t search_breadth) const {
  using Entry = std::tuple<double, std::uint32_t, std::uint32_t>;  // priority, tree, node
  std::priority_queue<Entry> queue;
  for (std::uint32_t t = 0; t < trees_.size(); ++t)
    queue.emplace(std::numeric_limits<double>::infinity(), t, 0);
  std::vector<std::uint32_t> out;
  out.reserve(search_breadth + leaf_capacity_);
  const auto dim = this->dim();
  while (!queue.empty() && out.size() < search_breadth) {
    const auto [priority, t, n] = queue.top();
    queue.pop();
    const auto& tree = trees_[t];
    const auto& node = tree.nodes()[n];
    if (node.leaf) {
      const auto leaf = tree.leaf_items(node);
      out.insert(out.end(), leaf.begin(), leaf.end());
      continue;
    }
    const double m = margin(tree.normal(node, dim), node.offset, q);
    queue.emplace(std::min(priority, m), t, node.right);
    queue.emplace(std::min(priority, -m), t, node.left);
  }
  return out;
}

NeighborList RpForest::query(std::span<const float> q, std::size_t k, std::size_t search_breadth,
                             std::optional<std::uint32_t> exclude) const {
  require(k >= 1, ErrorKind::kConfig, "k must be >= 1");
  require(q.size() == dim(), ErrorKind::kFormat,
          "query dimension " + std::to_string(q.size()) + " does not match index dimension " +
              std::to_string(dim()));
  NeighborList result;
  result.k = k;
  result.search_breadth = search_breadth == 0 ? std::size_t{n_trees()} * k : search_breadth;
  if (is_zero(q)) return result;

  auto cand = candidates(q, result.search_breadth);
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  std::vector<Neighbor> scored;
  scored.reserve(cand.size());
  for (auto i : cand) {
    if (exclude && i == *exclude) continue;
    const auto s = exact_cosine(q, items_.vector(i));
    if (!s) continue;
    scored.push_back({i, items_.id(i), *s});
  }
  keep_top_k(scored, k);
  result.items = std::move(scored);
  return result;
}

NeighborList RpForest::query_item(std::uint32_t index, std::size_t k,
                                  std::size_t search_breadth) const {
  require(index < size(), ErrorKind::kData, "item index out of range");
  auto result = query(items_.vector(index), k, search_breadth, index);
  result.query_id = items_.id(index);
  return result;
}

std::string RpForest::serialize() const {
  ByteWriter w;
  w.bytes(kIndexMagic);
  w.u32(kVersion);
  w.u32(dim());
  w.u32(n_trees());
  w.u32(leaf_capacity_);
  w.u64(items_.size());
  w.u64(seed_);
  for (const auto& id : items_.ids()) w.short_string(id);
  for (std::size_t i = 0; i < items_.size(); ++i)
    for (float x : items_.vector(i)) w.f32(x);
  for (const auto& tree : trees_) {
    w.u32(static_cast<std::uint32_t>(tree.nodes().size()));
    for (const auto& node : tree.nodes()) {
      if (node.leaf) {
        w.u8(kLeafTag);
        w.u32(node.count);
        for (auto i : tree.leaf_items(node)) w.u32(i);
      } else {
        w.u8(kInternalTag);
        for (float x : tree.normal(node, dim())) w.f32(x);
        w.f32(node.offset);
        w.u32(node.left);
        w.u32(node.right);
      }
    }
  }
  w.u32(patsig::crc32(w.data()));
  return std::move(w.data());
}

RpForest RpForest::deserialize(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != kIndexMagic)
    fail(ErrorKind::kFormat, "not an index file (bad magic at offset 0)");
  const auto version = r.u32();
  if (version != kVersion)
    fail(ErrorKind::kVersion, "index version " + std::to_string(version) +
                                  " is not supported (expected " + std::to_string(kVersion) + ")");
  // A failed checksum means the counts below cannot be trusted either, so
  // structural errors found while parsing are reported as checksum errors.
  const bool crc_ok =
      bytes.size() >= 12 && ByteReader(bytes.substr(bytes.size() - 4)).u32() ==
                                patsig::crc32(bytes.substr(0, bytes.size() - 4));
  try {
    return parse_index(r, bytes);
  } catch (const Error& e) {
    if (!crc_ok && e.kind() == ErrorKind::kFormat)
      fail(ErrorKind::kChecksum, std::string("index checksum mismatch (") + e.what() + ")");
    throw;
  }
}

RpForest RpForest::parse_index(ByteReader& r, std::string_view bytes) {
  RpForest forest;
  const auto dim = r.u32();
  const auto n_trees = r.u32();
  forest.leaf_capacity_ = r.u32();
  const auto count = r.u64();
  forest.seed_ = r.u64();
  std::vector<std::string> ids;
  for (std::uint64_t i = 0; i < count; ++i) ids.push_back(r.short_string());
  forest.items_ = VectorStore(dim);
  std::vector<float> buf(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    for (auto& x : buf) x = r.f32();
    forest.items_.add(std::move(ids[i]), buf, is_zero(buf) ? NormFlag::kRaw : NormFlag::kUnit);
  }
  if (n_trees > r.remaining() / 4)
    fail(ErrorKind::kTruncated, "index truncated: " + std::to_string(n_trees) +
                                    " trees promised at offset " + std::to_string(r.offset()));
  forest.trees_.resize(n_trees);
  for (auto& tree : forest.trees_) {
    const auto n_nodes = r.u32();
    if (n_nodes > r.remaining() / 5)
      fail(ErrorKind::kTruncated, "index truncated: " + std::to_string(n_nodes) +
                                      " nodes promised at offset " + std::to_string(r.offset()));
    tree.nodes_.resize(n_nodes);
    for (auto& node : tree.nodes_) {
      const auto tag_offset = r.offset();
      const auto tag = r.u8();
      if (tag == kLeafTag) {
        node.leaf = true;
        node.count = r.u32();
        node.first = static_cast<std::uint32_t>(tree.items_.size());
        for (std::uint32_t i = 0; i < node.count; ++i) {
          const auto item = r.u32();
          if (item >= count)
            fail(ErrorKind::kFormat, "leaf item out of range at offset " +
                                         std::to_string(r.offset() - 4));
          tree.items_.push_back(item);
        }
      } else if (tag == kInternalTag) {
        node.first = static_cast<std::uint32_t>(tree.normals_.size());
        for (std::uint32_t d = 0; d < dim; ++d) tree.normals_.push_back(r.f32());
        node.offset = r.f32();
        node.left = r.u32();
        node.right = r.u32();
        if (node.left >= n_nodes || node.right >= n_nodes)
          fail(ErrorKind::kFormat, "child index out of range at offset " +
                                       std::to_string(r.offset() - 8));
      } else {
        fail(ErrorKind::kFormat, "unknown node tag " + std::to_string(tag) + " at offset " +
                                     std::to_string(tag_offset));
      }
    }
  }
  const auto body_size = r.offset();
  if (r.remaining() < 4)
    fail(ErrorKind::kTruncated, "index truncated: checksum missing at offset " +
                                    std::to_string(body_size));
  const auto stored = r.u32();
  if (r.remaining() != 0)
    fail(ErrorKind::kFormat, "trailing bytes after index checksum at offset " +
                                 std::to_string(r.offset()));
  if (stored != patsig::crc32(bytes.substr(0, body_size)))
    fail(ErrorKind::kChecksum, "index checksum mismatch");
  forest.index_ids();
  return forest;
}

void RpForest::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

RpForest RpForest::load(const std::filesystem::path& path) {
  try {
    return deserialize(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kMissing) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

NeighborList brute_force_knn(const VectorStore& store, std::span<const float> q, std::size_t k,
                             std::optional<std::uint32_t> exclude) {
  NeighborList result;
  result.k = k;
  result.search_breadth = store.size();
  if (k == 0 || is_zero(q)) return result;
  std::vector<Neighbor> scored;
  scored.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (exclude && i == *exclude) continue;
    const auto s = exact_cosine(q, store.vector(i));
    if (!s) continue;
    scored.push_back({static_cast<std::uint32_t>(i), store.id(i), *s});
  }
  keep_top_k(scored, k);
  result.items = std::move(scored);
  return result;
}

double recall(const NeighborList& found, const NeighborList& truth) {
  if (truth.items.empty()) return 1.0;
  std::unordered_set<std::uint32_t> got;
  for (const auto& n : found.items) got.insert(n.index);
  std::size_t hit = 0;
  for (const auto& n : truth.items) hit += got.count(n.index);
  return static_cast<double>(hit) / static_cast<double>(truth.items.size());
}

}  // namespace patsig::ann
