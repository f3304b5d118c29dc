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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "patsig/ann.hpp"
#include "patsig/corpus.hpp"
#include "patsig/embedding.hpp"

namespace patsig::similarity {

/// Cosine similarity clamped to [-1, 1]. Throws kUndefined if either operand
/// has zero norm.
double cosine(std::span<const float> x, std::span<const float> y);
double cosine(const embedding::DocumentVector& x, const embedding::DocumentVector& y);

struct SimilarityEdge {
  std::uint32_t dst = 0;
  double score = 0.0;

  friend bool operator==(const SimilarityEdge&, const SimilarityEdge&) = default;
};

struct GraphParams {
  std::size_t k = 100;
  double threshold = 0.65;
  /// 0 selects n_trees * k.
  std::size_t search_breadth = 0;
  unsigned threads = 1;

  void validate() const;
};

/// Directed per-source adjacency of above-threshold neighbors. Node indices
/// follow the id table; m(i) is the number of retained neighbors of i.
class SimilarityGraph {
 public:
  SimilarityGraph() = default;
  SimilarityGraph(std::vector<std::string> ids, GraphParams params);

  std::size_t size() const noexcept { return ids_.size(); }
  const std::string& id(std::size_t i) const { return ids_.at(i); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::optional<std::uint32_t> index_of(std::string_view id) const;
  const GraphParams& params() const noexcept { return params_; }

  std::span<const SimilarityEdge> neighbors(std::size_t i) const { return adjacency_.at(i); }
  std::size_t m(std::size_t i) const { return adjacency_.at(i).size(); }
  std::size_t edge_count() const;

  /// Replaces i's neighbor list; keeps it sorted by descending score.
  void set_neighbors(std::size_t i, std::vector<SimilarityEdge> edges);

  /// `src \t dst \t score` lines, scores at 6 decimals, sources in id order.
  std::string to_tsv() const;
  /// Parses edge TSV. `ids` lists every node (isolated ones included); an
  /// edge naming an unknown id throws kData.
  static SimilarityGraph from_tsv(std::string_view text, std::vector<std::string> ids,
                                  GraphParams params = {});

  /// JSON sidecar recording k, threshold, breadth and the index checksum.
  std::string metadata_json(std::uint32_t index_crc) const;

  friend bool operator==(const SimilarityGraph& a, const SimilarityGraph& b) {
    return a.ids_ == b.ids_ && a.adjacency_ == b.adjacency_;
  }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::vector<SimilarityEdge>> adjacency_;
  GraphParams params_;
};

/// For every non-sentinel item: top-k forest neighbors (self excluded),
/// then keep those scoring at least the threshold.
SimilarityGraph build_similarity_graph(const ann::RpForest& forest, const GraphParams& params);

struct SearchResult {
  ann::NeighborList neighbors;
  std::string status;  // "ok" or "no in-vocabulary terms"
};

inline constexpr std::string_view kNoVocabularyTerms = "no in-vocabulary terms";

/// Embeds free text exactly like a corpus abstract and queries the forest.
SearchResult semantic_search(std::string_view text, const corpus::BigramTable& bigrams,
                             const corpus::Vocabulary& vocab,
                             const embedding::EmbeddingMatrix& emb,
                             const embedding::TfIdfModel& tfidf, const ann::RpForest& forest,
                             std::size_t k, std::size_t search_breadth = 0);

}  // namespace patsig::similarity
