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

#include "patsig/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "patsig/common.hpp"

namespace patsig::similarity {

double cosine(std::span<const float> x, std::span<const float> y) {
  require(x.size() == y.size(), ErrorKind::kFormat, "cosine of vectors with different dimension");
  const auto s = ann::exact_cosine(x, y);
  if (!s) fail(ErrorKind::kUndefined, "cosine similarity undefined for a zero vector");
  return *s;
}

double cosine(const embedding::DocumentVector& x, const embedding::DocumentVector& y) {
  return cosine(std::span<const float>(x.values), std::span<const float>(y.values));
}

void GraphParams::validate() const {
  require(k >= 1, ErrorKind::kConfig, "k must be >= 1");
  require(threshold > -1.0 && threshold <= 1.0, ErrorKind::kConfig,
          "threshold must lie in (-1, 1]");
}

SimilarityGraph::SimilarityGraph(std::vector<std::string> ids, GraphParams params)
    : ids_(std::move(ids)), adjacency_(ids_.size()), params_(params) {
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (!index_.emplace(ids_[i], static_cast<std::uint32_t>(i)).second)
      fail(ErrorKind::kData, "duplicate id '" + ids_[i] + "' in graph");
}

std::optional<std::uint32_t> SimilarityGraph::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t SimilarityGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& a : adjacency_) n += a.size();
  return n;
}

void SimilarityGraph::set_neighbors(std::size_t i, std::vector<SimilarityEdge> edges) {
  std::stable_sort(edges.begin(), edges.end(),
                   [](const SimilarityEdge& a, const SimilarityEdge& b) { return a.score > b.score; });
  adjacency_.at(i) = std::move(edges);
}

std::string SimilarityGraph::to_tsv() const {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < size(); ++i) {
    for (const auto& e : adjacency_[i]) {
      std::snprintf(buf, sizeof buf, "%.6f", e.score);
      out += ids_[i] + "\t" + ids_[e.dst] + "\t" + buf + "\n";
    }
  }
  return out;
}

SimilarityGraph SimilarityGraph::from_tsv(std::string_view text, std::vector<std::string> ids,
                                          GraphParams params) {
  SimilarityGraph g(std::move(ids), params);
  std::vector<std::vector<SimilarityEdge>> adj(g.size());
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string src, dst, score;
    if (!std::getline(fields, src, '\t') || !std::getline(fields, dst, '\t') ||
        !std::getline(fields, score))
      fail(ErrorKind::kFormat, "edge line " + std::to_string(line_no) + " is malformed");
    const auto s = g.index_of(src);
    const auto d = g.index_of(dst);
    if (!s || !d)
      fail(ErrorKind::kData, "edge line " + std::to_string(line_no) + " names unknown id '" +
                                 (s ? dst : src) + "'");
    double value = 0.0;
    try {
      value = std::stod(score);
    } catch (const std::exception&) {
      fail(ErrorKind::kFormat, "edge line " + std::to_string(line_no) + " has a bad score");
    }
    adj[*s].push_back({*d, value});
  }
  for (std::size_t i = 0; i < adj.size(); ++i) g.set_neighbors(i, std::move(adj[i]));
  return g;
}

std::string SimilarityGraph::metadata_json(std::uint32_t index_crc) const {
  nlohmann::ordered_json meta;
  meta["k"] = params_.k;
  meta["threshold"] = params_.threshold;
  meta["search_breadth"] = params_.search_breadth;
  meta["index_crc32"] = index_crc;
  meta["nodes"] = size();
  meta["edges"] = edge_count();
  return meta.dump(2) + "\n";
}

SimilarityGraph build_similarity_graph(const ann::RpForest& forest, const GraphParams& params) {
  params.validate();
  SimilarityGraph graph(forest.items().ids(), params);
  std::vector<std::vector<SimilarityEdge>> adj(forest.size());
  parallel_for(forest.size(), params.threads, [&](std::size_t i) {
    if (forest.items().is_sentinel(i)) return;
    try {
      const auto found =
          forest.query_item(static_cast<std::uint32_t>(i), params.k, params.search_breadth);
      for (const auto& n : found.items)
        if (n.score >= params.threshold) adj[i].push_back({n.index, n.score});
    } catch (const Error& e) {
      throw Error(e.kind(), "while querying '" + forest.items().id(i) + "': " + e.what());
    }
  });
  for (std::size_t i = 0; i < adj.size(); ++i) graph.set_neighbors(i, std::move(adj[i]));
  return graph;
}

SearchResult semantic_search(std::string_view text, const corpus::BigramTable& bigrams,
                             const corpus::Vocabulary& vocab,
                             const embedding::EmbeddingMatrix& emb,
                             const embedding::TfIdfModel& tfidf, const ann::RpForest& forest,
                             std::size_t k, std::size_t search_breadth) {
  require(k >= 1, ErrorKind::kConfig, "k must be >= 1");
  const auto doc = corpus::encode_text(text, bigrams, vocab);
  const auto q = embedding::embed_document(doc, emb, tfidf, "query");
  SearchResult result;
  if (q.is_sentinel()) {
    result.neighbors.k = k;
    result.status = doc.empty() ? std::string(kNoVocabularyTerms)
                                : std::string("zero signature: all query terms have idf 0");
    return result;
  }
  result.neighbors = forest.query(q.values, k, search_breadth);
  result.status = "ok";
  return result;
}

}  // namespace patsig::similarity
