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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "patsig/corpus.hpp"

namespace patsig::embedding {

enum class NormFlag : std::uint8_t { kRaw = 0, kUnit = 1 };

/// Technological signature of one patent.
struct DocumentVector {
  std::string id;
  std::vector<float> values;
  NormFlag norm = NormFlag::kRaw;

  /// All-zero raw vector: the signature of a document without usable terms.
  bool is_sentinel() const;
  static DocumentVector sentinel(std::string id, std::size_t dim);
};

/// Dense id -> vector table persisted in the PSV1 layout:
///
///   "PSV1" u32 version u32 dim u64 count
///   count x { u16 id_len, id bytes, u8 norm flag, dim x f32 }
///
/// All integers little-endian.
class VectorStore {
 public:
  static constexpr std::uint32_t kVersion = 1;

  VectorStore() = default;
  explicit VectorStore(std::uint32_t dim) : dim_(dim) {}

  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  void add(std::string id, std::span<const float> values, NormFlag norm);
  void add(const DocumentVector& v) { add(v.id, v.values, v.norm); }

  const std::string& id(std::size_t i) const { return ids_.at(i); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::span<const float> vector(std::size_t i) const;
  NormFlag norm(std::size_t i) const { return flags_.at(i); }
  bool is_sentinel(std::size_t i) const;
  DocumentVector get(std::size_t i) const;

  std::string serialize() const;
  static VectorStore deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static VectorStore load(const std::filesystem::path& path);

  friend bool operator==(const VectorStore&, const VectorStore&) = default;

 private:
  std::uint32_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<NormFlag> flags_;
  std::vector<float> data_;
};

// ---------------------------------------------------------------------------
// Skip-gram with negative sampling.

struct SgnsParams {
  std::uint32_t dim = 300;
  std::uint32_t window = 8;
  std::uint32_t epochs = 5;
  std::uint32_t negatives = 5;
  double learning_rate = 0.025;
  /// Floor of the linear decay, as a fraction of learning_rate.
  double min_learning_rate_ratio = 1e-4;
  /// Frequent-word subsampling threshold; 0 disables it.
  double subsample = 0.0;
  /// Draw the effective window uniformly from [1, window] per center word.
  bool shrink_window = false;
  std::uint64_t seed = 1;
  /// 1 selects the sequential, byte-reproducible mode.
  unsigned threads = 1;
};

class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::vector<std::string> terms, std::uint32_t dim, SgnsParams params);

  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return terms_.size(); }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  std::uint32_t vocab_fingerprint() const noexcept { return fingerprint_; }
  const SgnsParams& params() const noexcept { return params_; }

  std::span<const float> row(std::size_t i) const;
  std::span<float> row(std::size_t i);
  const std::vector<float>& data() const noexcept { return data_; }

  bool all_finite() const;

  /// Same layout as VectorStore, terms as ids, raw norm flag.
  VectorStore to_store() const;
  static EmbeddingMatrix from_store(const VectorStore& store, SgnsParams params = {});

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.dim_ == b.dim_ && a.terms_ == b.terms_ && a.data_ == b.data_;
  }

 private:
  std::uint32_t dim_ = 0;
  std::vector<std::string> terms_;
  std::uint32_t fingerprint_ = 0;
  SgnsParams params_;
  std::vector<float> data_;
};

/// Initial input-vector table: uniform in [-0.5, 0.5) / dim from the seed.
EmbeddingMatrix initial_embedding(const corpus::Vocabulary& vocab, const SgnsParams& params);

/// Trains input vectors. Throws kData on an empty corpus, kConfig on dim 0.
EmbeddingMatrix train_sgns(const std::vector<corpus::EncodedDoc>& docs,
                           const corpus::Vocabulary& vocab, const SgnsParams& params);

template <typename T>
T sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

/// Negative log-likelihood of one (center, context, negatives) sample:
///   -log s(u_o . v) - sum_k log s(-u_k . v)
template <typename T>
T sgns_loss(std::span<const T> center, std::span<const T> context,
            const std::vector<std::span<const T>>& negatives) {
  auto dot = [&](std::span<const T> u) {
    T s = 0;
    for (std::size_t d = 0; d < center.size(); ++d) s += u[d] * center[d];
    return s;
  };
  T loss = -std::log(sigmoid(dot(context)));
  for (const auto& u : negatives) loss -= std::log(sigmoid(-dot(u)));
  return loss;
}

template <typename T>
struct SgnsGradient {
  std::vector<T> center;
  std::vector<T> context;
  std::vector<std::vector<T>> negatives;
};

/// Analytic gradient of sgns_loss. With g_j = s(u_j . v) - label_j:
///   dL/dv = sum_j g_j u_j,  dL/du_j = g_j v.
template <typename T>
SgnsGradient<T> sgns_gradient(std::span<const T> center, std::span<const T> context,
                              const std::vector<std::span<const T>>& negatives) {
  const std::size_t dim = center.size();
  SgnsGradient<T> grad;
  grad.center.assign(dim, T(0));
  auto accumulate = [&](std::span<const T> u, T label) {
    T s = 0;
    for (std::size_t d = 0; d < dim; ++d) s += u[d] * center[d];
    const T g = sigmoid(s) - label;
    std::vector<T> gu(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      grad.center[d] += g * u[d];
      gu[d] = g * center[d];
    }
    return gu;
  };
  grad.context = accumulate(context, T(1));
  for (const auto& u : negatives) grad.negatives.push_back(accumulate(u, T(0)));
  return grad;
}

/// In-place SGD step on one sample: every output row u_j moves by
/// -lr * g_j * v and the center row by -lr * sum_j g_j u_j, both evaluated at
/// the pre-step parameters. `outputs[0]` is the context row, the rest are
/// negatives. `scratch` must hold `dim` floats.
void sgns_step(std::span<float> center, std::span<float* const> outputs, float lr,
               std::span<float> scratch);

// ---------------------------------------------------------------------------
// TF-IDF.

class TfIdfModel {
 public:
  static constexpr std::string_view kLogRatioFormula = "ln(N/df)";

  TfIdfModel() = default;
  /// Builds from explicit weights; NaN marks a term with no weight.
  TfIdfModel(std::vector<double> idf, std::uint64_t documents, std::uint32_t vocab_fingerprint,
             std::string formula = std::string(kLogRatioFormula));

  /// Throws kData for a term without weight (df = 0 or out of range).
  double idf(std::uint32_t term) const;
  bool has_weight(std::uint32_t term) const;
  std::size_t size() const noexcept { return idf_.size(); }
  std::uint64_t documents() const noexcept { return documents_; }
  std::uint32_t vocab_fingerprint() const noexcept { return fingerprint_; }
  const std::string& formula() const noexcept { return formula_; }
  const std::vector<double>& weights() const noexcept { return idf_; }

  /// TSV with a `# formula=... documents=... vocab=...` header, then
  /// `index \t idf` per weighted term.
  std::string to_tsv() const;
  static TfIdfModel from_tsv(std::string_view text);

 private:
  std::vector<double> idf_;
  std::uint64_t documents_ = 0;
  std::uint32_t fingerprint_ = 0;
  std::string formula_{kLogRatioFormula};
};

TfIdfModel fit_tfidf(const std::vector<corpus::EncodedDoc>& docs, const corpus::Vocabulary& vocab);

/// sum_t tf(t) * idf(t) * e_t, L2-normalized; the zero sentinel when no term
/// contributes. Throws kFormat when emb and tfidf disagree on the vocabulary.
DocumentVector embed_document(const corpus::EncodedDoc& doc, const EmbeddingMatrix& emb,
                              const TfIdfModel& tfidf, std::string id = {});

VectorStore vectorize_corpus(const std::vector<std::string>& ids,
                             const std::vector<corpus::EncodedDoc>& docs,
                             const EmbeddingMatrix& emb, const TfIdfModel& tfidf,
                             unsigned threads = 1);

}  // namespace patsig::embedding
