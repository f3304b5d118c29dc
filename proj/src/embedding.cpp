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

#include "patsig/embedding.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <limits>
#include <sstream>

#include "patsig/common.hpp"

namespace patsig::embedding {

namespace {

constexpr std::string_view kStoreMagic = "PSV1";

std::uint32_t fingerprint_terms(const std::vector<std::string>& terms) {
  std::string joined;
  for (const auto& t : terms) {
    joined += t;
    joined.push_back('\n');
  }
  return patsig::crc32(joined);
}

/// Cumulative unigram^power table for negative sampling.
class NegativeSampler {
 public:
  NegativeSampler(const corpus::Vocabulary& vocab, double power) {
    cumulative_.reserve(vocab.size());
    double acc = 0.0;
    for (std::uint32_t i = 0; i < vocab.size(); ++i) {
      acc += std::pow(static_cast<double>(vocab.corpus_frequency(i)), power);
      cumulative_.push_back(acc);
    }
  }

  std::uint32_t draw(Rng& rng) const {
    const double x = uniform01(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    if (it == cumulative_.end()) --it;
    return static_cast<std::uint32_t>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

}  // namespace

bool DocumentVector::is_sentinel() const {
  return norm == NormFlag::kRaw &&
         std::all_of(values.begin(), values.end(), [](float v) { return v == 0.0f; });
}

DocumentVector DocumentVector::sentinel(std::string id, std::size_t dim) {
  return DocumentVector{std::move(id), std::vector<float>(dim, 0.0f), NormFlag::kRaw};
}

void VectorStore::add(std::string id, std::span<const float> values, NormFlag norm) {
  require(values.size() == dim_, ErrorKind::kFormat,
          "vector for '" + id + "' has dimension " + std::to_string(values.size()) +
              ", store expects " + std::to_string(dim_));
  ids_.push_back(std::move(id));
  flags_.push_back(norm);
  data_.insert(data_.end(), values.begin(), values.end());
}

std::span<const float> VectorStore::vector(std::size_t i) const {
  require(i < size(), ErrorKind::kData, "vector index out of range");
  return {data_.data() + i * dim_, dim_};
}

bool VectorStore::is_sentinel(std::size_t i) const {
  if (flags_.at(i) != NormFlag::kRaw) return false;
  const auto v = vector(i);
  return std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; });
}

DocumentVector VectorStore::get(std::size_t i) const {
  const auto v = vector(i);
  return DocumentVector{ids_[i], std::vector<float>(v.begin(), v.end()), flags_[i]};
}

std::string VectorStore::serialize() const {
  ByteWriter w;
  w.bytes(kStoreMagic);
  w.u32(kVersion);
  w.u32(dim_);
  w.u64(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    w.short_string(ids_[i]);
    w.u8(static_cast<std::uint8_t>(flags_[i]));
    for (float x : vector(i)) w.f32(x);
  }
  return std::move(w.data());
}

VectorStore VectorStore::deserialize(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != kStoreMagic)
    fail(ErrorKind::kFormat, "not a vector store (bad magic at offset 0)");
  const auto version = r.u32();
  if (version != kVersion)
    fail(ErrorKind::kVersion, "vector store version " + std::to_string(version) +
                                  " is not supported (expected " + std::to_string(kVersion) + ")");
  VectorStore store(r.u32());
  const auto count = r.u64();
  std::vector<float> buf(store.dim_);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto id = r.short_string();
    const auto flag_offset = r.offset();
    const auto flag = r.u8();
    if (flag > 1)
      fail(ErrorKind::kFormat, "invalid norm flag " + std::to_string(flag) + " at offset " +
                                   std::to_string(flag_offset));
    for (auto& x : buf) x = r.f32();
    store.add(std::move(id), buf, static_cast<NormFlag>(flag));
  }
  if (r.remaining() != 0)
    fail(ErrorKind::kFormat, "trailing bytes after vector store at offset " +
                                 std::to_string(r.offset()));
  return store;
}

void VectorStore::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

VectorStore VectorStore::load(const std::filesystem::path& path) {
  try {
    return deserialize(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kMissing) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> terms, std::uint32_t dim,
                                 SgnsParams params)
    : dim_(dim),
      terms_(std::move(terms)),
      fingerprint_(fingerprint_terms(terms_)),
      params_(params),
      data_(terms_.size() * dim, 0.0f) {
  params_.dim = dim;
}

std::span<const float> EmbeddingMatrix::row(std::size_t i) const {
  return {data_.data() + i * dim_, dim_};
}

std::span<float> EmbeddingMatrix::row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

bool EmbeddingMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float x) { return std::isfinite(x); });
}

VectorStore EmbeddingMatrix::to_store() const {
  VectorStore store(dim_);
  for (std::size_t i = 0; i < rows(); ++i) store.add(terms_[i], row(i), NormFlag::kRaw);
  return store;
}

EmbeddingMatrix EmbeddingMatrix::from_store(const VectorStore& store, SgnsParams params) {
  EmbeddingMatrix m(store.ids(), store.dim(), params);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto v = store.vector(i);
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return m;
}

EmbeddingMatrix initial_embedding(const corpus::Vocabulary& vocab, const SgnsParams& params) {
  require(params.dim >= 1, ErrorKind::kConfig, "embedding dimension must be >= 1");
  EmbeddingMatrix m(vocab.terms(), params.dim, params);
  Rng rng(derive_seed(params.seed, 0));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (auto& x : m.row(i))
      x = static_cast<float>((uniform01(rng) - 0.5) / static_cast<double>(params.dim));
  return m;
}

void sgns_step(std::span<float> center, std::span<float* const> outputs, float lr,
               std::span<float> scratch) {
  const std::size_t dim = center.size();
  std::fill(scratch.begin(), scratch.end(), 0.0f);
  for (std::size_t j = 0; j < outputs.size(); ++j) {
    float* u = outputs[j];
    float s = 0.0f;
    for (std::size_t d = 0; d < dim; ++d) s += u[d] * center[d];
    const float label = j == 0 ? 1.0f : 0.0f;
    const float g = sigmoid(s) - label;
    for (std::size_t d = 0; d < dim; ++d) {
      scratch[d] += g * u[d];
      u[d] -= lr * g * center[d];
    }
  }
  for (std::size_t d = 0; d < dim; ++d) center[d] -= lr * scratch[d];
}

EmbeddingMatrix train_sgns(const std::vector<corpus::EncodedDoc>& docs,
                           const corpus::Vocabulary& vocab, const SgnsParams& params) {
  require(params.dim >= 1, ErrorKind::kConfig, "embedding dimension must be >= 1");
  require(params.window >= 1, ErrorKind::kConfig, "window must be >= 1");
  require(params.learning_rate > 0.0, ErrorKind::kConfig, "learning rate must be positive");
  std::uint64_t total_words = 0;
  for (const auto& d : docs) total_words += d.size();
  if (docs.empty() || total_words == 0) fail(ErrorKind::kData, "cannot train on an empty corpus");
  for (const auto& d : docs)
    for (auto t : d)
      require(t < vocab.size(), ErrorKind::kData, "token index outside the vocabulary");

  EmbeddingMatrix emb = initial_embedding(vocab, params);
  if (params.epochs == 0) return emb;

  const std::uint32_t dim = params.dim;
  std::vector<float> output(vocab.size() * dim, 0.0f);
  const NegativeSampler sampler(vocab, 0.75);

  // Keep probability per term for frequent-word subsampling.
  std::vector<double> keep(vocab.size(), 1.0);
  if (params.subsample > 0.0) {
    std::uint64_t train_words = 0;
    for (std::uint32_t i = 0; i < vocab.size(); ++i) train_words += vocab.corpus_frequency(i);
    const double threshold = params.subsample * static_cast<double>(train_words);
    for (std::uint32_t i = 0; i < vocab.size(); ++i) {
      const double f = static_cast<double>(vocab.corpus_frequency(i));
      keep[i] = std::min(1.0, (std::sqrt(f / threshold) + 1.0) * threshold / f);
    }
  }

  const double budget = static_cast<double>(params.epochs) * static_cast<double>(total_words);
  std::atomic<std::uint64_t> processed{0};
  const unsigned workers = std::max(1u, params.threads);

  auto run_docs = [&](std::size_t begin, std::size_t end, Rng& rng) {
    std::vector<float> scratch(dim);
    std::vector<float*> outputs;
    std::vector<std::uint32_t> sentence;
    for (std::size_t di = begin; di < end; ++di) {
      sentence.clear();
      for (auto t : docs[di])
        if (keep[t] >= 1.0 || uniform01(rng) < keep[t]) sentence.push_back(t);
      const auto done = processed.fetch_add(docs[di].size(), std::memory_order_relaxed);
      const double progress = static_cast<double>(done) / (budget + 1.0);
      const float lr = static_cast<float>(
          params.learning_rate * std::max(1.0 - progress, params.min_learning_rate_ratio));
      for (std::size_t c = 0; c < sentence.size(); ++c) {
        const std::size_t win =
            params.shrink_window ? 1 + uniform_index(rng, params.window) : params.window;
        const std::size_t lo = c >= win ? c - win : 0;
        const std::size_t hi = std::min(sentence.size() - 1, c + win);
        auto center = emb.row(sentence[c]);
        for (std::size_t o = lo; o <= hi; ++o) {
          if (o == c) continue;
          const auto target = sentence[o];
          outputs.clear();
          outputs.push_back(output.data() + std::size_t{target} * dim);
          for (std::uint32_t k = 0; k < params.negatives; ++k) {
            const auto neg = sampler.draw(rng);
            if (neg == target) continue;
            outputs.push_back(output.data() + std::size_t{neg} * dim);
          }
          sgns_step(center, outputs, lr, scratch);
        }
      }
    }
  };

  for (std::uint32_t epoch = 0; epoch < params.epochs; ++epoch) {
    if (workers == 1) {
      Rng rng(derive_seed(params.seed, 1 + epoch));
      run_docs(0, docs.size(), rng);
    } else {
      // Lock-free concurrent updates; only statistical guarantees hold here.
      parallel_for(workers, workers, [&](std::size_t w) {
        Rng rng(derive_seed(params.seed, (std::uint64_t{epoch} + 1) * 1000003ULL + w));
        run_docs(docs.size() * w / workers, docs.size() * (w + 1) / workers, rng);
      });
    }
  }
  if (!emb.all_finite()) fail(ErrorKind::kData, "embedding training diverged (non-finite values)");
  return emb;
}

TfIdfModel::TfIdfModel(std::vector<double> idf, std::uint64_t documents,
                       std::uint32_t vocab_fingerprint, std::string formula)
    : idf_(std::move(idf)),
      documents_(documents),
      fingerprint_(vocab_fingerprint),
      formula_(std::move(formula)) {
  for (double w : idf_)
    require(std::isnan(w) || (std::isfinite(w) && w >= 0.0), ErrorKind::kData,
            "idf weights must be finite and non-negative");
}

bool TfIdfModel::has_weight(std::uint32_t term) const {
  return term < idf_.size() && !std::isnan(idf_[term]);
}

double TfIdfModel::idf(std::uint32_t term) const {
  if (!has_weight(term))
    fail(ErrorKind::kData, "term " + std::to_string(term) + " has no idf weight (df = 0)");
  return idf_[term];
}

std::string TfIdfModel::to_tsv() const {
  std::string out = "# formula=" + formula_ + " documents=" + std::to_string(documents_) +
                    " vocab=" + std::to_string(fingerprint_) + " terms=" +
                    std::to_string(idf_.size()) + "\n";
  char buf[64];
  for (std::size_t i = 0; i < idf_.size(); ++i) {
    if (std::isnan(idf_[i])) continue;
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\n", i, idf_[i]);
    out += buf;
  }
  return out;
}

TfIdfModel TfIdfModel::from_tsv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::string formula;
  std::uint64_t documents = 0, terms = 0;
  std::uint32_t fingerprint = 0;
  bool header = false;
  std::vector<double> idf;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hdr(line.substr(1));
      std::string kv;
      while (hdr >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto key = kv.substr(0, eq);
        const auto val = kv.substr(eq + 1);
        if (key == "formula") formula = val;
        if (key == "documents") documents = std::stoull(val);
        if (key == "vocab") fingerprint = static_cast<std::uint32_t>(std::stoul(val));
        if (key == "terms") terms = std::stoull(val);
      }
      header = true;
      idf.assign(terms, std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    std::istringstream fields(line);
    std::size_t idx = 0;
    double w = 0.0;
    if (!header || !(fields >> idx >> w) || idx >= idf.size())
      fail(ErrorKind::kFormat, "tf-idf model line " + std::to_string(line_no) + " is malformed");
    idf[idx] = w;
  }
  if (!header) fail(ErrorKind::kFormat, "tf-idf model has no header");
  return TfIdfModel(std::move(idf), documents, fingerprint, formula);
}

TfIdfModel fit_tfidf(const std::vector<corpus::EncodedDoc>& docs, const corpus::Vocabulary& vocab) {
  require(!docs.empty(), ErrorKind::kData, "cannot fit tf-idf on an empty corpus");
  const std::uint64_t n = docs.size();
  require(vocab.document_count() == 0 || vocab.document_count() == n, ErrorKind::kConfig,
          "vocabulary was built from " + std::to_string(vocab.document_count()) +
              " documents but tf-idf is fitted on " + std::to_string(n));
  std::vector<double> idf(vocab.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::uint32_t t = 0; t < vocab.size(); ++t) {
    const auto df = vocab.document_frequency(t);
    if (df == 0) continue;
    require(df <= n, ErrorKind::kData, "document frequency exceeds document count");
    idf[t] = std::log(static_cast<double>(n) / static_cast<double>(df));
  }
  return TfIdfModel(std::move(idf), n, vocab.fingerprint());
}

DocumentVector embed_document(const corpus::EncodedDoc& doc, const EmbeddingMatrix& emb,
                              const TfIdfModel& tfidf, std::string id) {
  if (emb.vocab_fingerprint() != tfidf.vocab_fingerprint() || emb.rows() != tfidf.size())
    fail(ErrorKind::kFormat, "embedding and tf-idf model were built from different vocabularies");
  const std::size_t dim = emb.dim();
  // Summing in ascending term order makes the result independent of token order.
  auto terms = doc;
  std::sort(terms.begin(), terms.end());
  std::vector<double> acc(dim, 0.0);
  for (std::size_t i = 0; i < terms.size();) {
    std::size_t j = i;
    while (j < terms.size() && terms[j] == terms[i]) ++j;
    const auto t = terms[i];
    const double tf = static_cast<double>(j - i);
    i = j;
    if (t >= emb.rows() || !tfidf.has_weight(t)) continue;
    const double w = tf * tfidf.idf(t);
    if (w == 0.0) continue;
    const auto e = emb.row(t);
    for (std::size_t d = 0; d < dim; ++d) acc[d] += w * static_cast<double>(e[d]);
  }
  double norm2 = 0.0;
  for (double x : acc) norm2 += x * x;
  const double norm = std::sqrt(norm2);
  if (!(norm > 0.0) || !std::isfinite(norm)) return DocumentVector::sentinel(std::move(id), dim);
  DocumentVector out{std::move(id), std::vector<float>(dim), NormFlag::kUnit};
  for (std::size_t d = 0; d < dim; ++d) out.values[d] = static_cast<float>(acc[d] / norm);
  return out;
}

VectorStore vectorize_corpus(const std::vector<std::string>& ids,
                             const std::vector<corpus::EncodedDoc>& docs,
                             const EmbeddingMatrix& emb, const TfIdfModel& tfidf,
                             unsigned threads) {
  require(ids.size() == docs.size(), ErrorKind::kData, "id and document counts differ");
  std::vector<DocumentVector> out(docs.size());
  parallel_for(docs.size(), threads,
               [&](std::size_t i) { out[i] = embed_document(docs[i], emb, tfidf, ids[i]); });
  VectorStore store(emb.dim());
  for (const auto& v : out) store.add(v);
  return store;
}

}  // namespace patsig::embedding
