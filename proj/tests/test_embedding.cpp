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

#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "patsig/corpus.hpp"
#include "patsig/embedding.hpp"

using namespace patsig;
using namespace patsig::embedding;

namespace {

// Two disjoint topic clusters: {a1..a5} and {b1..b5}.
std::vector<corpus::TokenDoc> cluster_docs(std::size_t per_topic, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<corpus::TokenDoc> docs;
  for (std::size_t d = 0; d < 2 * per_topic; ++d) {
    const char prefix = d % 2 ? 'b' : 'a';
    corpus::TokenDoc doc;
    for (int i = 0; i < 20; ++i)
      doc.push_back(std::string(1, prefix) + std::to_string(1 + uniform_index(rng, 5)));
    docs.push_back(doc);
  }
  return docs;
}

std::vector<corpus::EncodedDoc> encode_all(const std::vector<corpus::TokenDoc>& docs,
                                           const corpus::Vocabulary& v) {
  std::vector<corpus::EncodedDoc> out;
  for (const auto& d : docs) out.push_back(v.encode(d));
  return out;
}

double cluster_gap(const EmbeddingMatrix& emb, const corpus::Vocabulary& v) {
  double within = 0, cross = 0;
  int nw = 0, nc = 0;
  for (std::uint32_t i = 0; i < v.size(); ++i)
    for (std::uint32_t j = i + 1; j < v.size(); ++j) {
      const double c = static_cast<double>(oracle::cosine(emb.row(i), emb.row(j)));
      if (v.term(i)[0] == v.term(j)[0]) {
        within += c;
        ++nw;
      } else {
        cross += c;
        ++nc;
      }
    }
  return within / nw - cross / nc;
}

EmbeddingMatrix matrix(std::vector<std::string> terms, std::vector<std::vector<float>> rows) {
  EmbeddingMatrix emb(std::move(terms), static_cast<std::uint32_t>(rows[0].size()), {});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), emb.row(i).begin());
  return emb;
}

}  // namespace

TEST_CASE("fit_tfidf log-ratio weights") {
  // panel in 1 of 3 documents, solar in 2, every in all 3.
  const std::vector<corpus::TokenDoc> docs = {
      {"panel", "solar", "every"}, {"solar", "every"}, {"every"}};
  const auto v = corpus::build_vocabulary(docs, 1);
  const auto model = fit_tfidf(encode_all(docs, v), v);
  CHECK(model.idf(*v.index_of("panel")) == doctest::Approx(1.0986).epsilon(1e-4));
  CHECK(model.idf(*v.index_of("panel")) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(model.idf(*v.index_of("solar")) == doctest::Approx(0.4055).epsilon(1e-4));
  CHECK(model.idf(*v.index_of("every")) == 0.0);
  CHECK(model.documents() == 3);
  CHECK(model.formula() == "ln(N/df)");
  for (double w : model.weights()) CHECK(w >= 0.0);
}

TEST_CASE("tf-idf lookups without a weight fail explicitly") {
  const TfIdfModel model({0.5, std::numeric_limits<double>::quiet_NaN()}, 4, 0);
  CHECK(model.has_weight(0));
  CHECK_FALSE(model.has_weight(1));
  CHECK_FALSE(model.has_weight(7));
  CHECK_THROWS_AS(model.idf(1), Error);
  CHECK_THROWS_AS(model.idf(7), Error);
}

TEST_CASE("tf-idf TSV round-trip is exact") {
  const TfIdfModel model({std::log(3.0), std::numeric_limits<double>::quiet_NaN(), 0.0}, 3, 1234);
  const auto back = TfIdfModel::from_tsv(model.to_tsv());
  CHECK(back.size() == 3);
  CHECK(back.idf(0) == model.idf(0));
  CHECK_FALSE(back.has_weight(1));
  CHECK(back.idf(2) == 0.0);
  CHECK(back.vocab_fingerprint() == 1234);
  CHECK(back.documents() == 3);
  CHECK(back.to_tsv() == model.to_tsv());
}

TEST_CASE("embed_document two-dimensional example") {
  const auto emb = matrix({"a", "b"}, {{1, 0}, {0, 1}});
  const TfIdfModel tfidf({std::log(1.5), std::log(3.0)}, 3, emb.vocab_fingerprint());
  const auto v = embed_document({0, 0, 1}, emb, tfidf, "doc");
  REQUIRE(v.norm == NormFlag::kUnit);
  CHECK(v.values[0] == doctest::Approx(0.5938).epsilon(1e-4));
  CHECK(v.values[1] == doctest::Approx(0.8046).epsilon(1e-4));
  // Independent long-double evaluation of the same formula.
  const long double x = 2 * std::log(1.5L), y = std::log(3.0L);
  const long double n = std::sqrt(x * x + y * y);
  CHECK(std::abs(v.values[0] - x / n) < 1e-6);
  CHECK(std::abs(v.values[1] - y / n) < 1e-6);
}

TEST_CASE("embed_document single term and sentinel cases") {
  const auto emb = matrix({"a", "b", "c"}, {{3, 4}, {0, 1}, {1, 1}});
  const TfIdfModel tfidf({0.7, 0.0, std::numeric_limits<double>::quiet_NaN()}, 3,
                         emb.vocab_fingerprint());
  const auto single = embed_document({0}, emb, tfidf);
  CHECK(single.values[0] == doctest::Approx(0.6));
  CHECK(single.values[1] == doctest::Approx(0.8));

  for (const corpus::EncodedDoc& doc : {corpus::EncodedDoc{}, corpus::EncodedDoc{1, 1},
                                        corpus::EncodedDoc{2}, corpus::EncodedDoc{9}}) {
    const auto s = embed_document(doc, emb, tfidf, "x");
    CHECK(s.is_sentinel());
    CHECK(s.norm == NormFlag::kRaw);
    CHECK(s.values == std::vector<float>(2, 0.0f));
  }

  const auto other = matrix({"a", "z", "c"}, {{3, 4}, {0, 1}, {1, 1}});
  CHECK_THROWS_AS(embed_document({0}, other, tfidf), Error);
}

TEST_CASE("embed_document is order-invariant and idf-scale invariant") {
  Rng rng(17);
  const std::size_t V = 30, D = 8;
  std::vector<std::string> terms;
  for (std::size_t i = 0; i < V; ++i) terms.push_back("t" + std::to_string(i));
  EmbeddingMatrix emb(terms, D, {});
  for (std::size_t i = 0; i < V; ++i)
    for (auto& x : emb.row(i)) x = static_cast<float>(standard_normal(rng));
  std::vector<double> idf(V);
  for (auto& w : idf) w = uniform01(rng) * 3;
  const TfIdfModel base(idf, 100, emb.vocab_fingerprint());
  for (int trial = 0; trial < 200; ++trial) {
    corpus::EncodedDoc doc;
    for (std::size_t i = 0, n = 1 + uniform_index(rng, 25); i < n; ++i)
      doc.push_back(static_cast<std::uint32_t>(uniform_index(rng, V)));
    const auto v = embed_document(doc, emb, base);
    auto shuffled = doc;
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[uniform_index(rng, i)]);
    CHECK(embed_document(shuffled, emb, base).values == v.values);

    const double c = 0.01 + uniform01(rng) * 100;
    auto scaled = idf;
    for (auto& w : scaled) w *= c;
    const auto s = embed_document(doc, emb, TfIdfModel(scaled, 100, emb.vocab_fingerprint()));
    for (std::size_t d = 0; d < D; ++d) CHECK(std::abs(s.values[d] - v.values[d]) < 1e-6);
    if (!v.is_sentinel()) {
      long double n2 = 0;
      for (float x : v.values) n2 += static_cast<long double>(x) * x;
      CHECK(std::abs(std::sqrt(n2) - 1) < 1e-5);
    }
    for (float x : v.values) CHECK(std::isfinite(x));
  }
}

TEST_CASE("SGNS analytic gradient matches central differences") {
  Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t D = 6, K = 3;
    auto rand_vec = [&] {
      std::vector<double> v(D);
      for (auto& x : v) x = standard_normal(rng) * 0.7;
      return v;
    };
    std::vector<double> center = rand_vec(), context = rand_vec();
    std::vector<std::vector<double>> negs;
    for (std::size_t k = 0; k < K; ++k) negs.push_back(rand_vec());
    auto loss = [&] {
      std::vector<std::span<const double>> ns(negs.begin(), negs.end());
      return sgns_loss<double>(center, context, ns);
    };
    std::vector<std::span<const double>> ns(negs.begin(), negs.end());
    const auto grad = sgns_gradient<double>(center, context, ns);

    auto check_tensor = [&](std::vector<double>& param, const std::vector<double>& analytic) {
      const double h = 1e-6;
      std::vector<double> numeric(D);
      for (std::size_t d = 0; d < D; ++d) {
        const double keep = param[d];
        param[d] = keep + h;
        const double up = loss();
        param[d] = keep - h;
        const double down = loss();
        param[d] = keep;
        numeric[d] = (up - down) / (2 * h);
      }
      double diff = 0, na = 0, nn = 0;
      for (std::size_t d = 0; d < D; ++d) {
        diff += (analytic[d] - numeric[d]) * (analytic[d] - numeric[d]);
        na += analytic[d] * analytic[d];
        nn += numeric[d] * numeric[d];
      }
      const double rel = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
      CHECK(rel < 1e-4);
    };
    check_tensor(center, grad.center);
    check_tensor(context, grad.context);
    for (std::size_t k = 0; k < K; ++k) check_tensor(negs[k], grad.negatives[k]);
  }
}

TEST_CASE("sgns_step applies one gradient-descent step with pre-step vectors") {
  Rng rng(31);
  const std::size_t D = 5;
  std::vector<float> center(D), pos(D), neg1(D), neg2(D), scratch(D);
  for (auto* v : {&center, &pos, &neg1, &neg2})
    for (auto& x : *v) x = static_cast<float>(standard_normal(rng) * 0.5);
  std::vector<double> c(center.begin(), center.end()), p(pos.begin(), pos.end()),
      n1(neg1.begin(), neg1.end()), n2(neg2.begin(), neg2.end());
  const auto g = sgns_gradient<double>(c, p, {n1, n2});
  const float lr = 0.1f;
  std::vector<float*> outs{pos.data(), neg1.data(), neg2.data()};
  sgns_step(center, outs, lr, scratch);
  for (std::size_t d = 0; d < D; ++d) {
    CHECK(std::abs(center[d] - (c[d] - lr * g.center[d])) < 1e-6);
    CHECK(std::abs(pos[d] - (p[d] - lr * g.context[d])) < 1e-6);
    CHECK(std::abs(neg1[d] - (n1[d] - lr * g.negatives[0][d])) < 1e-6);
    CHECK(std::abs(neg2[d] - (n2[d] - lr * g.negatives[1][d])) < 1e-6);
  }
}

TEST_CASE("train_sgns separates disjoint topic clusters") {
  const auto docs = cluster_docs(200, 41);
  const auto v = corpus::build_vocabulary(docs, 1);
  SgnsParams p;
  p.dim = 20;
  p.window = 3;
  p.seed = 9;
  const auto emb = train_sgns(encode_all(docs, v), v, p);
  CHECK(emb.all_finite());
  CHECK(emb.rows() == v.size());
  CHECK(emb.dim() == 20);
  CHECK(cluster_gap(emb, v) >= 0.2);

  SUBCASE("parallel mode keeps the separation") {
    p.threads = 4;
    const auto par = train_sgns(encode_all(docs, v), v, p);
    CHECK(par.all_finite());
    CHECK(cluster_gap(par, v) >= 0.2);
  }
}

TEST_CASE("train_sgns determinism, zero epochs and errors") {
  const auto docs = cluster_docs(30, 43);
  const auto v = corpus::build_vocabulary(docs, 1);
  const auto enc = encode_all(docs, v);
  SgnsParams p;
  p.dim = 12;
  p.seed = 77;
  CHECK(train_sgns(enc, v, p) == train_sgns(enc, v, p));
  CHECK(train_sgns(enc, v, p).to_store().serialize() == train_sgns(enc, v, p).to_store().serialize());
  p.seed = 78;
  CHECK_FALSE(train_sgns(enc, v, p) == train_sgns(enc, v, SgnsParams{.dim = 12, .seed = 77}));

  p.epochs = 0;
  CHECK(train_sgns(enc, v, p) == initial_embedding(v, p));

  CHECK_THROWS_AS(train_sgns({}, v, p), Error);
  p.dim = 0;
  try {
    train_sgns(enc, v, p);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
  }
}

TEST_CASE("embedding matrix persists through the vector-store layout") {
  const auto docs = cluster_docs(10, 3);
  const auto v = corpus::build_vocabulary(docs, 1);
  SgnsParams p;
  p.dim = 7;
  const auto emb = train_sgns(encode_all(docs, v), v, p);
  const auto back = EmbeddingMatrix::from_store(VectorStore::deserialize(emb.to_store().serialize()));
  CHECK(back == emb);
  CHECK(back.vocab_fingerprint() == v.fingerprint());
}

TEST_CASE("vector store binary format") {
  VectorStore store(3);
  store.add("a", std::vector<float>{0.6f, 0.8f, 0.0f}, NormFlag::kUnit);
  store.add("bb", std::vector<float>{0, 0, 0}, NormFlag::kRaw);
  store.add("ccc", std::vector<float>{1e-30f, -2.5f, 7.0f}, NormFlag::kRaw);
  const auto bytes = store.serialize();
  // magic + version + dim + count + 3 * (2 + id + 1 + 12)
  CHECK(bytes.size() == 4 + 4 + 4 + 8 + (2 + 1 + 1 + 12) + (2 + 2 + 1 + 12) + (2 + 3 + 1 + 12));
  CHECK(bytes.substr(0, 4) == "PSV1");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);

  const auto back = VectorStore::deserialize(bytes);
  CHECK(back == store);
  CHECK(back.serialize() == bytes);
  CHECK(back.is_sentinel(1));
  CHECK_FALSE(back.is_sentinel(0));
  CHECK(back.norm(2) == NormFlag::kRaw);

  auto kind_of = [](const std::string& b) {
    try {
      VectorStore::deserialize(b);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kIo;
  };
  CHECK(kind_of(bytes.substr(0, bytes.size() - 1)) == ErrorKind::kTruncated);
  CHECK(kind_of(bytes.substr(0, 10)) == ErrorKind::kTruncated);
  CHECK(kind_of("XSV1" + bytes.substr(4)) == ErrorKind::kFormat);
  auto v2 = bytes;
  v2[4] = 2;
  CHECK(kind_of(v2) == ErrorKind::kVersion);
  CHECK(kind_of(bytes + "x") == ErrorKind::kFormat);
  auto flag = bytes;
  flag[4 + 4 + 4 + 8 + 2 + 1] = 7;
  CHECK(kind_of(flag) == ErrorKind::kFormat);
}

TEST_CASE("vectorize_corpus") {
  const std::vector<corpus::TokenDoc> docs = {{"solar", "panel"}, {"solar", "cell"}, {}};
  const auto v = corpus::build_vocabulary(docs, 1);
  SgnsParams p;
  p.dim = 6;
  const auto emb = train_sgns(encode_all(docs, v), v, p);
  const auto tfidf = fit_tfidf(encode_all(docs, v), v);
  const std::vector<std::string> ids{"p1", "p2", "p3"};
  const auto store = vectorize_corpus(ids, encode_all(docs, v), emb, tfidf);
  CHECK(store.size() == 3);
  CHECK(store.dim() == 6);
  CHECK(store.ids() == ids);
  CHECK(store.is_sentinel(2));
  CHECK(store.norm(0) == NormFlag::kUnit);
  CHECK(VectorStore::deserialize(store.serialize()) == store);
  CHECK(vectorize_corpus(ids, encode_all(docs, v), emb, tfidf, 4) == store);
}
