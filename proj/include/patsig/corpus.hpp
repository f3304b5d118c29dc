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

// Patent record ingestion, filtering, tokenization and the vocabulary and
// bigram tables built from the tokenized abstracts.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace patsig::corpus {

/// One IPC symbol split into its five levels, e.g. "B60L 11/18".
struct IpcCode {
  char section = 0;       // 'A'..'H'
  int klass = 0;          // two digits
  char subclass = 0;      // letter
  int group = 0;
  int subgroup = 0;

  std::string class_key() const;     // "B60"
  std::string subclass_key() const;  // "B60L"
  std::string group_key() const;     // "B60L 11"
  std::string to_string() const;     // "B60L 11/18"

  friend bool operator==(const IpcCode&, const IpcCode&) = default;
};

/// Parses "SCCS G/SG" (the space between subclass and group is optional).
/// Throws Error(kFormat) on anything else.
IpcCode parse_ipc(std::string_view text);

struct PatentRecord {
  std::string id;
  std::string abstract;
  int year = 0;
  bool granted = false;
  bool is_priority = false;
  std::vector<IpcCode> ipc;
  /// ISO-3166 alpha-2 -> fraction of inventors located there.
  std::map<std::string, double> country_shares;
  // Optional relational metadata.
  std::vector<std::string> inventors;
  std::vector<std::string> assignees;
  std::vector<std::string> cites;
};

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct ParseReport {
  std::vector<PatentRecord> records;
  std::vector<LineError> errors;
};

/// Reads JSONL records. Malformed lines and record-level violations land in
/// `errors` with their line numbers; a duplicate id throws Error(kData)
/// naming both lines.
ParseReport parse_patents(std::istream& in);

/// Serializes one record back to a single JSONL line (no trailing newline).
std::string to_jsonl(const PatentRecord& record);

struct FilterPolicy {
  int min_year = 1980;
  int max_year = 2017;
  bool granted_only = true;
  bool priority_only = true;

  static FilterPolicy permissive();
  bool accepts(const PatentRecord& r) const;
};

std::vector<PatentRecord> filter_corpus(const std::vector<PatentRecord>& records,
                                        const FilterPolicy& policy);

/// Lowercased alphanumeric runs of at least two characters. Bytes of
/// multi-byte UTF-8 sequences count as word characters and are left as-is.
std::vector<std::string> tokenize(std::string_view text);

using TokenDoc = std::vector<std::string>;
using EncodedDoc = std::vector<std::uint32_t>;

struct PairHash {
  std::size_t operator()(const std::pair<std::string, std::string>& p) const noexcept;
};

class BigramTable {
 public:
  using Pair = std::pair<std::string, std::string>;

  BigramTable() = default;
  explicit BigramTable(std::uint64_t threshold) : threshold_(threshold) {}

  std::uint64_t threshold() const noexcept { return threshold_; }
  std::size_t size() const noexcept { return counts_.size(); }
  bool contains(const std::string& a, const std::string& b) const;
  std::optional<std::uint64_t> count(const std::string& a, const std::string& b) const;
  void insert(std::string a, std::string b, std::uint64_t count);

  /// Pairs sorted lexicographically, for stable output.
  std::vector<std::pair<Pair, std::uint64_t>> sorted() const;

  /// TSV: `token_a \t token_b \t count`, preceded by a `# threshold=N` line.
  std::string to_tsv() const;
  static BigramTable from_tsv(std::string_view text);

 private:
  std::uint64_t threshold_ = 500;
  std::unordered_map<Pair, std::uint64_t, PairHash> counts_;
};

/// Collects every adjacent ordered pair whose count reaches `threshold`.
BigramTable detect_bigrams(const std::vector<TokenDoc>& docs, std::uint64_t threshold);

/// Greedy left-to-right merge of table pairs into "a_b" tokens.
TokenDoc apply_bigrams(const TokenDoc& doc, const BigramTable& table);

class Vocabulary {
 public:
  std::size_t size() const noexcept { return terms_.size(); }
  std::optional<std::uint32_t> index_of(std::string_view term) const;
  const std::string& term(std::uint32_t index) const { return terms_.at(index); }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  std::uint64_t corpus_frequency(std::uint32_t index) const { return freq_.at(index); }
  std::uint64_t document_frequency(std::uint32_t index) const { return df_.at(index); }
  std::uint64_t document_count() const noexcept { return n_docs_; }
  std::uint64_t min_count() const noexcept { return min_count_; }

  /// Maps tokens to indices, dropping out-of-vocabulary tokens.
  EncodedDoc encode(const TokenDoc& doc) const;

  /// CRC32 over the ordered term list; identifies the vocabulary in models.
  std::uint32_t fingerprint() const;

  /// TSV: `term \t index \t corpus_freq \t doc_freq`, preceded by a header
  /// comment carrying min_count and the document count.
  std::string to_tsv() const;
  static Vocabulary from_tsv(std::string_view text);

  friend Vocabulary build_vocabulary(const std::vector<TokenDoc>& docs,
                                     std::uint64_t min_count);

 private:
  void add(std::string term, std::uint64_t freq, std::uint64_t df);

  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::uint64_t> freq_;
  std::vector<std::uint64_t> df_;
  std::uint64_t n_docs_ = 0;
  std::uint64_t min_count_ = 1;
};

/// Indices in descending frequency, ties broken lexicographically. Throws
/// Error(kData) if nothing reaches min_count.
Vocabulary build_vocabulary(const std::vector<TokenDoc>& docs, std::uint64_t min_count);

/// tokenize -> apply_bigrams -> encode: the preprocessing shared by corpus
/// vectorization and free-text queries.
EncodedDoc encode_text(std::string_view text, const BigramTable& bigrams, const Vocabulary& vocab);

}  // namespace patsig::corpus
