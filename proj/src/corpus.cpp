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

#include "patsig/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <sstream>

#include "json.hpp"
#include "patsig/common.hpp"

namespace patsig::corpus {

using nlohmann::json;

namespace {

bool is_ascii_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

char ascii_lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

std::size_t count_code_points(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xc0) != 0x80) ++n;
  return n;
}

std::string format_share_sum(double sum) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", sum);
  return buf;
}

template <typename T>
T required_field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end()) throw std::invalid_argument(std::string("missing field '") + name + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("field '") + name + "' has the wrong type");
  }
}

std::vector<std::string> optional_strings(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_array()) throw std::invalid_argument(std::string("field '") + name + "' must be an array");
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string())
      throw std::invalid_argument(std::string("field '") + name + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

PatentRecord record_from_json(const json& obj) {
  if (!obj.is_object()) throw std::invalid_argument("line is not a JSON object");
  PatentRecord r;
  r.id = required_field<std::string>(obj, "id");
  if (r.id.empty()) throw std::invalid_argument("empty id");
  r.abstract = required_field<std::string>(obj, "abstract");
  if (!obj.contains("year") || !obj["year"].is_number_integer())
    throw std::invalid_argument("field 'year' must be an integer");
  r.year = obj["year"].get<int>();
  r.granted = required_field<bool>(obj, "granted");
  r.is_priority = required_field<bool>(obj, "is_priority");
  for (const auto& code : required_field<std::vector<std::string>>(obj, "ipc")) {
    try {
      r.ipc.push_back(parse_ipc(code));
    } catch (const Error& e) {
      throw std::invalid_argument(e.what());
    }
  }
  auto shares = obj.find("country_shares");
  if (shares == obj.end() || !shares->is_object())
    throw std::invalid_argument("field 'country_shares' must be an object");
  double sum = 0.0;
  for (const auto& [country, value] : shares->items()) {
    if (!value.is_number()) throw std::invalid_argument("share for " + country + " is not a number");
    const double v = value.get<double>();
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("share for " + country + " outside [0,1]");
    r.country_shares.emplace(country, v);
    sum += v;
  }
  if (!r.country_shares.empty()) {
    if (std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("shares sum " + format_share_sum(sum));
    for (auto& [country, v] : r.country_shares) v /= sum;
  }
  r.inventors = optional_strings(obj, "inventors");
  r.assignees = optional_strings(obj, "assignees");
  r.cites = optional_strings(obj, "cites");
  return r;
}

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    fail(ErrorKind::kFormat, "malformed IPC symbol '" + std::string(whole) + "'");
  return v;
}

}  // namespace

std::string IpcCode::class_key() const {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%c%02d", section, klass);
  return buf;
}

std::string IpcCode::subclass_key() const { return class_key() + subclass; }

std::string IpcCode::group_key() const { return subclass_key() + " " + std::to_string(group); }

std::string IpcCode::to_string() const {
  // Subgroups are written with at least two digits ("8/00", "8/04").
  const std::string sg = std::to_string(subgroup);
  return group_key() + "/" + (sg.size() < 2 ? "0" + sg : sg);
}

IpcCode parse_ipc(std::string_view text) {
  const std::string whole(text);
  auto bad = [&] { fail(ErrorKind::kFormat, "malformed IPC symbol '" + whole + "'"); };
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.size() < 4) bad();
  IpcCode code;
  code.section = text[0];
  if (code.section < 'A' || code.section > 'H') bad();
  if (!std::isdigit(static_cast<unsigned char>(text[1])) ||
      !std::isdigit(static_cast<unsigned char>(text[2])))
    bad();
  code.klass = (text[1] - '0') * 10 + (text[2] - '0');
  code.subclass = text[3];
  if (code.subclass < 'A' || code.subclass > 'Z') bad();
  auto rest = text.substr(4);
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  const auto slash = rest.find('/');
  if (slash == std::string_view::npos) bad();
  code.group = parse_int(rest.substr(0, slash), whole);
  code.subgroup = parse_int(rest.substr(slash + 1), whole);
  if (code.group < 0 || code.subgroup < 0) bad();
  return code;
}

ParseReport parse_patents(std::istream& in) {
  ParseReport report;
  std::unordered_map<std::string, std::size_t> seen;  // id -> line
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    PatentRecord record;
    try {
      record = record_from_json(json::parse(line));
    } catch (const json::exception& e) {
      report.errors.push_back({line_no, std::string("invalid JSON: ") + e.what()});
      continue;
    } catch (const std::invalid_argument& e) {
      report.errors.push_back({line_no, e.what()});
      continue;
    }
    auto [it, inserted] = seen.emplace(record.id, line_no);
    if (!inserted) {
      fail(ErrorKind::kData, "duplicate id '" + record.id + "' on lines " +
                                 std::to_string(it->second) + " and " + std::to_string(line_no));
    }
    report.records.push_back(std::move(record));
  }
  return report;
}

std::string to_jsonl(const PatentRecord& r) {
  json obj;
  obj["id"] = r.id;
  obj["abstract"] = r.abstract;
  obj["year"] = r.year;
  obj["granted"] = r.granted;
  obj["is_priority"] = r.is_priority;
  auto ipc = json::array();
  for (const auto& c : r.ipc) ipc.push_back(c.to_string());
  obj["ipc"] = std::move(ipc);
  obj["country_shares"] = json::object();
  for (const auto& [k, v] : r.country_shares) obj["country_shares"][k] = v;
  if (!r.inventors.empty()) obj["inventors"] = r.inventors;
  if (!r.assignees.empty()) obj["assignees"] = r.assignees;
  if (!r.cites.empty()) obj["cites"] = r.cites;
  return obj.dump();
}

FilterPolicy FilterPolicy::permissive() {
  FilterPolicy p;
  p.min_year = std::numeric_limits<int>::min();
  p.max_year = std::numeric_limits<int>::max();
  p.granted_only = false;
  p.priority_only = false;
  return p;
}

bool FilterPolicy::accepts(const PatentRecord& r) const {
  if (r.year < min_year || r.year > max_year) return false;
  if (granted_only && !r.granted) return false;
  if (priority_only && !r.is_priority) return false;
  return true;
}

std::vector<PatentRecord> filter_corpus(const std::vector<PatentRecord>& records,
                                        const FilterPolicy& policy) {
  std::vector<PatentRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [&](const PatentRecord& r) { return policy.accepts(r); });
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (count_code_points(current) >= 2) tokens.push_back(current);
    current.clear();
  };
  for (unsigned char c : text) {
    if (is_ascii_alnum(c) || c >= 0x80) {
      current.push_back(ascii_lower(c));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::size_t PairHash::operator()(const std::pair<std::string, std::string>& p) const noexcept {
  const std::size_t h1 = std::hash<std::string>{}(p.first);
  const std::size_t h2 = std::hash<std::string>{}(p.second);
  return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
}

bool BigramTable::contains(const std::string& a, const std::string& b) const {
  return counts_.find({a, b}) != counts_.end();
}

std::optional<std::uint64_t> BigramTable::count(const std::string& a, const std::string& b) const {
  auto it = counts_.find({a, b});
  if (it == counts_.end()) return std::nullopt;
  return it->second;
}

void BigramTable::insert(std::string a, std::string b, std::uint64_t count) {
  counts_[{std::move(a), std::move(b)}] = count;
}

std::vector<std::pair<BigramTable::Pair, std::uint64_t>> BigramTable::sorted() const {
  std::vector<std::pair<Pair, std::uint64_t>> out(counts_.begin(), counts_.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::string BigramTable::to_tsv() const {
  std::string out = "# threshold=" + std::to_string(threshold_) + "\n";
  for (const auto& [pair, n] : sorted())
    out += pair.first + "\t" + pair.second + "\t" + std::to_string(n) + "\n";
  return out;
}

BigramTable BigramTable::from_tsv(std::string_view text) {
  BigramTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# threshold=", 0) == 0) {
      table.threshold_ = std::stoull(line.substr(12));
      continue;
    }
    std::istringstream fields(line);
    std::string a, b;
    std::uint64_t n = 0;
    if (!std::getline(fields, a, '\t') || !std::getline(fields, b, '\t') || !(fields >> n))
      fail(ErrorKind::kFormat, "bigram table line " + std::to_string(line_no) + " is malformed");
    table.insert(std::move(a), std::move(b), n);
  }
  return table;
}

BigramTable detect_bigrams(const std::vector<TokenDoc>& docs, std::uint64_t threshold) {
  require(threshold >= 1, ErrorKind::kConfig, "bigram threshold must be >= 1");
  std::unordered_map<BigramTable::Pair, std::uint64_t, PairHash> counts;
  for (const auto& doc : docs)
    for (std::size_t i = 0; i + 1 < doc.size(); ++i) ++counts[{doc[i], doc[i + 1]}];
  BigramTable table(threshold);
  for (auto& [pair, n] : counts)
    if (n >= threshold) table.insert(pair.first, pair.second, n);
  return table;
}

TokenDoc apply_bigrams(const TokenDoc& doc, const BigramTable& table) {
  if (table.size() == 0) return doc;
  TokenDoc out;
  out.reserve(doc.size());
  std::size_t i = 0;
  while (i < doc.size()) {
    if (i + 1 < doc.size() && table.contains(doc[i], doc[i + 1])) {
      out.push_back(doc[i] + "_" + doc[i + 1]);
      i += 2;
    } else {
      out.push_back(doc[i]);
      ++i;
    }
  }
  return out;
}

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EncodedDoc Vocabulary::encode(const TokenDoc& doc) const {
  EncodedDoc out;
  out.reserve(doc.size());
  for (const auto& t : doc)
    if (auto idx = index_of(t)) out.push_back(*idx);
  return out;
}

std::uint32_t Vocabulary::fingerprint() const {
  std::string joined;
  for (const auto& t : terms_) {
    joined += t;
    joined.push_back('\n');
  }
  return patsig::crc32(joined);
}

void Vocabulary::add(std::string term, std::uint64_t freq, std::uint64_t df) {
  const auto idx = static_cast<std::uint32_t>(terms_.size());
  if (!index_.emplace(term, idx).second)
    fail(ErrorKind::kFormat, "duplicate vocabulary term '" + term + "'");
  terms_.push_back(std::move(term));
  freq_.push_back(freq);
  df_.push_back(df);
}

std::string Vocabulary::to_tsv() const {
  std::string out = "# min_count=" + std::to_string(min_count_) +
                    " documents=" + std::to_string(n_docs_) + "\n";
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    out += terms_[i] + "\t" + std::to_string(i) + "\t" + std::to_string(freq_[i]) + "\t" +
           std::to_string(df_[i]) + "\n";
  }
  return out;
}

Vocabulary Vocabulary::from_tsv(std::string_view text) {
  Vocabulary v;
  std::istringstream in{std::string(text)};
  std::string line;
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
        const auto val = std::stoull(kv.substr(eq + 1));
        if (key == "min_count") v.min_count_ = val;
        if (key == "documents") v.n_docs_ = val;
      }
      continue;
    }
    std::istringstream fields(line);
    std::string term;
    std::uint64_t idx = 0, freq = 0, df = 0;
    if (!std::getline(fields, term, '\t') || !(fields >> idx >> freq >> df))
      fail(ErrorKind::kFormat, "vocabulary line " + std::to_string(line_no) + " is malformed");
    if (idx != v.terms_.size())
      fail(ErrorKind::kFormat, "vocabulary line " + std::to_string(line_no) +
                                   " has out-of-order index " + std::to_string(idx));
    v.add(std::move(term), freq, df);
  }
  return v;
}

Vocabulary build_vocabulary(const std::vector<TokenDoc>& docs, std::uint64_t min_count) {
  require(min_count >= 1, ErrorKind::kConfig, "min_count must be >= 1");
  std::unordered_map<std::string, std::pair<std::uint64_t, std::uint64_t>> stats;  // freq, df
  std::unordered_map<std::string, std::size_t> last_doc;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& t : docs[d]) {
      auto& s = stats[t];
      ++s.first;
      auto [it, inserted] = last_doc.emplace(t, d);
      if (inserted || it->second != d) {
        it->second = d;
        ++s.second;
      }
    }
  }
  std::vector<std::pair<std::string, std::pair<std::uint64_t, std::uint64_t>>> kept;
  for (auto& [term, s] : stats)
    if (s.first >= min_count) kept.emplace_back(term, s);
  if (kept.empty())
    fail(ErrorKind::kData, "empty vocabulary: no term occurs at least " +
                               std::to_string(min_count) + " times");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.first < b.first;
  });
  Vocabulary v;
  v.min_count_ = min_count;
  v.n_docs_ = docs.size();
  for (auto& [term, s] : kept) v.add(std::move(term), s.first, s.second);
  return v;
}

EncodedDoc encode_text(std::string_view text, const BigramTable& bigrams, const Vocabulary& vocab) {
  return vocab.encode(apply_bigrams(tokenize(text), bigrams));
}

}  // namespace patsig::corpus
