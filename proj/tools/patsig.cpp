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

// patsig: staged pipeline from patent abstracts to signature vectors,
// similarity edges, temporal indicators and validation reports.
//
// Every knob is a top-level option; subcommands fall through to them, so
// `patsig edges --threshold 0.7` and `patsig --threshold 0.7 edges` agree.
// Each run writes `<stage>.config.toml` with all values resolved, and each
// artifact gets a `<artifact>.meta.json` sidecar carrying its CRC32 and the
// CRC32 of every input it was derived from.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "patsig/ann.hpp"
#include "patsig/common.hpp"
#include "patsig/corpus.hpp"
#include "patsig/embedding.hpp"
#include "patsig/eval.hpp"
#include "patsig/indicators.hpp"
#include "patsig/similarity.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace patsig::cli {
namespace {

constexpr std::string_view kVersion = "0.1.0";

namespace artifact {
constexpr const char* kCorpus = "corpus.jsonl";
constexpr const char* kTokens = "tokens.tsv";
constexpr const char* kBigrams = "bigrams.tsv";
constexpr const char* kVocab = "vocab.tsv";
constexpr const char* kEmbedding = "embedding.psv";
constexpr const char* kTfIdf = "tfidf.tsv";
constexpr const char* kVectors = "vectors.psv";
constexpr const char* kIndex = "index.rpf";
constexpr const char* kEdges = "edges.tsv";
constexpr const char* kIndicators = "indicators.tsv";
constexpr const char* kSeries = "series.tsv";
constexpr const char* kFlows = "flows.tsv";
constexpr const char* kStrength = "strength.tsv";
constexpr const char* kMetrics = "metrics.tsv";
constexpr const char* kPlaceboMetrics = "placebo_metrics.tsv";
constexpr const char* kRelational = "relational.tsv";
}  // namespace artifact

struct PipelineConfig {
  std::string workdir = ".";
  std::string input;
  bool deterministic = false;
  unsigned threads = 0;  // 0: hardware concurrency

  int min_year = 1980;
  int max_year = 2017;
  bool granted_only = true;
  bool priority_only = true;
  std::uint64_t bigram_threshold = 500;
  std::uint64_t min_count = 20;

  std::uint32_t dim = 300;
  std::uint32_t window = 8;
  std::uint32_t epochs = 5;
  std::uint32_t negatives = 5;
  double learning_rate = 0.025;
  double subsample = 0.0;
  bool shrink_window = false;
  std::uint64_t sgns_seed = 1;

  std::uint32_t n_trees = 100;
  std::uint32_t leaf_capacity = 16;
  std::uint64_t index_seed = 42;
  std::size_t search_breadth = 0;

  std::size_t k = 100;
  double threshold = 0.65;
  std::size_t query_k = 10;

  double tau = 1.0;
  double lambda = 5.0;
  std::string normalization = "mean";
  std::string group = "global";
  int period_first = 0;
  int period_last = 9999;
  bool dedupe_pairs = false;

  double test_fraction = 0.2;
  std::uint64_t split_seed = 3;
  std::vector<std::size_t> mlp_hidden{512, 256, 128};
  std::size_t mlp_epochs = 20;
  std::size_t mlp_batch = 64;
  double mlp_learning_rate = 0.01;
  double mlp_momentum = 0.9;
  std::uint64_t mlp_seed = 7;
  bool placebo = false;

  std::vector<std::string> conditions;
  std::size_t pairs = 1000;
  std::uint64_t pair_seed = 5;
};

// ---------------------------------------------------------------------------
// Option registry: every knob is bound once and can be written back as TOML.

std::string toml_value(const std::string& v) { return json(v).dump(); }
std::string toml_value(bool v) { return v ? "true" : "false"; }
std::string toml_value(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}
template <typename T>
  requires std::is_integral_v<T>
std::string toml_value(T v) {
  return std::to_string(v);
}
template <typename T>
std::string toml_value(const std::vector<T>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + toml_value(v[i]);
  return s + "]";
}

std::string env_name(const std::string& name) {
  std::string out = "PATSIG_";
  for (char c : name) out += c == '-' ? '_' : static_cast<char>(std::toupper(c));
  return out;
}

class Knobs {
 public:
  explicit Knobs(CLI::App& app) : app_(app) {}

  template <typename T>
  CLI::Option* option(const std::string& name, T& var, const std::string& help) {
    auto* opt = app_.add_option("--" + name, var, help)->capture_default_str();
    opt->envname(env_name(name));
    writers_.emplace_back([name, &var] { return name + " = " + toml_value(var); });
    return opt;
  }

  CLI::Option* flag(const std::string& name, bool& var, const std::string& help) {
    auto* opt = app_.add_flag("--" + name + ",!--no-" + name, var, help);
    opt->envname(env_name(name));
    writers_.emplace_back([name, &var] { return name + " = " + toml_value(var); });
    return opt;
  }

  std::string to_toml() const {
    std::string out;
    for (const auto& w : writers_) out += w() + "\n";
    return out;
  }

 private:
  CLI::App& app_;
  std::vector<std::function<std::string()>> writers_;
};

// ---------------------------------------------------------------------------
// Stage I/O: checksummed inputs, buffered outputs committed atomically.

class Stage {
 public:
  Stage(const PipelineConfig& cfg, std::string name, std::string config_toml)
      : dir_(cfg.workdir), name_(std::move(name)), config_toml_(std::move(config_toml)) {}

  const fs::path& dir() const { return dir_; }

  /// Reads an artifact, verifies it against its sidecar and against the
  /// provenance recorded by previously loaded artifacts.
  std::string load(const std::string& name) { return load_path(dir_ / name, name); }

  std::string load_path(const fs::path& path, const std::string& name) {
    std::string bytes = read_file(path);
    const std::uint32_t crc = patsig::crc32(bytes);
    const fs::path meta_path = fs::path(path.string() + ".meta.json");
    if (fs::exists(meta_path)) {
      json meta;
      try {
        meta = json::parse(read_file(meta_path));
      } catch (const json::exception& e) {
        fail(ErrorKind::kFormat, "sidecar " + meta_path.string() + " is not valid JSON");
      }
      if (meta.value("crc32", std::uint32_t{0}) != crc)
        fail(ErrorKind::kChecksum,
             name + " does not match the checksum in its sidecar (modified or stale)");
      if (meta.contains("inputs"))
        for (const auto& [dep, dep_crc] : meta["inputs"].items()) {
          auto it = inputs_.find(dep);
          if (it != inputs_.end() && it->second != dep_crc.get<std::uint32_t>())
            fail(ErrorKind::kChecksum, name + " was built from a different " + dep +
                                           " than the one in " + dir_.string() + "; rerun the upstream stage");
          expected_.emplace(dep, dep_crc.get<std::uint32_t>());
        }
    }
    auto exp = expected_.find(name);
    if (exp != expected_.end() && exp->second != crc)
      fail(ErrorKind::kChecksum, name + " is newer or older than the artifacts derived from it; "
                                        "rerun the downstream stages");
    inputs_[name] = crc;
    return bytes;
  }

  void emit(const std::string& name, std::string contents, json extra = json::object()) {
    pending_.push_back({name, std::move(contents), std::move(extra)});
  }

  /// Writes every output (then the sidecars and the resolved config); any
  /// failure before this point leaves the work directory untouched.
  void commit() {
    fs::create_directories(dir_);
    for (const auto& p : pending_) {
      json meta;
      meta["artifact"] = p.name;
      meta["stage"] = name_;
      meta["bytes"] = p.contents.size();
      meta["crc32"] = patsig::crc32(p.contents);
      meta["inputs"] = json::object();
      for (const auto& [k, v] : inputs_) meta["inputs"][k] = v;
      for (const auto& [k, v] : p.extra.items()) meta[k] = v;
      write_file_atomic(dir_ / p.name, p.contents);
      write_file_atomic(dir_ / (p.name + ".meta.json"), meta.dump(2) + "\n");
    }
    write_file_atomic(dir_ / (name_ + ".config.toml"), config_toml_);
  }

 private:
  struct Pending {
    std::string name;
    std::string contents;
    json extra;
  };
  fs::path dir_;
  std::string name_;
  std::string config_toml_;
  std::map<std::string, std::uint32_t> inputs_;
  std::map<std::string, std::uint32_t> expected_;
  std::vector<Pending> pending_;
};

// ---------------------------------------------------------------------------
// Artifact codecs not owned by a module

std::string tokens_tsv(const std::vector<std::string>& ids,
                       const std::vector<corpus::TokenDoc>& docs) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += ids[i];
    out += '\t';
    for (std::size_t t = 0; t < docs[i].size(); ++t) {
      if (t) out += ' ';
      out += docs[i][t];
    }
    out += '\n';
  }
  return out;
}

void parse_tokens_tsv(std::string_view text, std::vector<std::string>& ids,
                      std::vector<corpus::TokenDoc>& docs) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      fail(ErrorKind::kFormat, "tokens line " + std::to_string(line_no) + " has no tab");
    ids.push_back(line.substr(0, tab));
    corpus::TokenDoc doc;
    std::istringstream words(line.substr(tab + 1));
    for (std::string w; words >> w;) doc.push_back(w);
    docs.push_back(std::move(doc));
  }
}

std::vector<corpus::PatentRecord> parse_corpus(const std::string& bytes) {
  std::istringstream in(bytes);
  auto report = corpus::parse_patents(in);
  if (!report.errors.empty())
    fail(ErrorKind::kFormat, "stored corpus line " + std::to_string(report.errors.front().line) +
                                 ": " + report.errors.front().message);
  return std::move(report.records);
}

indicators::YearMap year_map(const std::vector<corpus::PatentRecord>& records) {
  indicators::YearMap years;
  for (const auto& r : records) years[r.id] = r.year;
  return years;
}

indicators::ShareMap share_map(const std::vector<corpus::PatentRecord>& records) {
  indicators::ShareMap shares;
  for (const auto& r : records)
    if (!r.country_shares.empty()) shares[r.id] = r.country_shares;
  return shares;
}

std::vector<std::string> record_ids(const std::vector<corpus::PatentRecord>& records) {
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.id);
  return ids;
}

embedding::SgnsParams sgns_params(const PipelineConfig& cfg) {
  embedding::SgnsParams p;
  p.dim = cfg.dim;
  p.window = cfg.window;
  p.epochs = cfg.epochs;
  p.negatives = cfg.negatives;
  p.learning_rate = cfg.learning_rate;
  p.subsample = cfg.subsample;
  p.shrink_window = cfg.shrink_window;
  p.seed = cfg.sgns_seed;
  p.threads = cfg.threads;
  return p;
}

json sgns_json(const embedding::SgnsParams& p) {
  return {{"dim", p.dim},
          {"window", p.window},
          {"epochs", p.epochs},
          {"negatives", p.negatives},
          {"learning_rate", p.learning_rate},
          {"min_learning_rate_ratio", p.min_learning_rate_ratio},
          {"subsample", p.subsample},
          {"shrink_window", p.shrink_window},
          {"seed", p.seed}};
}

similarity::GraphParams graph_params(const PipelineConfig& cfg) {
  similarity::GraphParams p;
  p.k = cfg.k;
  p.threshold = cfg.threshold;
  p.search_breadth = cfg.search_breadth;
  p.threads = cfg.threads;
  return p;
}

indicators::TemporalParams temporal_params(const PipelineConfig& cfg) {
  indicators::TemporalParams p{cfg.tau, cfg.lambda};
  p.validate();
  return p;
}

struct Models {
  corpus::BigramTable bigrams;
  corpus::Vocabulary vocab;
  embedding::EmbeddingMatrix emb;
  embedding::TfIdfModel tfidf;
};

Models load_models(Stage& stage, const PipelineConfig& cfg) {
  Models m;
  m.bigrams = corpus::BigramTable::from_tsv(stage.load(artifact::kBigrams));
  m.vocab = corpus::Vocabulary::from_tsv(stage.load(artifact::kVocab));
  m.emb = embedding::EmbeddingMatrix::from_store(
      embedding::VectorStore::deserialize(stage.load(artifact::kEmbedding)), sgns_params(cfg));
  m.tfidf = embedding::TfIdfModel::from_tsv(stage.load(artifact::kTfIdf));
  require(m.emb.vocab_fingerprint() == m.vocab.fingerprint(), ErrorKind::kFormat,
          "embedding and vocabulary were built from different vocabularies");
  return m;
}

std::string fixed6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Subcommands

void run_ingest(const PipelineConfig& cfg, Stage& stage) {
  require(!cfg.input.empty(), ErrorKind::kConfig, "ingest needs --input <corpus.jsonl>");
  const std::string bytes = stage.load_path(cfg.input, "input");
  std::istringstream in(bytes);
  auto report = corpus::parse_patents(in);
  for (const auto& e : report.errors)
    std::cerr << "warning line=" << e.line << " msg=" << json(e.message).dump() << "\n";
  corpus::FilterPolicy policy;
  policy.min_year = cfg.min_year;
  policy.max_year = cfg.max_year;
  policy.granted_only = cfg.granted_only;
  policy.priority_only = cfg.priority_only;
  const auto kept = corpus::filter_corpus(report.records, policy);
  require(!kept.empty(), ErrorKind::kData, "no record passes the filter policy");

  std::string corpus_out;
  std::vector<std::string> ids;
  std::vector<corpus::TokenDoc> docs;
  for (const auto& r : kept) {
    require(r.id.find_first_of("\t\r\n") == std::string::npos, ErrorKind::kData,
            "id '" + r.id + "' contains a tab or newline");
    corpus_out += corpus::to_jsonl(r) + "\n";
    ids.push_back(r.id);
    docs.push_back(corpus::tokenize(r.abstract));
  }
  json extra = {{"records_read", report.records.size()},
                {"records_rejected", report.errors.size()},
                {"records_kept", kept.size()},
                {"policy",
                 {{"min_year", policy.min_year},
                  {"max_year", policy.max_year},
                  {"granted_only", policy.granted_only},
                  {"priority_only", policy.priority_only}}}};
  stage.emit(artifact::kCorpus, std::move(corpus_out), extra);
  stage.emit(artifact::kTokens, tokens_tsv(ids, docs));
  std::cerr << "ingest: kept " << kept.size() << " of " << report.records.size() << " records ("
            << report.errors.size() << " rejected lines)\n";
}

void run_train(const PipelineConfig& cfg, Stage& stage) {
  require(cfg.dim >= 1, ErrorKind::kConfig, "dim must be >= 1");
  require(cfg.bigram_threshold >= 1, ErrorKind::kConfig, "bigram-threshold must be >= 1");
  require(cfg.min_count >= 1, ErrorKind::kConfig, "min-count must be >= 1");
  std::vector<std::string> ids;
  std::vector<corpus::TokenDoc> docs;
  parse_tokens_tsv(stage.load(artifact::kTokens), ids, docs);
  const auto bigrams = corpus::detect_bigrams(docs, cfg.bigram_threshold);
  for (auto& d : docs) d = corpus::apply_bigrams(d, bigrams);
  const auto vocab = corpus::build_vocabulary(docs, cfg.min_count);
  std::vector<corpus::EncodedDoc> encoded;
  encoded.reserve(docs.size());
  for (const auto& d : docs) encoded.push_back(vocab.encode(d));
  const auto params = sgns_params(cfg);
  const auto emb = embedding::train_sgns(encoded, vocab, params);
  const auto tfidf = embedding::fit_tfidf(encoded, vocab);

  stage.emit(artifact::kBigrams, bigrams.to_tsv(), {{"pairs", bigrams.size()}});
  stage.emit(artifact::kVocab, vocab.to_tsv(),
             {{"terms", vocab.size()}, {"fingerprint", vocab.fingerprint()}});
  stage.emit(artifact::kEmbedding, emb.to_store().serialize(),
             {{"format", "PSV1"}, {"sgns", sgns_json(params)}, {"vocab_fingerprint", emb.vocab_fingerprint()}});
  stage.emit(artifact::kTfIdf, tfidf.to_tsv(), {{"formula", tfidf.formula()}});
  std::cerr << "train: " << vocab.size() << " terms, " << bigrams.size() << " bigrams, dim "
            << emb.dim() << "\n";
}

void run_vectorize(const PipelineConfig& cfg, Stage& stage) {
  std::vector<std::string> ids;
  std::vector<corpus::TokenDoc> docs;
  parse_tokens_tsv(stage.load(artifact::kTokens), ids, docs);
  const auto models = load_models(stage, cfg);
  std::vector<corpus::EncodedDoc> encoded;
  encoded.reserve(docs.size());
  for (const auto& d : docs) encoded.push_back(models.vocab.encode(corpus::apply_bigrams(d, models.bigrams)));
  const auto store =
      embedding::vectorize_corpus(ids, encoded, models.emb, models.tfidf, cfg.threads);
  std::size_t sentinels = 0;
  for (std::size_t i = 0; i < store.size(); ++i) sentinels += store.is_sentinel(i);
  stage.emit(artifact::kVectors, store.serialize(),
             {{"format", "PSV1"}, {"count", store.size()}, {"dim", store.dim()}, {"sentinels", sentinels}});
  std::cerr << "vectorize: " << store.size() << " vectors (" << sentinels << " zero signatures)\n";
}

void run_index(const PipelineConfig& cfg, Stage& stage) {
  const auto store = embedding::VectorStore::deserialize(stage.load(artifact::kVectors));
  ann::ForestParams params;
  params.n_trees = cfg.n_trees;
  params.leaf_capacity = cfg.leaf_capacity;
  params.seed = cfg.index_seed;
  params.threads = cfg.threads;
  const auto forest = ann::RpForest::build(store, params);
  stage.emit(artifact::kIndex, forest.serialize(),
             {{"format", "RPF1"},
              {"n_trees", params.n_trees},
              {"leaf_capacity", params.leaf_capacity},
              {"seed", params.seed},
              {"items", forest.size()}});
  std::cerr << "index: " << forest.n_trees() << " trees over " << forest.size() << " items\n";
}

void run_query(const PipelineConfig& cfg, Stage& stage, std::string text) {
  require(cfg.query_k >= 1, ErrorKind::kConfig, "query-k must be >= 1");
  if (text.empty() || text == "-") {
    text.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  }
  const auto forest = ann::RpForest::deserialize(stage.load(artifact::kIndex));
  const auto models = load_models(stage, cfg);
  const auto result = similarity::semantic_search(text, models.bigrams, models.vocab, models.emb,
                                                  models.tfidf, forest, cfg.query_k,
                                                  cfg.search_breadth);
  if (result.status != "ok") std::cerr << "status: " << result.status << "\n";
  std::string out = "rank\tid\tscore\n";
  for (std::size_t r = 0; r < result.neighbors.items.size(); ++r) {
    const auto& n = result.neighbors.items[r];
    out += std::to_string(r + 1) + "\t" + n.id + "\t" + fixed6(n.score) + "\n";
  }
  std::cout << out;
}

void run_edges(const PipelineConfig& cfg, Stage& stage) {
  const auto params = graph_params(cfg);
  params.validate();
  const std::string index_bytes = stage.load(artifact::kIndex);
  const auto forest = ann::RpForest::deserialize(index_bytes);
  const auto graph = similarity::build_similarity_graph(forest, params);
  auto meta = json::parse(graph.metadata_json(patsig::crc32(index_bytes)));
  stage.emit(artifact::kEdges, graph.to_tsv(), {{"graph", meta}});
  std::cerr << "edges: " << graph.edge_count() << " edges over " << graph.size() << " nodes\n";
}

similarity::SimilarityGraph load_graph(Stage& stage, const std::vector<std::string>& ids) {
  return similarity::SimilarityGraph::from_tsv(stage.load(artifact::kEdges), ids);
}

void run_indicators(const PipelineConfig& cfg, Stage& stage) {
  const auto temporal = temporal_params(cfg);
  require(cfg.normalization == "mean" || cfg.normalization == "sum", ErrorKind::kConfig,
          "normalization must be 'mean' or 'sum'");
  require(cfg.group == "global" || cfg.group == "country", ErrorKind::kConfig,
          "group must be 'global' or 'country'");
  const auto records = parse_corpus(stage.load(artifact::kCorpus));
  const auto graph = load_graph(stage, record_ids(records));
  const auto rows = indicators::compute_indicators(
      graph, year_map(records), temporal,
      cfg.normalization == "mean" ? indicators::Normalization::kMean
                                  : indicators::Normalization::kSum);
  const auto series = indicators::aggregate_time_series(
      rows, cfg.group == "global" ? indicators::Grouping::kGlobal : indicators::Grouping::kCountry,
      share_map(records));
  const json params = {{"tau", cfg.tau}, {"lambda", cfg.lambda}, {"normalization", cfg.normalization}};
  stage.emit(artifact::kIndicators, indicators::indicators_tsv(rows), params);
  stage.emit(artifact::kSeries, indicators::time_series_tsv(series), {{"group", cfg.group}});
  std::cerr << "indicators: " << rows.size() << " patents, " << series.size() << " series rows\n";
}

void run_flows(const PipelineConfig& cfg, Stage& stage) {
  const auto temporal = temporal_params(cfg);
  require(cfg.period_first <= cfg.period_last, ErrorKind::kConfig,
          "period-first must not exceed period-last");
  const auto records = parse_corpus(stage.load(artifact::kCorpus));
  const auto graph = load_graph(stage, record_ids(records));
  indicators::FlowOptions options;
  options.dedupe_pairs = cfg.dedupe_pairs;
  const auto flows = indicators::compute_country_flows(
      graph, year_map(records), share_map(records), temporal,
      {cfg.period_first, cfg.period_last}, options);
  const json extra = {{"period", {cfg.period_first, cfg.period_last}},
                      {"tau", cfg.tau},
                      {"lambda", cfg.lambda},
                      {"dedupe_pairs", cfg.dedupe_pairs},
                      {"missing_shares", flows.missing_shares}};
  stage.emit(artifact::kFlows, flows.to_tsv(), extra);
  stage.emit(artifact::kStrength, flows.strength_tsv(), extra);
  if (flows.missing_shares > 0)
    std::cerr << "warning: " << flows.missing_shares
              << " qualifying edges skipped for missing country shares\n";
  std::cerr << "flows: " << flows.countries.size() << " countries, total " << fixed6(flows.total())
            << "\n";
}

struct LabeledSet {
  std::vector<std::size_t> vector_index;
  std::vector<std::size_t> labels;
  std::vector<std::string> classes;
};

LabeledSet labeled_set(const std::vector<corpus::PatentRecord>& records,
                       const embedding::VectorStore& store) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < store.size(); ++i) index.emplace(store.id(i), i);
  std::set<std::string> class_set;
  std::vector<std::pair<std::size_t, std::string>> rows;
  for (const auto& r : records) {
    auto it = index.find(r.id);
    if (r.ipc.empty() || it == index.end() || store.is_sentinel(it->second)) continue;
    rows.emplace_back(it->second, r.ipc.front().subclass_key());
    class_set.insert(rows.back().second);
  }
  LabeledSet set;
  set.classes.assign(class_set.begin(), class_set.end());
  for (const auto& [vi, cls] : rows) {
    set.vector_index.push_back(vi);
    set.labels.push_back(static_cast<std::size_t>(
        std::lower_bound(set.classes.begin(), set.classes.end(), cls) - set.classes.begin()));
  }
  return set;
}

void run_eval_classify(const PipelineConfig& cfg, Stage& stage) {
  eval::MlpConfig mlp;
  mlp.hidden = cfg.mlp_hidden;
  mlp.epochs = cfg.mlp_epochs;
  mlp.batch_size = cfg.mlp_batch;
  mlp.learning_rate = cfg.mlp_learning_rate;
  mlp.momentum = cfg.mlp_momentum;
  mlp.seed = cfg.mlp_seed;
  require(mlp.batch_size >= 1, ErrorKind::kConfig, "mlp-batch must be >= 1");
  const auto records = parse_corpus(stage.load(artifact::kCorpus));
  const auto store = embedding::VectorStore::deserialize(stage.load(artifact::kVectors));
  auto set = labeled_set(records, store);
  require(set.classes.size() >= 2, ErrorKind::kData,
          "classification needs at least 2 IPC subclasses among usable records");
  if (cfg.placebo) set.labels = eval::placebo_shift(set.labels);

  const auto split = eval::train_test_split(set.labels.size(), cfg.test_fraction, cfg.split_seed);
  auto gather = [&](const std::vector<std::size_t>& idx, std::vector<std::size_t>& vi,
                    std::vector<std::size_t>& y) {
    for (auto i : idx) {
      vi.push_back(set.vector_index[i]);
      y.push_back(set.labels[i]);
    }
  };
  std::vector<std::size_t> train_vi, train_y, test_vi, test_y;
  gather(split.train, train_vi, train_y);
  gather(split.test, test_vi, test_y);
  for (auto c : eval::classes_missing_from_training(train_y, test_y, set.classes.size()))
    std::cerr << "warning: class " << set.classes[c] << " has no training examples\n";

  const auto clf =
      eval::train_mlp(eval::feature_rows(store, train_vi), train_y, set.classes.size(), mlp);
  const auto metrics = eval::evaluate_classifier(clf, eval::feature_rows(store, test_vi), test_y);
  const json extra = {{"placebo", cfg.placebo},
                      {"classes", set.classes.size()},
                      {"train", train_y.size()},
                      {"test", test_y.size()},
                      {"mlp",
                       {{"hidden", mlp.hidden},
                        {"activation", "relu"},
                        {"output", "softmax"},
                        {"optimizer", "sgd-momentum"},
                        {"epochs", mlp.epochs},
                        {"batch_size", mlp.batch_size},
                        {"learning_rate", mlp.learning_rate},
                        {"momentum", mlp.momentum},
                        {"seed", mlp.seed}}}};
  stage.emit(cfg.placebo ? artifact::kPlaceboMetrics : artifact::kMetrics,
             metrics.to_tsv(set.classes), extra);
  std::cerr << "eval-classify" << (cfg.placebo ? " (placebo)" : "") << ": weighted P/R/F1 "
            << fixed6(metrics.weighted_precision) << " " << fixed6(metrics.weighted_recall) << " "
            << fixed6(metrics.weighted_f1) << "\n";
}

void run_eval_relational(const PipelineConfig& cfg, Stage& stage) {
  std::vector<eval::Condition> conditions;
  for (const auto& name : cfg.conditions) {
    const auto c = eval::parse_condition(name);
    require(c.has_value(), ErrorKind::kConfig, "unknown condition '" + name + "'");
    conditions.push_back(*c);
  }
  const auto records = parse_corpus(stage.load(artifact::kCorpus));
  const auto store = embedding::VectorStore::deserialize(stage.load(artifact::kVectors));
  std::vector<eval::PairSample> samples;
  for (auto c : conditions) {
    auto s = eval::sample_condition_pairs(records, store, c, cfg.pairs, cfg.pair_seed);
    for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
    if (s.positives.size() < 2 || s.negatives.size() < 2) {
      std::cerr << "warning: skipping " << eval::condition_name(c)
                << ": fewer than 2 pairs per group\n";
      continue;
    }
    samples.push_back(std::move(s));
  }
  const auto rows = eval::relational_report(samples);
  json counts = json::object();
  for (const auto& s : samples) counts[std::string(eval::condition_name(s.condition))] = s.positives.size();
  stage.emit(artifact::kRelational, eval::relational_tsv(rows),
             {{"pairs_requested", cfg.pairs}, {"seed", cfg.pair_seed}, {"pairs", counts}, {"test", "welch"}});
  std::cerr << "eval-relational: " << rows.size() << " conditions\n";
}

// ---------------------------------------------------------------------------

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kMissing: return 3;
    case ErrorKind::kFormat: return 4;
    case ErrorKind::kVersion: return 5;
    case ErrorKind::kTruncated: return 6;
    case ErrorKind::kChecksum: return 7;
    case ErrorKind::kData: return 8;
    case ErrorKind::kUndefined: return 9;
    case ErrorKind::kIo: return 10;
  }
  return 1;
}

void report_error(std::string_view code, const std::string& msg) {
  std::string flat = msg;
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  std::cerr << "error code=" << code << " msg=" << json(flat).dump() << "\n";
}

std::string version_text() {
  return "patsig " + std::string(kVersion) + "\nvector-store PSV1 v" +
         std::to_string(embedding::VectorStore::kVersion) + "\nindex RPF1 v" +
         std::to_string(ann::RpForest::kVersion) + "\ntfidf " +
         std::string(embedding::TfIdfModel::kLogRatioFormula);
}

int run(int argc, char** argv) {
  PipelineConfig cfg;
  CLI::App app{"Patent signature pipeline: corpus -> vectors -> similarity -> indicators"};
  app.set_version_flag("--version", version_text());
  app.set_config("--config", "", "TOML config file; flags given on the command line win");
  app.require_subcommand(1);
  app.fallthrough();

  Knobs knobs(app);
  knobs.option("workdir", cfg.workdir, "Directory holding pipeline artifacts");
  knobs.option("input", cfg.input, "Corpus JSONL read by ingest");
  knobs.flag("deterministic", cfg.deterministic, "Sequential seeded execution for golden runs");
  knobs.option("threads", cfg.threads, "Worker threads (0: all cores)");

  knobs.option("min-year", cfg.min_year, "Earliest filing year kept");
  knobs.option("max-year", cfg.max_year, "Latest filing year kept");
  knobs.flag("granted-only", cfg.granted_only, "Keep granted patents only");
  knobs.flag("priority-only", cfg.priority_only, "Keep priority filings only");
  knobs.option("bigram-threshold", cfg.bigram_threshold, "Minimum count for bigram promotion");
  knobs.option("min-count", cfg.min_count, "Minimum corpus frequency for vocabulary terms");

  knobs.option("dim", cfg.dim, "Word and signature vector dimension");
  knobs.option("window", cfg.window, "Skip-gram context window");
  knobs.option("epochs", cfg.epochs, "Skip-gram training epochs");
  knobs.option("negatives", cfg.negatives, "Negative samples per context pair");
  knobs.option("learning-rate", cfg.learning_rate, "Initial skip-gram learning rate");
  knobs.option("subsample", cfg.subsample, "Frequent-word subsampling threshold (0: off)");
  knobs.flag("shrink-window", cfg.shrink_window, "Sample a reduced window per center word");
  knobs.option("sgns-seed", cfg.sgns_seed, "Skip-gram seed");

  knobs.option("n-trees", cfg.n_trees, "Trees in the projection forest");
  knobs.option("leaf-capacity", cfg.leaf_capacity, "Maximum items per leaf");
  knobs.option("index-seed", cfg.index_seed, "Forest build seed");
  knobs.option("search-breadth", cfg.search_breadth, "Candidates per query (0: n-trees x k)");

  knobs.option("k", cfg.k, "Neighbors searched per patent for edges");
  knobs.option("threshold", cfg.threshold, "Minimum cosine kept as an edge");
  knobs.option("query-k", cfg.query_k, "Results returned by query");

  knobs.option("tau", cfg.tau, "Minimum lag in years");
  knobs.option("lambda", cfg.lambda, "Maximum lag in years");
  knobs.option("normalization", cfg.normalization, "Indicator normalization: mean or sum");
  knobs.option("group", cfg.group, "Time-series grouping: global or country");
  knobs.option("period-first", cfg.period_first, "First source year counted in flows");
  knobs.option("period-last", cfg.period_last, "Last source year counted in flows");
  knobs.flag("dedupe-pairs", cfg.dedupe_pairs, "Count each unordered pair once in flows");

  knobs.option("test-fraction", cfg.test_fraction, "Held-out share of labeled vectors");
  knobs.option("split-seed", cfg.split_seed, "Hold-out split seed");
  knobs.option("mlp-hidden", cfg.mlp_hidden, "Hidden layer widths")->delimiter(',');
  knobs.option("mlp-epochs", cfg.mlp_epochs, "Classifier training epochs");
  knobs.option("mlp-batch", cfg.mlp_batch, "Classifier mini-batch size");
  knobs.option("mlp-learning-rate", cfg.mlp_learning_rate, "Classifier learning rate");
  knobs.option("mlp-momentum", cfg.mlp_momentum, "Classifier momentum");
  knobs.option("mlp-seed", cfg.mlp_seed, "Classifier seed");
  knobs.flag("placebo", cfg.placebo, "Train and test on labels shifted by one observation");

  knobs.option("conditions", cfg.conditions, "Relational conditions (default: all)")->delimiter(',');
  knobs.option("pairs", cfg.pairs, "Positive pairs sampled per condition");
  knobs.option("pair-seed", cfg.pair_seed, "Pair sampling seed");

  std::string query_text;
  std::map<std::string, std::function<void(Stage&)>> handlers;
  auto sub = [&](const std::string& name, const std::string& help,
                 std::function<void(Stage&)> fn) {
    auto* s = app.add_subcommand(name, help);
    handlers[name] = std::move(fn);
    return s;
  };
  sub("ingest", "Filter and tokenize a JSONL corpus", [&](Stage& s) { run_ingest(cfg, s); });
  sub("train", "Learn bigrams, vocabulary, word vectors and idf weights",
      [&](Stage& s) { run_train(cfg, s); });
  sub("vectorize", "Compose one signature vector per patent",
      [&](Stage& s) { run_vectorize(cfg, s); });
  sub("index", "Build the projection forest", [&](Stage& s) { run_index(cfg, s); });
  sub("query", "Free-text semantic search", [&](Stage& s) { run_query(cfg, s, query_text); })
      ->add_option("text", query_text, "Query text ('-' or absent: stdin)");
  sub("edges", "Thresholded similarity edges", [&](Stage& s) { run_edges(cfg, s); });
  sub("indicators", "Temporal similarity indicators and time series",
      [&](Stage& s) { run_indicators(cfg, s); });
  sub("flows", "Country-level knowledge flows", [&](Stage& s) { run_flows(cfg, s); });
  sub("eval-classify", "IPC subclass classification from signatures",
      [&](Stage& s) { run_eval_classify(cfg, s); });
  sub("eval-relational", "Shared-attribute pair comparisons",
      [&](Stage& s) { run_eval_relational(cfg, s); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error(to_string(ErrorKind::kConfig), e.what());
    return exit_code(ErrorKind::kConfig);
  }

  const auto* chosen = app.get_subcommands().front();
  try {
    if (cfg.deterministic) cfg.threads = 1;
    if (cfg.threads == 0) cfg.threads = default_threads();
    if (cfg.conditions.empty())
      for (auto c : eval::all_conditions()) cfg.conditions.emplace_back(eval::condition_name(c));
    Stage stage(cfg, chosen->get_name(), knobs.to_toml());
    handlers.at(chosen->get_name())(stage);
    stage.commit();
  } catch (const Error& e) {
    report_error(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace patsig::cli

int main(int argc, char** argv) { return patsig::cli::run(argc, argv); }
