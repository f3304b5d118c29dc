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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const std::string kCli = PATSIG_CLI;
const std::string kCorpus = PATSIG_CORPUS;
const std::string kSmall =
    " --deterministic --min-count 5 --dim 16 --epochs 1 --n-trees 10 --k 10"
    " --mlp-hidden 16,8 --mlp-epochs 2 --pairs 50";

int run(const std::string& args, const std::string& redirect = " 2>/dev/null >/dev/null",
        const std::string& env = "") {
  const int status = std::system((env + " " + kCli + " " + args + redirect).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("patsig_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string wd() const { return "--workdir " + path.string(); }
};

int stage(const TempDir& d, const std::string& name, const std::string& extra = "") {
  return run(name + " " + d.wd() + kSmall + " " + extra);
}

void run_through(const TempDir& d, const std::string& last) {
  for (const std::string s : {"ingest", "train", "vectorize", "index", "edges", "indicators",
                              "flows", "eval-classify", "eval-relational"}) {
    REQUIRE(stage(d, s, s == "ingest" ? "--input " + kCorpus : "") == 0);
    if (s == last) return;
  }
}

}  // namespace

TEST_CASE("full pipeline produces every artifact") {
  TempDir d("full");
  run_through(d, "eval-relational");
  for (const char* f : {"corpus.jsonl", "tokens.tsv", "bigrams.tsv", "vocab.tsv", "embedding.psv",
                        "tfidf.tsv", "vectors.psv", "index.rpf", "edges.tsv", "indicators.tsv",
                        "series.tsv", "flows.tsv", "strength.tsv", "metrics.tsv",
                        "relational.tsv"}) {
    CHECK_MESSAGE(fs::exists(d.path / f), f);
    CHECK_MESSAGE(fs::exists(d.path / (std::string(f) + ".meta.json")), f);
  }
  CHECK(fs::exists(d.path / "train.config.toml"));
  CHECK(slurp(d.path / "relational.tsv").rfind("condition\tshared", 0) == 0);

  CHECK(stage(d, "eval-classify", "--placebo") == 0);
  CHECK(fs::exists(d.path / "placebo_metrics.tsv"));

  const auto out = d.path / "query.out";
  CHECK(run("query " + d.wd() + " --query-k 3 'battery electrode lithium'",
            " >" + out.string() + " 2>/dev/null") == 0);
  const auto q = slurp(out);
  CHECK(q.rfind("rank\tid\tscore\n1\t", 0) == 0);
}

TEST_CASE("invalid threshold is a config error and writes nothing") {
  TempDir d("threshold");
  run_through(d, "index");
  CHECK(stage(d, "edges", "--threshold 1.5") == 2);
  CHECK_FALSE(fs::exists(d.path / "edges.tsv"));
}

TEST_CASE("training is byte-reproducible") {
  TempDir a("repro_a"), b("repro_b");
  run_through(a, "train");
  run_through(b, "train");
  for (const char* f : {"bigrams.tsv", "vocab.tsv", "embedding.psv", "tfidf.tsv"})
    CHECK_MESSAGE(slurp(a.path / f) == slurp(b.path / f), f);
}

TEST_CASE("exit codes") {
  TempDir d("codes");
  CHECK(run("ingest " + d.wd() + " --bogus-flag") == 2);
  CHECK(run("ingest " + d.wd() + " --input " + (d.path / "nope.jsonl").string()) == 3);
  CHECK(run("train " + d.wd()) == 3);

  run_through(d, "vectorize");
  {
    std::ofstream(d.path / "vocab.tsv", std::ios::app) << "tampered\t1\n";
  }
  CHECK(stage(d, "vectorize") == 7);

  // Rebuild cleanly, then patch the vector store version with its sidecar gone.
  TempDir v("version");
  run_through(v, "vectorize");
  fs::remove(v.path / "vectors.psv.meta.json");
  {
    std::fstream f(v.path / "vectors.psv", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    f.put(static_cast<char>(9));
  }
  CHECK(stage(v, "index") == 5);

  const auto err = v.path / "err.txt";
  run("index " + v.wd() + kSmall, " 2>" + err.string() + " >/dev/null");
  CHECK(slurp(err).rfind("error code=version msg=\"", 0) == 0);
}

TEST_CASE("resolved config reproduces a stage and env overrides apply") {
  TempDir d("config");
  run_through(d, "edges");
  const auto edges = slurp(d.path / "edges.tsv");
  const auto cfg = d.path / "edges.config.toml";
  REQUIRE(fs::exists(cfg));
  const auto saved = d.path / "saved.toml";
  fs::copy_file(cfg, saved);
  fs::remove(d.path / "edges.tsv");
  CHECK(run("edges --config " + saved.string()) == 0);
  CHECK(slurp(d.path / "edges.tsv") == edges);

  CHECK(run("edges " + d.wd() + kSmall, " 2>/dev/null >/dev/null", "PATSIG_THRESHOLD=0.99") == 0);
  const auto strict = slurp(d.path / "edges.tsv");
  CHECK(strict.size() < edges.size());
  std::istringstream lines(strict);
  std::string line;
  while (std::getline(lines, line)) CHECK(std::stod(line.substr(line.rfind('\t') + 1)) >= 0.99);
  CHECK(slurp(d.path / "edges.config.toml").find("threshold = 0.99") != std::string::npos);
}

TEST_CASE("failed stage leaves the workdir untouched") {
  TempDir d("atomic");
  run_through(d, "ingest");
  CHECK(stage(d, "train", "--min-count 100000000") != 0);
  CHECK_FALSE(fs::exists(d.path / "vocab.tsv"));
  CHECK_FALSE(fs::exists(d.path / "embedding.psv"));
}
