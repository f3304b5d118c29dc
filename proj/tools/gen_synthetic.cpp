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

// Writes a planted-topic patent corpus in the ingest JSONL schema. Each
// topic owns an IPC subclass, a word list, inventors and assignees; a few
// generic phrases recur often enough to be promoted to bigrams.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "patsig/common.hpp"

namespace {

struct Topic {
  const char* subclass;
  std::vector<const char*> words;
};

const std::vector<Topic>& topics() {
  static const std::vector<Topic> t = {
      {"B60L", {"vehicle", "electric", "traction", "motor", "charging", "regenerative", "braking",
                "drivetrain", "wheel", "inverter", "propulsion", "chassis", "hybrid", "torque",
                "speed", "pedal", "axle", "onboard", "plug", "charger", "range", "cabin",
                "station", "socket", "cable"}},
      {"H01M", {"electrode", "anode", "cathode", "electrolyte", "lithium", "separator", "cell",
                "ion", "graphite", "binder", "collector", "slurry", "capacity", "discharge",
                "polymer", "oxide", "nickel", "cobalt", "manganese", "coating", "porous",
                "membrane", "stack", "pouch", "casing"}},
      {"F03D", {"turbine", "rotor", "blade", "nacelle", "tower", "pitch", "yaw", "gearbox",
                "hub", "wind", "airfoil", "spar", "offshore", "foundation", "tip", "root",
                "bearing", "shaft", "gust", "aerodynamic", "lift", "drag", "mast", "vane",
                "tether"}},
      {"H02J", {"grid", "converter", "voltage", "current", "load", "distribution", "transformer",
                "microgrid", "storage", "feeder", "frequency", "reactive", "islanding", "meter",
                "demand", "substation", "bus", "phase", "harmonic", "rectifier", "switching",
                "breaker", "fault", "relay", "dispatch"}},
      {"G06F", {"processor", "memory", "instruction", "cache", "thread", "compiler", "register",
                "pipeline", "address", "virtual", "kernel", "interrupt", "buffer", "queue",
                "scheduler", "software", "application", "database", "query", "index", "page",
                "file", "storage_layer", "stack_frame", "heap"}},
      {"A61K", {"compound", "pharmaceutical", "dose", "tablet", "capsule", "formulation",
                "excipient", "patient", "treatment", "disease", "inhibitor", "receptor",
                "antibody", "peptide", "oral", "injection", "carrier", "release", "tumor",
                "therapy", "efficacy", "salt", "crystalline", "solvate", "prodrug"}},
      {"C07D", {"heterocyclic", "ring", "pyridine", "alkyl", "aryl", "substituted", "halogen",
                "amino", "hydroxy", "carboxyl", "synthesis", "reaction", "intermediate",
                "catalyst", "yield", "derivative", "methyl", "ethyl", "ester", "amide",
                "nitrogen", "sulfur", "cyclization", "reagent", "chiral"}},
      {"H04L", {"packet", "network", "protocol", "router", "node", "transmission", "receiver",
                "encryption", "key", "authentication", "session", "channel", "bandwidth",
                "latency", "header", "payload", "client", "server", "wireless", "link",
                "frame", "handshake", "certificate", "routing", "congestion"}},
      {"B01D", {"filter", "filtration", "particulate", "gas", "exhaust", "scrubber", "adsorbent",
                "membrane_module", "permeate", "retentate", "flow", "inlet", "outlet",
                "housing", "cartridge", "pore", "dust", "separation", "cyclone", "liquid",
                "sorbent", "regeneration", "purge", "carbon", "zeolite"}},
      {"F16H", {"gear", "transmission_ratio", "clutch", "planetary", "sun", "ring_gear", "carrier_shaft",
                "spline", "synchronizer", "actuator", "lever", "cam", "belt", "pulley",
                "differential", "output", "input", "housing_cover", "lubrication", "tooth",
                "mesh", "reduction", "shift", "fork", "detent"}},
  };
  return t;
}

const std::vector<const char*> kCommon = {
    "method", "system", "device", "apparatus", "comprising", "wherein", "first", "second",
    "plurality", "configured", "provided", "least", "one", "member", "portion", "surface",
    "connected", "arranged", "having", "includes", "based", "signal", "data", "value",
    "predetermined", "according", "thereof", "such", "each", "position", "means", "part",
    "element", "structure", "process", "material", "layer", "body", "end", "side"};

const std::vector<const char*> kCountries = {"US", "JP", "DE", "KR", "CN", "FR", "GB"};

}  // namespace

int main(int argc, char** argv) {
  std::size_t n = 1000;
  std::uint64_t seed = 20240101;
  CLI::App app{"Generate a planted-topic synthetic patent corpus"};
  app.add_option("--records", n, "Number of records")->capture_default_str();
  app.add_option("--seed", seed, "Generator seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  using patsig::Rng;
  using patsig::uniform01;
  using patsig::uniform_index;
  Rng rng(patsig::derive_seed(seed, 0));
  const auto& tp = topics();
  std::vector<std::size_t> topic_of(n);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = uniform_index(rng, tp.size());
    topic_of[i] = t;
    const auto& topic = tp[t];
    // Integer years 1978..2019; a few fall outside the default filter range.
    const int year = 1978 + static_cast<int>(uniform_index(rng, 42));

    std::vector<std::string> words;
    const std::size_t len = 50 + uniform_index(rng, 31);
    for (std::size_t w = 0; w < len; ++w) {
      const double u = uniform01(rng);
      if (u < 0.58) {
        // Skewed draw so some topic words dominate.
        const double v = uniform01(rng);
        words.emplace_back(topic.words[static_cast<std::size_t>(v * v * topic.words.size())]);
      } else if (u < 0.95) {
        words.emplace_back(kCommon[uniform_index(rng, kCommon.size())]);
      } else {
        const auto& other = tp[uniform_index(rng, tp.size())];
        words.emplace_back(other.words[uniform_index(rng, other.words.size())]);
      }
    }
    auto insert_phrase = [&](const char* a, const char* b) {
      const std::size_t at = uniform_index(rng, words.size() + 1);
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), {a, b});
    };
    if (uniform01(rng) < 0.75) insert_phrase("control", "unit");
    if (uniform01(rng) < 0.65) insert_phrase("power", "supply");
    if (uniform01(rng) < 0.3) insert_phrase("control", "unit");

    std::string abstract;
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (w) abstract += ' ';
      abstract += words[w];
    }
    abstract[0] = static_cast<char>(abstract[0] - 'a' + 'A');
    abstract += '.';

    nlohmann::ordered_json rec;
    char id[32];
    std::snprintf(id, sizeof id, "SYN%06zu", i + 1);
    rec["id"] = id;
    rec["abstract"] = abstract;
    rec["year"] = year;
    rec["granted"] = uniform01(rng) < 0.93;
    rec["is_priority"] = uniform01(rng) < 0.93;

    auto ipc_code = [&](const char* subclass) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s %zu/%02zu", subclass, 1 + uniform_index(rng, 4),
                    (1 + uniform_index(rng, 3)) * 2);
      return std::string(buf);
    };
    std::vector<std::string> ipc{ipc_code(topic.subclass)};
    if (uniform01(rng) < 0.25) ipc.push_back(ipc_code(tp[uniform_index(rng, tp.size())].subclass));
    rec["ipc"] = ipc;

    nlohmann::ordered_json shares = nlohmann::ordered_json::object();
    const char* c1 = kCountries[uniform_index(rng, kCountries.size())];
    const double u = uniform01(rng);
    if (u < 0.6) {
      shares[c1] = 1.0;
    } else {
      const char* c2 = kCountries[uniform_index(rng, kCountries.size())];
      if (c2 == c1) {
        shares[c1] = 1.0;
      } else {
        const double w = u < 0.85 ? 0.5 : 0.25;
        shares[c1] = w;
        shares[c2] = 1.0 - w;
      }
    }
    rec["country_shares"] = shares;

    std::vector<std::string> inventors;
    const std::size_t n_inv = 1 + uniform_index(rng, 3);
    for (std::size_t k = 0; k < n_inv; ++k)
      inventors.push_back(std::string(topic.subclass) + "-inventor-" +
                          std::to_string(uniform_index(rng, 40)));
    rec["inventors"] = inventors;
    rec["assignees"] = {std::string(topic.subclass) + "-assignee-" +
                        std::to_string(uniform_index(rng, 8))};

    std::vector<std::string> cites;
    if (i > 0) {
      const std::size_t n_cites = uniform_index(rng, 4);
      for (std::size_t k = 0; k < n_cites; ++k) {
        // Prefer an earlier same-topic patent.
        std::size_t j = uniform_index(rng, i);
        for (int tries = 0; tries < 20 && topic_of[j] != t; ++tries) j = uniform_index(rng, i);
        char cid[32];
        std::snprintf(cid, sizeof cid, "SYN%06zu", j + 1);
        cites.emplace_back(cid);
      }
    }
    rec["cites"] = cites;
    std::cout << rec.dump() << "\n";
  }
  return 0;
}
