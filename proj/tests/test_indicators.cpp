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
#include "patsig/indicators.hpp"

using namespace patsig;
using namespace patsig::indicators;
using similarity::SimilarityEdge;
using similarity::SimilarityGraph;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ErrorKind error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kIo;
}

// Random directed graph with integer years and scores in [0.65, 1].
struct RandomCase {
  SimilarityGraph graph;
  YearMap years;
  ShareMap shares;
};

RandomCase random_case(std::uint64_t seed, std::size_t n = 60) {
  Rng rng(seed);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("p" + std::to_string(i));
  RandomCase c{SimilarityGraph(ids, {}), {}, {}};
  const std::vector<std::string> countries{"US", "JP", "DE", "KR"};
  for (std::size_t i = 0; i < n; ++i) {
    c.years[ids[i]] = 1990 + static_cast<double>(uniform_index(rng, 20));
    Shares s;
    const auto a = countries[uniform_index(rng, 4)];
    const auto b = countries[uniform_index(rng, 4)];
    const double w = uniform01(rng);
    s[a] += w;
    s[b] += 1 - w;
    c.shares[ids[i]] = s;
    std::vector<SimilarityEdge> edges;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && uniform01(rng) < 0.15)
        edges.push_back({static_cast<std::uint32_t>(j), 0.65 + 0.35 * uniform01(rng)});
    c.graph.set_neighbors(i, edges);
  }
  return c;
}

}  // namespace

TEST_CASE("temporal parameter validation") {
  CHECK_NOTHROW(TemporalParams{}.validate());
  CHECK_NOTHROW(TemporalParams{0.0, kInf}.validate());
  CHECK(error_of([] { TemporalParams{2.0, 2.0}.validate(); }) == ErrorKind::kConfig);
  CHECK(error_of([] { TemporalParams{-1.0, 5.0}.validate(); }) == ErrorKind::kConfig);
}

TEST_CASE("worked indicator example") {
  SimilarityGraph g({"i", "j1", "j2", "j3"}, {});
  g.set_neighbors(0, {{1, 0.8}, {2, 0.7}, {3, 0.9}});
  const YearMap years{{"i", 2000}, {"j1", 2003}, {"j2", 1998}, {"j3", 2002}};
  const auto rows = compute_indicators(g, years, {});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].id == "i");
  CHECK(rows[0].m == 3);
  CHECK(std::abs(rows[0].sim_total - 2.4 / 3) < 1e-12);
  CHECK(std::abs(rows[0].sim_future - 1.7 / 3) < 1e-12);
  CHECK(std::abs(rows[0].sim_past - 0.7 / 3) < 1e-12);
  CHECK(rows[0].sim_future == doctest::Approx(0.56667).epsilon(1e-5));
  CHECK(rows[0].sim_past == doctest::Approx(0.23333).epsilon(1e-5));
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(rows[i].m == 0);
    CHECK(rows[i].sim_total == 0.0);
    CHECK(rows[i].sim_past == 0.0);
    CHECK(rows[i].sim_future == 0.0);
  }

  const auto sums = compute_indicators(g, years, {}, Normalization::kSum);
  CHECK(std::abs(sums[0].sim_total - 2.4) < 1e-12);
  CHECK(std::abs(sums[0].sim_future - 1.7) < 1e-12);

  const auto tsv = indicators_tsv(rows);
  CHECK(tsv.substr(0, tsv.find('\n')) == "i\t2000\t3\t0.800000\t0.233333\t0.566667");
}

TEST_CASE("window boundaries") {
  const TemporalParams p{1.0, 5.0};
  CHECK_FALSE(in_future_window(1.0, p));
  CHECK(in_future_window(1.0001, p));
  CHECK(in_future_window(5.0, p));
  CHECK_FALSE(in_future_window(5.0001, p));
  CHECK_FALSE(in_past_window(-1.0, p));
  CHECK(in_past_window(-1.0001, p));
  CHECK(in_past_window(-5.0, p));
  CHECK_FALSE(in_past_window(-5.0001, p));
  CHECK_FALSE(in_future_window(0.0, p));
  CHECK_FALSE(in_past_window(0.0, p));

  SimilarityGraph g({"i", "a", "b", "c", "d"}, {});
  g.set_neighbors(0, {{1, 0.9}, {2, 0.8}, {3, 0.7}, {4, 0.66}});
  const YearMap years{{"i", 2000}, {"a", 2001}, {"b", 2005}, {"c", 1999}, {"d", 1995}};
  const auto r = compute_indicators(g, years, p)[0];
  CHECK(std::abs(r.sim_future - 0.8 / 4) < 1e-12);
  CHECK(std::abs(r.sim_past - 0.66 / 4) < 1e-12);
}

TEST_CASE("missing years are reported with the ids") {
  SimilarityGraph g({"i", "j"}, {});
  g.set_neighbors(0, {{1, 0.9}});
  try {
    compute_indicators(g, {{"i", 2000}}, {});
    FAIL("expected a data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kData);
    CHECK(std::string(e.what()).find("'j'") != std::string::npos);
    CHECK(std::string(e.what()).find("'i'") != std::string::npos);
  }
  CHECK(error_of([&] { compute_indicators(g, {{"j", 2000}}, {}); }) == ErrorKind::kData);
}

TEST_CASE("indicator properties on random graphs") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto c = random_case(seed);
    const auto rows = compute_indicators(c.graph, c.years, {});
    const auto open = compute_indicators(c.graph, c.years, {0.0, kInf});
    const auto wider = compute_indicators(c.graph, c.years, {1.0, 9.0});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      CHECK(r.m == c.graph.m(i));
      CHECK(r.sim_total >= 0);
      CHECK(r.sim_past >= 0);
      CHECK(r.sim_future >= 0);
      CHECK(r.sim_past + r.sim_future <= r.sim_total + 1e-9);
      CHECK(wider[i].sim_past >= r.sim_past);
      CHECK(wider[i].sim_future >= r.sim_future);

      // Independent recomputation of the open-window partition.
      double same_year = 0, past = 0, future = 0, total = 0;
      const double ti = c.years.at(c.graph.id(i));
      for (const auto& e : c.graph.neighbors(i)) {
        const double dt = c.years.at(c.graph.id(e.dst)) - ti;
        total += e.score;
        if (dt > 0) future += e.score;
        else if (dt < 0) past += e.score;
        else same_year += e.score;
      }
      if (r.m == 0) continue;
      const double m = static_cast<double>(r.m);
      CHECK(std::abs(open[i].sim_total - total / m) < 1e-12);
      CHECK(std::abs(open[i].sim_future - future / m) < 1e-12);
      CHECK(std::abs(open[i].sim_past - past / m) < 1e-12);
      CHECK(std::abs(open[i].sim_past + open[i].sim_future + same_year / m - open[i].sim_total) <
            1e-12);
    }
  }
}

TEST_CASE("time series aggregation") {
  SUBCASE("singleton") {
    const std::vector<PatentIndicators> rows{{"a", 1997, 1, 0.5, 0.1, 0.4}};
    const auto s = aggregate_time_series(rows, Grouping::kCountry, {{"a", {{"JP", 1.0}}}});
    REQUIRE(s.size() == 1);
    CHECK(s[0].group == "JP");
    CHECK(s[0].year == 1997);
    CHECK(s[0].count == 1.0);
    CHECK(s[0].mean_future == doctest::Approx(0.4));
    CHECK(s[0].mean_past == doctest::Approx(0.1));
  }
  SUBCASE("fractional shares") {
    const std::vector<PatentIndicators> rows{{"a", 2001, 1, 0.5, 0.0, 0.4}};
    const auto s = aggregate_time_series(rows, Grouping::kCountry, {{"a", {{"US", 0.5}, {"JP", 0.5}}}});
    REQUIRE(s.size() == 2);
    CHECK(s[0].count == 0.5);
    CHECK(s[1].count == 0.5);
  }
  SUBCASE("weighted mean") {
    const std::vector<PatentIndicators> rows{{"a", 2001, 1, 0.5, 0.0, 0.2},
                                             {"b", 2001, 1, 0.5, 0.0, 0.6}};
    const auto s = aggregate_time_series(rows, Grouping::kCountry,
                                         {{"a", {{"DE", 1.0}}}, {"b", {{"DE", 1.0}}}});
    REQUIRE(s.size() == 1);
    CHECK(s[0].count == 2.0);
    CHECK(std::abs(s[0].mean_future - 0.4) < 1e-12);
    const auto weighted = aggregate_time_series(rows, Grouping::kCountry,
                                                {{"a", {{"DE", 0.25}}}, {"b", {{"DE", 0.75}}}});
    CHECK(std::abs(weighted[0].mean_future - (0.25 * 0.2 + 0.75 * 0.6) / 1.0) < 1e-12);
  }
  SUBCASE("global grouping and skipped patents") {
    const std::vector<PatentIndicators> rows{
        {"a", 2001, 1, 0.5, 0.0, 0.2}, {"b", 2003, 1, 0.5, 0.0, 0.6}, {"c", 2001, 0, 0, 0, 0}};
    const auto g = aggregate_time_series(rows, Grouping::kGlobal);
    REQUIRE(g.size() == 2);
    CHECK(g[0].group == kGlobalGroup);
    CHECK(g[0].year == 2001);
    CHECK(g[0].count == 2.0);
    CHECK(g[0].mean_future == doctest::Approx(0.1));
    CHECK(g[1].year == 2003);
    const auto by_country = aggregate_time_series(rows, Grouping::kCountry, {{"a", {{"US", 1.0}}}});
    REQUIRE(by_country.size() == 1);
    CHECK(time_series_tsv(by_country) == "US\t2001\t1.000000\t0.200000\t0.000000\n");
  }
}

TEST_CASE("country flow examples") {
  SimilarityGraph g({"i", "j"}, {});
  g.set_neighbors(0, {{1, 0.8}});
  SUBCASE("single qualifying pair") {
    const auto f = compute_country_flows(g, {{"i", 2000}, {"j", 2003}},
                                         {{"i", {{"JP", 1.0}}}, {"j", {{"KR", 1.0}}}}, {});
    CHECK(f.at("JP", "KR") == doctest::Approx(0.8));
    CHECK(f.at("KR", "JP") == 0.0);
    CHECK(f.at("JP", "JP") == 0.0);
    CHECK(f.total() == doctest::Approx(0.8));
    CHECK(f.to_tsv() == "JP\tKR\t0.800000\n");
  }
  SUBCASE("outside the window") {
    const auto f = compute_country_flows(g, {{"i", 2000}, {"j", 2007}},
                                         {{"i", {{"JP", 1.0}}}, {"j", {{"KR", 1.0}}}}, {});
    CHECK(f.total() == 0.0);
    CHECK(f.to_tsv().empty());
  }
  SUBCASE("bilinear share weighting") {
    g.set_neighbors(0, {{1, 0.6}});
    const auto f = compute_country_flows(g, {{"i", 2000}, {"j", 2003}},
                                         {{"i", {{"US", 0.5}, {"JP", 0.5}}}, {"j", {{"KR", 1.0}}}},
                                         {});
    CHECK(std::abs(f.at("US", "KR") - 0.3) < 1e-12);
    CHECK(std::abs(f.at("JP", "KR") - 0.3) < 1e-12);
    CHECK(std::abs(f.total() - 0.6) < 1e-12);
  }
  SUBCASE("missing shares are counted") {
    const auto f = compute_country_flows(g, {{"i", 2000}, {"j", 2003}}, {{"i", {{"JP", 1.0}}}}, {});
    CHECK(f.total() == 0.0);
    CHECK(f.missing_shares == 1);
  }
  SUBCASE("period selects by source year") {
    const ShareMap s{{"i", {{"JP", 1.0}}}, {"j", {{"KR", 1.0}}}};
    const YearMap y{{"i", 2000}, {"j", 2003}};
    CHECK(compute_country_flows(g, y, s, {}, {2001, 2010}).total() == 0.0);
    CHECK(compute_country_flows(g, y, s, {}, {1990, 2000}).total() == doctest::Approx(0.8));
  }
  SUBCASE("node strength") {
    SimilarityGraph h({"i", "j", "k"}, {});
    h.set_neighbors(0, {{1, 0.8}, {2, 0.7}});
    const auto f = compute_country_flows(
        h, {{"i", 2000}, {"j", 2003}, {"k", 2002}},
        {{"i", {{"JP", 1.0}}}, {"j", {{"KR", 1.0}}}, {"k", {{"JP", 1.0}}}}, {});
    const auto strength = f.node_strength();
    REQUIRE(strength.size() == 2);
    CHECK(strength[0].country == "JP");
    CHECK(strength[0].out_total == doctest::Approx(0.8));
    CHECK(strength[0].domestic == doctest::Approx(0.7));
    CHECK(strength[1].in_total == doctest::Approx(0.8));
    CHECK(f.strength_tsv() == "JP\t0.800000\t0.000000\t0.700000\nKR\t0.000000\t0.800000\t0.000000\n");
  }
}

TEST_CASE("flow conservation, equivariance and dedupe") {
  for (std::uint64_t seed = 11; seed <= 15; ++seed) {
    const auto c = random_case(seed);
    const TemporalParams p{};
    const auto f = compute_country_flows(c.graph, c.years, c.shares, p);
    double expected = 0;
    for (std::size_t i = 0; i < c.graph.size(); ++i)
      for (const auto& e : c.graph.neighbors(i))
        if (in_future_window(c.years.at(c.graph.id(e.dst)) - c.years.at(c.graph.id(i)), p))
          expected += e.score;
    CHECK(std::abs(f.total() - expected) < 1e-9);
    for (const auto& row : f.flow)
      for (double x : row) CHECK(x >= 0.0);

    // Relabel countries with a fixed permutation.
    const std::map<std::string, std::string> relabel{
        {"US", "KR"}, {"JP", "US"}, {"DE", "JP"}, {"KR", "DE"}};
    ShareMap moved;
    for (const auto& [id, s] : c.shares)
      for (const auto& [country, w] : s) moved[id][relabel.at(country)] += w;
    const auto g = compute_country_flows(c.graph, c.years, moved, p);
    for (const auto& [a, a2] : relabel)
      for (const auto& [b, b2] : relabel) CHECK(std::abs(g.at(a2, b2) - f.at(a, b)) < 1e-12);

    const auto d = compute_country_flows(c.graph, c.years, c.shares, p, {}, {.dedupe_pairs = true});
    CHECK(d.total() <= f.total() + 1e-12);
  }
}

TEST_CASE("dedupe counts a repeated pair once") {
  SimilarityGraph g({"i", "j"}, {});
  g.set_neighbors(0, {{1, 0.8}, {1, 0.8}});
  const YearMap y{{"i", 2000}, {"j", 2003}};
  const ShareMap s{{"i", {{"JP", 1.0}}}, {"j", {{"KR", 1.0}}}};
  CHECK(compute_country_flows(g, y, s, {}).total() == doctest::Approx(1.6));
  CHECK(compute_country_flows(g, y, s, {}, {}, {.dedupe_pairs = true}).total() ==
        doctest::Approx(0.8));
}
