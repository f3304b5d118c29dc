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

#include "patsig/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "patsig/common.hpp"

namespace patsig::indicators {

namespace {

std::string fixed6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string year_string(double y) {
  if (y == std::floor(y)) return std::to_string(static_cast<long long>(y));
  return fixed6(y);
}

double year_of(const YearMap& years, const std::string& id, const std::string& context) {
  auto it = years.find(id);
  if (it == years.end()) fail(ErrorKind::kData, "no filing year for '" + id + "'" + context);
  return it->second;
}

}  // namespace

void TemporalParams::validate() const {
  require(tau >= 0.0 && tau < lambda && !std::isnan(lambda), ErrorKind::kConfig,
          "temporal window needs 0 <= tau < lambda");
}

std::vector<PatentIndicators> compute_indicators(const similarity::SimilarityGraph& graph,
                                                 const YearMap& years,
                                                 const TemporalParams& params,
                                                 Normalization norm) {
  params.validate();
  std::vector<PatentIndicators> out(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    auto& row = out[i];
    row.id = graph.id(i);
    row.year = year_of(years, row.id, "");
    const auto nbrs = graph.neighbors(i);
    row.m = nbrs.size();
    if (row.m == 0) continue;
    double total = 0.0, past = 0.0, future = 0.0;
    for (const auto& e : nbrs) {
      const auto& other = graph.id(e.dst);
      const double dt = year_of(years, other, " (neighbor of '" + row.id + "')") - row.year;
      total += e.score;
      if (in_past_window(dt, params)) past += e.score;
      if (in_future_window(dt, params)) future += e.score;
    }
    const double denom = norm == Normalization::kMean ? static_cast<double>(row.m) : 1.0;
    row.sim_total = total / denom;
    row.sim_past = past / denom;
    row.sim_future = future / denom;
  }
  return out;
}

std::string indicators_tsv(const std::vector<PatentIndicators>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.id + "\t" + year_string(r.year) + "\t" + std::to_string(r.m) + "\t" +
           fixed6(r.sim_total) + "\t" + fixed6(r.sim_past) + "\t" + fixed6(r.sim_future) + "\n";
  }
  return out;
}

std::vector<SeriesRow> aggregate_time_series(const std::vector<PatentIndicators>& rows,
                                             Grouping grouping, const ShareMap& shares) {
  struct Acc {
    double weight = 0.0, future = 0.0, past = 0.0;
  };
  std::map<std::pair<std::string, int>, Acc> acc;
  auto add = [&](const std::string& group, int year, double w, const PatentIndicators& r) {
    auto& a = acc[{group, year}];
    a.weight += w;
    a.future += w * r.sim_future;
    a.past += w * r.sim_past;
  };
  for (const auto& r : rows) {
    const int year = static_cast<int>(std::floor(r.year));
    if (grouping == Grouping::kGlobal) {
      add(std::string(kGlobalGroup), year, 1.0, r);
      continue;
    }
    auto it = shares.find(r.id);
    if (it == shares.end()) continue;
    for (const auto& [country, w] : it->second)
      if (w > 0.0) add(country, year, w, r);
  }
  std::vector<SeriesRow> out;
  for (const auto& [key, a] : acc) {
    if (!(a.weight > 0.0)) continue;
    out.push_back({key.first, key.second, a.weight, a.future / a.weight, a.past / a.weight});
  }
  return out;
}

std::string time_series_tsv(const std::vector<SeriesRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.group + "\t" + std::to_string(r.year) + "\t" + fixed6(r.count) + "\t" +
           fixed6(r.mean_future) + "\t" + fixed6(r.mean_past) + "\n";
  }
  return out;
}

double CountryFlowMatrix::at(const std::string& from, const std::string& to) const {
  auto a = std::lower_bound(countries.begin(), countries.end(), from);
  auto b = std::lower_bound(countries.begin(), countries.end(), to);
  if (a == countries.end() || *a != from || b == countries.end() || *b != to) return 0.0;
  return flow[a - countries.begin()][b - countries.begin()];
}

double CountryFlowMatrix::total() const {
  double s = 0.0;
  for (const auto& row : flow)
    for (double v : row) s += v;
  return s;
}

std::vector<NodeStrength> CountryFlowMatrix::node_strength() const {
  std::vector<NodeStrength> out(countries.size());
  for (std::size_t a = 0; a < countries.size(); ++a) {
    out[a].country = countries[a];
    for (std::size_t b = 0; b < countries.size(); ++b) {
      if (a == b) {
        out[a].domestic = flow[a][a];
        continue;
      }
      out[a].out_total += flow[a][b];
      out[b].in_total += flow[a][b];
    }
  }
  return out;
}

std::string CountryFlowMatrix::to_tsv() const {
  std::string out;
  for (std::size_t a = 0; a < countries.size(); ++a)
    for (std::size_t b = 0; b < countries.size(); ++b)
      if (flow[a][b] != 0.0)
        out += countries[a] + "\t" + countries[b] + "\t" + fixed6(flow[a][b]) + "\n";
  return out;
}

std::string CountryFlowMatrix::strength_tsv() const {
  std::string out;
  for (const auto& s : node_strength())
    out += s.country + "\t" + fixed6(s.out_total) + "\t" + fixed6(s.in_total) + "\t" +
           fixed6(s.domestic) + "\n";
  return out;
}

CountryFlowMatrix compute_country_flows(const similarity::SimilarityGraph& graph,
                                        const YearMap& years, const ShareMap& shares,
                                        const TemporalParams& params, YearRange period,
                                        FlowOptions options) {
  params.validate();
  CountryFlowMatrix result;
  result.period = period;
  std::set<std::string> country_set;
  for (const auto& [id, s] : shares)
    for (const auto& [c, w] : s) country_set.insert(c);
  result.countries.assign(country_set.begin(), country_set.end());
  const std::size_t n = result.countries.size();
  result.flow.assign(n, std::vector<double>(n, 0.0));
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t c = 0; c < n; ++c) slot[result.countries[c]] = c;

  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto& src = graph.id(i);
    const double ti = year_of(years, src, "");
    if (!period.contains(ti)) continue;
    for (const auto& e : graph.neighbors(i)) {
      const auto& dst = graph.id(e.dst);
      const double dt = year_of(years, dst, " (neighbor of '" + src + "')") - ti;
      if (!in_future_window(dt, params)) continue;
      if (options.dedupe_pairs) {
        const auto key = std::minmax(static_cast<std::uint32_t>(i), e.dst);
        if (!seen.insert(key).second) continue;
      }
      auto si = shares.find(src);
      auto sj = shares.find(dst);
      if (si == shares.end() || sj == shares.end() || si->second.empty() || sj->second.empty()) {
        ++result.missing_shares;
        continue;
      }
      for (const auto& [a, wa] : si->second)
        for (const auto& [b, wb] : sj->second) result.flow[slot[a]][slot[b]] += wa * wb * e.score;
    }
  }
  return result;
}

}  // namespace patsig::indicators
