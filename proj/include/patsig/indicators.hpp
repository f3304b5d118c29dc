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

// Temporal similarity indicators per patent and country-level knowledge
// flows, both derived from the thresholded similarity graph.
//
// For a focal patent i with retained neighbors j = 1..m and lag
// dt = t_j - t_i (years):
//
//   sim_total  = sum_j s_ij / m
//   sim_past   = sum_j [-tau > dt >= -lambda] s_ij / m
//   sim_future = sum_j [ tau < dt <=  lambda] s_ij / m

#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "patsig/similarity.hpp"

namespace patsig::indicators {

struct TemporalParams {
  double tau = 1.0;
  /// +infinity disables the upper lag bound.
  double lambda = 5.0;

  void validate() const;  // 0 <= tau < lambda
};

inline bool in_future_window(double dt, const TemporalParams& p) {
  return p.tau < dt && dt <= p.lambda;
}

inline bool in_past_window(double dt, const TemporalParams& p) {
  return -p.tau > dt && dt >= -p.lambda;
}

enum class Normalization {
  kMean,  // divide by m
  kSum,   // unnormalized sums
};

struct PatentIndicators {
  std::string id;
  double year = 0.0;
  std::size_t m = 0;
  double sim_total = 0.0;
  double sim_past = 0.0;
  double sim_future = 0.0;
};

using YearMap = std::unordered_map<std::string, double>;
using Shares = std::map<std::string, double>;
using ShareMap = std::unordered_map<std::string, Shares>;

/// One row per graph node, in node order. Throws kData naming the pair when
/// a patent or one of its neighbors has no year.
std::vector<PatentIndicators> compute_indicators(const similarity::SimilarityGraph& graph,
                                                 const YearMap& years,
                                                 const TemporalParams& params,
                                                 Normalization norm = Normalization::kMean);

/// `id \t year \t m \t sim_total \t sim_past \t sim_future`, 6 decimals.
std::string indicators_tsv(const std::vector<PatentIndicators>& rows);

enum class Grouping { kGlobal, kCountry };

inline constexpr std::string_view kGlobalGroup = "ALL";

struct SeriesRow {
  std::string group;
  int year = 0;
  double count = 0.0;
  double mean_future = 0.0;
  double mean_past = 0.0;
};

/// Share-weighted per-(group, year) counts and indicator means. Patents
/// without shares are skipped under country grouping.
std::vector<SeriesRow> aggregate_time_series(const std::vector<PatentIndicators>& rows,
                                             Grouping grouping, const ShareMap& shares = {});

/// `group \t year \t count \t mean_future \t mean_past`.
std::string time_series_tsv(const std::vector<SeriesRow>& rows);

struct YearRange {
  int first = std::numeric_limits<int>::min();
  int last = std::numeric_limits<int>::max();
  bool contains(double year) const { return year >= first && year <= last; }
};

struct FlowOptions {
  /// Count each unordered patent pair at most once.
  bool dedupe_pairs = false;
};

struct NodeStrength {
  std::string country;
  double out_total = 0.0;  // excludes the diagonal
  double in_total = 0.0;   // excludes the diagonal
  double domestic = 0.0;
};

/// F[a][b]: future-window similarity flowing from country a (earlier
/// patent) to country b (later patent).
struct CountryFlowMatrix {
  std::vector<std::string> countries;
  std::vector<std::vector<double>> flow;
  YearRange period;
  /// Qualifying edges skipped because one endpoint has no shares.
  std::size_t missing_shares = 0;

  double at(const std::string& from, const std::string& to) const;
  double total() const;
  std::vector<NodeStrength> node_strength() const;

  /// Long form `src_country \t dst_country \t flow`, non-zero cells only.
  std::string to_tsv() const;
  /// `country \t out \t in \t domestic`.
  std::string strength_tsv() const;
};

CountryFlowMatrix compute_country_flows(const similarity::SimilarityGraph& graph,
                                        const YearMap& years, const ShareMap& shares,
                                        const TemporalParams& params, YearRange period = {},
                                        FlowOptions options = {});

}  // namespace patsig::indicators
