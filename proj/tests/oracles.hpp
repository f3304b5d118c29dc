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

// Reference computations used by the tests. They are written independently
// of the library (different precision, different algorithms) so agreement
// means something.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "patsig/common.hpp"
#include "patsig/embedding.hpp"

namespace oracle {

inline long double dot(std::span<const float> a, std::span<const float> b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return s;
}

inline long double cosine(std::span<const float> a, std::span<const float> b) {
  return dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
}

inline std::vector<float> random_unit(patsig::Rng& rng, std::size_t dim) {
  std::vector<float> v(dim);
  long double n2 = 0;
  for (auto& x : v) {
    x = static_cast<float>(patsig::standard_normal(rng));
    n2 += static_cast<long double>(x) * x;
  }
  const long double n = std::sqrt(n2);
  for (auto& x : v) x = static_cast<float>(x / n);
  return v;
}

inline patsig::embedding::VectorStore random_store(std::size_t n, std::size_t dim,
                                                   std::uint64_t seed) {
  patsig::Rng rng(seed);
  patsig::embedding::VectorStore store(static_cast<std::uint32_t>(dim));
  for (std::size_t i = 0; i < n; ++i)
    store.add("v" + std::to_string(i), random_unit(rng, dim), patsig::embedding::NormFlag::kUnit);
  return store;
}

/// Exact k nearest ids by sorting every item; ties by ascending id.
inline std::vector<std::string> knn_ids(const patsig::embedding::VectorStore& store,
                                        std::span<const float> q, std::size_t k,
                                        long exclude = -1) {
  std::vector<std::pair<long double, std::string>> all;
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (static_cast<long>(i) == exclude || store.is_sentinel(i)) continue;
    all.emplace_back(cosine(q, store.vector(i)), store.id(i));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

/// Two-sided Student t tail probability by Simpson integration of the density.
inline double t_two_sided_p(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  auto f = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const double a = std::abs(t);
  const int n = 200000;
  const double h = a / n;
  double s = f(0) + f(a);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * f(i * h);
  const double central = s * h / 3;  // integral over [0, |t|]
  return 1.0 - 2.0 * central;
}

/// Welch statistic and degrees of freedom, written out from the definitions.
struct Welch {
  double t, df;
};
inline Welch welch(const std::vector<double>& a, const std::vector<double>& b) {
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0L) / v.size();
  };
  auto var = [&](const std::vector<double>& v) {
    const long double m = mean(v);
    long double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
  };
  const long double va = var(a) / a.size(), vb = var(b) / b.size();
  const long double t = (mean(a) - mean(b)) / std::sqrt(va + vb);
  const long double df =
      (va + vb) * (va + vb) / (va * va / (a.size() - 1) + vb * vb / (b.size() - 1));
  return {static_cast<double>(t), static_cast<double>(df)};
}

}  // namespace oracle
