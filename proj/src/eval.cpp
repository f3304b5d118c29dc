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

#include "patsig/eval.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "patsig/ann.hpp"
#include "patsig/common.hpp"

namespace patsig::eval {

// ---------------------------------------------------------------------------
// MLP

MlpClassifier::MlpClassifier(std::size_t input_dim, std::size_t n_classes, MlpConfig config)
    : input_dim_(input_dim), n_classes_(n_classes), config_(std::move(config)) {
  require(input_dim >= 1, ErrorKind::kConfig, "classifier input dimension must be >= 1");
  require(n_classes >= 2, ErrorKind::kConfig, "classifier needs at least 2 classes");
  Rng rng(derive_seed(config_.seed, 0));
  std::size_t fan_in = input_dim;
  auto sizes = config_.hidden;
  sizes.push_back(n_classes);
  for (auto width : sizes) {
    require(width >= 1, ErrorKind::kConfig, "layer width must be >= 1");
    Eigen::MatrixXd w(width, fan_in);
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = scale * standard_normal(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width)));
    fan_in = width;
  }
}

namespace {

// Column-wise softmax, shifted by the column max.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double mx = logits.col(c).maxCoeff();
    p.col(c) = (logits.col(c).array() - mx).exp().matrix();
    p.col(c) /= p.col(c).sum();
  }
  return p;
}

}  // namespace

Eigen::MatrixXd MlpClassifier::predict_proba(const Eigen::MatrixXd& features) const {
  require(static_cast<std::size_t>(features.cols()) == input_dim_, ErrorKind::kFormat,
          "feature dimension does not match the classifier");
  Eigen::MatrixXd h = features.transpose();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = (weights_[l] * h).colwise() + biases_[l];
    if (l + 1 < weights_.size()) {
      h = z.cwiseMax(0.0);
    } else {
      h = softmax_columns(z);
    }
  }
  return h.transpose();
}

std::vector<std::size_t> MlpClassifier::predict(const Eigen::MatrixXd& features) const {
  const auto p = predict_proba(features);
  std::vector<std::size_t> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    Eigen::Index arg = 0;
    p.row(r).maxCoeff(&arg);
    out[static_cast<std::size_t>(r)] = static_cast<std::size_t>(arg);
  }
  return out;
}

double MlpClassifier::loss(const Eigen::MatrixXd& features, std::span<const std::size_t> labels,
                           Gradients* grads) const {
  const auto batch = static_cast<Eigen::Index>(labels.size());
  require(features.rows() == batch && batch > 0, ErrorKind::kFormat,
          "feature rows and labels differ in count");
  const std::size_t n_layers = weights_.size();
  std::vector<Eigen::MatrixXd> acts;  // acts[0] = input, acts[l+1] = output of layer l
  acts.reserve(n_layers + 1);
  acts.push_back(features.transpose());
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd z = (weights_[l] * acts.back()).colwise() + biases_[l];
    acts.push_back(l + 1 < n_layers ? Eigen::MatrixXd(z.cwiseMax(0.0)) : softmax_columns(z));
  }
  const Eigen::MatrixXd& prob = acts.back();
  double total = 0.0;
  for (Eigen::Index c = 0; c < batch; ++c) {
    const auto y = labels[static_cast<std::size_t>(c)];
    require(y < n_classes_, ErrorKind::kData, "label outside the class range");
    total -= std::log(std::max(prob(static_cast<Eigen::Index>(y), c), 1e-300));
  }
  const double inv_batch = 1.0 / static_cast<double>(batch);
  if (grads == nullptr) return total * inv_batch;

  grads->weights.resize(n_layers);
  grads->biases.resize(n_layers);
  // dL/dlogits = (p - onehot(y)) / B
  Eigen::MatrixXd delta = prob;
  for (Eigen::Index c = 0; c < batch; ++c)
    delta(static_cast<Eigen::Index>(labels[static_cast<std::size_t>(c)]), c) -= 1.0;
  delta *= inv_batch;
  for (std::size_t l = n_layers; l-- > 0;) {
    grads->weights[l] = delta * acts[l].transpose();
    grads->biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = weights_[l].transpose() * delta;
    // ReLU derivative: active where the layer output is positive.
    delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
  }
  return total * inv_batch;
}

void MlpClassifier::apply_momentum_step(const Gradients& grads, Gradients& velocity) {
  if (velocity.weights.size() != weights_.size()) {
    velocity.weights.clear();
    velocity.biases.clear();
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      velocity.weights.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
      velocity.biases.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
    }
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    velocity.weights[l] = config_.momentum * velocity.weights[l] - config_.learning_rate * grads.weights[l];
    velocity.biases[l] = config_.momentum * velocity.biases[l] - config_.learning_rate * grads.biases[l];
    weights_[l] += velocity.weights[l];
    biases_[l] += velocity.biases[l];
  }
}

bool MlpClassifier::all_finite() const {
  for (std::size_t l = 0; l < weights_.size(); ++l)
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
  return true;
}

MlpClassifier train_mlp(const Eigen::MatrixXd& features, std::span<const std::size_t> labels,
                        std::size_t n_classes, const MlpConfig& config) {
  require(static_cast<std::size_t>(features.rows()) == labels.size(), ErrorKind::kFormat,
          "feature rows and labels differ in count");
  require(config.batch_size >= 1, ErrorKind::kConfig, "batch size must be >= 1");
  MlpClassifier clf(static_cast<std::size_t>(features.cols()), n_classes, config);
  if (labels.empty() || config.epochs == 0) return clf;
  Rng rng(derive_seed(config.seed, 1));
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  MlpClassifier::Gradients grads, velocity;
  Eigen::MatrixXd batch_x;
  std::vector<std::size_t> batch_y;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch_x.resize(static_cast<Eigen::Index>(end - start), features.cols());
      batch_y.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_x.row(static_cast<Eigen::Index>(i - start)) =
            features.row(static_cast<Eigen::Index>(order[i]));
        batch_y.push_back(labels[order[i]]);
      }
      clf.loss(batch_x, batch_y, &grads);
      clf.apply_momentum_step(grads, velocity);
    }
    if (!clf.all_finite())
      fail(ErrorKind::kData, "classifier training diverged in epoch " + std::to_string(epoch));
  }
  return clf;
}

// ---------------------------------------------------------------------------
// Metrics

EvalMetrics evaluate_predictions(std::span<const std::size_t> predicted,
                                 std::span<const std::size_t> truth, std::size_t n_classes) {
  require(predicted.size() == truth.size(), ErrorKind::kFormat,
          "prediction and label counts differ");
  EvalMetrics m;
  std::vector<std::size_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
  m.support.assign(n_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] < n_classes && predicted[i] < n_classes, ErrorKind::kData,
            "label outside the class range");
    ++m.support[truth[i]];
    if (predicted[i] == truth[i]) {
      ++tp[truth[i]];
      ++correct;
    } else {
      ++fp[predicted[i]];
      ++fn[truth[i]];
    }
  }
  m.precision.assign(n_classes, 0.0);
  m.recall.assign(n_classes, 0.0);
  m.f1.assign(n_classes, 0.0);
  std::size_t total_support = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const double t = static_cast<double>(tp[c]);
    if (tp[c] + fp[c] > 0) m.precision[c] = t / static_cast<double>(tp[c] + fp[c]);
    if (tp[c] + fn[c] > 0) m.recall[c] = t / static_cast<double>(tp[c] + fn[c]);
    if (m.precision[c] + m.recall[c] > 0.0)
      m.f1[c] = 2.0 * m.precision[c] * m.recall[c] / (m.precision[c] + m.recall[c]);
    const double w = static_cast<double>(m.support[c]);
    m.weighted_precision += w * m.precision[c];
    m.weighted_recall += w * m.recall[c];
    m.weighted_f1 += w * m.f1[c];
    total_support += m.support[c];
  }
  if (total_support > 0) {
    const double inv = 1.0 / static_cast<double>(total_support);
    m.weighted_precision *= inv;
    m.weighted_recall *= inv;
    m.weighted_f1 *= inv;
    m.accuracy = static_cast<double>(correct) * inv;
  }
  return m;
}

EvalMetrics evaluate_classifier(const MlpClassifier& clf, const Eigen::MatrixXd& features,
                                std::span<const std::size_t> labels) {
  const auto predicted = clf.predict(features);
  return evaluate_predictions(predicted, labels, clf.n_classes());
}

std::string EvalMetrics::to_tsv(const std::vector<std::string>& names) const {
  std::string out = "class\tprecision\trecall\tf1\tsupport\n";
  char buf[128];
  std::size_t total = 0;
  for (std::size_t c = 0; c < support.size(); ++c) {
    const std::string name = c < names.size() ? names[c] : std::to_string(c);
    std::snprintf(buf, sizeof buf, "\t%.6f\t%.6f\t%.6f\t%zu\n", precision[c], recall[c], f1[c],
                  support[c]);
    out += name + buf;
    total += support[c];
  }
  std::snprintf(buf, sizeof buf, "weighted\t%.6f\t%.6f\t%.6f\t%zu\n", weighted_precision,
                weighted_recall, weighted_f1, total);
  out += buf;
  return out;
}

std::vector<std::size_t> placebo_shift(std::span<const std::size_t> labels) {
  require(labels.size() >= 2, ErrorKind::kConfig, "placebo shift needs at least 2 observations");
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[(i + 1) % labels.size()];
  return out;
}

Split train_test_split(std::size_t n, double test_fraction, std::uint64_t seed) {
  require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::kConfig,
          "test fraction must lie in (0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 2));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  Split s;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

std::vector<std::size_t> classes_missing_from_training(std::span<const std::size_t> train_labels,
                                                       std::span<const std::size_t> eval_labels,
                                                       std::size_t n_classes) {
  std::vector<bool> trained(n_classes, false), evaluated(n_classes, false);
  for (auto y : train_labels)
    if (y < n_classes) trained[y] = true;
  for (auto y : eval_labels)
    if (y < n_classes) evaluated[y] = true;
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < n_classes; ++c)
    if (evaluated[c] && !trained[c]) out.push_back(c);
  return out;
}

Eigen::MatrixXd feature_rows(const embedding::VectorStore& store,
                             std::span<const std::size_t> indices) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(indices.size()), store.dim());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto v = store.vector(indices[r]);
    for (std::size_t d = 0; d < v.size(); ++d)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) = v[d];
  }
  return x;
}

// ---------------------------------------------------------------------------
// Relational comparisons

namespace {

constexpr std::pair<Condition, std::string_view> kConditionNames[] = {
    {Condition::kIpcClass, "ipc_class"},     {Condition::kIpcSubclass, "ipc_subclass"},
    {Condition::kIpcGroup, "ipc_group"},     {Condition::kIpcSubgroup, "ipc_subgroup"},
    {Condition::kInventor, "inventor"},      {Condition::kAssignee, "assignee"},
    {Condition::kCitation, "citation"},
};

std::vector<std::string> attribute_keys(const corpus::PatentRecord& r, Condition c) {
  std::vector<std::string> keys;
  switch (c) {
    case Condition::kIpcClass:
      for (const auto& code : r.ipc) keys.push_back(code.class_key());
      break;
    case Condition::kIpcSubclass:
      for (const auto& code : r.ipc) keys.push_back(code.subclass_key());
      break;
    case Condition::kIpcGroup:
      for (const auto& code : r.ipc) keys.push_back(code.group_key());
      break;
    case Condition::kIpcSubgroup:
      for (const auto& code : r.ipc) keys.push_back(code.to_string());
      break;
    case Condition::kInventor:
      keys = r.inventors;
      break;
    case Condition::kAssignee:
      keys = r.assignees;
      break;
    case Condition::kCitation:
      break;
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

bool cites(const corpus::PatentRecord& a, const corpus::PatentRecord& b) {
  return std::find(a.cites.begin(), a.cites.end(), b.id) != a.cites.end();
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double mu) {
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

std::string_view condition_name(Condition c) {
  for (const auto& [cond, name] : kConditionNames)
    if (cond == c) return name;
  return "unknown";
}

std::optional<Condition> parse_condition(std::string_view name) {
  for (const auto& [cond, n] : kConditionNames)
    if (n == name) return cond;
  return std::nullopt;
}

const std::vector<Condition>& all_conditions() {
  static const std::vector<Condition> all = [] {
    std::vector<Condition> v;
    for (const auto& [cond, name] : kConditionNames) v.push_back(cond);
    return v;
  }();
  return all;
}

bool condition_holds(const corpus::PatentRecord& a, const corpus::PatentRecord& b, Condition c) {
  if (c == Condition::kCitation) return cites(a, b) || cites(b, a);
  const auto ka = attribute_keys(a, c);
  const auto kb = attribute_keys(b, c);
  std::vector<std::string> common;
  std::set_intersection(ka.begin(), ka.end(), kb.begin(), kb.end(), std::back_inserter(common));
  return !common.empty();
}

PairSample sample_condition_pairs(const std::vector<corpus::PatentRecord>& records,
                                  const embedding::VectorStore& store, Condition condition,
                                  std::size_t n, std::uint64_t seed) {
  PairSample sample;
  sample.condition = condition;
  if (n == 0) return sample;

  std::unordered_map<std::string, std::size_t> store_index;
  for (std::size_t i = 0; i < store.size(); ++i) store_index.emplace(store.id(i), i);
  // Records that have a usable vector.
  std::vector<std::uint32_t> usable;
  std::vector<std::size_t> vec_of(records.size(), 0);
  for (std::size_t r = 0; r < records.size(); ++r) {
    auto it = store_index.find(records[r].id);
    if (it == store_index.end() || store.is_sentinel(it->second)) continue;
    vec_of[r] = it->second;
    usable.push_back(static_cast<std::uint32_t>(r));
  }
  require(usable.size() >= 2, ErrorKind::kData, "fewer than 2 records with usable vectors");

  std::set<std::pair<std::uint32_t, std::uint32_t>> positive_set;
  if (condition == Condition::kCitation) {
    std::unordered_map<std::string, std::uint32_t> id_to_record;
    for (auto r : usable) id_to_record.emplace(records[r].id, r);
    for (auto r : usable)
      for (const auto& cited : records[r].cites) {
        auto it = id_to_record.find(cited);
        if (it == id_to_record.end() || it->second == r) continue;
        positive_set.insert(std::minmax(r, it->second));
      }
  } else {
    std::map<std::string, std::vector<std::uint32_t>> groups;
    for (auto r : usable)
      for (const auto& key : attribute_keys(records[r], condition)) groups[key].push_back(r);
    for (const auto& [key, members] : groups)
      for (std::size_t x = 0; x < members.size(); ++x)
        for (std::size_t y = x + 1; y < members.size(); ++y)
          positive_set.insert(std::minmax(members[x], members[y]));
  }

  const std::uint64_t all_pairs = std::uint64_t{usable.size()} * (usable.size() - 1) / 2;
  if (positive_set.size() == all_pairs)
    fail(ErrorKind::kData, std::string("condition always true for ") +
                               std::string(condition_name(condition)) +
                               ": no negative pairs exist");

  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(condition) + 100));
  std::vector<std::pair<std::uint32_t, std::uint32_t>> positives(positive_set.begin(),
                                                                  positive_set.end());
  if (positives.size() > n) {
    // Partial Fisher-Yates: the first n entries become a uniform sample.
    for (std::size_t i = 0; i < n; ++i)
      std::swap(positives[i], positives[i + uniform_index(rng, positives.size() - i)]);
    positives.resize(n);
    std::sort(positives.begin(), positives.end());
  } else if (positives.size() < n) {
    sample.warnings.push_back("only " + std::to_string(positives.size()) + " positive pairs for " +
                              std::string(condition_name(condition)) + " (requested " +
                              std::to_string(n) + ")");
  }

  std::uint64_t wanted = positives.size();
  const std::uint64_t available = all_pairs - positive_set.size();
  if (wanted > available) {
    sample.warnings.push_back("only " + std::to_string(available) +
                              " negative pairs exist; positives trimmed to match");
    wanted = available;
    positives.resize(wanted);
  }

  auto score = [&](std::uint32_t a, std::uint32_t b) {
    return *ann::exact_cosine(store.vector(vec_of[a]), store.vector(vec_of[b]));
  };
  for (const auto& [a, b] : positives) sample.positives.push_back({a, b, score(a, b)});

  std::set<std::pair<std::uint32_t, std::uint32_t>> negative_set;
  const std::uint64_t max_attempts = 1000 * wanted + 100000;
  for (std::uint64_t attempt = 0; negative_set.size() < wanted; ++attempt) {
    if (attempt >= max_attempts)
      fail(ErrorKind::kData, "could not draw enough negative pairs for " +
                                 std::string(condition_name(condition)));
    const auto x = usable[uniform_index(rng, usable.size())];
    const auto y = usable[uniform_index(rng, usable.size())];
    if (x == y) continue;
    const auto key = std::minmax(x, y);
    if (positive_set.count(key) || negative_set.count(key)) continue;
    if (condition_holds(records[key.first], records[key.second], condition)) continue;
    negative_set.insert(key);
    sample.negatives.push_back({key.first, key.second, score(key.first, key.second)});
  }
  return sample;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  require(a.size() >= 2 && b.size() >= 2, ErrorKind::kConfig,
          "Welch t-test needs at least 2 values per sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean(a), mb = mean(b);
  const double va = sample_variance(a, ma), vb = sample_variance(b, mb);
  const double se2 = va / na + vb / nb;
  WelchResult r;
  if (se2 == 0.0) {
    if (ma == mb) return {0.0, na + nb - 2.0, 1.0};
    r.t = ma > mb ? std::numeric_limits<double>::infinity()
                  : -std::numeric_limits<double>::infinity();
    r.df = na + nb - 2.0;
    r.p = 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  const double qa = va / na, qb = vb / nb;
  r.df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.p = std::min(1.0, r.p);
  return r;
}

std::vector<RelationalRow> relational_report(const std::vector<PairSample>& samples) {
  std::vector<RelationalRow> rows;
  for (const auto& s : samples) {
    std::vector<double> pos, neg;
    for (const auto& p : s.positives) pos.push_back(p.score);
    for (const auto& p : s.negatives) neg.push_back(p.score);
    RelationalRow row;
    row.condition = std::string(condition_name(s.condition));
    row.shared = pos.empty() ? 0.0 : mean(pos);
    row.not_shared = neg.empty() ? 0.0 : mean(neg);
    const auto w = welch_t_test(pos, neg);
    row.t = w.t;
    row.p = w.p;
    row.reversed = row.shared <= row.not_shared;
    rows.push_back(row);
  }
  return rows;
}

std::string relational_tsv(const std::vector<RelationalRow>& rows) {
  std::string out = "condition\tshared\tnot_shared\tt\tp\tflag\n";
  char buf[160];
  for (const auto& r : rows) {
    const char* flag = r.reversed ? "reversed"
                       : r.p < 0.01 ? "***"
                       : r.p < 0.05 ? "**"
                       : r.p < 0.1  ? "*"
                                    : "n.s.";
    std::snprintf(buf, sizeof buf, "\t%.6f\t%.6f\t%.6f\t%.6g\t%s\n", r.shared, r.not_shared, r.t,
                  r.p, flag);
    out += r.condition + buf;
  }
  return out;
}

}  // namespace patsig::eval
