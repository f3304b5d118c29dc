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

// Validation suites for signature vectors: an MLP classifier over IPC
// subclasses with a placebo control, and shared-attribute pair comparisons
// with Welch t-tests.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "patsig/corpus.hpp"
#include "patsig/embedding.hpp"

namespace patsig::eval {

// ---------------------------------------------------------------------------
// Classifier

struct MlpConfig {
  std::vector<std::size_t> hidden{512, 256, 128};
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 7;
};

/// Fully connected ReLU network with a softmax output, trained on
/// cross-entropy. Feature matrices hold one sample per row.
class MlpClassifier {
 public:
  struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
  };

  MlpClassifier() = default;
  /// He-initialized weights drawn from config.seed, zero biases.
  MlpClassifier(std::size_t input_dim, std::size_t n_classes, MlpConfig config);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t n_classes() const noexcept { return n_classes_; }
  const MlpConfig& config() const noexcept { return config_; }
  std::size_t n_layers() const noexcept { return weights_.size(); }

  Eigen::MatrixXd& weights(std::size_t layer) { return weights_.at(layer); }
  const Eigen::MatrixXd& weights(std::size_t layer) const { return weights_.at(layer); }
  Eigen::VectorXd& biases(std::size_t layer) { return biases_.at(layer); }
  const Eigen::VectorXd& biases(std::size_t layer) const { return biases_.at(layer); }

  /// Class probabilities, one row per sample.
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& features) const;
  std::vector<std::size_t> predict(const Eigen::MatrixXd& features) const;

  /// Mean cross-entropy over the batch; fills `grads` when non-null.
  double loss(const Eigen::MatrixXd& features, std::span<const std::size_t> labels,
              Gradients* grads = nullptr) const;

  void apply_momentum_step(const Gradients& grads, Gradients& velocity);
  bool all_finite() const;

 private:
  std::size_t input_dim_ = 0;
  std::size_t n_classes_ = 0;
  MlpConfig config_;
  std::vector<Eigen::MatrixXd> weights_;  // layer l: out x in
  std::vector<Eigen::VectorXd> biases_;
};

/// Mini-batch SGD with momentum; sequential and seed-deterministic.
MlpClassifier train_mlp(const Eigen::MatrixXd& features, std::span<const std::size_t> labels,
                        std::size_t n_classes, const MlpConfig& config);

struct EvalMetrics {
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<std::size_t> support;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;

  /// Per-class `class \t precision \t recall \t f1 \t support` rows plus a
  /// `weighted` summary line. `names` may be empty.
  std::string to_tsv(const std::vector<std::string>& names = {}) const;
};

/// Per-class and support-weighted metrics. A class never predicted has
/// precision 0; a class without support is left out of the weighted means.
EvalMetrics evaluate_predictions(std::span<const std::size_t> predicted,
                                 std::span<const std::size_t> truth, std::size_t n_classes);

EvalMetrics evaluate_classifier(const MlpClassifier& clf, const Eigen::MatrixXd& features,
                                std::span<const std::size_t> labels);

/// Pairs vector i with the label of observation i+1 (cyclically).
std::vector<std::size_t> placebo_shift(std::span<const std::size_t> labels);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded random hold-out split; both index lists come back sorted.
Split train_test_split(std::size_t n, double test_fraction, std::uint64_t seed);

/// Classes with eval support but no training examples.
std::vector<std::size_t> classes_missing_from_training(std::span<const std::size_t> train_labels,
                                                       std::span<const std::size_t> eval_labels,
                                                       std::size_t n_classes);

Eigen::MatrixXd feature_rows(const embedding::VectorStore& store,
                             std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// Relational comparisons

enum class Condition {
  kIpcClass,
  kIpcSubclass,
  kIpcGroup,
  kIpcSubgroup,
  kInventor,
  kAssignee,
  kCitation,
};

std::string_view condition_name(Condition c);
std::optional<Condition> parse_condition(std::string_view name);
const std::vector<Condition>& all_conditions();

bool condition_holds(const corpus::PatentRecord& a, const corpus::PatentRecord& b, Condition c);

struct ScoredPair {
  std::uint32_t a = 0;  // record indices, a < b
  std::uint32_t b = 0;
  double score = 0.0;
};

struct PairSample {
  Condition condition = Condition::kIpcClass;
  std::vector<ScoredPair> positives;
  std::vector<ScoredPair> negatives;
  std::vector<std::string> warnings;
};

/// Positive pairs satisfy the condition (capped at n by seeded sampling);
/// negatives are seeded uniform pairs that violate it, equal in number.
/// Scores are exact cosines from `store`, matched to records by id; records
/// with no vector or a zero vector are left out.
PairSample sample_condition_pairs(const std::vector<corpus::PatentRecord>& records,
                                  const embedding::VectorStore& store, Condition condition,
                                  std::size_t n, std::uint64_t seed);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

/// Welch's unequal-variance t-test. Each sample needs at least 2 values.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct RelationalRow {
  std::string condition;
  double shared = 0.0;
  double not_shared = 0.0;
  double t = 0.0;
  double p = 1.0;
  bool reversed = false;  // mean(shared) <= mean(not shared)
};

std::vector<RelationalRow> relational_report(const std::vector<PairSample>& samples);

/// Header plus `condition \t shared \t not_shared \t t \t p \t flag` rows;
/// flag is "reversed" or the significance stars.
std::string relational_tsv(const std::vector<RelationalRow>& rows);

}  // namespace patsig::eval
