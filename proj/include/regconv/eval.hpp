#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "regconv/common.hpp"
#include "regconv/corpus.hpp"
#include "regconv/embed.hpp"

namespace regconv {

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;

  /// Fine-tuning hyperparameters reported for BERT-base: 2e-5, 16, 4.
  static TrainConfig paper_bert(std::uint64_t seed = 0);
  /// Named presets: "paper-bert", "default".
  static TrainConfig preset(std::string_view name, std::uint64_t seed = 0);
  void validate() const;
};

/// Softmax-over-linear classifier.
struct LinearHead {
  Matrix weights;  // classes x dim
  std::vector<double> bias;
  LabelSet label_set;

  static LinearHead zeros(const LabelSet& labels, std::size_t dim);
  std::size_t classes() const { return bias.size(); }
  std::size_t dim() const { return weights.cols(); }

  friend bool operator==(const LinearHead&, const LinearHead&) = default;
};

struct TrainResult {
  LinearHead head;
  std::vector<double> epoch_loss;  // mean cross-entropy over the training set after each epoch
};

struct Prediction {
  std::size_t class_index = 0;
  std::vector<double> probabilities;
};

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold count
  bool excluded = false;    // never predicted and never gold; left out of macro averages
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

struct CrossValidationResult {
  std::vector<MetricsReport> folds;
  std::vector<std::vector<std::string>> fold_test_ids;
  MeanStd accuracy, macro_precision, macro_recall, macro_f1;
  std::vector<std::string> warnings;
};

/// One row of a Model | Accuracy | Precision | Recall | F1-Score table.
struct ModelScore {
  std::string model;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

std::vector<double> softmax(std::span<const double> logits);

/// -sum y log(max(p, 1e-12)).
double cross_entropy_loss(std::span<const double> predicted, std::span<const double> target);

struct LossAndGradient {
  double loss = 0.0;  // mean cross-entropy
  Matrix grad_weights;
  std::vector<double> grad_bias;
};

/// Mean cross-entropy of the head over `rows` (with class targets) and its
/// analytic gradient.
LossAndGradient head_loss_and_gradient(const LinearHead& head, const Matrix& x,
                                       std::span<const std::size_t> rows,
                                       std::span<const std::size_t> targets);

/// Mini-batch gradient descent from zero parameters: per-epoch seeded
/// shuffle, batches of `batch_size` (last short batch kept), mean-reduced
/// cross-entropy gradient.
TrainResult train_head(const EmbeddingMatrix& x, const std::map<std::string, std::string>& labels,
                       const LabelSet& label_set, const TrainConfig& cfg);

/// Argmax of the softmax; ties go to the lowest class index.
std::vector<Prediction> predict(const LinearHead& head, const EmbeddingMatrix& x);

MetricsReport compute_metrics(const std::map<std::string, std::string>& predictions,
                              const std::map<std::string, std::string>& gold, const LabelSet& label_set);

/// Seeded stratified k-fold: each class is shuffled and dealt round-robin to
/// the folds, continuing where the previous class stopped.
std::vector<std::vector<std::string>> stratified_folds(const std::vector<std::string>& ids,
                                                       const std::map<std::string, std::string>& labels,
                                                       const LabelSet& label_set, std::size_t folds,
                                                       std::uint64_t seed,
                                                       std::vector<std::string>* warnings = nullptr);

CrossValidationResult cross_validate(const EmbeddingMatrix& x, const std::map<std::string, std::string>& labels,
                                     const LabelSet& label_set, std::size_t folds, const TrainConfig& cfg);

/// Average of probability vectors, then argmax (ties to the lowest index).
std::size_t soft_vote(std::span<const std::vector<double>> probabilities);

/// Soft-voting ensemble; `views[m]` holds the embeddings `heads[m]` expects.
std::map<std::string, std::string> ensemble_predict(std::span<const LinearHead> heads,
                                                    std::span<const EmbeddingMatrix> views);

/// Percentages with one decimal, e.g. "92.5% | 91.2% | 90.8% | 91.0%".
std::string format_score_cells(const ModelScore& score);
std::string render_metrics_table(std::span<const ModelScore> rows);

nlohmann::json metrics_to_json(const MetricsReport& report);
nlohmann::json cross_validation_to_json(const CrossValidationResult& cv);
nlohmann::json head_to_json(const LinearHead& head);

}  // namespace regconv
