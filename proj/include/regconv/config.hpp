#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "regconv/eval.hpp"

namespace regconv {

struct CorpusSpec {
  std::string id;
  std::string path;
  std::string format = "auto";  // auto | jsonl | text
};

enum class EmbedBackend { Tfidf, External };

struct RunConfig {
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::string output_dir = "regconv-out";

  std::vector<CorpusSpec> corpora;

  std::optional<std::string> stopwords_path;
  std::optional<std::string> gazetteer_path;
  std::vector<std::string> heading_patterns;  // empty = built-in rules

  EmbedBackend backend = EmbedBackend::Tfidf;
  std::size_t min_df = 1;
  std::optional<long> embed_dim;
  std::optional<std::string> external_path;

  std::optional<std::size_t> k;
  std::size_t k_min = 2;
  std::size_t k_max = 10;
  std::size_t restarts = 10;
  double tol = 1e-6;
  std::size_t max_iters = 300;

  std::size_t top_pairs = 10;

  double perplexity = 30.0;
  std::size_t tsne_iterations = 1000;
  double tsne_learning_rate = 200.0;

  std::vector<std::string> label_files;
  std::vector<std::string> label_classes;  // empty = default label set
  std::size_t folds = 5;
  std::string train_preset = "default";
  std::optional<double> train_learning_rate;
  std::optional<std::size_t> train_batch_size;
  std::optional<std::size_t> train_epochs;

  /// Throws ConfigError on out-of-range values or missing input files.
  void validate() const;
  LabelSet label_set() const;
  TrainConfig train_config() const;
};

/// Parses the YAML config; relative paths resolve against the file's directory.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& yaml_text, const std::string& base_dir = ".");

enum class Stage { Ingest, Preprocess, Embed, Elbow, Cluster, Analyze, Project, Evaluate };
inline constexpr Stage kStages[] = {Stage::Ingest, Stage::Preprocess, Stage::Embed,   Stage::Elbow,
                                    Stage::Cluster, Stage::Analyze,   Stage::Project, Stage::Evaluate};
std::string_view to_string(Stage s);

/// Fixed per-stage offset added to the global seed.
std::uint64_t stage_seed(const RunConfig& cfg, Stage s);

/// Config values a stage depends on, with input files replaced by content
/// hashes. Threads and the output directory are not part of any stage.
nlohmann::json stage_settings(const RunConfig& cfg, Stage s);

/// Hash of the stage's settings chained with the hashes of its upstream stages.
std::string stage_hash(const RunConfig& cfg, Stage s);

/// Hash over every stage's settings.
std::string config_hash(const RunConfig& cfg);

}  // namespace regconv
