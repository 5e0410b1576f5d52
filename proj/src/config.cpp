#include "regconv/config.hpp"

#include <cmath>
#include <filesystem>
#include <set>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace regconv {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!node.IsMap()) throw ConfigError(fmt::format("config: '{}' must be a mapping", where));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) throw ConfigError(fmt::format("config: unknown key '{}' in '{}'", key, where));
  }
}

template <typename T>
T get(const YAML::Node& node, const std::string& key, const std::string& where) {
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(fmt::format("config: bad value for '{}.{}'", where, key));
  }
}

template <typename T>
void maybe(const YAML::Node& node, const std::string& key, const std::string& where, T& out) {
  if (node[key] && !node[key].IsNull()) out = get<T>(node, key, where);
}

template <typename T>
void maybe(const YAML::Node& node, const std::string& key, const std::string& where, std::optional<T>& out) {
  if (node[key] && !node[key].IsNull()) out = get<T>(node, key, where);
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

std::size_t non_negative(long v, const std::string& what) {
  if (v < 0) throw ConfigError(fmt::format("config: {} must be non-negative (got {})", what, v));
  return static_cast<std::size_t>(v);
}

void maybe_size(const YAML::Node& node, const std::string& key, const std::string& where, std::size_t& out) {
  std::optional<long> v;
  maybe(node, key, where, v);
  if (v) out = non_negative(*v, where + "." + key);
}

void maybe_size(const YAML::Node& node, const std::string& key, const std::string& where,
                std::optional<std::size_t>& out) {
  std::optional<long> v;
  maybe(node, key, where, v);
  if (v) out = non_negative(*v, where + "." + key);
}

std::string file_hash_or(const std::optional<std::string>& path, const char* fallback) {
  return path ? sha256_file(*path) : std::string(fallback);
}

}  // namespace

RunConfig parse_config(const std::string& yaml_text, const std::string& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("config: YAML syntax error: {}", e.what()));
  }
  RunConfig cfg;
  if (!root || root.IsNull()) return cfg;
  check_keys(root, "root",
             {"seed", "threads", "output_dir", "corpora", "preprocess", "embed", "cluster", "analyze", "project",
              "evaluate"});
  std::optional<long> seed, threads;
  maybe(root, "seed", "root", seed);
  if (seed) cfg.seed = non_negative(*seed, "seed");
  maybe(root, "threads", "root", threads);
  if (threads) cfg.threads = static_cast<unsigned>(non_negative(*threads, "threads"));
  if (root["output_dir"]) cfg.output_dir = resolve(base_dir, get<std::string>(root, "output_dir", "root"));

  if (auto corpora = root["corpora"]) {
    if (!corpora.IsSequence()) throw ConfigError("config: 'corpora' must be a list");
    for (const auto& c : corpora) {
      check_keys(c, "corpora", {"id", "path", "format"});
      CorpusSpec spec;
      spec.id = get<std::string>(c, "id", "corpora");
      spec.path = resolve(base_dir, get<std::string>(c, "path", "corpora"));
      maybe(c, "format", "corpora", spec.format);
      cfg.corpora.push_back(std::move(spec));
    }
  }
  if (auto p = root["preprocess"]) {
    check_keys(p, "preprocess", {"stopwords", "gazetteer", "heading_patterns"});
    maybe(p, "stopwords", "preprocess", cfg.stopwords_path);
    maybe(p, "gazetteer", "preprocess", cfg.gazetteer_path);
    if (cfg.stopwords_path) cfg.stopwords_path = resolve(base_dir, *cfg.stopwords_path);
    if (cfg.gazetteer_path) cfg.gazetteer_path = resolve(base_dir, *cfg.gazetteer_path);
    maybe(p, "heading_patterns", "preprocess", cfg.heading_patterns);
  }
  if (auto e = root["embed"]) {
    check_keys(e, "embed", {"backend", "min_df", "dim", "path"});
    std::string backend = "tfidf";
    maybe(e, "backend", "embed", backend);
    if (backend == "tfidf")
      cfg.backend = EmbedBackend::Tfidf;
    else if (backend == "external")
      cfg.backend = EmbedBackend::External;
    else
      throw ConfigError(fmt::format("config: embed.backend must be tfidf or external (got '{}')", backend));
    maybe_size(e, "min_df", "embed", cfg.min_df);
    maybe(e, "dim", "embed", cfg.embed_dim);
    maybe(e, "path", "embed", cfg.external_path);
    if (cfg.external_path) cfg.external_path = resolve(base_dir, *cfg.external_path);
  }
  if (auto c = root["cluster"]) {
    check_keys(c, "cluster", {"k", "k_min", "k_max", "restarts", "tol", "max_iters"});
    maybe_size(c, "k", "cluster", cfg.k);
    maybe_size(c, "k_min", "cluster", cfg.k_min);
    maybe_size(c, "k_max", "cluster", cfg.k_max);
    maybe_size(c, "restarts", "cluster", cfg.restarts);
    maybe(c, "tol", "cluster", cfg.tol);
    maybe_size(c, "max_iters", "cluster", cfg.max_iters);
  }
  if (auto a = root["analyze"]) {
    check_keys(a, "analyze", {"top_pairs"});
    maybe_size(a, "top_pairs", "analyze", cfg.top_pairs);
  }
  if (auto p = root["project"]) {
    check_keys(p, "project", {"perplexity", "iterations", "learning_rate"});
    maybe(p, "perplexity", "project", cfg.perplexity);
    maybe_size(p, "iterations", "project", cfg.tsne_iterations);
    maybe(p, "learning_rate", "project", cfg.tsne_learning_rate);
  }
  if (auto ev = root["evaluate"]) {
    check_keys(ev, "evaluate", {"labels", "classes", "folds", "preset", "learning_rate", "batch_size", "epochs"});
    if (ev["labels"] && ev["labels"].IsScalar())
      cfg.label_files = {get<std::string>(ev, "labels", "evaluate")};
    else
      maybe(ev, "labels", "evaluate", cfg.label_files);
    for (auto& f : cfg.label_files) f = resolve(base_dir, f);
    maybe(ev, "classes", "evaluate", cfg.label_classes);
    maybe_size(ev, "folds", "evaluate", cfg.folds);
    maybe(ev, "preset", "evaluate", cfg.train_preset);
    maybe(ev, "learning_rate", "evaluate", cfg.train_learning_rate);
    maybe_size(ev, "batch_size", "evaluate", cfg.train_batch_size);
    maybe_size(ev, "epochs", "evaluate", cfg.train_epochs);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError(fmt::format("config file '{}' does not exist", path));
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, fs::path(path).parent_path().string());
}

void RunConfig::validate() const {
  auto require_file = [](const std::string& p, const std::string& what) {
    if (!fs::is_regular_file(p)) throw ConfigError(fmt::format("{} '{}' does not exist", what, p));
  };
  std::set<std::string> ids;
  for (const auto& c : corpora) {
    if (c.id.empty()) throw ConfigError("corpus id must be non-empty");
    if (!ids.insert(c.id).second) throw ConfigError(fmt::format("corpus id '{}' used twice", c.id));
    if (c.format != "auto" && c.format != "jsonl" && c.format != "text")
      throw ConfigError(fmt::format("corpus '{}': format must be auto, jsonl or text", c.id));
    require_file(c.path, fmt::format("corpus '{}' file", c.id));
  }
  if (stopwords_path) require_file(*stopwords_path, "stop-word file");
  if (gazetteer_path) require_file(*gazetteer_path, "gazetteer file");
  if (backend == EmbedBackend::External) {
    if (!external_path) throw ConfigError("embed.backend external needs embed.path");
    require_file(*external_path, "embedding file");
    if (embed_dim) throw ConfigError("embed.dim applies to the tfidf backend only");
  } else if (external_path) {
    throw ConfigError("embed.path is set but embed.backend is tfidf; select exactly one backend");
  }
  if (min_df < 1) throw ConfigError("embed.min_df must be at least 1");
  if (embed_dim && *embed_dim <= 0) throw ConfigError("embed.dim must be positive");
  if (k && *k < 1) throw ConfigError("cluster.k must be at least 1");
  if (k_min < 1 || k_max < k_min) throw ConfigError(fmt::format("bad elbow range [{}, {}]", k_min, k_max));
  if (restarts < 1) throw ConfigError("cluster.restarts must be at least 1");
  if (!(tol >= 0.0) || !std::isfinite(tol)) throw ConfigError("cluster.tol must be a non-negative number");
  if (max_iters < 1) throw ConfigError("cluster.max_iters must be at least 1");
  if (!(perplexity >= 1.0) || !std::isfinite(perplexity)) throw ConfigError("project.perplexity must be >= 1");
  if (!(tsne_learning_rate > 0.0) || !std::isfinite(tsne_learning_rate))
    throw ConfigError("project.learning_rate must be positive");
  for (const auto& f : label_files) require_file(f, "label file");
  if (folds < 2) throw ConfigError("evaluate.folds must be at least 2");
  label_set();
  train_config().validate();
}

LabelSet RunConfig::label_set() const {
  return label_classes.empty() ? LabelSet::defaults() : LabelSet(label_classes);
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = TrainConfig::preset(train_preset, stage_seed(*this, Stage::Evaluate));
  if (train_learning_rate) t.learning_rate = *train_learning_rate;
  if (train_batch_size) t.batch_size = *train_batch_size;
  if (train_epochs) t.epochs = *train_epochs;
  return t;
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Preprocess: return "preprocess";
    case Stage::Embed: return "embed";
    case Stage::Elbow: return "elbow";
    case Stage::Cluster: return "cluster";
    case Stage::Analyze: return "analyze";
    case Stage::Project: return "project";
    case Stage::Evaluate: return "evaluate";
  }
  return "?";
}

std::uint64_t stage_seed(const RunConfig& cfg, Stage s) {
  switch (s) {
    case Stage::Embed: return cfg.seed + 1;
    case Stage::Elbow: return cfg.seed + 2;
    case Stage::Cluster: return cfg.seed + 3;
    case Stage::Project: return cfg.seed + 4;
    case Stage::Evaluate: return cfg.seed + 5;
    default: return cfg.seed;
  }
}

json stage_settings(const RunConfig& cfg, Stage s) {
  json j;
  switch (s) {
    case Stage::Ingest: {
      json corpora = json::array();
      for (const auto& c : cfg.corpora)
        corpora.push_back({{"id", c.id}, {"format", c.format}, {"sha256", sha256_file(c.path)}});
      j = {{"corpora", corpora}, {"heading_patterns", cfg.heading_patterns}};
      break;
    }
    case Stage::Preprocess:
      j = {{"stopwords", file_hash_or(cfg.stopwords_path, "builtin")},
           {"gazetteer", file_hash_or(cfg.gazetteer_path, "builtin")}};
      break;
    case Stage::Embed:
      j = {{"backend", cfg.backend == EmbedBackend::Tfidf ? "tfidf" : "external"},
           {"min_df", cfg.min_df},
           {"dim", cfg.embed_dim ? json(*cfg.embed_dim) : json(nullptr)},
           {"external", file_hash_or(cfg.external_path, "none")},
           {"seed", stage_seed(cfg, s)}};
      break;
    case Stage::Elbow:
      j = {{"k_min", cfg.k_min}, {"k_max", cfg.k_max}, {"restarts", cfg.restarts},
           {"tol", cfg.tol},     {"max_iters", cfg.max_iters}, {"seed", stage_seed(cfg, s)}};
      break;
    case Stage::Cluster:
      j = {{"k", cfg.k ? json(*cfg.k) : json(nullptr)},
           {"restarts", cfg.restarts},
           {"tol", cfg.tol},
           {"max_iters", cfg.max_iters},
           {"seed", stage_seed(cfg, s)}};
      break;
    case Stage::Analyze:
      j = {{"top_pairs", cfg.top_pairs}};
      break;
    case Stage::Project:
      j = {{"perplexity", cfg.perplexity},
           {"iterations", cfg.tsne_iterations},
           {"learning_rate", cfg.tsne_learning_rate},
           {"seed", stage_seed(cfg, s)}};
      break;
    case Stage::Evaluate: {
      json files = json::array();
      for (const auto& f : cfg.label_files) files.push_back(sha256_file(f));
      const TrainConfig t = cfg.train_config();
      j = {{"labels", files},
           {"classes", cfg.label_set().classes()},
           {"folds", cfg.folds},
           {"train", {{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size}, {"epochs", t.epochs}}},
           {"seed", stage_seed(cfg, s)}};
      break;
    }
  }
  return j;
}

namespace {

std::vector<Stage> upstream(const RunConfig& cfg, Stage s) {
  switch (s) {
    case Stage::Ingest: return {};
    case Stage::Preprocess: return {Stage::Ingest};
    case Stage::Embed: return {Stage::Preprocess};
    case Stage::Elbow: return {Stage::Embed};
    case Stage::Cluster:
      if (cfg.k) return {Stage::Embed};
      return {Stage::Embed, Stage::Elbow};
    case Stage::Analyze: return {Stage::Cluster};
    case Stage::Project: return {Stage::Cluster};
    case Stage::Evaluate: return {Stage::Embed};
  }
  return {};
}

}  // namespace

std::string stage_hash(const RunConfig& cfg, Stage s) {
  json j = {{"stage", to_string(s)}, {"settings", stage_settings(cfg, s)}};
  json up = json::array();
  for (Stage u : upstream(cfg, s)) up.push_back(stage_hash(cfg, u));
  j["upstream"] = up;
  return sha256_hex(j.dump());
}

std::string config_hash(const RunConfig& cfg) {
  json j = json::object();
  for (Stage s : kStages) j[std::string(to_string(s))] = stage_settings(cfg, s);
  return sha256_hex(j.dump());
}

}  // namespace regconv
