#include "regconv/pipeline.hpp"

#include <filesystem>
#include <set>

#include <fmt/format.h>

#include "regconv/analysis.hpp"
#include "regconv/cluster.hpp"
#include "regconv/corpus.hpp"
#include "regconv/embed.hpp"
#include "regconv/eval.hpp"
#include "regconv/preprocess.hpp"
#include "regconv/projection.hpp"

namespace regconv {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestFormat = "regconv-manifest/1";
constexpr const char* kMetaFormat = "regconv-stage/1";

// Artifact names, relative to the output directory.
constexpr const char* kCorporaIndex = "corpora.json";
constexpr const char* kProcessed = "processed.jsonl";
constexpr const char* kEmbeddings = "embeddings.emb1";
constexpr const char* kEmbedInfo = "embed.json";
constexpr const char* kVocabulary = "vocabulary.json";
constexpr const char* kElbow = "elbow.json";
constexpr const char* kClusters = "clusters.json";
constexpr const char* kReportMd = "report.md";
constexpr const char* kReportCsv = "report.csv";
constexpr const char* kReportJson = "report.json";
constexpr const char* kProjectionJson = "projection.json";
constexpr const char* kProjectionCsv = "projection.csv";
constexpr const char* kProjectionSvg = "projection.svg";
constexpr const char* kMetricsJson = "metrics.json";
constexpr const char* kMetricsMd = "metrics.md";
constexpr const char* kHead = "head.json";

std::string meta_rel(Stage s) { return fmt::format("meta/{}.json", to_string(s)); }

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: malformed JSON ({})", path, e.what()));
  }
}

// Rethrows with the stage name prefixed, keeping the error category.
template <typename F>
auto with_stage(Stage s, F&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("stage {}: {}", to_string(s), e.what()));
  } catch (const DataError& e) {
    throw DataError(fmt::format("stage {}: {}", to_string(s), e.what()));
  } catch (const NumericError& e) {
    throw NumericError(fmt::format("stage {}: {}", to_string(s), e.what()));
  }
}

struct Output {
  std::string rel;
  std::string bytes;
};

class StageContext {
 public:
  StageContext(const RunConfig& cfg, std::string out, bool force, Stage stage)
      : cfg_(cfg), out_(std::move(out)), force_(force), stage_(stage) {}

  std::string path(const std::string& rel) const { return (fs::path(out_) / rel).string(); }

  // Path of an input artifact after checking it exists and came from the
  // current configuration.
  std::string input(Stage producer, const std::string& rel) {
    const std::string p = path(rel);
    const std::string meta = path(meta_rel(producer));
    if (!fs::exists(p) || !fs::exists(meta))
      throw DataError(fmt::format("missing {} in {}; run `regconv {}` first", rel, out_, to_string(producer)));
    if (checked_.insert(producer).second) {
      StageRecord rec = StageRecord::from_json(parse_json_file(meta));
      if (rec.status != "ok")
        throw DataError(fmt::format("{} was skipped ({}); run `regconv {}` first", to_string(producer), rec.note,
                                    to_string(producer)));
      const std::string expected = stage_hash(cfg_, producer);
      if (rec.stage_hash != expected) {
        if (!force_)
          throw ConfigError(fmt::format(
              "{} output in {} was produced by a different configuration; rerun `regconv {}` or pass --force",
              to_string(producer), out_, to_string(producer)));
        notes_.push_back(fmt::format("forced use of {} output from another configuration", to_string(producer)));
      }
    }
    return p;
  }

  void emit(const std::string& rel, std::string bytes) { outputs_.push_back({rel, std::move(bytes)}); }

  json provenance() const {
    return {{"stage", to_string(stage_)},
            {"stage_hash", stage_hash(cfg_, stage_)},
            {"config_hash", config_hash(cfg_)},
            {"seed", cfg_.seed},
            {"stage_seed", stage_seed(cfg_, stage_)}};
  }

  void emit_json(const std::string& rel, json doc) {
    doc["provenance"] = provenance();
    emit(rel, doc.dump(2) + "\n");
  }

  void message(std::string m) { messages_.push_back(std::move(m)); }
  void note(std::string n) { notes_.push_back(std::move(n)); }

  // Writes every output (via temporary files), removes the stage's previous
  // artifacts that are no longer produced, and writes the stage metadata.
  StageRecord commit(const std::string& status) {
    StageRecord rec;
    rec.stage = stage_;
    rec.status = status;
    for (std::size_t i = 0; i < notes_.size(); ++i) rec.note += (i ? "; " : "") + notes_[i];
    rec.stage_hash = stage_hash(cfg_, stage_);
    rec.config_hash = config_hash(cfg_);
    rec.seed = cfg_.seed;
    rec.stage_seed = stage_seed(cfg_, stage_);
    rec.messages = messages_;

    const std::string meta = path(meta_rel(stage_));
    std::set<std::string> previous;
    if (fs::exists(meta)) {
      try {
        for (const auto& a : StageRecord::from_json(parse_json_file(meta)).artifacts) previous.insert(a.path);
      } catch (const std::exception&) {
      }
    }

    std::vector<std::string> temps;
    try {
      for (const auto& o : outputs_) {
        const std::string tmp = path(o.rel) + ".partial";
        write_file(tmp, o.bytes);
        temps.push_back(tmp);
      }
    } catch (...) {
      for (const auto& t : temps) fs::remove(t);
      throw;
    }
    for (std::size_t i = 0; i < outputs_.size(); ++i) {
      fs::rename(temps[i], path(outputs_[i].rel));
      previous.erase(outputs_[i].rel);
      rec.artifacts.push_back({outputs_[i].rel, sha256_hex(outputs_[i].bytes), outputs_[i].bytes.size()});
    }
    for (const auto& stale : previous) fs::remove(path(stale));
    write_file(meta, rec.to_json().dump(2) + "\n");
    return rec;
  }

 private:
  const RunConfig& cfg_;
  std::string out_;
  bool force_;
  Stage stage_;
  std::set<Stage> checked_;
  std::vector<Output> outputs_;
  std::vector<std::string> messages_;
  std::vector<std::string> notes_;
};

// ---- artifact readers shared by stages ----

std::vector<Corpus> read_corpora(StageContext& ctx) {
  const json index = parse_json_file(ctx.input(Stage::Ingest, kCorporaIndex));
  std::vector<Corpus> corpora;
  try {
    for (const auto& c : index.at("corpora"))
      corpora.push_back(load_corpus(ctx.input(Stage::Ingest, c.at("file").get<std::string>()),
                                    c.at("id").get<std::string>()));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: bad corpus index ({})", kCorporaIndex, e.what()));
  }
  return corpora;
}

std::map<std::string, std::string> corpus_map(const std::vector<Corpus>& corpora) {
  std::map<std::string, std::string> m;
  for (const auto& c : corpora)
    for (const auto& p : c.provisions) m[p.id] = c.corpus_id;
  return m;
}

EmbeddingMatrix read_embeddings(StageContext& ctx) {
  const std::string p = ctx.input(Stage::Embed, kEmbeddings);
  const json info = parse_json_file(ctx.input(Stage::Embed, kEmbedInfo));
  Emb1Contents raw = decode_emb1(read_file(p));
  EmbeddingMatrix x = load_external_embeddings(p, raw.ids);
  try {
    x.backend_tag = info.at("backend").get<std::string>();
    x.flagged_ids = info.at("flagged_ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: {}", kEmbedInfo, e.what()));
  }
  return x;
}

ClusterModel read_clusters(StageContext& ctx, const EmbeddingMatrix& x) {
  return cluster_model_from_json(parse_json_file(ctx.input(Stage::Cluster, kClusters)), x.provision_ids);
}

std::map<std::string, std::string> read_label_file(const std::string& path) {
  const json doc = parse_json_file(path);
  if (!doc.is_object()) throw DataError(fmt::format("{}: labels file must be a JSON object", path));
  std::map<std::string, std::string> labels;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!it.value().is_string()) throw DataError(fmt::format("{}: label for '{}' must be a string", path, it.key()));
    labels[it.key()] = it.value().get<std::string>();
  }
  return labels;
}

// ---- stages ----

StageRecord stage_ingest(StageContext& ctx, const RunConfig& cfg) {
  if (cfg.corpora.empty()) throw ConfigError("no corpora configured");
  HeadingRules rules = HeadingRules::defaults();
  if (!cfg.heading_patterns.empty()) rules.patterns = cfg.heading_patterns;

  std::vector<Corpus> corpora;
  for (const auto& spec : cfg.corpora) {
    std::string format = spec.format;
    if (format == "auto") format = fs::path(spec.path).extension() == ".jsonl" ? "jsonl" : "text";
    corpora.push_back(format == "jsonl" ? load_corpus(spec.path, spec.id)
                                        : load_text_document(spec.path, spec.id, rules));
  }
  validate_corpora(corpora);

  json index = json::array();
  for (const auto& c : corpora) {
    const std::string rel = fmt::format("corpora/{}.jsonl", c.corpus_id);
    ctx.emit(rel, corpus_to_jsonl(c));
    index.push_back({{"id", c.corpus_id}, {"file", rel}, {"provisions", c.provisions.size()}});
    ctx.message(fmt::format("{}: {} provisions", c.corpus_id, c.provisions.size()));
  }
  ctx.emit_json(kCorporaIndex, {{"format", "regconv-corpora/1"}, {"corpora", index}});
  return ctx.commit("ok");
}

StageRecord stage_preprocess(StageContext& ctx, const RunConfig& cfg) {
  std::vector<Corpus> corpora = read_corpora(ctx);
  PreprocessResources res = PreprocessResources::defaults();
  if (cfg.stopwords_path) res.stopwords = PreprocessResources::parse_stopwords(read_file(*cfg.stopwords_path));
  if (cfg.gazetteer_path) res.gazetteer = PreprocessResources::parse_gazetteer(read_file(*cfg.gazetteer_path));
  auto processed = preprocess_corpora(corpora, res);
  std::size_t empty = 0;
  for (const auto& p : processed) empty += p.empty ? 1 : 0;
  ctx.emit(kProcessed, processed_to_jsonl(processed));
  ctx.message(fmt::format("{} provisions preprocessed, {} empty after filtering", processed.size(), empty));
  return ctx.commit("ok");
}

StageRecord stage_embed(StageContext& ctx, const RunConfig& cfg) {
  auto processed = processed_from_jsonl(read_file(ctx.input(Stage::Preprocess, kProcessed)));
  EmbeddingMatrix x;
  json info = {{"format", "regconv-embed/1"}};
  if (cfg.backend == EmbedBackend::Tfidf) {
    Vocabulary vocab = build_vocabulary(processed, cfg.min_df);
    x = tfidf_embed(processed, vocab, cfg.embed_dim, stage_seed(cfg, Stage::Embed));
    ctx.emit_json(kVocabulary, {{"format", "regconv-vocabulary/1"},
                                {"document_count", vocab.document_count},
                                {"terms", vocab.terms},
                                {"document_frequency", vocab.document_frequency}});
    info["vocabulary_size"] = vocab.terms.size();
  } else {
    std::vector<std::string> ids;
    for (const auto& p : processed) ids.push_back(p.provision_id);
    x = load_external_embeddings(*cfg.external_path, ids);
  }
  info["backend"] = x.backend_tag;
  info["n"] = x.size();
  info["dim"] = x.dim();
  info["flagged_ids"] = x.flagged_ids;
  ctx.emit(kEmbeddings, encode_emb1(x.provision_ids, x.rows));
  ctx.emit_json(kEmbedInfo, info);
  ctx.message(fmt::format("{} x {} embeddings ({})", x.size(), x.dim(), x.backend_tag));
  if (!x.flagged_ids.empty()) ctx.message(fmt::format("{} empty provisions flagged", x.flagged_ids.size()));
  return ctx.commit("ok");
}

StageRecord stage_elbow(StageContext& ctx, const RunConfig& cfg) {
  EmbeddingMatrix x = read_embeddings(ctx);
  const std::size_t k_max = std::min(cfg.k_max, x.size());
  if (k_max != cfg.k_max) ctx.note(fmt::format("k_max lowered to {} (number of provisions)", k_max));
  if (k_max <= cfg.k_min)
    throw ConfigError(fmt::format("elbow range [{}, {}] needs at least two K values for {} provisions", cfg.k_min,
                                  cfg.k_max, x.size()));
  const auto seeds = seed_range(stage_seed(cfg, Stage::Elbow), cfg.restarts);
  ElbowCurve curve = elbow_select_k(x.rows, cfg.k_min, k_max, seeds, {cfg.max_iters, cfg.tol});
  json doc = elbow_to_json(curve);
  doc["format"] = "regconv-elbow/1";
  ctx.emit_json(kElbow, doc);
  ctx.message(fmt::format("selected k={}{}", curve.selected_k, curve.degenerate ? " (degenerate curve)" : ""));
  return ctx.commit("ok");
}

StageRecord stage_cluster(StageContext& ctx, const RunConfig& cfg) {
  EmbeddingMatrix x = read_embeddings(ctx);
  std::size_t k = 0;
  if (cfg.k) {
    k = *cfg.k;
  } else {
    try {
      k = parse_json_file(ctx.input(Stage::Elbow, kElbow)).at("selected_k").get<std::size_t>();
    } catch (const json::exception& e) {
      throw DataError(fmt::format("{}: {}", kElbow, e.what()));
    }
    ctx.note(fmt::format("k={} from elbow", k));
  }
  const auto seeds = seed_range(stage_seed(cfg, Stage::Cluster), cfg.restarts);
  ClusterModel model = kmeans_restarts(x.rows, k, seeds, {cfg.max_iters, cfg.tol});
  json doc = cluster_model_to_json(model, x.provision_ids);
  doc["format"] = "regconv-clusters/1";
  ctx.emit_json(kClusters, doc);
  ctx.message(fmt::format("k={} wcss={} iterations={}", k, format_fixed(model.wcss, 6), model.iterations));
  return ctx.commit("ok");
}

StageRecord stage_analyze(StageContext& ctx, const RunConfig& cfg) {
  auto corpus_of = corpus_map(read_corpora(ctx));
  EmbeddingMatrix x = read_embeddings(ctx);
  ClusterModel model = read_clusters(ctx, x);
  ConvergenceReport report = build_report(model, x, corpus_of, cfg.top_pairs);
  ctx.emit(kReportMd, render_report(report, ReportFormat::Markdown));
  ctx.emit(kReportCsv, render_report(report, ReportFormat::Csv));
  ctx.emit_json(kReportJson, report_to_json(report));
  ctx.message(fmt::format("{} convergent, {} divergent clusters; {} overlapping provisions",
                          report.convergent_clusters, report.divergent_clusters,
                          report.overlapping_provision_count));
  return ctx.commit("ok");
}

StageRecord stage_project(StageContext& ctx, const RunConfig& cfg) {
  auto corpus_of = corpus_map(read_corpora(ctx));
  EmbeddingMatrix x = read_embeddings(ctx);
  ClusterModel model = read_clusters(ctx, x);
  TsneParams params{cfg.perplexity, cfg.tsne_iterations, cfg.tsne_learning_rate, stage_seed(cfg, Stage::Project)};
  params.perplexity = clamp_perplexity(cfg.perplexity, x.size());
  if (params.perplexity != cfg.perplexity)
    ctx.note(fmt::format("perplexity lowered to {} for {} provisions", format_fixed(params.perplexity, 6), x.size()));
  Projection2D proj = tsne_project(x, params);
  ScatterOutput scatter = emit_scatter(proj, model.assignments, corpus_of);
  ctx.emit(kProjectionSvg, scatter.svg);
  ctx.emit(kProjectionCsv, scatter.csv);
  ctx.emit_json(kProjectionJson, {{"format", "regconv-projection/1"},
                                  {"perplexity", proj.params.perplexity},
                                  {"iterations", proj.params.iterations},
                                  {"learning_rate", proj.params.learning_rate},
                                  {"kl_initial", proj.kl_initial},
                                  {"kl_final", proj.kl_final}});
  ctx.message(fmt::format("KL {} -> {}", format_fixed(proj.kl_initial, 4), format_fixed(proj.kl_final, 4)));
  return ctx.commit("ok");
}

StageRecord stage_evaluate(StageContext& ctx, const RunConfig& cfg) {
  const LabelSet labels_set = cfg.label_set();
  std::vector<Corpus> corpora = read_corpora(ctx);
  std::map<std::string, std::string> labels;
  for (const auto& c : corpora)
    for (const auto& p : c.provisions)
      if (p.label) labels[p.id] = *p.label;
  for (const auto& f : cfg.label_files)
    for (const auto& [id, cls] : read_label_file(f)) {
      auto [it, inserted] = labels.emplace(id, cls);
      if (!inserted && it->second != cls)
        throw DataError(fmt::format("conflicting labels for '{}': '{}' vs '{}'", id, it->second, cls));
    }
  if (labels.empty()) {
    ctx.note("no labels configured; evaluation skipped");
    ctx.message("evaluation skipped (no labels)");
    return ctx.commit("skipped");
  }
  EmbeddingMatrix x = read_embeddings(ctx);
  const TrainConfig train = cfg.train_config();
  CrossValidationResult cv = cross_validate(x, labels, labels_set, cfg.folds, train);
  for (const auto& w : cv.warnings) ctx.message("warning: " + w);
  TrainResult final_head = train_head(x, labels, labels_set, train);

  const ModelScore row{fmt::format("Linear head ({})", x.backend_tag), cv.accuracy.mean, cv.macro_precision.mean,
                       cv.macro_recall.mean, cv.macro_f1.mean};
  json doc = cross_validation_to_json(cv);
  doc["format"] = "regconv-metrics/1";
  doc["labeled"] = labels.size();
  doc["train"] = {{"learning_rate", train.learning_rate}, {"batch_size", train.batch_size},
                  {"epochs", train.epochs}, {"seed", train.seed}};
  ctx.emit_json(kMetricsJson, doc);
  ctx.emit(kMetricsMd, render_metrics_table(std::span<const ModelScore>(&row, 1)));
  json head = head_to_json(final_head.head);
  head["format"] = "regconv-head/1";
  head["epoch_loss"] = final_head.epoch_loss;
  ctx.emit_json(kHead, head);
  ctx.message(fmt::format("{}-fold accuracy {} +/- {}", cfg.folds, format_fixed(cv.accuracy.mean, 4),
                          format_fixed(cv.accuracy.std, 4)));
  return ctx.commit("ok");
}

}  // namespace

json StageRecord::to_json() const {
  json arts = json::array();
  for (const auto& a : artifacts) arts.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  return {{"format", kMetaFormat}, {"stage", regconv::to_string(stage)}, {"status", status},
          {"note", note},          {"stage_hash", stage_hash},           {"config_hash", config_hash},
          {"seed", seed},          {"stage_seed", stage_seed},           {"artifacts", arts}};
}

StageRecord StageRecord::from_json(const json& j) {
  try {
    StageRecord r;
    const auto name = j.at("stage").get<std::string>();
    bool found = false;
    for (Stage s : kStages)
      if (regconv::to_string(s) == name) {
        r.stage = s;
        found = true;
      }
    if (!found) throw DataError(fmt::format("unknown stage '{}'", name));
    r.status = j.at("status").get<std::string>();
    r.note = j.at("note").get<std::string>();
    r.stage_hash = j.at("stage_hash").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.stage_seed = j.at("stage_seed").get<std::uint64_t>();
    for (const auto& a : j.at("artifacts"))
      r.artifacts.push_back(
          {a.at("path").get<std::string>(), a.at("sha256").get<std::string>(), a.at("bytes").get<std::size_t>()});
    return r;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("bad stage metadata ({})", e.what()));
  }
}

json RunManifest::to_json() const {
  json stages_json = json::array();
  for (const auto& s : stages) stages_json.push_back(s.to_json());
  return {{"format", kManifestFormat}, {"config_hash", config_hash}, {"seed", seed}, {"stages", stages_json}};
}

Pipeline::Pipeline(RunConfig cfg, bool force) : cfg_(std::move(cfg)), force_(force), out_(cfg_.output_dir) {
  cfg_.validate();
}

std::string Pipeline::path(const std::string& rel) const { return (fs::path(out_) / rel).string(); }

RunManifest Pipeline::manifest() const {
  RunManifest m{config_hash(cfg_), cfg_.seed, {}};
  for (Stage s : kStages) {
    const std::string meta = path(meta_rel(s));
    if (fs::exists(meta)) m.stages.push_back(StageRecord::from_json(parse_json_file(meta)));
  }
  return m;
}

StageRecord Pipeline::run_stage(Stage s, bool always) {
  set_thread_count(cfg_.threads);
  StageContext ctx(cfg_, out_, force_, s);
  StageRecord rec = with_stage(s, [&] {
    switch (s) {
      case Stage::Ingest: return stage_ingest(ctx, cfg_);
      case Stage::Preprocess: return stage_preprocess(ctx, cfg_);
      case Stage::Embed: return stage_embed(ctx, cfg_);
      case Stage::Elbow:
        if (!always && cfg_.k) {
          ctx.note("k fixed by config");
          return ctx.commit("skipped");
        }
        return stage_elbow(ctx, cfg_);
      case Stage::Cluster: return stage_cluster(ctx, cfg_);
      case Stage::Analyze: return stage_analyze(ctx, cfg_);
      case Stage::Project: return stage_project(ctx, cfg_);
      case Stage::Evaluate: return stage_evaluate(ctx, cfg_);
    }
    throw ConfigError("unknown stage");
  });
  write_file(path("manifest.json"), manifest().to_json().dump(2) + "\n");
  return rec;
}

RunManifest Pipeline::run() {
  const std::string manifest_path = path("manifest.json");
  if (fs::exists(manifest_path) && !force_) {
    std::string previous;
    try {
      previous = parse_json_file(manifest_path).at("config_hash").get<std::string>();
    } catch (const json::exception&) {
    }
    if (previous != config_hash(cfg_))
      throw ConfigError(fmt::format("{} holds artifacts from a different configuration; use another output "
                                    "directory or pass --force",
                                    out_));
  }
  std::vector<StageRecord> done;
  try {
    for (Stage s : kStages) done.push_back(run_stage(s, false));
  } catch (...) {
    for (const auto& r : done) {
      for (const auto& a : r.artifacts) fs::remove(path(a.path));
      fs::remove(path(meta_rel(r.stage)));
    }
    fs::remove(manifest_path);
    throw;
  }
  RunManifest m = manifest();
  for (std::size_t i = 0; i < m.stages.size() && i < done.size(); ++i) m.stages[i].messages = done[i].messages;
  return m;
}

RunManifest run_pipeline(const RunConfig& cfg, bool force) { return Pipeline(cfg, force).run(); }

}  // namespace regconv
