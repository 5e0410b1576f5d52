// regconv: command-line front end for the regulation convergence pipeline.
//
//   regconv run --config samples/config.yaml
//   regconv elbow --config samples/config.yaml --k-min 2 --k-max 10
//
// Exit codes: 0 ok, 1 unexpected failure, 2 config error, 3 data error, 4 numeric failure.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "regconv/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool force = false;
  std::vector<std::string> corpora;  // id=path
  std::optional<std::string> stopwords, gazetteer;
  std::optional<std::string> backend;
  std::optional<std::string> emb_path;
  std::optional<long> dim;
  std::optional<std::size_t> min_df;
  std::optional<std::size_t> k, k_min, k_max, restarts;
  std::optional<std::size_t> top_pairs;
  std::optional<double> perplexity;
  std::optional<std::size_t> iterations;
  std::vector<std::string> labels;
  std::optional<std::size_t> folds;
  std::optional<std::string> preset;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "YAML run configuration");
  cmd->add_option("-o,--out", o.out, "output directory (overrides REGCONV_OUT and the config)");
  cmd->add_option("--seed", o.seed, "global seed");
  cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)");
  cmd->add_flag("--force", o.force, "accept artifacts produced by a different configuration");
}

regconv::RunConfig resolve_config(const Overrides& o) {
  regconv::RunConfig cfg = o.config.empty() ? regconv::RunConfig{} : regconv::load_config(o.config);
  if (const char* env = std::getenv("REGCONV_OUT"); env && *env) cfg.output_dir = env;
  if (o.out) cfg.output_dir = *o.out;
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  for (const auto& spec : o.corpora) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
      throw regconv::ConfigError(fmt::format("--corpus expects id=path (got '{}')", spec));
    cfg.corpora.push_back({spec.substr(0, eq), spec.substr(eq + 1), "auto"});
  }
  if (o.stopwords) cfg.stopwords_path = *o.stopwords;
  if (o.gazetteer) cfg.gazetteer_path = *o.gazetteer;
  if (o.backend) {
    if (*o.backend == "tfidf") {
      cfg.backend = regconv::EmbedBackend::Tfidf;
      cfg.external_path.reset();
    } else if (*o.backend == "external") {
      cfg.backend = regconv::EmbedBackend::External;
    } else {
      throw regconv::ConfigError(fmt::format("--backend must be tfidf or external (got '{}')", *o.backend));
    }
  }
  if (o.emb_path) cfg.external_path = *o.emb_path;
  if (o.dim) cfg.embed_dim = *o.dim;
  if (o.min_df) cfg.min_df = *o.min_df;
  if (o.k) cfg.k = *o.k;
  if (o.k_min) cfg.k_min = *o.k_min;
  if (o.k_max) cfg.k_max = *o.k_max;
  if (o.restarts) cfg.restarts = *o.restarts;
  if (o.top_pairs) cfg.top_pairs = *o.top_pairs;
  if (o.perplexity) cfg.perplexity = *o.perplexity;
  if (o.iterations) cfg.tsne_iterations = *o.iterations;
  if (!o.labels.empty()) cfg.label_files = o.labels;
  if (o.folds) cfg.folds = *o.folds;
  if (o.preset) cfg.train_preset = *o.preset;
  return cfg;
}

void print_record(const regconv::StageRecord& r) {
  fmt::print("[{}] {}{}\n", regconv::to_string(r.stage), r.status, r.note.empty() ? "" : " (" + r.note + ")");
  for (const auto& m : r.messages) fmt::print("  {}\n", m);
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Regulation convergence pipeline"};
  app.require_subcommand(1);
  Overrides o;

  struct Cmd {
    CLI::App* app;
    std::optional<regconv::Stage> stage;  // empty = run
  };
  std::vector<Cmd> cmds;

  auto* ingest = app.add_subcommand("ingest", "segment and validate the configured corpora");
  ingest->add_option("--corpus", o.corpora, "extra corpus as id=path (.jsonl or plain text)");
  cmds.push_back({ingest, regconv::Stage::Ingest});

  auto* preprocess = app.add_subcommand("preprocess", "tokenize, lemmatize, tag and filter");
  preprocess->add_option("--stopwords", o.stopwords, "stop list file (one lemma per line)");
  preprocess->add_option("--gazetteer", o.gazetteer, "organisation gazetteer (one phrase per line)");
  cmds.push_back({preprocess, regconv::Stage::Preprocess});

  auto* embed = app.add_subcommand("embed", "build provision embeddings");
  embed->add_option("--backend", o.backend, "tfidf or external");
  embed->add_option("--emb", o.emb_path, "EMB1 file for the external backend");
  embed->add_option("--dim", o.dim, "random-projection dimension for tfidf");
  embed->add_option("--min-df", o.min_df, "minimum document frequency");
  cmds.push_back({embed, regconv::Stage::Embed});

  auto* elbow = app.add_subcommand("elbow", "WCSS curve over a K range and the selected K");
  elbow->add_option("--k-min", o.k_min);
  elbow->add_option("--k-max", o.k_max);
  elbow->add_option("--restarts", o.restarts);
  cmds.push_back({elbow, regconv::Stage::Elbow});

  auto* cluster = app.add_subcommand("cluster", "spherical k-means (K from --k, the config or elbow.json)");
  cluster->add_option("--k", o.k);
  cluster->add_option("--restarts", o.restarts);
  cmds.push_back({cluster, regconv::Stage::Cluster});

  auto* analyze = app.add_subcommand("analyze", "convergence report");
  analyze->add_option("--top-pairs", o.top_pairs);
  cmds.push_back({analyze, regconv::Stage::Analyze});

  auto* project = app.add_subcommand("project", "t-SNE projection and scatter plot");
  project->add_option("--perplexity", o.perplexity);
  project->add_option("--iterations", o.iterations);
  cmds.push_back({project, regconv::Stage::Project});

  auto* evaluate = app.add_subcommand("evaluate", "cross-validated linear classifier over the embeddings");
  evaluate->add_option("--labels", o.labels, "JSON object files mapping provision id to class");
  evaluate->add_option("--folds", o.folds);
  evaluate->add_option("--preset", o.preset, "default or paper-bert");
  cmds.push_back({evaluate, regconv::Stage::Evaluate});

  auto* run = app.add_subcommand("run", "every stage in order");
  run->add_option("--corpus", o.corpora, "extra corpus as id=path");
  run->add_option("--k", o.k);
  run->add_option("--labels", o.labels);
  run->add_option("--stopwords", o.stopwords);
  run->add_option("--gazetteer", o.gazetteer);
  cmds.push_back({run, std::nullopt});

  for (auto& c : cmds) add_common(c.app, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  regconv::Pipeline pipeline(resolve_config(o), o.force);
  for (const auto& c : cmds) {
    if (!c.app->parsed()) continue;
    if (!c.stage) {
      regconv::RunManifest m = pipeline.run();
      for (const auto& r : m.stages) print_record(r);
      fmt::print("manifest: {}\n", pipeline.path("manifest.json"));
      return 0;
    }
    regconv::StageRecord r = pipeline.run_stage(*c.stage);
    if (*c.stage == regconv::Stage::Elbow) std::cout << regconv::read_file(pipeline.path("elbow.json"));
    print_record(r);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const regconv::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  } catch (const regconv::DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return 3;
  } catch (const regconv::NumericError& e) {
    fmt::print(stderr, "numeric error: {}\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
