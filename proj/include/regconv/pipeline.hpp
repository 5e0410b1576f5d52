#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "regconv/config.hpp"

namespace regconv {

struct ArtifactRecord {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::size_t bytes = 0;
};

struct StageRecord {
  Stage stage = Stage::Ingest;
  std::string status;  // "ok" | "skipped"
  std::string note;
  std::string stage_hash;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::uint64_t stage_seed = 0;
  std::vector<ArtifactRecord> artifacts;
  std::vector<std::string> messages;  // human-readable summary lines (not persisted)

  nlohmann::json to_json() const;
  static StageRecord from_json(const nlohmann::json& j);
};

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<StageRecord> stages;

  nlohmann::json to_json() const;
};

/// Runs stages against one output directory.
///
/// Each stage reads the files written by the stages before it and checks
/// their recorded stage hashes against the current config; a mismatch is
/// refused unless `force` is set. A missing input names the subcommand that
/// produces it.
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg, bool force = false);

  const RunConfig& config() const { return cfg_; }
  std::string path(const std::string& rel) const;

  /// Runs one stage and rewrites manifest.json. `always` forces the elbow
  /// stage to run even when the config fixes K.
  StageRecord run_stage(Stage s, bool always = true);

  /// ingest -> preprocess -> embed -> (elbow) -> cluster -> analyze -> project -> (evaluate).
  /// On failure every artifact written by this call is removed.
  RunManifest run();

  RunManifest manifest() const;

 private:
  RunConfig cfg_;
  bool force_;
  std::string out_;
};

RunManifest run_pipeline(const RunConfig& cfg, bool force = false);

}  // namespace regconv
