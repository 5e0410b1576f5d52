#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "regconv/cluster.hpp"
#include "regconv/embed.hpp"
#include "regconv/eval.hpp"

namespace regconv {

enum class Verdict { Convergent, Divergent };
std::string_view to_string(Verdict v);

struct ClusterProfile {
  std::size_t cluster_id = 0;
  std::vector<std::string> member_ids;
  std::map<std::string, std::size_t> corpus_counts;  // every analyzed corpus, zero counts included
  Verdict verdict = Verdict::Divergent;
  double balance_entropy = 0.0;  // corpus-mix entropy / ln(#corpora)
  double mean_pairwise_similarity = 0.0;
  bool singleton = false;  // similarity fixed at 1.0 by convention
};

struct ScoredPair {
  std::string id_a;
  std::string id_b;
  double score = 0.0;

  friend bool operator==(const ScoredPair&, const ScoredPair&) = default;
};

struct ConvergenceReport {
  std::vector<std::string> corpora;
  std::vector<ClusterProfile> profiles;
  std::size_t overlapping_provision_count = 0;  // members of convergent clusters
  std::vector<ScoredPair> top_pairs;
  std::size_t convergent_clusters = 0;
  std::size_t divergent_clusters = 0;
  std::vector<ModelScore> metrics_appendix;  // optional table of classifier scores
};

/// Corpus ids in order of first appearance among `ids`.
std::vector<std::string> corpora_in_order(const std::vector<std::string>& ids,
                                          const std::map<std::string, std::string>& corpus_of);

std::vector<ClusterProfile> profile_clusters(const ClusterModel& model, const EmbeddingMatrix& x,
                                             const std::map<std::string, std::string>& corpus_of);

/// Highest-cosine cross-corpus pairs, descending; ties by (id_a, id_b).
/// id_a belongs to the corpus that appears first in `x`.
std::vector<ScoredPair> top_pairs(const EmbeddingMatrix& x,
                                  const std::map<std::string, std::string>& corpus_of, std::size_t k);

ConvergenceReport build_report(const ClusterModel& model, const EmbeddingMatrix& x,
                               const std::map<std::string, std::string>& corpus_of, std::size_t pair_count);

/// Overlap count recomputed from raw cluster membership, independent of verdicts.
std::size_t count_overlapping_by_membership(const ClusterModel& model, const EmbeddingMatrix& x,
                                            const std::map<std::string, std::string>& corpus_of);

enum class ReportFormat { Markdown, Csv, Json };
ReportFormat report_format_from_string(std::string_view s);

std::string render_report(const ConvergenceReport& report, ReportFormat format);
nlohmann::json report_to_json(const ConvergenceReport& report);

}  // namespace regconv
