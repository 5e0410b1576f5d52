#include "regconv/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace regconv {

using nlohmann::json;

namespace {

constexpr std::string_view kDefinition =
    "A cluster is CONVERGENT when it contains at least one provision from every analyzed corpus, "
    "otherwise DIVERGENT. Overlapping provisions are the members of convergent clusters.";

const std::string& corpus_for(const std::map<std::string, std::string>& corpus_of, const std::string& id) {
  auto it = corpus_of.find(id);
  if (it == corpus_of.end()) throw DataError(fmt::format("no corpus recorded for provision '{}'", id));
  return it->second;
}

void check_aligned(const ClusterModel& model, const EmbeddingMatrix& x) {
  if (model.assignments.size() != x.size())
    throw DataError(fmt::format("cluster model covers {} provisions but embeddings have {}",
                                model.assignments.size(), x.size()));
  for (std::size_t a : model.assignments)
    if (a >= model.k) throw DataError("cluster assignment out of range");
}

std::string md_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string f4(double v) { return format_fixed(v, 4); }

}  // namespace

std::string_view to_string(Verdict v) { return v == Verdict::Convergent ? "CONVERGENT" : "DIVERGENT"; }

std::vector<std::string> corpora_in_order(const std::vector<std::string>& ids,
                                          const std::map<std::string, std::string>& corpus_of) {
  std::vector<std::string> out;
  for (const auto& id : ids) {
    const auto& c = corpus_for(corpus_of, id);
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

std::vector<ClusterProfile> profile_clusters(const ClusterModel& model, const EmbeddingMatrix& x,
                                             const std::map<std::string, std::string>& corpus_of) {
  check_aligned(model, x);
  const auto corpora = corpora_in_order(x.provision_ids, corpus_of);

  std::vector<std::vector<std::size_t>> members(model.k);
  for (std::size_t i = 0; i < x.size(); ++i) members[model.assignments[i]].push_back(i);

  std::vector<ClusterProfile> out(model.k);
  parallel_for(model.k, [&](std::size_t c) {
    ClusterProfile& p = out[c];
    p.cluster_id = c;
    for (const auto& corpus : corpora) p.corpus_counts[corpus] = 0;
    for (std::size_t i : members[c]) {
      p.member_ids.push_back(x.provision_ids[i]);
      ++p.corpus_counts[corpus_for(corpus_of, x.provision_ids[i])];
    }
    const bool all_present = !members[c].empty() &&
        std::all_of(p.corpus_counts.begin(), p.corpus_counts.end(), [](const auto& kv) { return kv.second > 0; });
    p.verdict = all_present ? Verdict::Convergent : Verdict::Divergent;

    const double size = static_cast<double>(members[c].size());
    if (corpora.size() > 1 && size > 0) {
      double h = 0.0;
      for (const auto& [_, count] : p.corpus_counts) {
        if (count == 0) continue;
        const double q = static_cast<double>(count) / size;
        h -= q * std::log(q);
      }
      p.balance_entropy = std::clamp(h / std::log(static_cast<double>(corpora.size())), 0.0, 1.0);
    }

    if (members[c].size() == 1) {
      p.singleton = true;
      p.mean_pairwise_similarity = 1.0;
    } else if (members[c].size() > 1) {
      double total = 0.0;
      std::size_t pairs = 0;
      for (std::size_t a = 0; a < members[c].size(); ++a)
        for (std::size_t b = a + 1; b < members[c].size(); ++b, ++pairs)
          total += std::clamp(dot(x.rows.row(members[c][a]), x.rows.row(members[c][b])), -1.0, 1.0);
      p.mean_pairwise_similarity = total / static_cast<double>(pairs);
    }
  });
  return out;
}

std::vector<ScoredPair> top_pairs(const EmbeddingMatrix& x, const std::map<std::string, std::string>& corpus_of,
                                  std::size_t k) {
  const auto corpora = corpora_in_order(x.provision_ids, corpus_of);
  if (corpora.size() < 2) throw DataError("top pairs need provisions from at least two corpora");
  std::vector<std::size_t> rank(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    rank[i] = static_cast<std::size_t>(
        std::find(corpora.begin(), corpora.end(), corpus_for(corpus_of, x.provision_ids[i])) - corpora.begin());

  std::vector<ScoredPair> pairs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      if (rank[i] == rank[j]) continue;
      const bool i_first = rank[i] < rank[j];
      const double s = std::clamp(dot(x.rows.row(i), x.rows.row(j)), -1.0, 1.0);
      pairs.push_back({x.provision_ids[i_first ? i : j], x.provision_ids[i_first ? j : i], s});
    }
  }
  auto better = [](const ScoredPair& a, const ScoredPair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.id_a != b.id_a) return a.id_a < b.id_a;
    return a.id_b < b.id_b;
  };
  const std::size_t keep = std::min(k, pairs.size());
  std::partial_sort(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(keep), pairs.end(), better);
  pairs.resize(keep);
  return pairs;
}

std::size_t count_overlapping_by_membership(const ClusterModel& model, const EmbeddingMatrix& x,
                                            const std::map<std::string, std::string>& corpus_of) {
  check_aligned(model, x);
  const auto corpora = corpora_in_order(x.provision_ids, corpus_of);
  std::size_t total = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Does provision i's cluster hold a member of every corpus?
    bool all = true;
    for (const auto& corpus : corpora) {
      bool found = false;
      for (std::size_t j = 0; j < x.size() && !found; ++j)
        found = model.assignments[j] == model.assignments[i] && corpus_for(corpus_of, x.provision_ids[j]) == corpus;
      all = all && found;
    }
    if (all) ++total;
  }
  return total;
}

ConvergenceReport build_report(const ClusterModel& model, const EmbeddingMatrix& x,
                               const std::map<std::string, std::string>& corpus_of, std::size_t pair_count) {
  ConvergenceReport r;
  r.corpora = corpora_in_order(x.provision_ids, corpus_of);
  r.profiles = profile_clusters(model, x, corpus_of);
  for (const auto& p : r.profiles) {
    if (p.verdict == Verdict::Convergent) {
      ++r.convergent_clusters;
      r.overlapping_provision_count += p.member_ids.size();
    } else {
      ++r.divergent_clusters;
    }
  }
  if (r.corpora.size() >= 2) r.top_pairs = top_pairs(x, corpus_of, pair_count);
  return r;
}

ReportFormat report_format_from_string(std::string_view s) {
  if (s == "markdown" || s == "md") return ReportFormat::Markdown;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  throw ConfigError(fmt::format("unknown report format '{}'", s));
}

json report_to_json(const ConvergenceReport& report) {
  std::size_t n = 0;
  json clusters = json::array();
  for (const auto& p : report.profiles) {
    n += p.member_ids.size();
    clusters.push_back({{"cluster_id", p.cluster_id},
                        {"size", p.member_ids.size()},
                        {"verdict", to_string(p.verdict)},
                        {"corpus_counts", p.corpus_counts},
                        {"balance_entropy", p.balance_entropy},
                        {"mean_pairwise_similarity", p.mean_pairwise_similarity},
                        {"singleton", p.singleton},
                        {"members", p.member_ids}});
  }
  json pairs = json::array();
  for (const auto& tp : report.top_pairs) pairs.push_back({{"id_a", tp.id_a}, {"id_b", tp.id_b}, {"score", tp.score}});
  json doc = {{"format", "regconv-report/1"},
              {"definition", kDefinition},
              {"corpora", report.corpora},
              {"summary",
               {{"provisions", n},
                {"clusters", report.profiles.size()},
                {"convergent_clusters", report.convergent_clusters},
                {"divergent_clusters", report.divergent_clusters},
                {"overlapping_provision_count", report.overlapping_provision_count}}},
              {"clusters", clusters},
              {"top_pairs", pairs}};
  if (!report.metrics_appendix.empty()) {
    json rows = json::array();
    for (const auto& m : report.metrics_appendix)
      rows.push_back({{"model", m.model}, {"accuracy", m.accuracy}, {"precision", m.precision},
                      {"recall", m.recall}, {"f1", m.f1}});
    doc["metrics_appendix"] = rows;
  }
  return doc;
}

std::string render_report(const ConvergenceReport& report, ReportFormat format) {
  if (format == ReportFormat::Json) return report_to_json(report).dump(2) + "\n";

  if (format == ReportFormat::Csv) {
    std::string out = "kind,cluster,verdict,size,balance_entropy,mean_similarity,id_a,id_b,score";
    for (const auto& c : report.corpora) out += ",n_" + csv_field(c);
    out += '\n';
    for (const auto& p : report.profiles) {
      out += fmt::format("cluster,{},{},{},{},{},,,", p.cluster_id, to_string(p.verdict), p.member_ids.size(),
                         f4(p.balance_entropy), f4(p.mean_pairwise_similarity));
      for (const auto& c : report.corpora) out += fmt::format(",{}", p.corpus_counts.at(c));
      out += '\n';
    }
    for (const auto& tp : report.top_pairs) {
      out += fmt::format("pair,,,,,,{},{},{}", csv_field(tp.id_a), csv_field(tp.id_b), f4(tp.score));
      out += std::string(report.corpora.size(), ',');
      out += '\n';
    }
    return out;
  }

  std::size_t n = 0;
  for (const auto& p : report.profiles) n += p.member_ids.size();
  std::string out = "# Regulatory convergence report\n\n";
  out += fmt::format("{}\n\n", kDefinition);
  out += "Corpora: ";
  for (std::size_t i = 0; i < report.corpora.size(); ++i) out += (i ? ", " : "") + md_escape(report.corpora[i]);
  out += "\n\n## Summary\n\n| Metric | Value |\n|---|---|\n";
  out += fmt::format("| Provisions | {} |\n| Clusters | {} |\n| Convergent clusters | {} |\n"
                     "| Divergent clusters | {} |\n| Overlapping provisions | {} |\n",
                     n, report.profiles.size(), report.convergent_clusters, report.divergent_clusters,
                     report.overlapping_provision_count);

  out += "\n## Clusters\n\n| Cluster | Verdict | Size |";
  for (const auto& c : report.corpora) out += fmt::format(" {} |", md_escape(c));
  out += " Balance entropy | Mean similarity |\n|---|---|---|";
  for (std::size_t i = 0; i < report.corpora.size(); ++i) out += "---|";
  out += "---|---|\n";
  for (const auto& p : report.profiles) {
    out += fmt::format("| {} | {} | {} |", p.cluster_id, to_string(p.verdict), p.member_ids.size());
    for (const auto& c : report.corpora) out += fmt::format(" {} |", p.corpus_counts.at(c));
    out += fmt::format(" {} | {}{} |\n", f4(p.balance_entropy), f4(p.mean_pairwise_similarity),
                       p.singleton ? " (singleton)" : "");
  }
  for (const auto& p : report.profiles) {
    out += fmt::format("\n### Cluster {} members\n\n", p.cluster_id);
    if (p.member_ids.empty()) {
      out += "none\n";
      continue;
    }
    out += "| Provision |\n|---|\n";
    for (const auto& id : p.member_ids) out += fmt::format("| {} |\n", md_escape(id));
  }

  out += "\n## Top cross-corpus pairs\n\n";
  if (report.top_pairs.empty()) {
    out += "none\n";
  } else {
    out += "| Rank | Provision A | Provision B | Cosine |\n|---|---|---|---|\n";
    for (std::size_t i = 0; i < report.top_pairs.size(); ++i) {
      const auto& tp = report.top_pairs[i];
      out += fmt::format("| {} | {} | {} | {} |\n", i + 1, md_escape(tp.id_a), md_escape(tp.id_b), f4(tp.score));
    }
  }
  if (!report.metrics_appendix.empty()) {
    out += "\n## Classifier metrics\n\n";
    out += render_metrics_table(report.metrics_appendix);
  }
  return out;
}

}  // namespace regconv
