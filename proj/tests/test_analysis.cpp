#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "regconv/analysis.hpp"

using namespace regconv;

namespace {

struct Fixture {
  EmbeddingMatrix x;
  std::map<std::string, std::string> corpus_of;
  ClusterModel model;
};

// rows[i] belongs to corpora[i] and cluster assign[i].
Fixture make(const std::vector<oracle::Vec>& rows, const std::vector<std::string>& ids,
             const std::vector<std::string>& corpora, const std::vector<std::size_t>& assign, std::size_t k) {
  Fixture f;
  f.x.rows = oracle::to_matrix(rows);
  for (std::size_t i = 0; i < f.x.rows.rows(); ++i) normalize_in_place(f.x.rows.row(i));
  f.x.provision_ids = ids;
  f.x.backend_tag = "tfidf";
  for (std::size_t i = 0; i < ids.size(); ++i) f.corpus_of[ids[i]] = corpora[i];
  f.model.k = k;
  f.model.assignments = assign;
  f.model.centroids = Matrix(k, f.x.dim());
  return f;
}

}  // namespace

TEST_CASE("two-corpus cluster is convergent with balanced entropy") {
  auto f = make({{1, 0}, {1, 0.1}, {0, 1}}, {"a_G", "b_C", "c_G"}, {"G", "C", "G"}, {0, 0, 1}, 2);
  auto profiles = profile_clusters(f.model, f.x, f.corpus_of);
  REQUIRE(profiles.size() == 2);
  CHECK(profiles[0].verdict == Verdict::Convergent);
  CHECK(profiles[0].balance_entropy == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(profiles[0].corpus_counts == std::map<std::string, std::size_t>{{"G", 1}, {"C", 1}});
  CHECK(profiles[0].mean_pairwise_similarity ==
        doctest::Approx(1.0 / std::sqrt(1.01)).epsilon(1e-12));
  CHECK(profiles[1].verdict == Verdict::Divergent);
  CHECK(profiles[1].balance_entropy == 0.0);
  CHECK(profiles[1].singleton);
  CHECK(profiles[1].mean_pairwise_similarity == 1.0);
  CHECK(profiles[1].corpus_counts.at("C") == 0);
}

TEST_CASE("empty cluster is divergent") {
  auto f = make({{1, 0}, {0, 1}}, {"a", "b"}, {"G", "C"}, {0, 0}, 2);
  auto r = build_report(f.model, f.x, f.corpus_of, 5);
  CHECK(r.profiles[1].member_ids.empty());
  CHECK(r.profiles[1].verdict == Verdict::Divergent);
  CHECK(r.convergent_clusters == 1);
  CHECK(r.divergent_clusters == 1);
  CHECK(r.overlapping_provision_count == 2);
  CHECK(render_report(r, ReportFormat::Markdown).find("none\n") != std::string::npos);
}

TEST_CASE("duplicated corpora are fully convergent") {
  auto rows = oracle::random_unit_rows(12, 5, 8);
  std::vector<oracle::Vec> both = rows;
  both.insert(both.end(), rows.begin(), rows.end());
  std::vector<std::string> ids, corpora;
  for (int i = 0; i < 12; ++i) {
    ids.push_back("G:" + std::to_string(i));
    corpora.push_back("G");
  }
  for (int i = 0; i < 12; ++i) {
    ids.push_back("G2:" + std::to_string(i));
    corpora.push_back("G2");
  }
  Fixture f = make(both, ids, corpora, std::vector<std::size_t>(24, 0), 1);
  Matrix x = f.x.rows;
  for (std::size_t k = 2; k <= 6; ++k) {
    ClusterModel m = kmeans_restarts(x, k, seed_range(0, 10));
    auto r = build_report(m, f.x, f.corpus_of, 3);
    for (const auto& p : r.profiles)
      if (!p.member_ids.empty()) CHECK(p.verdict == Verdict::Convergent);
    CHECK(r.overlapping_provision_count == 24);
    CHECK(count_overlapping_by_membership(m, f.x, f.corpus_of) == 24);
    // Each provision's best cross-corpus partner is its copy.
    REQUIRE(r.top_pairs.size() == 3);
    for (const auto& tp : r.top_pairs) {
      CHECK(tp.score == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(tp.id_a.substr(2) == tp.id_b.substr(3));
    }
  }
}

TEST_CASE("disjoint corpora split into divergent clusters") {
  auto f = make({{1, 0, 0}, {1, 0.05, 0}, {0, 0, 1}, {0, 0.05, 1}}, {"g1", "g2", "c1", "c2"}, {"G", "G", "C", "C"},
                {0, 0, 0, 0}, 1);
  ClusterModel m = kmeans_restarts(f.x.rows, 2, seed_range(0, 5));
  auto r = build_report(m, f.x, f.corpus_of, 2);
  CHECK(r.divergent_clusters == 2);
  CHECK(r.convergent_clusters == 0);
  CHECK(r.overlapping_provision_count == 0);
}

TEST_CASE("top pairs by hand on a 3x3 grid") {
  // G rows: e0, e1, (e0+e1)/sqrt2. C rows: e0, e2, e1.
  auto f = make({{1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}, {0, 0, 1}, {0, 1, 0}},
                {"g0", "g1", "g2", "c0", "c1", "c2"}, {"G", "G", "G", "C", "C", "C"}, {0, 0, 0, 0, 0, 0}, 1);
  auto pairs = top_pairs(f.x, f.corpus_of, 4);
  const double r2 = 1.0 / std::sqrt(2.0);
  REQUIRE(pairs.size() == 4);
  CHECK(pairs[0] == ScoredPair{"g0", "c0", 1.0});
  CHECK(pairs[1] == ScoredPair{"g1", "c2", 1.0});
  CHECK(pairs[2].id_a == "g2");
  CHECK(pairs[2].id_b == "c0");
  CHECK(pairs[2].score == doctest::Approx(r2).epsilon(1e-12));
  CHECK(pairs[3].id_a == "g2");
  CHECK(pairs[3].id_b == "c2");
  CHECK(top_pairs(f.x, f.corpus_of, 100).size() == 9);
  CHECK(top_pairs(f.x, f.corpus_of, 0).empty());

  // id_a follows the corpus that appears first, even when the ids are listed the other way round.
  auto g = make({{1, 0}, {1, 0}}, {"zz", "aa"}, {"C", "G"}, {0, 0}, 1);
  CHECK(top_pairs(g.x, g.corpus_of, 1)[0] == ScoredPair{"zz", "aa", 1.0});
}

TEST_CASE("single corpus cannot produce pairs") {
  auto f = make({{1, 0}, {0, 1}}, {"a", "b"}, {"G", "G"}, {0, 1}, 2);
  CHECK_THROWS_AS(top_pairs(f.x, f.corpus_of, 3), DataError);
  auto r = build_report(f.model, f.x, f.corpus_of, 3);
  CHECK(r.top_pairs.empty());
  // With one corpus every non-empty cluster trivially holds all corpora.
  CHECK(r.convergent_clusters == 2);
}

TEST_CASE("membership count agrees with verdict count on random partitions") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 5 + gen() % 20, k = 1 + gen() % 5;
    auto rows = oracle::random_unit_rows(n, 3, 50 + trial);
    std::vector<std::string> ids, corpora;
    std::vector<std::size_t> assign;
    const char* names[] = {"A", "B", "C"};
    const std::size_t ncorp = 2 + gen() % 2;
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back("p" + std::to_string(i));
      corpora.push_back(names[gen() % ncorp]);
      assign.push_back(gen() % k);
    }
    auto f = make(rows, ids, corpora, assign, k);
    if (corpora_in_order(ids, f.corpus_of).size() < 2) continue;
    auto r = build_report(f.model, f.x, f.corpus_of, 5);
    CHECK(r.overlapping_provision_count == count_overlapping_by_membership(f.model, f.x, f.corpus_of));
    CHECK(r.convergent_clusters + r.divergent_clusters == k);
  }
}

TEST_CASE("alignment errors") {
  auto f = make({{1, 0}, {0, 1}}, {"a", "b"}, {"G", "C"}, {0}, 1);
  CHECK_THROWS_AS(profile_clusters(f.model, f.x, f.corpus_of), DataError);
  f.model.assignments = {0, 3};
  CHECK_THROWS_AS(profile_clusters(f.model, f.x, f.corpus_of), DataError);
  f.model.assignments = {0, 0};
  f.corpus_of.erase("b");
  CHECK_THROWS_AS(profile_clusters(f.model, f.x, f.corpus_of), DataError);
}

TEST_CASE("renderings are deterministic and consistent") {
  auto rows = oracle::random_unit_rows(20, 4, 2);
  std::vector<std::string> ids, corpora;
  for (int i = 0; i < 20; ++i) {
    ids.push_back((i < 10 ? "G:" : "C:") + std::to_string(i));
    corpora.push_back(i < 10 ? "G" : "C");
  }
  auto f = make(rows, ids, corpora, std::vector<std::size_t>(20, 0), 1);
  ClusterModel m = kmeans_restarts(f.x.rows, 4, seed_range(0, 5));
  set_thread_count(1);
  auto a = build_report(m, f.x, f.corpus_of, 5);
  set_thread_count(8);
  auto b = build_report(m, f.x, f.corpus_of, 5);
  set_thread_count(0);
  for (auto fmt : {ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json})
    CHECK(render_report(a, fmt) == render_report(b, fmt));

  auto j = report_to_json(a);
  CHECK(j.at("summary").at("overlapping_provision_count").get<std::size_t>() == a.overlapping_provision_count);
  CHECK(j.at("clusters").size() == 4);
  CHECK(j.at("top_pairs").size() == 5);
  CHECK(nlohmann::json::parse(render_report(a, ReportFormat::Json)) == j);

  const std::string csv = render_report(a, ReportFormat::Csv);
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 1 + 4 + 5);
  CHECK(csv.rfind("kind,cluster,verdict,size,balance_entropy,mean_similarity,id_a,id_b,score,n_G,n_C\n", 0) == 0);

  const std::string md = render_report(a, ReportFormat::Markdown);
  CHECK(md.find("CONVERGENT") != std::string::npos);
  CHECK(md.find("Classifier metrics") == std::string::npos);
}

TEST_CASE("metrics appendix renders percentages") {
  ConvergenceReport r;
  r.corpora = {"G", "C"};
  r.metrics_appendix.push_back({"BERT", 0.925, 0.912, 0.908, 0.910});
  const std::string md = render_report(r, ReportFormat::Markdown);
  CHECK(md.find("| Model | Accuracy | Precision | Recall | F1-Score |") != std::string::npos);
  CHECK(md.find("| BERT | 92.5% | 91.2% | 90.8% | 91.0% |") != std::string::npos);
  CHECK(report_to_json(r).at("metrics_appendix").at(0).at("f1").get<double>() == 0.910);
}

TEST_CASE("report format names") {
  CHECK(report_format_from_string("md") == ReportFormat::Markdown);
  CHECK(report_format_from_string("csv") == ReportFormat::Csv);
  CHECK(report_format_from_string("json") == ReportFormat::Json);
  CHECK_THROWS_AS(report_format_from_string("xml"), ConfigError);
}
