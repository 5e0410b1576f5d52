#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "regconv/corpus.hpp"

using namespace regconv;

namespace {

std::string non_space_sorted(const std::string& s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  std::sort(out.begin(), out.end());
  return out;
}

std::string reconstruct(const std::vector<Provision>& ps) {
  std::string out;
  for (const auto& p : ps) {
    if (p.citation != "preamble") out += p.citation;
    out += p.text;
  }
  return out;
}

}  // namespace

TEST_CASE("load_corpus keeps order and generates ids") {
  oracle::TempDir dir("corpus");
  write_file(dir / "a.jsonl", "{\"text\": \"first\"}\n\n{\"text\": \"second\", \"citation\": \"Art 2\"}\n");
  Corpus c = load_corpus(dir / "a.jsonl", "GDPR");
  REQUIRE(c.provisions.size() == 2);
  CHECK(c.provisions[0].text == "first");
  CHECK(c.provisions[0].id == "GDPR:0");
  CHECK(c.provisions[1].id == "GDPR:1");
  CHECK(c.provisions[1].citation == "Art 2");
  CHECK(c.provisions[1].corpus_id == "GDPR");
}

TEST_CASE("load_corpus errors") {
  oracle::TempDir dir("corpus");
  write_file(dir / "bad.jsonl", "{\"citation\": \"x\"}\n");
  try {
    load_corpus(dir / "bad.jsonl", "c");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  write_file(dir / "dup.jsonl", "{\"id\": \"a\", \"text\": \"x\"}\n{\"id\": \"a\", \"text\": \"y\"}\n");
  CHECK_THROWS_AS(load_corpus(dir / "dup.jsonl", "c"), DataError);
  write_file(dir / "junk.jsonl", "{\"text\": \"ok\"}\nnot json\n");
  try {
    load_corpus(dir / "junk.jsonl", "c");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  write_file(dir / "blank.jsonl", "{\"text\": \"   \"}\n");
  CHECK_THROWS_AS(load_corpus(dir / "blank.jsonl", "c"), DataError);
  CHECK_THROWS_AS(load_corpus(dir / "missing.jsonl", "c"), DataError);
}

TEST_CASE("write then load is the identity on provisions") {
  oracle::TempDir dir("corpus");
  Corpus c{"CCPA", {}, ""};
  c.provisions.push_back({"x1", "CCPA", "1798.100", "Consumers may request \"disclosure\".\nSecond line.", "Consent"});
  c.provisions.push_back({"x2", "CCPA", "", "Unicode text: é€", std::nullopt});
  write_corpus(c, dir / "c.jsonl");
  Corpus back = load_corpus(dir / "c.jsonl", "CCPA");
  CHECK(back.provisions == c.provisions);
}

TEST_CASE("segment articles") {
  auto ps = segment_document("Article 1. A.\nArticle 2. B.", "G");
  REQUIRE(ps.size() == 2);
  CHECK(ps[0].citation == "Article 1");
  CHECK(ps[1].citation == "Article 2");
  CHECK(ps[0].id == "G:0");
  CHECK(ps[1].id == "G:1");
}

TEST_CASE("segment without headings gives one preamble") {
  auto ps = segment_document("Just some text\nacross lines.", "G");
  REQUIRE(ps.size() == 1);
  CHECK(ps[0].citation == "preamble");
  CHECK(ps[0].text == "Just some text\nacross lines.");
}

TEST_CASE("segment statute codes") {
  auto ps = segment_document("1798.100. X\n1798.105. Y", "C");
  REQUIRE(ps.size() == 2);
  CHECK(ps[0].citation == "1798.100");
  CHECK(ps[1].citation == "1798.105");
}

TEST_CASE("segment sections, preamble and empty headings") {
  auto ps = segment_document("Title\n\nSection 1\nBody one.\n  Section 2\nSection 3\nBody three.\nArticle 9\n", "C");
  REQUIRE(ps.size() == 3);
  CHECK(ps[0].citation == "preamble");
  CHECK(ps[0].text == "Title");
  CHECK(ps[1].citation == "Section 1");
  CHECK(ps[1].text == "Body one.");
  CHECK(ps[2].citation == "Section 3");
  CHECK(ps[2].text == "Section 2 Body three. Article 9");
}

TEST_CASE("heading-like text mid-line does not split") {
  auto ps = segment_document("Article 1 refers to Article 2 in passing.", "G");
  REQUIRE(ps.size() == 1);
  CHECK(ps[0].citation == "Article 1");
}

TEST_CASE("custom heading patterns") {
  HeadingRules rules{{R"((Rule\s+[IVX]+))"}};
  auto ps = segment_document("Rule I first\nRule II second", "R", rules);
  REQUIRE(ps.size() == 2);
  CHECK(ps[1].citation == "Rule II");
  CHECK_THROWS_AS(segment_document("x", "R", HeadingRules{{"(unclosed"}}), ConfigError);
}

TEST_CASE("segmentation covers every non-whitespace character exactly once") {
  const std::vector<std::string> pieces = {"Article 3", "Section 12.4", "1798.140.", "the controller", "shall",
                                           "notify", "within 72 hours.", "Article", "12", "(a)", "€20"};
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::string doc;
    const int parts = 1 + static_cast<int>(gen() % 25);
    for (int i = 0; i < parts; ++i) {
      doc += pieces[gen() % pieces.size()];
      switch (gen() % 4) {
        case 0: doc += "\n"; break;
        case 1: doc += "\n\n  "; break;
        default: doc += " "; break;
      }
    }
    if (non_space_sorted(doc).empty()) continue;
    auto ps = segment_document(doc, "T");
    CHECK(non_space_sorted(reconstruct(ps)) == non_space_sorted(doc));
    for (const auto& p : ps) CHECK_FALSE(trim(p.text).empty());
    CHECK(segment_document(doc, "T") == ps);
  }
}

TEST_CASE("attach_labels") {
  Corpus c{"G", {{"p1", "G", "", "a", std::nullopt}, {"p2", "G", "", "b", std::nullopt}}, ""};
  const LabelSet ls = LabelSet::defaults();
  Corpus labeled = attach_labels(c, std::map<std::string, std::string>{{"p1", "Consent"}}, ls);
  CHECK(labeled.provisions[0].label == std::optional<std::string>("Consent"));
  CHECK_FALSE(labeled.provisions[1].label.has_value());
  CHECK_THROWS_AS(attach_labels(c, std::map<std::string, std::string>{{"p1", "Bogus"}}, ls), DataError);
  CHECK_THROWS_AS(attach_labels(c, std::map<std::string, std::string>{{"p9", "Consent"}}, ls), DataError);
  CHECK(attach_labels(c, std::map<std::string, std::string>{}, ls).provisions == c.provisions);

  oracle::TempDir dir("labels");
  write_file(dir / "l.json", R"({"p2": "Penalties"})");
  CHECK(attach_labels(c, dir / "l.json", ls).provisions[1].label == std::optional<std::string>("Penalties"));
}

TEST_CASE("label set") {
  const LabelSet ls = LabelSet::defaults();
  CHECK(ls.size() == 6);
  CHECK(ls.contains("Rights for Individuals"));
  CHECK(ls.index_of(ls.classes()[3]) == 3);
  CHECK_THROWS_AS(LabelSet({"a", "a"}), ConfigError);
  CHECK_THROWS_AS(ls.index_of("nope"), DataError);
}

TEST_CASE("validate_corpora finds cross-corpus duplicates") {
  Corpus a{"A", {{"x", "A", "", "t", std::nullopt}}, ""};
  Corpus b{"B", {{"x", "B", "", "t", std::nullopt}}, ""};
  std::vector<Corpus> both{a, b};
  CHECK_THROWS_AS(validate_corpora(both), DataError);
  b.provisions[0].id = "y";
  b.provisions[0].label = "Bogus";
  std::vector<Corpus> ok{a, b};
  CHECK_NOTHROW(validate_corpora(ok));
  const LabelSet ls = LabelSet::defaults();
  CHECK_THROWS_AS(validate_corpora(ok, &ls), DataError);
}
