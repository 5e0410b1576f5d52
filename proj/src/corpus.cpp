#include "regconv/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "regconv/common.hpp"

namespace regconv {

using nlohmann::json;

LabelSet::LabelSet(std::vector<std::string> classes) : classes_(std::move(classes)) {
  std::set<std::string> seen;
  for (const auto& c : classes_) {
    if (c.empty()) throw ConfigError("label set contains an empty class name");
    if (!seen.insert(c).second) throw ConfigError(fmt::format("duplicate class '{}' in label set", c));
  }
}

LabelSet LabelSet::defaults() {
  return LabelSet({"Scope", "Personal Data", "Rights for Individuals", "Consent", "Penalties",
                   "Enforcement"});
}

bool LabelSet::contains(const std::string& name) const {
  return std::find(classes_.begin(), classes_.end(), name) != classes_.end();
}

std::size_t LabelSet::index_of(const std::string& name) const {
  auto it = std::find(classes_.begin(), classes_.end(), name);
  if (it == classes_.end()) throw DataError(fmt::format("class '{}' is not in the label set", name));
  return static_cast<std::size_t>(it - classes_.begin());
}

HeadingRules HeadingRules::defaults() {
  return HeadingRules{{
      R"((Article\s+\d+[A-Za-z]?)(?![\w]))",
      R"((Section\s+\d+(?:\.\d+)*[A-Za-z]?)(?![\w]))",
      R"((\d+\.\d+(?:\.\d+)*)(?=\.(?:\s|$)))",
  }};
}

namespace {

std::optional<std::string> optional_string(const json& rec, const char* key, std::size_t line_no) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (!it->is_string())
    throw DataError(fmt::format("line {}: field \"{}\" must be a string", line_no, key));
  return it->get<std::string>();
}

}  // namespace

Corpus load_corpus(const std::string& path, const std::string& corpus_id) {
  if (corpus_id.empty()) throw ConfigError("corpus id must be non-empty");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open corpus file '{}'", path));

  Corpus corpus{corpus_id, {}, path};
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(fmt::format("{}: line {}: malformed JSON ({})", path, line_no, e.what()));
    }
    if (!rec.is_object()) throw DataError(fmt::format("{}: line {}: record is not an object", path, line_no));
    auto text_it = rec.find("text");
    if (text_it == rec.end() || !text_it->is_string())
      throw DataError(fmt::format("{}: line {}: missing string field \"text\"", path, line_no));

    Provision p;
    p.corpus_id = corpus_id;
    p.text = text_it->get<std::string>();
    if (trim(p.text).empty())
      throw DataError(fmt::format("{}: line {}: \"text\" is empty", path, line_no));
    auto id = optional_string(rec, "id", line_no);
    p.id = id ? *id : fmt::format("{}:{}", corpus_id, corpus.provisions.size());
    if (p.id.empty()) throw DataError(fmt::format("{}: line {}: empty id", path, line_no));
    p.citation = optional_string(rec, "citation", line_no).value_or("");
    p.label = optional_string(rec, "label", line_no);
    if (!ids.insert(p.id).second)
      throw DataError(fmt::format("{}: line {}: duplicate provision id '{}'", path, line_no, p.id));
    corpus.provisions.push_back(std::move(p));
  }
  return corpus;
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& p : corpus.provisions) {
    json rec = json::object();
    rec["id"] = p.id;
    if (!p.citation.empty()) rec["citation"] = p.citation;
    rec["text"] = p.text;
    if (p.label) rec["label"] = *p.label;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::string& path) {
  write_file(path, corpus_to_jsonl(corpus));
}

std::vector<Provision> segment_document(const std::string& text, const std::string& corpus_id,
                                        const HeadingRules& rules) {
  std::vector<std::regex> regexes;
  regexes.reserve(rules.patterns.size());
  for (const auto& pat : rules.patterns) {
    try {
      regexes.emplace_back(pat, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw ConfigError(fmt::format("invalid heading pattern '{}': {}", pat, e.what()));
    }
  }

  struct Heading {
    std::size_t start;       // first char of the citation
    std::size_t body_start;  // one past the citation
    std::string citation;
  };
  std::vector<Heading> headings;

  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string::npos) line_end = text.size();
    std::size_t indent = line_start;
    while (indent < line_end && (text[indent] == ' ' || text[indent] == '\t' || text[indent] == '\r'))
      ++indent;
    auto first = text.begin() + static_cast<std::ptrdiff_t>(indent);
    auto last = text.begin() + static_cast<std::ptrdiff_t>(line_end);
    for (const auto& re : regexes) {
      std::smatch m;
      if (std::regex_search(first, last, m, re, std::regex_constants::match_continuous) &&
          m.size() > 1 && m[1].matched && m[1].length() > 0) {
        std::size_t s = indent + static_cast<std::size_t>(m.position(1));
        headings.push_back({s, s + static_cast<std::size_t>(m.length(1)), m[1].str()});
        break;
      }
    }
    if (line_end == text.size()) break;
    line_start = line_end + 1;
  }

  std::vector<Provision> out;
  auto emit = [&](std::string citation, std::string body) {
    Provision p;
    p.id = fmt::format("{}:{}", corpus_id, out.size());
    p.corpus_id = corpus_id;
    p.citation = std::move(citation);
    p.text = std::move(body);
    out.push_back(std::move(p));
  };

  const std::size_t first_heading = headings.empty() ? text.size() : headings.front().start;
  std::string preamble(trim(std::string_view(text).substr(0, first_heading)));
  if (!preamble.empty()) emit("preamble", preamble);

  std::string pending;  // headings whose body was empty
  for (std::size_t i = 0; i < headings.size(); ++i) {
    const std::size_t end = i + 1 < headings.size() ? headings[i + 1].start : text.size();
    std::string body(trim(std::string_view(text).substr(headings[i].body_start,
                                                        end - headings[i].body_start)));
    if (body.empty()) {
      if (!pending.empty()) pending += ' ';
      pending += headings[i].citation;
      continue;
    }
    if (!pending.empty()) {
      body = pending + ' ' + body;
      pending.clear();
    }
    emit(headings[i].citation, std::move(body));
  }
  if (!pending.empty()) {
    if (out.empty())
      emit("preamble", pending);
    else
      out.back().text += ' ' + pending;
  }
  return out;
}

Corpus load_text_document(const std::string& path, const std::string& corpus_id,
                          const HeadingRules& rules) {
  if (corpus_id.empty()) throw ConfigError("corpus id must be non-empty");
  std::string text = read_file(path);
  if (trim(text).empty()) throw DataError(fmt::format("document '{}' is empty", path));
  return Corpus{corpus_id, segment_document(text, corpus_id, rules), path};
}

Corpus attach_labels(Corpus corpus, const std::map<std::string, std::string>& labels,
                     const LabelSet& label_set) {
  for (const auto& [id, cls] : labels) {
    if (!label_set.contains(cls))
      throw DataError(fmt::format("label '{}' for provision '{}' is not in the label set", cls, id));
    auto it = std::find_if(corpus.provisions.begin(), corpus.provisions.end(),
                           [&](const Provision& p) { return p.id == id; });
    if (it == corpus.provisions.end())
      throw DataError(fmt::format("labels reference unknown provision id '{}'", id));
    it->label = cls;
  }
  return corpus;
}

Corpus attach_labels(Corpus corpus, const std::string& labels_path, const LabelSet& label_set) {
  json doc;
  try {
    doc = json::parse(read_file(labels_path));
  } catch (const json::parse_error& e) {
    throw DataError(fmt::format("{}: malformed labels file ({})", labels_path, e.what()));
  }
  if (!doc.is_object()) throw DataError(fmt::format("{}: labels file must be a JSON object", labels_path));
  std::map<std::string, std::string> labels;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!it.value().is_string())
      throw DataError(fmt::format("{}: label for '{}' must be a string", labels_path, it.key()));
    labels[it.key()] = it.value().get<std::string>();
  }
  return attach_labels(std::move(corpus), labels, label_set);
}

void validate_corpora(std::span<const Corpus> corpora, const LabelSet* label_set) {
  std::set<std::string> ids;
  std::set<std::string> corpus_ids;
  for (const auto& c : corpora) {
    if (c.corpus_id.empty()) throw ConfigError("corpus id must be non-empty");
    if (!corpus_ids.insert(c.corpus_id).second)
      throw ConfigError(fmt::format("corpus id '{}' used twice", c.corpus_id));
    for (const auto& p : c.provisions) {
      if (!ids.insert(p.id).second)
        throw DataError(fmt::format("provision id '{}' is not unique across corpora", p.id));
      if (trim(p.text).empty()) throw DataError(fmt::format("provision '{}' has empty text", p.id));
      if (label_set && p.label && !label_set->contains(*p.label))
        throw DataError(fmt::format("provision '{}' has label '{}' outside the label set", p.id, *p.label));
    }
  }
}

}  // namespace regconv
