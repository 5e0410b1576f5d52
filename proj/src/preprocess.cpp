#include "regconv/preprocess.hpp"

#include <algorithm>
#include <regex>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "regconv/common.hpp"

namespace regconv {

namespace embedded {
extern const std::string_view kStopwords;
extern const std::string_view kGazetteer;
}  // namespace embedded

std::string_view to_string(Pos pos) {
  switch (pos) {
    case Pos::Noun: return "NOUN";
    case Pos::Verb: return "VERB";
    case Pos::Adj: return "ADJ";
    case Pos::Adv: return "ADV";
    case Pos::Other: return "OTHER";
  }
  return "OTHER";
}

std::string_view to_string(Entity entity) {
  switch (entity) {
    case Entity::None: return "NONE";
    case Entity::Money: return "MONEY";
    case Entity::DateDuration: return "DATE_DURATION";
    case Entity::LegalRef: return "LEGAL_REF";
    case Entity::Org: return "ORG";
    case Entity::Percent: return "PERCENT";
  }
  return "NONE";
}

Pos pos_from_string(std::string_view s) {
  for (Pos p : {Pos::Noun, Pos::Verb, Pos::Adj, Pos::Adv, Pos::Other})
    if (to_string(p) == s) return p;
  throw DataError(fmt::format("unknown part of speech '{}'", s));
}

Entity entity_from_string(std::string_view s) {
  for (Entity e : {Entity::None, Entity::Money, Entity::DateDuration, Entity::LegalRef,
                   Entity::Org, Entity::Percent})
    if (to_string(e) == s) return e;
  throw DataError(fmt::format("unknown entity type '{}'", s));
}

namespace {

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto t = trim(line);
    if (!t.empty()) lines.emplace_back(t);
  }
  return lines;
}

// --- UTF-8 ---------------------------------------------------------------

struct CodePoint {
  char32_t value;
  std::size_t length;  // bytes
};

CodePoint decode(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> char32_t {
    if (i + k >= s.size()) return 0xFFFD;
    auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? char32_t(b & 0x3F) : char32_t(0xFFFD);
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0 && i + 1 < s.size()) return {char32_t(b0 & 0x1F) << 6 | cont(1), 2};
  if ((b0 & 0xF0) == 0xE0 && i + 2 < s.size())
    return {char32_t(b0 & 0x0F) << 12 | cont(1) << 6 | cont(2), 3};
  if ((b0 & 0xF8) == 0xF0 && i + 3 < s.size())
    return {char32_t(b0 & 0x07) << 18 | cont(1) << 12 | cont(2) << 6 | cont(3), 4};
  return {0xFFFD, 1};
}

bool is_unicode_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

bool is_currency(char32_t c) { return c == U'$' || c == U'€' || c == U'£' || c == U'¥'; }

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
  }
  switch (c) {
    case U'€': case U'£': case U'¥': case U'§': case U'¶': case U'«': case U'»':
    case U'‘': case U'’': case U'‚': case U'“': case U'”': case U'„': case U'‹':
    case U'›': case U'–': case U'—': case U'…': case U'•': case U'·': case U'¿':
    case U'¡': case U'°':
      return true;
    default:
      return false;
  }
}

bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

std::vector<CodePoint> decode_all(std::string_view s) {
  std::vector<CodePoint> out;
  for (std::size_t i = 0; i < s.size();) {
    auto cp = decode(s, i);
    out.push_back(cp);
    i += cp.length;
  }
  return out;
}

void peel(std::string_view word, std::vector<std::string>& out) {
  auto cps = decode_all(word);
  std::size_t lo = 0, hi = cps.size();
  std::vector<std::size_t> offsets(cps.size() + 1, 0);
  for (std::size_t k = 0; k < cps.size(); ++k) offsets[k + 1] = offsets[k] + cps[k].length;
  auto piece = [&](std::size_t a, std::size_t b) {
    return std::string(word.substr(offsets[a], offsets[b] - offsets[a]));
  };

  while (lo < hi && is_punct(cps[lo].value)) {
    if (is_currency(cps[lo].value) && lo + 1 < hi && is_digit(cps[lo + 1].value)) break;
    out.push_back(piece(lo, lo + 1));
    ++lo;
  }
  std::vector<std::string> tail;
  while (hi > lo && is_punct(cps[hi - 1].value)) {
    if (cps[hi - 1].value == U'%' && hi - 1 > lo && is_digit(cps[hi - 2].value)) break;
    tail.push_back(piece(hi - 1, hi));
    --hi;
  }
  if (hi > lo) out.push_back(piece(lo, hi));
  out.insert(out.end(), tail.rbegin(), tail.rend());
}

// --- entity patterns -----------------------------------------------------

const std::regex& number_re() {
  static const std::regex re(R"(\d[\d,]*(\.\d+)?)");
  return re;
}

bool is_number(const std::string& s) { return std::regex_match(s, number_re()); }

bool is_number_word(const std::string& s) {
  static const std::set<std::string> words = {"one",    "two",    "three",  "four",  "five",
                                              "six",    "seven",  "eight",  "nine",  "ten",
                                              "eleven", "twelve", "twenty", "thirty", "sixty",
                                              "ninety"};
  return words.contains(s);
}

bool is_money_token(const std::string& s) {
  static const std::regex re(R"((\$|€|£|¥)\d[\d,]*(\.\d+)?)");
  return std::regex_match(s, re);
}

bool is_percent_token(const std::string& s) {
  static const std::regex re(R"(\d+(\.\d+)?%)");
  return std::regex_match(s, re);
}

bool is_statute_code(const std::string& s) {
  static const std::regex re(R"(\d{4}\.\d+(\.\d+)*)");
  return std::regex_match(s, re);
}

bool is_ref_number(const std::string& s) {
  static const std::regex re(R"(\d+[a-z]?|\d+(\.\d+)+)");
  return std::regex_match(s, re);
}

bool in(const std::string& s, std::initializer_list<std::string_view> set) {
  return std::find(set.begin(), set.end(), s) != set.end();
}

bool is_scale(const std::string& s) { return in(s, {"million", "billion"}); }
bool is_currency_word(const std::string& s) {
  return in(s, {"euro", "euros", "eur", "dollar", "dollars", "usd"});
}
bool is_time_unit(const std::string& s) {
  return in(s, {"second", "seconds", "minute", "minutes", "hour", "hours", "day", "days",
                "week", "weeks", "month", "months", "year", "years"});
}

struct Match {
  std::size_t length = 0;
  Entity entity = Entity::None;
};

// Longest entity match starting at i; ties keep the first pattern listed.
Match match_at(const std::vector<std::string>& w, std::size_t i,
               const std::vector<std::vector<std::string>>& gazetteer) {
  const std::size_t n = w.size();
  auto at = [&](std::size_t k) -> const std::string& {
    static const std::string empty;
    return k < n ? w[k] : empty;
  };
  Match best;
  auto offer = [&](std::size_t len, Entity e) {
    if (len > best.length) best = {len, e};
  };

  // MONEY
  if (is_money_token(at(i))) offer(is_scale(at(i + 1)) ? 2 : 1, Entity::Money);
  if (in(at(i), {"$", "€", "£", "¥"}) && is_number(at(i + 1)))
    offer(is_scale(at(i + 2)) ? 3 : 2, Entity::Money);
  if (is_number(at(i))) {
    std::size_t k = i + 1;
    if (is_scale(at(k))) ++k;
    if (is_currency_word(at(k))) offer(k + 1 - i, Entity::Money);
  }
  // PERCENT
  if (is_percent_token(at(i))) offer(1, Entity::Percent);
  if (is_number(at(i)) && (at(i + 1) == "%" || at(i + 1) == "percent")) offer(2, Entity::Percent);
  // DATE_DURATION
  if (is_number(at(i)) || is_number_word(at(i))) {
    std::size_t k = i + 1;
    if (in(at(k), {"business", "calendar", "working"})) ++k;
    if (is_time_unit(at(k))) offer(k + 1 - i, Entity::DateDuration);
  }
  // LEGAL_REF
  if (in(at(i), {"article", "articles", "section", "sections", "recital", "recitals"}) &&
      is_ref_number(at(i + 1)))
    offer(2, Entity::LegalRef);
  if (is_statute_code(at(i))) offer(1, Entity::LegalRef);
  // ORG
  for (const auto& phrase : gazetteer) {
    if (phrase.empty() || i + phrase.size() > n) continue;
    bool ok = true;
    for (std::size_t k = 0; k < phrase.size() && ok; ++k) ok = w[i + k] == phrase[k];
    if (ok) offer(phrase.size(), Entity::Org);
  }
  return best;
}

// --- part of speech ------------------------------------------------------

const std::unordered_map<std::string_view, Pos>& pos_lexicon() {
  static const std::unordered_map<std::string_view, Pos> table = [] {
    std::unordered_map<std::string_view, Pos> t;
    for (auto w : {"shall", "must", "may", "can", "will", "should", "would", "could", "might",
                   "be", "have", "do", "process", "notify", "collect", "sell", "share",
                   "delete", "erase", "access", "request", "provide", "disclose", "require",
                   "apply", "comply", "ensure", "inform", "object", "restrict", "rectify",
                   "transfer", "store", "use", "opt", "consent", "enforce", "impose",
                   "receive", "respond", "verify", "maintain", "implement", "protect",
                   "supply", "include", "obtain", "withdraw", "make", "take", "give", "keep",
                   "pay", "hold", "know", "exercise", "determine", "demonstrate", "erase",
                   "retain", "refuse", "charge", "adopt", "assess"})
      t.emplace(w, Pos::Verb);
    for (auto w : {"lawful", "unlawful", "personal", "explicit", "legal", "clear", "necessary",
                   "reasonable", "public", "sensitive", "specific", "automated", "civil",
                   "intentional", "unintentional", "annual", "global", "appropriate",
                   "available", "free", "prior", "such", "same", "other", "new", "each",
                   "accurate", "commercial", "third", "certain", "high", "higher", "relevant"})
      t.emplace(w, Pos::Adj);
    for (auto w : {"not", "also", "only", "without", "undue", "promptly", "otherwise",
                   "however", "therefore", "thereof", "hereby"})
      t.emplace(w, Pos::Adv);
    for (auto w : {"approval", "removal", "individual", "proposal", "principal", "referral",
                   "withdrawal", "tribunal", "renewal", "signal", "journal", "capital",
                   "material", "family", "reply", "rival", "arrival", "professional",
                   "objective", "representative", "directive", "incentive", "initiative",
                   "alternative", "executive", "motive", "detective"})
      t.emplace(w, Pos::Noun);
    for (auto w : {"a", "an", "the", "and", "or", "nor", "but", "of", "in", "on", "at", "to",
                   "for", "by", "with", "from", "as", "into", "under", "upon", "within", "that",
                   "which", "who", "whom", "whose", "this", "these", "those", "it", "its",
                   "they", "their", "where", "when", "if", "unless", "whether", "any", "all",
                   "per", "up", "than", "whichever"})
      t.emplace(w, Pos::Other);
    return t;
  }();
  return table;
}

bool has_digit(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool ends_with(std::string_view w, std::string_view suffix) {
  return w.size() > suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

}  // namespace

std::set<std::string> PreprocessResources::parse_stopwords(std::string_view text) {
  std::set<std::string> out;
  for (auto& line : split_lines(text)) out.insert(to_lower_ascii(line));
  return out;
}

std::vector<std::vector<std::string>> PreprocessResources::parse_gazetteer(std::string_view text) {
  std::vector<std::vector<std::string>> out;
  for (auto& line : split_lines(text)) {
    std::vector<std::string> words;
    std::istringstream in(to_lower_ascii(line));
    std::string w;
    while (in >> w) words.push_back(w);
    if (!words.empty()) out.push_back(std::move(words));
  }
  return out;
}

PreprocessResources PreprocessResources::defaults() {
  static const PreprocessResources res{parse_stopwords(embedded::kStopwords),
                                       parse_gazetteer(embedded::kGazetteer)};
  return res;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0, start = 0;
  bool in_word = false;
  while (i < text.size()) {
    auto cp = decode(text, i);
    if (is_unicode_space(cp.value)) {
      if (in_word) peel(text.substr(start, i - start), out);
      in_word = false;
    } else if (!in_word) {
      start = i;
      in_word = true;
    }
    i += cp.length;
  }
  if (in_word) peel(text.substr(start), out);
  return out;
}

bool is_punctuation_token(std::string_view surface) {
  if (surface.empty()) return false;
  for (std::size_t i = 0; i < surface.size();) {
    auto cp = decode(surface, i);
    if (!is_punct(cp.value)) return false;
    i += cp.length;
  }
  return true;
}

namespace {
bool is_stopped(const std::string& surface, const std::string& lemma,
                const std::set<std::string>& stopwords) {
  return is_punctuation_token(surface) || stopwords.contains(lemma) ||
         stopwords.contains(to_lower_ascii(surface));
}
}  // namespace

std::vector<std::pair<std::string, std::string>> remove_stopwords(
    const std::vector<std::pair<std::string, std::string>>& tokens,
    const std::set<std::string>& stopwords) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& t : tokens)
    if (!is_stopped(t.first, t.second, stopwords)) out.push_back(t);
  return out;
}

TaggedTokens tag_entities(std::vector<Token> tokens,
                          const std::vector<std::vector<std::string>>& gazetteer) {
  std::vector<std::string> lower;
  lower.reserve(tokens.size());
  for (const auto& t : tokens) lower.push_back(to_lower_ascii(t.surface));

  TaggedTokens out;
  for (std::size_t i = 0; i < tokens.size();) {
    Match m = match_at(lower, i, gazetteer);
    if (m.length == 0) {
      ++i;
      continue;
    }
    for (std::size_t k = i; k < i + m.length; ++k) tokens[k].entity = m.entity;
    out.spans.push_back({i, i + m.length, m.entity});
    i += m.length;
  }
  out.tokens = std::move(tokens);
  return out;
}

Pos pos_of_lemma(std::string_view lemma) {
  if (auto it = pos_lexicon().find(lemma); it != pos_lexicon().end()) return it->second;
  if (has_digit(lemma) || is_punctuation_token(lemma)) return Pos::Other;
  for (auto s : {"ify", "ize"})
    if (ends_with(lemma, s)) return Pos::Verb;
  for (auto s : {"ous", "al", "ive", "ful", "able", "ible"})
    if (ends_with(lemma, s)) return Pos::Adj;
  if (ends_with(lemma, "ly")) return Pos::Adv;
  return Pos::Noun;
}

std::vector<Token> tag_pos(std::vector<Token> tokens) {
  for (auto& t : tokens) t.pos = pos_of_lemma(t.lemma.empty() ? to_lower_ascii(t.surface) : t.lemma);
  return tokens;
}

ProcessedProvision preprocess_provision(const Provision& provision,
                                        const PreprocessResources& resources) {
  std::vector<Token> tokens;
  for (auto& [surface, lemma] : lemmatize(tokenize(provision.text)))
    tokens.push_back(Token{surface, lemma, Pos::Noun, Entity::None});

  TaggedTokens tagged = tag_entities(std::move(tokens), resources.gazetteer);

  // Filter, remapping span bounds onto the surviving tokens.
  std::vector<std::size_t> new_index(tagged.tokens.size() + 1, 0);
  ProcessedProvision out;
  out.provision_id = provision.id;
  for (std::size_t i = 0; i < tagged.tokens.size(); ++i) {
    new_index[i] = out.tokens.size();
    const Token& t = tagged.tokens[i];
    if (!is_stopped(t.surface, t.lemma, resources.stopwords)) out.tokens.push_back(t);
  }
  new_index[tagged.tokens.size()] = out.tokens.size();
  for (const auto& span : tagged.spans) {
    EntitySpan mapped{new_index[span.begin], new_index[span.end], span.entity};
    if (mapped.begin < mapped.end) out.entity_spans.push_back(mapped);
  }

  out.tokens = tag_pos(std::move(out.tokens));
  out.empty = out.tokens.empty();
  return out;
}

std::vector<ProcessedProvision> preprocess_corpus(const Corpus& corpus,
                                                  const PreprocessResources& resources) {
  std::vector<ProcessedProvision> out(corpus.provisions.size());
  parallel_for(out.size(), [&](std::size_t i) {
    out[i] = preprocess_provision(corpus.provisions[i], resources);
  });
  return out;
}

std::vector<ProcessedProvision> preprocess_corpora(std::span<const Corpus> corpora,
                                                   const PreprocessResources& resources) {
  std::vector<const Provision*> all;
  for (const auto& c : corpora)
    for (const auto& p : c.provisions) all.push_back(&p);
  std::vector<ProcessedProvision> out(all.size());
  parallel_for(out.size(), [&](std::size_t i) { out[i] = preprocess_provision(*all[i], resources); });
  return out;
}

std::string processed_to_jsonl(const std::vector<ProcessedProvision>& processed) {
  using nlohmann::json;
  std::string out;
  for (const auto& p : processed) {
    json tokens = json::array();
    for (const auto& t : p.tokens)
      tokens.push_back({{"surface", t.surface}, {"lemma", t.lemma}, {"pos", to_string(t.pos)},
                        {"entity", to_string(t.entity)}});
    json spans = json::array();
    for (const auto& s : p.entity_spans) spans.push_back({s.begin, s.end, to_string(s.entity)});
    json rec = {{"id", p.provision_id}, {"tokens", tokens}, {"entity_spans", spans},
                {"empty", p.empty}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<ProcessedProvision> processed_from_jsonl(std::string_view text) {
  using nlohmann::json;
  std::vector<ProcessedProvision> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      json rec = json::parse(line);
      ProcessedProvision p;
      p.provision_id = rec.at("id").get<std::string>();
      for (const auto& t : rec.at("tokens"))
        p.tokens.push_back(Token{t.at("surface").get<std::string>(), t.at("lemma").get<std::string>(),
                                 pos_from_string(t.at("pos").get<std::string>()),
                                 entity_from_string(t.at("entity").get<std::string>())});
      for (const auto& s : rec.at("entity_spans"))
        p.entity_spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>(),
                                  entity_from_string(s.at(2).get<std::string>())});
      p.empty = rec.at("empty").get<bool>();
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("preprocessed artifact line {}: {}", line_no, e.what()));
    }
  }
  return out;
}

}  // namespace regconv
