// Rule-based English lemmatizer: an exception lexicon followed by one
// noun-inflection rule and one verb-inflection rule, each applied at most once.

#include <algorithm>
#include <string>
#include <string_view>
#include <unordered_map>

#include "regconv/preprocess.hpp"

namespace regconv {

namespace {

const std::unordered_map<std::string_view, std::string_view>& exceptions() {
  static const std::unordered_map<std::string_view, std::string_view> table = {
      {"am", "be"}, {"is", "be"}, {"are", "be"}, {"was", "be"}, {"were", "be"},
      {"been", "be"}, {"being", "be"}, {"has", "have"}, {"had", "have"},
      {"having", "have"}, {"does", "do"}, {"did", "do"}, {"done", "do"},
      {"doing", "do"}, {"goes", "go"}, {"went", "go"}, {"gone", "go"},
      {"made", "make"}, {"making", "make"}, {"took", "take"}, {"taken", "take"},
      {"taking", "take"}, {"gave", "give"}, {"given", "give"}, {"giving", "give"},
      {"sold", "sell"}, {"selling", "sell"}, {"bought", "buy"}, {"held", "hold"},
      {"kept", "keep"}, {"paid", "pay"}, {"laid", "lay"}, {"met", "meet"},
      {"data", "data"}, {"media", "media"}, {"criteria", "criterion"},
      {"children", "child"}, {"people", "person"}, {"men", "man"}, {"women", "woman"},
      {"uses", "use"}, {"used", "use"}, {"using", "use"},
      {"during", "during"}, {"thing", "thing"}, {"things", "thing"}, {"nothing", "nothing"},
      {"anything", "anything"}, {"something", "something"}, {"everything", "everything"},
      {"ourselves", "ourselves"}, {"yourselves", "yourselves"}, {"themselves", "themselves"},
      {"need", "need"}, {"needed", "need"}, {"embed", "embed"}, {"embedded", "embed"},
      {"indeed", "indeed"}, {"proceed", "proceed"}, {"exceed", "exceed"},
      {"succeed", "succeed"}, {"hundred", "hundred"}, {"speed", "speed"},
      {"required", "require"}, {"requiring", "require"},
      {"provided", "provide"}, {"providing", "provide"},
      {"disclosed", "disclose"}, {"disclosing", "disclose"},
      {"deleted", "delete"}, {"deleting", "delete"},
      {"erased", "erase"}, {"erasing", "erase"},
      {"received", "receive"}, {"receiving", "receive"},
      {"noticed", "notice"}, {"enforced", "enforce"}, {"enforcing", "enforce"},
      {"produced", "produce"}, {"reduced", "reduce"}, {"purposes", "purpose"},
      {"analyses", "analysis"}, {"bases", "basis"}, {"focused", "focus"},
      {"processes", "process"}, {"accesses", "access"},
  };
  return table;
}

bool is_alpha_ascii(std::string_view w) {
  return !w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

bool ends_with(std::string_view w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

bool is_consonant(std::string_view w, std::size_t i) {
  switch (w[i]) {
    case 'a': case 'e': case 'i': case 'o': case 'u':
      return false;
    case 'y':
      return i == 0 || !is_consonant(w, i - 1);
    default:
      return true;
  }
}

bool has_vowel(std::string_view w) {
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!is_consonant(w, i)) return true;
  return false;
}

// Number of vowel-consonant sequences ([C](VC){m}[V]).
int measure(std::string_view w) {
  int m = 0;
  std::size_t i = 0;
  const std::size_t n = w.size();
  while (i < n && is_consonant(w, i)) ++i;
  while (i < n) {
    while (i < n && !is_consonant(w, i)) ++i;
    if (i >= n) break;
    while (i < n && is_consonant(w, i)) ++i;
    ++m;
  }
  return m;
}

bool ends_cvc(std::string_view w) {
  const std::size_t n = w.size();
  if (n < 3) return false;
  if (!is_consonant(w, n - 3) || is_consonant(w, n - 2) || !is_consonant(w, n - 1)) return false;
  const char last = w[n - 1];
  return last != 'w' && last != 'x' && last != 'y';
}

std::string noun_rule(std::string w) {
  if (w.size() > 4 && ends_with(w, "ies")) return w.substr(0, w.size() - 3) + "y";
  if (ends_with(w, "sses")) return w.substr(0, w.size() - 2);
  for (std::string_view s : {"xes", "zes", "ches", "shes"})
    if (ends_with(w, s) && w.size() > s.size() + 1) return w.substr(0, w.size() - 2);
  if (w.size() > 3 && ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") &&
      !ends_with(w, "is"))
    return w.substr(0, w.size() - 1);
  return w;
}

std::string restore_stem(std::string stem) {
  if (ends_with(stem, "at") || ends_with(stem, "bl") || ends_with(stem, "iz")) return stem + "e";
  const std::size_t n = stem.size();
  if (n >= 2 && stem[n - 1] == stem[n - 2] && is_consonant(stem, n - 1)) {
    const char c = stem[n - 1];
    if (c != 'l' && c != 's' && c != 'z') stem.pop_back();
    return stem;
  }
  if (measure(stem) == 1 && ends_cvc(stem)) return stem + "e";
  return stem;
}

std::string verb_rule(std::string w) {
  if (w.size() > 4 && ends_with(w, "ied")) return w.substr(0, w.size() - 3) + "y";
  for (std::string_view s : {"ing", "ed"}) {
    if (!ends_with(w, s)) continue;
    std::string stem = w.substr(0, w.size() - s.size());
    if (stem.size() >= 3 && has_vowel(stem)) return restore_stem(std::move(stem));
    return w;
  }
  return w;
}

std::string apply_rules(const std::string& w) { return verb_rule(noun_rule(w)); }

bool is_exception_key(const std::string& w) {
  auto it = exceptions().find(w);
  return it != exceptions().end() && it->second != w;
}

// A candidate lemma is accepted only if no rule would change it again, which
// makes lemmatization idempotent.
bool stable(const std::string& w) {
  if (is_exception_key(w)) return false;
  return w.size() <= 3 || apply_rules(w) == w;
}

}  // namespace

std::string lemmatize_word(std::string_view word) {
  std::string w(word);
  for (char& c : w)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');

  if (auto it = exceptions().find(w); it != exceptions().end()) return std::string(it->second);
  if (w.size() <= 3 || !is_alpha_ascii(w)) return w;

  std::string full = apply_rules(w);
  if (stable(full)) return full;
  std::string noun_only = noun_rule(w);
  if (stable(noun_only)) return noun_only;
  return w;
}

std::vector<std::pair<std::string, std::string>> lemmatize(const std::vector<std::string>& tokens) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.emplace_back(t, lemmatize_word(t));
  return out;
}

}  // namespace regconv
