#pragma once

#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "regconv/corpus.hpp"

namespace regconv {

enum class Pos { Noun, Verb, Adj, Adv, Other };
enum class Entity { None, Money, DateDuration, LegalRef, Org, Percent };

std::string_view to_string(Pos pos);
std::string_view to_string(Entity entity);
Pos pos_from_string(std::string_view s);
Entity entity_from_string(std::string_view s);

struct Token {
  std::string surface;
  std::string lemma;
  Pos pos = Pos::Noun;
  Entity entity = Entity::None;

  friend bool operator==(const Token&, const Token&) = default;
};

/// Half-open token range [begin, end) tagged with an entity type.
struct EntitySpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  Entity entity = Entity::None;

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

struct ProcessedProvision {
  std::string provision_id;
  std::vector<Token> tokens;  // after stop-word removal
  std::vector<EntitySpan> entity_spans;
  bool empty = false;  // nothing left after filtering

  friend bool operator==(const ProcessedProvision&, const ProcessedProvision&) = default;
};

/// Stop list and ORG gazetteer. Defaults ship in data/ and are compiled in.
struct PreprocessResources {
  std::set<std::string> stopwords;
  std::vector<std::vector<std::string>> gazetteer;  // lowercased phrases, split on spaces

  static PreprocessResources defaults();
  /// One lemma per line; '#' starts a comment.
  static std::set<std::string> parse_stopwords(std::string_view text);
  /// One phrase per line; '#' starts a comment.
  static std::vector<std::vector<std::string>> parse_gazetteer(std::string_view text);
};

/// Whitespace split (Unicode-aware) with leading/trailing punctuation peeled
/// off as single-character tokens. "€20" and "4%" stay whole.
std::vector<std::string> tokenize(std::string_view text);

/// Lowercased, rule-based lemma of a single word.
std::string lemmatize_word(std::string_view word);
std::vector<std::pair<std::string, std::string>> lemmatize(const std::vector<std::string>& tokens);

bool is_punctuation_token(std::string_view surface);

std::vector<std::pair<std::string, std::string>> remove_stopwords(
    const std::vector<std::pair<std::string, std::string>>& tokens,
    const std::set<std::string>& stopwords);

struct TaggedTokens {
  std::vector<Token> tokens;
  std::vector<EntitySpan> spans;
};

/// Pattern + gazetteer entity tagging. Spans are non-overlapping; at each
/// position the longest match wins.
TaggedTokens tag_entities(std::vector<Token> tokens,
                          const std::vector<std::vector<std::string>>& gazetteer);

Pos pos_of_lemma(std::string_view lemma);
std::vector<Token> tag_pos(std::vector<Token> tokens);

/// Full pipeline for one provision: tokenize, lemmatize, tag entities on the
/// unfiltered sequence, drop stop words and punctuation (remapping spans),
/// then tag parts of speech.
ProcessedProvision preprocess_provision(const Provision& provision,
                                        const PreprocessResources& resources);

/// Output order equals input order regardless of thread count.
std::vector<ProcessedProvision> preprocess_corpus(const Corpus& corpus,
                                                  const PreprocessResources& resources);
std::vector<ProcessedProvision> preprocess_corpora(std::span<const Corpus> corpora,
                                                   const PreprocessResources& resources);

std::string processed_to_jsonl(const std::vector<ProcessedProvision>& processed);
std::vector<ProcessedProvision> processed_from_jsonl(std::string_view text);

}  // namespace regconv
