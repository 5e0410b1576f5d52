#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace regconv {

/// One addressable unit of regulation text.
struct Provision {
  std::string id;
  std::string corpus_id;
  std::string citation;
  std::string text;
  std::optional<std::string> label;

  friend bool operator==(const Provision&, const Provision&) = default;
};

struct Corpus {
  std::string corpus_id;
  std::vector<Provision> provisions;  // document order
  std::string source_path;
};

/// Ordered, duplicate-free set of annotation classes.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> classes);

  /// Aspect rows of the GDPR/CCPA comparison table.
  static LabelSet defaults();

  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }
  bool contains(const std::string& name) const;
  /// Throws DataError for unknown classes.
  std::size_t index_of(const std::string& name) const;

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  std::vector<std::string> classes_;
};

/// A heading pattern is an ECMAScript regex anchored at the start of a line
/// (after indentation); capture group 1 becomes the provision's citation.
struct HeadingRules {
  std::vector<std::string> patterns;

  static HeadingRules defaults();
};

/// Reads a JSON Lines provision file. Missing ids become "<corpus_id>:<index>".
Corpus load_corpus(const std::string& path, const std::string& corpus_id);

/// Writes the provisions in the same JSONL schema `load_corpus` reads.
void write_corpus(const Corpus& corpus, const std::string& path);
std::string corpus_to_jsonl(const Corpus& corpus);

/// Splits raw regulation text into provisions at heading lines.
///
/// The citation is the heading match; the provision text is everything up to
/// the next heading, trimmed. Text before the first heading becomes a
/// "preamble" provision. A heading with an empty body is folded into the
/// following provision's text (or the previous one's, at the end).
std::vector<Provision> segment_document(const std::string& text, const std::string& corpus_id,
                                        const HeadingRules& rules = HeadingRules::defaults());

/// Segments a plain-text file into a corpus.
Corpus load_text_document(const std::string& path, const std::string& corpus_id,
                          const HeadingRules& rules = HeadingRules::defaults());

/// Applies an id -> class JSON object. Unreferenced provisions keep their label.
Corpus attach_labels(Corpus corpus, const std::string& labels_path, const LabelSet& label_set);
Corpus attach_labels(Corpus corpus, const std::map<std::string, std::string>& labels,
                     const LabelSet& label_set);

/// Throws DataError on an id repeated within or across corpora, or a label
/// outside `label_set` (when given).
void validate_corpora(std::span<const Corpus> corpora, const LabelSet* label_set = nullptr);

}  // namespace regconv
