#ifndef REFNEED_SENTENCES_SENTENCES_H_
#define REFNEED_SENTENCES_SENTENCES_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "refneed/common/lang_config.h"
#include "refneed/sentences/record.h"
#include "refneed/wikitext/document.h"

namespace refneed {

// Byte range [begin, end) of one sentence in its paragraph. Leading and
// trailing whitespace is never part of a span.
struct SentenceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const SentenceSpan&) const = default;
};

// Rule-based segmentation. Latin terminators (. ! ?) split only when followed
// by whitespace or the end of the paragraph and not when the next word starts
// in lowercase or the period closes an abbreviation, an initial, a dotted
// acronym or (where configured) a numeric ordinal. Language-specific
// terminators such as 。 split unconditionally. Closing quotes and brackets
// after a terminator stay with the sentence.
std::vector<SentenceSpan> segment(std::string_view paragraph,
                                  const LanguageSettings& settings);
std::vector<SentenceSpan> segment(std::string_view paragraph,
                                  std::string_view lang, const LangConfig& config);

// A sentence is cited when an anchor falls in [begin, end'] where end' extends
// the span through the whitespace and punctuation that follows it, stopping at
// the next span. An anchor on a shared boundary goes to the earlier sentence.
// Throws AnchorOutOfRange when an anchor lies past the paragraph end.
std::vector<bool> assign_labels(std::string_view paragraph,
                                const std::vector<SentenceSpan>& spans,
                                const std::vector<RefAnchor>& anchors);

// Length measure used by the minimum-length filter: whitespace-separated
// words, or non-whitespace characters for languages written without spaces.
std::size_t word_count(std::string_view text, LengthUnit unit);

struct SentenceUnit {
  std::string text;
  std::string section_title;
  std::string prev;
  std::string next;
  std::string paragraph;
  bool cited = false;
  std::size_t word_count = 0;

  bool operator==(const SentenceUnit&) const = default;
};

// Sentences of every non-excluded section, in document order. List-item
// paragraphs yield exactly one sentence.
std::vector<SentenceUnit> build_units(const ParsedDocument& doc,
                                      const LangConfig& config);

std::vector<SentenceRecord> build_records(const ParsedDocument& doc,
                                          const LangConfig& config);

constexpr std::size_t kMinWords = 6;
constexpr std::size_t kMinChars = 12;

// Streaming form of filter_records: remembers every sentence text it has
// accepted so duplicates are removed across all records it sees.
class RecordFilter {
 public:
  explicit RecordFilter(const LangConfig& config) : config_(config) {}

  bool long_enough(const SentenceRecord& record) const;
  // True when the record passes the length filter and its sentence text has
  // not been kept before.
  bool keep(const SentenceRecord& record);

 private:
  const LangConfig& config_;
  std::unordered_set<std::string> seen_;
};

// Drops records shorter than the minimum length and exact duplicate
// sentences (first occurrence wins).
std::vector<SentenceRecord> filter_records(const std::vector<SentenceRecord>& records,
                                           const LangConfig& config);

}  // namespace refneed

#endif  // REFNEED_SENTENCES_SENTENCES_H_
