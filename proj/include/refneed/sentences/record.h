#ifndef REFNEED_SENTENCES_RECORD_H_
#define REFNEED_SENTENCES_RECORD_H_

#include <cstdint>
#include <string>

namespace refneed {

// One labeled sentence of the corpus. label is 1 when the sentence carries a
// reference in its source revision.
struct SentenceRecord {
  std::string wiki_db;
  std::int64_t page_id = 0;
  std::string page_title;
  std::int64_t revision_id = 0;
  std::string section_name;
  std::string sentence;
  std::string next_sent;
  std::string prev_sent;
  std::string paragraph;
  int label = 0;

  // Language code derived from wiki_db ("enwiki" -> "en").
  std::string lang() const;

  bool operator==(const SentenceRecord&) const = default;
};

}  // namespace refneed

#endif  // REFNEED_SENTENCES_RECORD_H_
