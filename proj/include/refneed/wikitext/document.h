#ifndef REFNEED_WIKITEXT_DOCUMENT_H_
#define REFNEED_WIKITEXT_DOCUMENT_H_

#include <cstdint>
#include <string>
#include <vector>

namespace refneed {

// Identity of an article revision.
struct RevisionMeta {
  std::string lang;
  std::int64_t rev_id = 0;
  std::int64_t page_id = 0;
  std::string page_title;

  std::string wiki_db() const { return lang + "wiki"; }
  bool operator==(const RevisionMeta&) const = default;
};

struct RawRevision {
  std::string lang;
  std::int64_t rev_id = 0;
  std::int64_t page_id = 0;
  std::string page_title;
  std::string wikitext;

  RevisionMeta meta() const { return {lang, rev_id, page_id, page_title}; }
  bool operator==(const RawRevision&) const = default;
};

enum class AnchorKind { kRefTag, kNamedRefReuse, kCitationTemplate };

const char* to_string(AnchorKind kind);

// Position of a removed reference marker. `offset` is a byte offset into the
// owning paragraph's UTF-8 plaintext.
struct RefAnchor {
  std::size_t offset = 0;
  AnchorKind kind = AnchorKind::kRefTag;

  bool operator==(const RefAnchor&) const = default;
};

struct Paragraph {
  std::string plaintext;
  std::vector<RefAnchor> anchors;  // sorted by offset
  bool list_item = false;

  bool operator==(const Paragraph&) const = default;
};

struct Section {
  std::string title;  // normalized; "" for the lead section
  int level = 0;      // heading level, 0 for the lead section
  bool excluded = false;
  std::vector<Paragraph> paragraphs;

  bool operator==(const Section&) const = default;
};

struct ParsedDocument {
  RevisionMeta meta;
  std::vector<Section> sections;

  bool operator==(const ParsedDocument&) const = default;
};

}  // namespace refneed

#endif  // REFNEED_WIKITEXT_DOCUMENT_H_
