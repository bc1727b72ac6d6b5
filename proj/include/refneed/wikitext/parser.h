#ifndef REFNEED_WIKITEXT_PARSER_H_
#define REFNEED_WIKITEXT_PARSER_H_

#include <string_view>

#include "refneed/common/lang_config.h"
#include "refneed/wikitext/document.h"

namespace refneed {

// Converts revision wikitext into sections of reference-free plaintext
// paragraphs. <ref> tags, self-closing named refs and configured citation
// templates become RefAnchors at the position they occupied; other
// templates, comments, tables, file and category links are removed and
// internal links reduced to their display text. Unclosed constructs are
// recovered from; MalformedMarkup is thrown only when recovery left no
// paragraph at all. Throws UnknownLanguage when rev.lang is not configured.
ParsedDocument parse_document(const RawRevision& rev, const LangConfig& config);

// Same, for a single language's settings.
ParsedDocument parse_document(const RawRevision& rev,
                              const LanguageSettings& settings);

// True when one of the language's featured-article templates is invoked
// anywhere in the text. Template names match case-insensitively on the
// first letter only, as MediaWiki does.
bool detect_featured(std::string_view wikitext, const LanguageSettings& settings);
bool detect_featured(std::string_view wikitext, std::string_view lang,
                     const LangConfig& config);

// True when the normalized title is on the language's exclusion list.
// Throws UnknownLanguage.
bool is_excluded_section(std::string_view title, std::string_view lang,
                         const LangConfig& config);

}  // namespace refneed

#endif  // REFNEED_WIKITEXT_PARSER_H_
