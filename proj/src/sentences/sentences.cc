#include "refneed/sentences/sentences.h"

#include <algorithm>

#include "refneed/common/errors.h"
#include "refneed/common/unicode.h"

namespace refneed {

std::string SentenceRecord::lang() const {
  constexpr std::string_view kSuffix = "wiki";
  if (wiki_db.size() > kSuffix.size() &&
      std::string_view(wiki_db).substr(wiki_db.size() - kSuffix.size()) == kSuffix) {
    return wiki_db.substr(0, wiki_db.size() - kSuffix.size());
  }
  return wiki_db;
}

namespace {

struct Char {
  char32_t cp;
  std::size_t offset;
};

std::vector<Char> decode_all(std::string_view s) {
  std::vector<Char> out;
  out.reserve(s.size());
  for (std::size_t pos = 0; pos < s.size();) {
    const std::size_t start = pos;
    out.push_back({unicode::decode(s, pos), start});
  }
  return out;
}

bool is_latin_terminator(char32_t cp) { return cp == '.' || cp == '!' || cp == '?'; }

bool is_closer(char32_t cp) {
  switch (cp) {
    case '"': case '\'': case ')': case ']': case '}':
    case 0xBB: case 0x2019: case 0x201D: case 0x203A:
    case 0x300D: case 0x300F: case 0xFF09: case 0x3011: case 0x3009:
    case 0x300B: case 0x3015: case 0xFF3D:
      return true;
    default:
      return false;
  }
}

bool is_opener(char32_t cp) {
  switch (cp) {
    case '"': case '\'': case '(': case '[': case '{':
    case 0xAB: case 0x2018: case 0x201C: case 0x2039: case 0x201E:
      return true;
    default:
      return false;
  }
}

// Word preceding chars[i] (a period), with leading openers removed.
std::u32string token_before(const std::vector<Char>& chars, std::size_t i) {
  std::size_t b = i;
  while (b > 0 && !unicode::is_whitespace(chars[b - 1].cp)) --b;
  while (b < i && is_opener(chars[b].cp)) ++b;
  std::u32string token;
  for (std::size_t k = b; k < i; ++k) token.push_back(chars[k].cp);
  return token;
}

// "U.S", "e.g" style dotted letter sequences.
bool is_dotted_acronym(const std::u32string& token) {
  if (token.size() < 3) return false;
  for (std::size_t k = 0; k < token.size(); ++k) {
    if (k % 2 == 0 ? !unicode::is_letter(token[k]) : token[k] != '.') return false;
  }
  return token.size() % 2 == 1;
}

bool suppresses_split(const std::u32string& token, const LanguageSettings& s) {
  if (token.empty()) return false;
  if (s.abbreviations.count(unicode::to_lower(unicode::to_utf8(token)))) return true;
  if (token.size() == 1 && unicode::is_uppercase_letter(token[0])) return true;
  if (is_dotted_acronym(token)) return true;
  if (s.numeric_ordinals &&
      std::all_of(token.begin(), token.end(),
                  [](char32_t c) { return unicode::is_digit(c); })) {
    return true;
  }
  return false;
}

}  // namespace

std::vector<SentenceSpan> segment(std::string_view paragraph,
                                  const LanguageSettings& settings) {
  std::vector<SentenceSpan> spans;
  const std::vector<Char> chars = decode_all(paragraph);
  const std::size_t n = chars.size();
  auto offset = [&](std::size_t i) { return i < n ? chars[i].offset : paragraph.size(); };
  auto is_extra = [&](char32_t cp) {
    return settings.extra_terminators.find(cp) != std::u32string::npos;
  };
  auto skip_space = [&](std::size_t i) {
    while (i < n && unicode::is_whitespace(chars[i].cp)) ++i;
    return i;
  };

  std::size_t start = skip_space(0);
  std::size_t i = start;
  while (i < n) {
    const char32_t cp = chars[i].cp;
    if (!is_latin_terminator(cp) && !is_extra(cp)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    bool extra = false;
    while (j < n && (is_latin_terminator(chars[j].cp) || is_extra(chars[j].cp))) {
      extra = extra || is_extra(chars[j].cp);
      ++j;
    }
    std::size_t k = j;
    while (k < n && is_closer(chars[k].cp)) ++k;

    bool split = true;
    if (!extra) {
      const std::size_t next = skip_space(k);
      if (k < n && !unicode::is_whitespace(chars[k].cp)) {
        split = false;
      } else if (next < n && unicode::is_lowercase_letter(chars[next].cp)) {
        split = false;
      } else if (j - i == 1 && cp == '.' && next < n &&
                 suppresses_split(token_before(chars, i), settings)) {
        split = false;
      }
    }
    if (split) {
      spans.push_back({offset(start), offset(k)});
      start = skip_space(k);
    }
    i = k > i ? k : i + 1;
  }
  if (start < n) {
    std::size_t end = n;
    while (end > start && unicode::is_whitespace(chars[end - 1].cp)) --end;
    spans.push_back({offset(start), offset(end)});
  }
  return spans;
}

std::vector<SentenceSpan> segment(std::string_view paragraph, std::string_view lang,
                                  const LangConfig& config) {
  return segment(paragraph, config.at(lang));
}

std::vector<bool> assign_labels(std::string_view paragraph,
                                const std::vector<SentenceSpan>& spans,
                                const std::vector<RefAnchor>& anchors) {
  for (const RefAnchor& a : anchors) {
    if (a.offset > paragraph.size()) {
      throw AnchorOutOfRange("anchor offset " + std::to_string(a.offset) +
                             " beyond paragraph length " +
                             std::to_string(paragraph.size()));
    }
  }
  std::vector<bool> cited(spans.size(), false);
  std::vector<std::size_t> extended(spans.size());
  for (std::size_t s = 0; s < spans.size(); ++s) {
    const std::size_t limit =
        s + 1 < spans.size() ? spans[s + 1].begin : paragraph.size();
    std::size_t end = spans[s].end;
    while (end < limit) {
      std::size_t pos = end;
      const char32_t cp = unicode::decode(paragraph, pos);
      if (!unicode::is_whitespace(cp) && !unicode::is_punctuation(cp)) break;
      end = std::min(pos, limit);
    }
    extended[s] = end;
  }
  for (const RefAnchor& a : anchors) {
    for (std::size_t s = 0; s < spans.size(); ++s) {
      if (a.offset >= spans[s].begin && a.offset <= extended[s]) {
        cited[s] = true;
        break;
      }
    }
  }
  return cited;
}

std::size_t word_count(std::string_view text, LengthUnit unit) {
  std::size_t count = 0;
  bool in_word = false;
  for (std::size_t pos = 0; pos < text.size();) {
    const bool space = unicode::is_whitespace(unicode::decode(text, pos));
    if (unit == LengthUnit::kChars) {
      if (!space) ++count;
    } else {
      if (!space && !in_word) ++count;
      in_word = !space;
    }
  }
  return count;
}

std::vector<SentenceUnit> build_units(const ParsedDocument& doc,
                                      const LangConfig& config) {
  const LanguageSettings& settings = config.at(doc.meta.lang);
  std::vector<SentenceUnit> units;
  for (const Section& section : doc.sections) {
    if (section.excluded) continue;
    for (const Paragraph& p : section.paragraphs) {
      std::vector<SentenceSpan> spans;
      if (p.list_item) {
        const std::string_view trimmed = unicode::trim(p.plaintext);
        if (!trimmed.empty()) {
          const std::size_t begin = trimmed.data() - p.plaintext.data();
          spans.push_back({begin, begin + trimmed.size()});
        }
      } else {
        spans = segment(p.plaintext, settings);
      }
      const std::vector<bool> cited = assign_labels(p.plaintext, spans, p.anchors);
      auto text = [&](std::size_t s) {
        return p.plaintext.substr(spans[s].begin, spans[s].end - spans[s].begin);
      };
      for (std::size_t s = 0; s < spans.size(); ++s) {
        SentenceUnit u;
        u.text = text(s);
        u.section_title = section.title;
        u.prev = s > 0 ? text(s - 1) : "";
        u.next = s + 1 < spans.size() ? text(s + 1) : "";
        u.paragraph = p.plaintext;
        u.cited = cited[s];
        u.word_count = word_count(u.text, settings.length_unit);
        units.push_back(std::move(u));
      }
    }
  }
  return units;
}

std::vector<SentenceRecord> build_records(const ParsedDocument& doc,
                                          const LangConfig& config) {
  std::vector<SentenceRecord> records;
  for (SentenceUnit& u : build_units(doc, config)) {
    SentenceRecord r;
    r.wiki_db = doc.meta.wiki_db();
    r.page_id = doc.meta.page_id;
    r.page_title = doc.meta.page_title;
    r.revision_id = doc.meta.rev_id;
    r.section_name = std::move(u.section_title);
    r.sentence = std::move(u.text);
    r.next_sent = std::move(u.next);
    r.prev_sent = std::move(u.prev);
    r.paragraph = std::move(u.paragraph);
    r.label = u.cited ? 1 : 0;
    records.push_back(std::move(r));
  }
  return records;
}

bool RecordFilter::long_enough(const SentenceRecord& record) const {
  const std::string lang = record.lang();
  const LengthUnit unit =
      config_.supports(lang) ? config_.at(lang).length_unit : LengthUnit::kWords;
  const std::size_t minimum = unit == LengthUnit::kChars ? kMinChars : kMinWords;
  return word_count(record.sentence, unit) >= minimum;
}

bool RecordFilter::keep(const SentenceRecord& record) {
  if (!long_enough(record)) return false;
  return seen_.insert(record.sentence).second;
}

std::vector<SentenceRecord> filter_records(const std::vector<SentenceRecord>& records,
                                           const LangConfig& config) {
  RecordFilter filter(config);
  std::vector<SentenceRecord> out;
  for (const SentenceRecord& r : records) {
    if (filter.keep(r)) out.push_back(r);
  }
  return out;
}

}  // namespace refneed
