#include "refneed/wikitext/parser.h"

#include <algorithm>
#include <array>
#include <cstring>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "refneed/common/errors.h"
#include "refneed/common/unicode.h"

namespace refneed {

const char* to_string(AnchorKind kind) {
  switch (kind) {
    case AnchorKind::kRefTag:
      return "ref-tag";
    case AnchorKind::kNamedRefReuse:
      return "named-ref-reuse";
    case AnchorKind::kCitationTemplate:
      return "citation-template";
  }
  return "unknown";
}

namespace {

constexpr int kMaxNesting = 32;
constexpr std::size_t kMaxTagLength = 2048;

bool starts_with_at(std::string_view s, std::size_t pos, std::string_view p) {
  return s.size() - std::min(pos, s.size()) >= p.size() &&
         s.compare(pos, p.size(), p) == 0;
}

char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c;
}

bool istarts_with_at(std::string_view s, std::size_t pos, std::string_view p) {
  if (s.size() - std::min(pos, s.size()) < p.size()) return false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (ascii_lower(s[pos + i]) != p[i]) return false;
  }
  return true;
}

std::size_t ifind(std::string_view s, std::string_view needle, std::size_t from,
                  std::size_t end) {
  if (needle.size() > end) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= end; ++i) {
    if (istarts_with_at(s, i, needle)) return i;
  }
  return std::string_view::npos;
}

bool is_ascii_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_blank_line(std::string_view line) {
  return unicode::trim(line).empty();
}

// Removes HTML comments. An unclosed comment runs to the end of the text.
std::string strip_comments(std::string_view text, bool& recovered) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t open = text.find("<!--", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    const std::size_t close = text.find("-->", open + 4);
    if (close == std::string_view::npos) {
      recovered = true;
      break;
    }
    pos = close + 3;
  }
  return out;
}

// Accumulates plaintext and anchor positions for one paragraph.
class TextBuilder {
 public:
  void append(std::string_view s) { text_.append(s); }
  void push(char c) { text_.push_back(c); }
  void anchor(AnchorKind kind) { anchors_.push_back({text_.size(), kind}); }
  bool has_content() const { return !text_.empty() || !anchors_.empty(); }

  // Removes forbidden markup residue, collapses whitespace and remaps anchor
  // offsets onto the normalized text.
  Paragraph finish(bool list_item) {
    sanitize();
    Paragraph p;
    p.list_item = list_item;
    std::vector<std::size_t> remap(text_.size() + 1, 0);
    std::string& out = p.plaintext;
    out.reserve(text_.size());
    bool pending_space = false;
    for (std::size_t pos = 0; pos < text_.size();) {
      const std::size_t start = pos;
      const char32_t cp = unicode::decode(text_, pos);
      if (unicode::is_whitespace(cp) || (cp < 0x20) || cp == 0x7F) {
        for (std::size_t i = start; i < pos; ++i) remap[i] = out.size();
        if (unicode::is_whitespace(cp)) pending_space = !out.empty();
        continue;
      }
      if (pending_space) out.push_back(' ');
      pending_space = false;
      for (std::size_t i = start; i < pos; ++i) remap[i] = out.size();
      unicode::append_utf8(out, cp);
    }
    remap[text_.size()] = out.size();
    for (const RefAnchor& a : anchors_) {
      p.anchors.push_back({std::min(remap[a.offset], out.size()), a.kind});
    }
    std::stable_sort(p.anchors.begin(), p.anchors.end(),
                     [](const RefAnchor& a, const RefAnchor& b) {
                       return a.offset < b.offset;
                     });
    text_.clear();
    anchors_.clear();
    return p;
  }

 private:
  void erase(std::size_t pos, std::size_t len) {
    text_.erase(pos, len);
    for (RefAnchor& a : anchors_) {
      if (a.offset > pos) a.offset = a.offset >= pos + len ? a.offset - len : pos;
    }
  }

  void sanitize() {
    static constexpr std::array<std::string_view, 4> kForbidden = {
        "<ref", "</ref", "{{", "}}"};
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::string_view f : kForbidden) {
        std::size_t at;
        while ((at = ifind(text_, f, 0, text_.size())) != std::string::npos) {
          erase(at, f.size());
          changed = true;
        }
      }
    }
  }

  std::string text_;
  std::vector<RefAnchor> anchors_;
};

// Tags whose content is dropped together with the tag.
const std::unordered_set<std::string>& opaque_tags() {
  static const std::unordered_set<std::string> tags = {
      "math", "chem", "ce", "gallery", "syntaxhighlight", "source", "pre",
      "timeline", "score", "graph", "mapframe", "maplink", "templatestyles",
      "hiero", "imagemap", "inputbox", "categorytree", "table", "includeonly",
      "references", "indicator", "charinsert", "style", "script"};
  return tags;
}

// Tags that are removed while their content is kept.
const std::unordered_set<std::string>& transparent_tags() {
  static const std::unordered_set<std::string> tags = {
      "small", "big", "span", "div", "sup", "sub", "b", "i", "u", "s", "del",
      "ins", "strike", "em", "strong", "abbr", "blockquote", "center", "p",
      "cite", "q", "font", "code", "tt", "kbd", "var", "samp", "mark", "bdi",
      "bdo", "nowiki", "noinclude", "onlyinclude", "poem", "tr", "td", "th",
      "caption", "tbody", "thead", "ul", "ol", "li", "dl", "dt", "dd", "h1",
      "h2", "h3", "h4", "h5", "h6", "hr", "wbr", "time", "data", "ruby", "rb",
      "rt", "rp", "section", "dfn", "languages", "translate", "tvar"};
  return tags;
}

const std::unordered_map<std::string, char32_t>& named_entities() {
  static const std::unordered_map<std::string, char32_t> entities = {
      {"nbsp", 0xA0},   {"amp", '&'},       {"lt", '<'},       {"gt", '>'},
      {"quot", '"'},    {"apos", '\''},     {"ndash", 0x2013}, {"mdash", 0x2014},
      {"hellip", 0x2026}, {"minus", 0x2212}, {"times", 0xD7},  {"deg", 0xB0},
      {"thinsp", 0x2009}, {"ensp", 0x2002}, {"emsp", 0x2003},  {"lsquo", 0x2018},
      {"rsquo", 0x2019}, {"ldquo", 0x201C}, {"rdquo", 0x201D}, {"laquo", 0xAB},
      {"raquo", 0xBB},  {"middot", 0xB7},   {"copy", 0xA9},    {"reg", 0xAE},
      {"trade", 0x2122}, {"euro", 0x20AC},  {"pound", 0xA3},   {"yen", 0xA5},
      {"cent", 0xA2},   {"sect", 0xA7},     {"para", 0xB6},    {"plusmn", 0xB1},
      {"frac12", 0xBD}, {"frac14", 0xBC},   {"frac34", 0xBE},  {"sup2", 0xB2},
      {"sup3", 0xB3},   {"micro", 0xB5},    {"prime", 0x2032}, {"Prime", 0x2033},
      {"bull", 0x2022}, {"zwnj", 0x200C},   {"zwj", 0x200D},   {"shy", 0},
      {"lrm", 0},       {"rlm", 0}};
  return entities;
}

class Parser {
 public:
  Parser(const RawRevision& rev, const LanguageSettings& settings)
      : settings_(settings) {
    src_ = strip_comments(unicode::sanitize_utf8(rev.wikitext), recovered_);
    doc_.meta = rev.meta();
  }

  ParsedDocument run() {
    begin_section("", 0);
    std::size_t pos = 0;
    const std::size_t n = src_.size();
    while (pos < n) {
      std::size_t line_end = src_.find('\n', pos);
      if (line_end == std::string::npos) line_end = n;
      const std::string_view line(src_.data() + pos, line_end - pos);

      if (is_blank_line(line)) {
        flush_paragraph();
        pos = line_end + 1;
        continue;
      }
      int level = 0;
      std::size_t inner_begin = 0, inner_end = 0;
      if (is_heading(line, level, inner_begin, inner_end)) {
        flush_paragraph();
        TextBuilder title;
        parse_inline(pos + inner_begin, pos + inner_end, title, false, 0);
        end_section();
        begin_section(normalize_section_title(title.finish(false).plaintext),
                      level);
        pos = line_end + 1;
        continue;
      }
      std::size_t lead = 0;
      while (lead < line.size() &&
             (line[lead] == ' ' || line[lead] == '\t' || line[lead] == ':')) {
        ++lead;
      }
      if (starts_with_at(line, lead, "{|")) {
        flush_paragraph();
        pos = skip_table(pos);
        continue;
      }
      if (starts_with_at(line, 0, "----")) {
        flush_paragraph();
        pos = line_end + 1;
        continue;
      }
      const char first = line.front();
      if (first == '*' || first == '#' || first == ':' || first == ';') {
        flush_paragraph();
        std::size_t start = pos;
        while (start < line_end &&
               std::strchr("*#:;", src_[start]) != nullptr) {
          ++start;
        }
        TextBuilder item;
        pos = parse_inline(start, n, item, true, 0);
        emit(item, true);
        continue;
      }
      if (paragraph_.has_content()) paragraph_.push('\n');
      pos = parse_inline(pos, n, paragraph_, true, 0);
    }
    flush_paragraph();
    end_section();

    std::size_t paragraphs = 0;
    for (const Section& s : doc_.sections) paragraphs += s.paragraphs.size();
    if (recovered_ && paragraphs == 0 && !unicode::trim(src_).empty()) {
      throw MalformedMarkup("revision " + std::to_string(doc_.meta.rev_id) +
                            ": unbalanced markup left no recoverable text");
    }
    return std::move(doc_);
  }

 private:
  static bool is_heading(std::string_view line, int& level,
                         std::size_t& inner_begin, std::size_t& inner_end) {
    std::size_t end = line.size();
    while (end > 0 && (line[end - 1] == ' ' || line[end - 1] == '\t' ||
                       line[end - 1] == '\r')) {
      --end;
    }
    std::size_t lead = 0;
    while (lead < end && line[lead] == '=') ++lead;
    std::size_t trail = 0;
    while (trail < end && line[end - 1 - trail] == '=') ++trail;
    if (lead == 0 || trail == 0) return false;
    const std::size_t depth = std::min<std::size_t>({lead, trail, 6});
    if (end < 2 * depth + 1) return false;
    level = static_cast<int>(depth);
    inner_begin = depth;
    inner_end = end - depth;
    return true;
  }

  void begin_section(std::string title, int level) {
    current_ = Section{};
    current_.excluded = settings_.excluded_sections.count(title) > 0;
    current_.title = std::move(title);
    current_.level = level;
  }

  void end_section() {
    if (current_.level == 0 && current_.paragraphs.empty()) return;
    for (const Section& s : doc_.sections) {
      if (s.title == current_.title && s.paragraphs == current_.paragraphs) {
        return;
      }
    }
    doc_.sections.push_back(std::move(current_));
    current_ = Section{};
  }

  void emit(TextBuilder& builder, bool list_item) {
    Paragraph p = builder.finish(list_item);
    if (!p.plaintext.empty()) current_.paragraphs.push_back(std::move(p));
  }

  void flush_paragraph() {
    if (paragraph_.has_content()) emit(paragraph_, false);
  }

  // Skips a (possibly nested) table starting at the line at `pos`.
  std::size_t skip_table(std::size_t pos) {
    int depth = 0;
    const std::size_t n = src_.size();
    while (pos < n) {
      std::size_t line_end = src_.find('\n', pos);
      if (line_end == std::string::npos) line_end = n;
      std::size_t lead = pos;
      while (lead < line_end &&
             (src_[lead] == ' ' || src_[lead] == '\t' || src_[lead] == ':')) {
        ++lead;
      }
      if (starts_with_at(src_, lead, "{|")) {
        ++depth;
      } else if (starts_with_at(src_, lead, "|}")) {
        if (--depth == 0) return line_end + 1;
      }
      pos = line_end + 1;
    }
    recovered_ = true;
    return n;
  }

  // Position of the "}}" closing the template opened at `pos`, or npos.
  std::size_t template_close(std::size_t pos, std::size_t end) const {
    int depth = 0;
    std::size_t i = pos;
    while (i + 1 < end) {
      if (src_[i] == '{' && src_[i + 1] == '{') {
        ++depth;
        i += 2;
      } else if (src_[i] == '}' && src_[i + 1] == '}') {
        if (--depth == 0) return i;
        i += 2;
      } else {
        ++i;
      }
    }
    return std::string::npos;
  }

  std::size_t link_close(std::size_t pos, std::size_t end) const {
    int depth = 0;
    std::size_t i = pos;
    while (i + 1 < end) {
      if (src_[i] == '[' && src_[i + 1] == '[') {
        ++depth;
        i += 2;
      } else if (src_[i] == ']' && src_[i + 1] == ']') {
        if (--depth == 0) return i;
        i += 2;
      } else {
        ++i;
      }
    }
    return std::string::npos;
  }

  std::size_t line_end_from(std::size_t pos, std::size_t end) const {
    const std::size_t nl = src_.find('\n', pos);
    return nl == std::string::npos ? end : std::min(nl, end);
  }

  // End of the paragraph containing `pos`: the newline that starts the next
  // blank line, or `end`.
  std::size_t paragraph_end_from(std::size_t pos, std::size_t end) const {
    std::size_t i = pos;
    while (i < end) {
      const std::size_t nl = src_.find('\n', i);
      if (nl == std::string::npos || nl >= end) return end;
      std::size_t next = src_.find('\n', nl + 1);
      if (next == std::string::npos) next = src_.size();
      if (is_blank_line(std::string_view(src_).substr(nl + 1, next - nl - 1))) {
        return nl;
      }
      i = nl + 1;
    }
    return end;
  }

  std::size_t handle_template(std::size_t pos, std::size_t end,
                              TextBuilder& out) {
    const std::size_t close = template_close(pos, end);
    if (close == std::string::npos) {
      recovered_ = true;
      return line_end_from(pos, end);
    }
    std::string_view body(src_.data() + pos + 2, close - pos - 2);
    const std::size_t bar = body.find('|');
    std::string_view name = body.substr(0, bar);
    if (name.find("{{") == std::string_view::npos) {
      if (settings_.citation_templates.count(canonical_template_name(name))) {
        out.anchor(AnchorKind::kCitationTemplate);
      }
    }
    return close + 2;
  }

  bool has_prefix(std::string_view target,
                  const std::vector<std::string>& prefixes) const {
    const std::size_t colon = target.find(':');
    if (colon == std::string_view::npos) return false;
    const std::string prefix =
        unicode::to_lower(unicode::collapse_whitespace(target.substr(0, colon)));
    return std::find(prefixes.begin(), prefixes.end(), prefix) != prefixes.end();
  }

  std::size_t handle_link(std::size_t pos, std::size_t end, TextBuilder& out,
                          int depth) {
    const std::size_t close = link_close(pos, end);
    if (close == std::string::npos) return pos + 2;
    const std::size_t inner = pos + 2;
    std::size_t bar = std::string::npos;
    {
      int braces = 0;
      for (std::size_t i = inner; i < close; ++i) {
        if (starts_with_at(src_, i, "{{")) {
          ++braces;
          ++i;
        } else if (starts_with_at(src_, i, "}}")) {
          --braces;
          ++i;
        } else if (src_[i] == '|' && braces <= 0) {
          bar = i;
          break;
        }
      }
    }
    std::string_view target = unicode::trim(std::string_view(src_).substr(
        inner, (bar == std::string::npos ? close : bar) - inner));
    const bool leading_colon = !target.empty() && target.front() == ':';
    if (leading_colon) target.remove_prefix(1);
    if (!leading_colon && (has_prefix(target, settings_.file_prefixes) ||
                           has_prefix(target, settings_.category_prefixes))) {
      return close + 2;
    }
    if (bar != std::string::npos && depth < kMaxNesting) {
      if (unicode::trim(std::string_view(src_).substr(bar + 1, close - bar - 1))
              .empty()) {
        // Pipe trick: namespace and trailing parenthetical are hidden.
        std::string_view shown = target.substr(
            target.find(':') == std::string_view::npos ? 0 : target.find(':') + 1);
        const std::size_t paren = shown.find(" (");
        out.append(unicode::trim(shown.substr(0, paren)));
      } else {
        parse_inline(bar + 1, close, out, false, depth + 1);
      }
      return close + 2;
    }
    std::string shown(target);
    std::replace(shown.begin(), shown.end(), '_', ' ');
    if (shown.find("{{") != std::string::npos ||
        shown.find("<") != std::string::npos) {
      TextBuilder nested;
      if (depth < kMaxNesting) {
        parse_inline(inner, bar == std::string::npos ? close : bar, out, false,
                     depth + 1);
      }
      return close + 2;
    }
    out.append(shown);
    return close + 2;
  }

  std::size_t handle_external_link(std::size_t pos, std::size_t end,
                                   TextBuilder& out, int depth) {
    static constexpr std::array<std::string_view, 6> kSchemes = {
        "http://", "https://", "//", "ftp://", "mailto:", "news:"};
    bool is_url = false;
    for (std::string_view scheme : kSchemes) {
      if (istarts_with_at(src_, pos + 1, scheme)) is_url = true;
    }
    if (!is_url) {
      out.push('[');
      return pos + 1;
    }
    const std::size_t line_end = line_end_from(pos, end);
    const std::size_t close = src_.find(']', pos);
    if (close == std::string::npos || close >= line_end) {
      out.push('[');
      return pos + 1;
    }
    const std::size_t space = src_.find(' ', pos);
    if (space != std::string::npos && space < close && depth < kMaxNesting) {
      parse_inline(space + 1, close, out, false, depth + 1);
    }
    return close + 1;
  }

  std::size_t handle_tag(std::size_t pos, std::size_t end, TextBuilder& out) {
    std::size_t i = pos + 1;
    const bool closing = i < end && src_[i] == '/';
    if (closing) ++i;
    const std::size_t name_begin = i;
    while (i < end && (is_ascii_alpha(src_[i]) ||
                       (i > name_begin && src_[i] >= '0' && src_[i] <= '9'))) {
      ++i;
    }
    if (i == name_begin) {
      out.push('<');
      return pos + 1;
    }
    std::string name;
    for (std::size_t k = name_begin; k < i; ++k) name.push_back(ascii_lower(src_[k]));
    const bool delimited = i >= end || src_[i] == '>' || src_[i] == '/' ||
                           src_[i] == ' ' || src_[i] == '\t' || src_[i] == '\n';
    const bool is_ref = name == "ref" && delimited;
    if (!is_ref && (!delimited || (!opaque_tags().count(name) &&
                                   !transparent_tags().count(name) &&
                                   name != "br"))) {
      out.push('<');
      return pos + 1;
    }
    const std::size_t limit = std::min(end, pos + kMaxTagLength);
    const std::size_t gt = src_.find('>', i);
    if (gt == std::string::npos || gt >= limit) {
      if (is_ref && !closing) {
        recovered_ = true;
        out.anchor(AnchorKind::kRefTag);
        return paragraph_end_from(pos, end);
      }
      out.push('<');
      return pos + 1;
    }
    const bool self_closing = src_[gt - 1] == '/';
    const std::size_t after = gt + 1;
    if (closing) {
      if (name == "br") out.push(' ');
      return after;
    }
    if (is_ref) {
      if (self_closing) {
        out.anchor(AnchorKind::kNamedRefReuse);
        return after;
      }
      const std::size_t close = ifind(src_, "</ref", after, end);
      if (close == std::string::npos) {
        recovered_ = true;
        out.anchor(AnchorKind::kRefTag);
        return paragraph_end_from(pos, end);
      }
      out.anchor(AnchorKind::kRefTag);
      const std::size_t close_gt = src_.find('>', close);
      return close_gt == std::string::npos || close_gt >= end ? close + 5
                                                              : close_gt + 1;
    }
    if (name == "br") {
      out.push(' ');
      return after;
    }
    if (opaque_tags().count(name) && !self_closing) {
      const std::size_t close = ifind(src_, "</" + name, after, end);
      if (close == std::string::npos) return after;
      const std::size_t close_gt = src_.find('>', close);
      return close_gt == std::string::npos || close_gt >= end
                 ? close + 2 + name.size()
                 : close_gt + 1;
    }
    return after;
  }

  std::size_t handle_entity(std::size_t pos, std::size_t end, TextBuilder& out) {
    const std::size_t semi = src_.find(';', pos);
    if (semi == std::string::npos || semi >= end || semi - pos > 10 ||
        semi == pos + 1) {
      out.push('&');
      return pos + 1;
    }
    const std::string_view body(src_.data() + pos + 1, semi - pos - 1);
    char32_t cp = 0;
    bool ok = false;
    if (body.front() == '#') {
      const bool hex = body.size() > 1 && (body[1] == 'x' || body[1] == 'X');
      const std::string_view digits = body.substr(hex ? 2 : 1);
      if (!digits.empty()) {
        ok = true;
        unsigned long value = 0;
        for (char c : digits) {
          int d;
          if (c >= '0' && c <= '9') {
            d = c - '0';
          } else if (hex && ascii_lower(c) >= 'a' && ascii_lower(c) <= 'f') {
            d = ascii_lower(c) - 'a' + 10;
          } else {
            ok = false;
            break;
          }
          value = value * (hex ? 16 : 10) + d;
          if (value > 0x10FFFF) {
            ok = false;
            break;
          }
        }
        cp = static_cast<char32_t>(value);
        if (ok && (cp == 0 || (cp >= 0xD800 && cp <= 0xDFFF))) cp = 0xFFFD;
      }
    } else {
      auto it = named_entities().find(std::string(body));
      if (it != named_entities().end()) {
        ok = true;
        cp = it->second;
      }
    }
    if (!ok) {
      out.push('&');
      return pos + 1;
    }
    if (cp != 0) {
      std::string encoded;
      unicode::append_utf8(encoded, cp);
      out.append(encoded);
    }
    return semi + 1;
  }

  // Parses inline markup in [pos, end). With stop_at_newline, returns the
  // position after the first newline that is not inside a construct.
  std::size_t parse_inline(std::size_t pos, std::size_t end, TextBuilder& out,
                           bool stop_at_newline, int depth) {
    while (pos < end) {
      const char c = src_[pos];
      if (c == '\n') {
        if (stop_at_newline) return pos + 1;
        out.push(' ');
        ++pos;
        continue;
      }
      if (c == '{' && starts_with_at(src_, pos, "{{")) {
        pos = handle_template(pos, end, out);
      } else if (c == '}' && starts_with_at(src_, pos, "}}")) {
        pos += 2;
      } else if (c == '[' && starts_with_at(src_, pos, "[[")) {
        pos = handle_link(pos, end, out, depth);
      } else if (c == '[') {
        pos = handle_external_link(pos, end, out, depth);
      } else if (c == '<') {
        pos = handle_tag(pos, end, out);
      } else if (c == '\'' && starts_with_at(src_, pos, "''")) {
        std::size_t run = 0;
        while (pos + run < end && src_[pos + run] == '\'') ++run;
        std::size_t literal = 0;
        if (run == 4) {
          literal = 1;
        } else if (run > 5) {
          literal = run - 5;
        }
        for (std::size_t k = 0; k < literal; ++k) out.push('\'');
        pos += run;
      } else if (c == '&') {
        pos = handle_entity(pos, end, out);
      } else if (c == '_' && starts_with_at(src_, pos, "__")) {
        std::size_t k = pos + 2;
        while (k < end && src_[k] >= 'A' && src_[k] <= 'Z') ++k;
        if (k > pos + 2 && starts_with_at(src_, k, "__")) {
          pos = k + 2;
        } else {
          out.push('_');
          ++pos;
        }
      } else {
        out.push(c);
        ++pos;
      }
    }
    return pos;
  }

  const LanguageSettings& settings_;
  std::string src_;
  bool recovered_ = false;
  ParsedDocument doc_;
  Section current_;
  TextBuilder paragraph_;
};

}  // namespace

ParsedDocument parse_document(const RawRevision& rev,
                              const LanguageSettings& settings) {
  Parser parser(rev, settings);
  return parser.run();
}

ParsedDocument parse_document(const RawRevision& rev, const LangConfig& config) {
  return parse_document(rev, config.at(rev.lang));
}

bool detect_featured(std::string_view wikitext,
                     const LanguageSettings& settings) {
  bool ignored = false;
  const std::string text = strip_comments(wikitext, ignored);
  std::size_t pos = 0;
  while ((pos = text.find("{{", pos)) != std::string::npos) {
    std::size_t i = pos + 2;
    while (i < text.size() && i - pos < 256 && text[i] != '|' &&
           text[i] != '}' && text[i] != '{') {
      ++i;
    }
    const bool terminated =
        i < text.size() &&
        (text[i] == '|' || starts_with_at(text, i, "}}"));
    if (terminated && settings.featured_templates.count(canonical_template_name(
                          std::string_view(text).substr(pos + 2, i - pos - 2)))) {
      return true;
    }
    pos += 2;
  }
  return false;
}

bool detect_featured(std::string_view wikitext, std::string_view lang,
                     const LangConfig& config) {
  if (!config.supports(lang)) return false;
  return detect_featured(wikitext, config.at(lang));
}

bool is_excluded_section(std::string_view title, std::string_view lang,
                         const LangConfig& config) {
  return config.at(lang).excluded_sections.count(normalize_section_title(title)) >
         0;
}

}  // namespace refneed
