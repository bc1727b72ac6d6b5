#include "refneed/common/unicode.h"

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>

namespace refneed::unicode {
namespace {

struct CodepointRange {
  char32_t lo;
  char32_t hi;
};

template <int W>
struct CodepointMapping {
  char32_t cp;
  int count;
  std::array<char32_t, W> seq;
};

#include "unicode_tables.inc"

bool in_ranges(std::span<const CodepointRange> ranges, char32_t cp) {
  auto it = std::upper_bound(
      ranges.begin(), ranges.end(), cp,
      [](char32_t value, const CodepointRange& r) { return value < r.lo; });
  if (it == ranges.begin()) return false;
  --it;
  return cp >= it->lo && cp <= it->hi;
}

template <int W>
const CodepointMapping<W>* find_mapping(
    std::span<const CodepointMapping<W>> table, char32_t cp) {
  auto it = std::lower_bound(
      table.begin(), table.end(), cp,
      [](const CodepointMapping<W>& m, char32_t value) { return m.cp < value; });
  if (it == table.end() || it->cp != cp) return nullptr;
  return &*it;
}

constexpr char32_t kHangulBase = 0xAC00;
constexpr char32_t kHangulLast = 0xD7A3;
constexpr char32_t kLeadBase = 0x1100;
constexpr char32_t kVowelBase = 0x1161;
constexpr char32_t kTrailBase = 0x11A7;
constexpr int kVowelCount = 21;
constexpr int kTrailCount = 28;

}  // namespace

char32_t decode(std::string_view s, std::size_t& pos) {
  const auto byte = [&](std::size_t i) {
    return static_cast<unsigned char>(s[i]);
  };
  const unsigned char b0 = byte(pos);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int extra;
  char32_t cp;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return kReplacement;
  }
  if (pos + extra >= s.size()) {
    ++pos;
    return kReplacement;
  }
  for (int i = 1; i <= extra; ++i) {
    const unsigned char b = byte(pos + i);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return kReplacement;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t kMin[] = {0, 0x80, 0x800, 0x10000};
  if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    ++pos;
    return kReplacement;
  }
  pos += extra + 1;
  return cp;
}

char32_t decode_before(std::string_view s, std::size_t& pos) {
  if (pos == 0) return 0;
  std::size_t start = pos - 1;
  int steps = 0;
  while (start > 0 && steps < 3 &&
         (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80) {
    --start;
    ++steps;
  }
  std::size_t probe = start;
  char32_t cp = decode(s, probe);
  if (probe != pos) {
    // Malformed tail: step back a single byte.
    pos -= 1;
    return kReplacement;
  }
  pos = start;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::u32string to_u32(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t pos = 0; pos < s.size();) out.push_back(decode(s, pos));
  return out;
}

std::string to_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) append_utf8(out, cp);
  return out;
}

std::size_t length(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < s.size(); ++n) decode(s, pos);
  return n;
}

std::string sanitize_utf8(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t pos = 0; pos < s.size();) append_utf8(out, decode(s, pos));
  return out;
}

bool is_punctuation(char32_t cp) { return in_ranges(kPunctuationRanges, cp); }
bool is_other(char32_t cp) { return in_ranges(kOtherRanges, cp); }
bool is_letter(char32_t cp) { return in_ranges(kLetterRanges, cp); }
bool is_lowercase_letter(char32_t cp) {
  return in_ranges(kLowercaseLetterRanges, cp);
}
bool is_uppercase_letter(char32_t cp) {
  return in_ranges(kUppercaseLetterRanges, cp);
}
bool is_nonspacing_mark(char32_t cp) {
  return in_ranges(kNonspacingMarkRanges, cp);
}
bool is_digit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

bool is_whitespace(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_cjk_ideograph(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
         (cp >= 0x20000 && cp <= 0x2A6DF) || (cp >= 0x2A700 && cp <= 0x2B73F) ||
         (cp >= 0x2B740 && cp <= 0x2B81F) || (cp >= 0x2B920 && cp <= 0x2CEAF) ||
         (cp >= 0xF900 && cp <= 0xFAFF) || (cp >= 0x2F800 && cp <= 0x2FA1F);
}

void append_lowercase(std::u32string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(cp >= U'A' && cp <= U'Z' ? cp + 32 : cp);
    return;
  }
  const auto* m = find_mapping<kMaxMappingWidth>(kLowercaseMap, cp);
  if (m == nullptr) {
    out.push_back(cp);
    return;
  }
  out.append(m->seq.data(), m->count);
}

char32_t to_upper_simple(char32_t cp) {
  if (cp < 0x80) return cp >= U'a' && cp <= U'z' ? cp - 32 : cp;
  const auto* m = find_mapping<kMaxMappingWidth>(kUppercaseMap, cp);
  return m == nullptr ? cp : m->seq[0];
}

void append_nfd(std::u32string& out, char32_t cp) {
  if (cp < 0xC0) {
    out.push_back(cp);
    return;
  }
  if (cp >= kHangulBase && cp <= kHangulLast) {
    const int index = static_cast<int>(cp - kHangulBase);
    out.push_back(kLeadBase + index / (kVowelCount * kTrailCount));
    out.push_back(kVowelBase + (index % (kVowelCount * kTrailCount)) / kTrailCount);
    if (const int trail = index % kTrailCount; trail != 0) {
      out.push_back(kTrailBase + trail);
    }
    return;
  }
  const auto* m = find_mapping<kMaxMappingWidth>(kDecompositionMap, cp);
  if (m == nullptr) {
    out.push_back(cp);
    return;
  }
  out.append(m->seq.data(), m->count);
}

std::string to_lower(std::string_view s) {
  std::u32string lowered;
  lowered.reserve(s.size());
  for (std::size_t pos = 0; pos < s.size();) {
    append_lowercase(lowered, decode(s, pos));
  }
  return to_utf8(lowered);
}

std::string_view trim(std::string_view s) {
  std::size_t begin = 0;
  while (begin < s.size()) {
    std::size_t next = begin;
    if (!is_whitespace(decode(s, next))) break;
    begin = next;
  }
  std::size_t end = s.size();
  while (end > begin) {
    std::size_t prev = end;
    if (!is_whitespace(decode_before(s, prev))) break;
    end = prev;
  }
  return s.substr(begin, end - begin);
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (std::size_t pos = 0; pos < s.size();) {
    const std::size_t start = pos;
    const char32_t cp = decode(s, pos);
    if (is_whitespace(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.append(s.substr(start, pos - start));
  }
  return out;
}

}  // namespace refneed::unicode
