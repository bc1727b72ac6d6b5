#ifndef REFNEED_COMMON_UNICODE_H_
#define REFNEED_COMMON_UNICODE_H_

#include <cstddef>
#include <string>
#include <string_view>

// Minimal UTF-8 and Unicode property helpers. All strings in the project are
// UTF-8; offsets are byte offsets unless stated otherwise.
namespace refneed::unicode {

constexpr char32_t kReplacement = 0xFFFD;

// Decodes the code point starting at `pos` and advances `pos` past it.
// Malformed sequences decode to U+FFFD and advance by one byte.
char32_t decode(std::string_view s, std::size_t& pos);

// Decodes the code point that ends right before `pos` and moves `pos` to its
// first byte. Returns 0 when pos == 0.
char32_t decode_before(std::string_view s, std::size_t& pos);

void append_utf8(std::string& out, char32_t cp);
std::u32string to_u32(std::string_view s);
std::string to_utf8(std::u32string_view s);

// Number of code points.
std::size_t length(std::string_view s);

// Replaces malformed sequences with U+FFFD.
std::string sanitize_utf8(std::string_view s);

bool is_punctuation(char32_t cp);  // General category P*
bool is_other(char32_t cp);        // General category C*
bool is_whitespace(char32_t cp);   // White_Space property
bool is_letter(char32_t cp);
bool is_lowercase_letter(char32_t cp);
bool is_uppercase_letter(char32_t cp);
bool is_nonspacing_mark(char32_t cp);
bool is_digit(char32_t cp);  // ASCII digits only
// CJK ideograph blocks that word-piece tokenizers isolate as single tokens.
bool is_cjk_ideograph(char32_t cp);

void append_lowercase(std::u32string& out, char32_t cp);
char32_t to_upper_simple(char32_t cp);
// Canonical decomposition (NFD), including Hangul syllables.
void append_nfd(std::u32string& out, char32_t cp);

std::string to_lower(std::string_view s);

// Trims ASCII and Unicode whitespace from both ends.
std::string_view trim(std::string_view s);

// Collapses internal whitespace runs to one ASCII space and trims.
std::string collapse_whitespace(std::string_view s);

}  // namespace refneed::unicode

#endif  // REFNEED_COMMON_UNICODE_H_
