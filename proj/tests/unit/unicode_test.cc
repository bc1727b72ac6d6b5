#include "refneed/common/unicode.h"

#include "doctest.h"
#include "test_util.h"

namespace u = refneed::unicode;

namespace {

std::u32string nfd(char32_t cp) {
  std::u32string out;
  u::append_nfd(out, cp);
  return out;
}

std::u32string lower(char32_t cp) {
  std::u32string out;
  u::append_lowercase(out, cp);
  return out;
}

}  // namespace

TEST_CASE("utf8 decode and encode round trip") {
  const std::string s = "a\xC3\xA9\xE3\x81\x82\xF0\x9F\x98\x80";
  CHECK(u::to_u32(s) == std::u32string{U'a', 0xE9, 0x3042, 0x1F600});
  CHECK(u::to_utf8(u::to_u32(s)) == s);
  CHECK(u::length(s) == 4);
  std::size_t pos = s.size();
  CHECK(u::decode_before(s, pos) == 0x1F600);
  CHECK(pos == 6);
}

TEST_CASE("malformed utf8 becomes replacement characters") {
  CHECK(u::sanitize_utf8("a\xFF" "b") == "a\xEF\xBF\xBD" "b");
  CHECK(u::sanitize_utf8("\xE3\x81") == "\xEF\xBF\xBD\xEF\xBF\xBD");
  std::size_t pos = 0;
  CHECK(u::decode("\xC0\x80", pos) == u::kReplacement);
  CHECK(pos == 1);
}

TEST_CASE("random bytes never break sanitize") {
  refneed::testing::Gen gen(7);
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const std::size_t n = gen.below(24);
    for (std::size_t k = 0; k < n; ++k) s.push_back(static_cast<char>(gen.below(256)));
    const std::string clean = u::sanitize_utf8(s);
    CHECK(u::sanitize_utf8(clean) == clean);
    CHECK(u::to_utf8(u::to_u32(clean)) == clean);
  }
}

// Expected values taken from Python's unicodedata (Unicode 13+).
TEST_CASE("general categories") {
  CHECK(u::is_punctuation(0xAB));
  CHECK(u::is_punctuation(0xBF));
  CHECK(u::is_punctuation(0x3001));
  CHECK(u::is_punctuation(U'_'));
  CHECK_FALSE(u::is_punctuation(U'a'));
  CHECK(u::is_other(0xAD));
  CHECK(u::is_other(0x200B));
  CHECK_FALSE(u::is_other(U' '));
  CHECK(u::is_uppercase_letter(0xC9));
  CHECK(u::is_lowercase_letter(0xDF));
  CHECK(u::is_letter(0xFF71));
  CHECK(u::is_nonspacing_mark(0x301));
  CHECK(u::is_whitespace(0x3000));
  CHECK(u::is_whitespace(0xA0));
  CHECK_FALSE(u::is_whitespace(0x200B));
  CHECK(u::is_cjk_ideograph(0x4E2D));
  CHECK_FALSE(u::is_cjk_ideograph(0x3042));
}

TEST_CASE("case mapping and decomposition") {
  CHECK(nfd(0xC9) == std::u32string{0x45, 0x301});
  CHECK(nfd(0xD55C) == std::u32string{0x1112, 0x1161, 0x11AB});
  CHECK(nfd(0x130) == std::u32string{0x49, 0x307});
  CHECK(nfd(0xFF71) == std::u32string{0xFF71});
  CHECK(lower(0xC9) == std::u32string{0xE9});
  CHECK(lower(0x130) == std::u32string{0x69, 0x307});
  CHECK(u::to_upper_simple(0xE9) == 0xC9);
  CHECK(u::to_lower("Voir Aussi") == "voir aussi");
}

TEST_CASE("whitespace helpers") {
  CHECK(u::trim("  a b\t\n") == "a b");
  CHECK(u::trim("\xE3\x80\x80x\xC2\xA0") == "x");
  CHECK(u::collapse_whitespace("  a \t\n b  ") == "a b");
  CHECK(u::collapse_whitespace("") == "");
}
