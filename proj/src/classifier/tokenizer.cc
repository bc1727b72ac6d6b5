#include "refneed/classifier/tokenizer.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "refneed/common/errors.h"
#include "refneed/common/random.h"
#include "refneed/common/unicode.h"

namespace refneed {

namespace {

using nlohmann::json;

constexpr std::int64_t kHashSpecials = 5;  // [PAD] [UNK] [CLS] [SEP] [MASK]

bool is_control(char32_t c) {
  if (c == U'\t' || c == U'\n' || c == U'\r') return false;
  return unicode::is_other(c);
}

bool is_space(char32_t c) {
  return c == U'\t' || c == U'\n' || c == U'\r' || unicode::is_whitespace(c);
}

bool is_punct(char32_t c) {
  const bool ascii = (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
                     (c >= 123 && c <= 126);
  return ascii || unicode::is_punctuation(c);
}

[[noreturn]] void corrupt(const std::string& what) {
  throw TokenizerError("tokenizer.json: " + what);
}

bool json_flag(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  if (!obj.at(key).is_boolean()) corrupt(std::string("normalizer.") + key + " must be a boolean");
  return obj.at(key).get<bool>();
}

}  // namespace

Tokenizer Tokenizer::from_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    corrupt(std::string("not valid JSON: ") + e.what());
  }
  if (!root.is_object()) corrupt("top level must be an object");
  Tokenizer tok;

  const json& model = root.contains("model") ? root.at("model") : json();
  if (!model.is_object()) corrupt("missing model");
  if (model.value("type", std::string("WordPiece")) != "WordPiece") {
    corrupt("unsupported model type '" + model.value("type", std::string()) + "'");
  }
  if (!model.contains("vocab") || !model.at("vocab").is_object() || model.at("vocab").empty()) {
    corrupt("model.vocab must be a non-empty object");
  }
  std::int64_t max_id = -1;
  for (const auto& [token, id] : model.at("vocab").items()) {
    if (!id.is_number_integer() || id.get<std::int64_t>() < 0) {
      corrupt("vocab id for '" + token + "' is not a non-negative integer");
    }
    tok.vocab_[token] = id.get<std::int64_t>();
    max_id = std::max(max_id, id.get<std::int64_t>());
  }
  if (model.contains("continuing_subword_prefix")) {
    const json& p = model.at("continuing_subword_prefix");
    if (!p.is_string()) corrupt("continuing_subword_prefix must be a string");
    tok.prefix_ = p.get<std::string>();
  }
  if (model.contains("max_input_chars_per_word")) {
    const json& m = model.at("max_input_chars_per_word");
    if (!m.is_number_integer() || m.get<std::int64_t>() <= 0) {
      corrupt("max_input_chars_per_word must be a positive integer");
    }
    tok.max_word_chars_ = m.get<std::size_t>();
  }

  if (root.contains("added_tokens")) {
    if (!root.at("added_tokens").is_array()) corrupt("added_tokens must be a list");
    for (const json& t : root.at("added_tokens")) {
      if (!t.is_object() || !t.contains("content") || !t.at("content").is_string() ||
          !t.contains("id") || !t.at("id").is_number_integer()) {
        corrupt("malformed added_tokens entry");
      }
      const std::string content = t.at("content");
      if (content.empty()) corrupt("empty added token");
      const std::int64_t id = t.at("id");
      tok.added_.emplace_back(content, id);
      tok.vocab_.emplace(content, id);
      max_id = std::max(max_id, id);
    }
    std::stable_sort(tok.added_.begin(), tok.added_.end(), [](const auto& a, const auto& b) {
      return a.first.size() > b.first.size();
    });
  }
  tok.vocab_size_ = max_id + 1;

  const json& norm = root.contains("normalizer") ? root.at("normalizer") : json();
  if (norm.is_null()) {
    tok.norm_ = {false, false, false, false};
  } else {
    if (!norm.is_object() || norm.value("type", std::string()) != "BertNormalizer") {
      corrupt("unsupported normalizer (only BertNormalizer)");
    }
    tok.norm_.clean_text = json_flag(norm, "clean_text", true);
    tok.norm_.handle_chinese_chars = json_flag(norm, "handle_chinese_chars", true);
    tok.norm_.lowercase = json_flag(norm, "lowercase", true);
    if (norm.contains("strip_accents") && !norm.at("strip_accents").is_null()) {
      tok.norm_.strip_accents = json_flag(norm, "strip_accents", false);
    }
  }
  const json& pre = root.contains("pre_tokenizer") ? root.at("pre_tokenizer") : json();
  if (!pre.is_null() &&
      (!pre.is_object() || pre.value("type", std::string()) != "BertPreTokenizer")) {
    corrupt("unsupported pre_tokenizer (only BertPreTokenizer)");
  }

  auto require = [&](const std::string& token) {
    auto it = tok.vocab_.find(token);
    if (it == tok.vocab_.end()) corrupt("vocabulary has no " + token + " token");
    return it->second;
  };
  tok.unk_id_ = require(model.value("unk_token", std::string("[UNK]")));
  tok.cls_id_ = require("[CLS]");
  tok.sep_id_ = require("[SEP]");
  tok.pad_id_ = require("[PAD]");
  return tok;
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TokenizerError("cannot open tokenizer " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

Tokenizer Tokenizer::hashing(std::int64_t vocab_size) {
  if (vocab_size <= kHashSpecials) throw TokenizerError("hashing vocabulary too small");
  Tokenizer tok;
  tok.hashing_ = true;
  tok.vocab_size_ = vocab_size;
  const char* specials[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  for (std::int64_t i = 0; i < kHashSpecials; ++i) {
    tok.added_.emplace_back(specials[i], i);
    tok.vocab_.emplace(specials[i], i);
  }
  std::stable_sort(tok.added_.begin(), tok.added_.end(), [](const auto& a, const auto& b) {
    return a.first.size() > b.first.size();
  });
  tok.pad_id_ = 0;
  tok.unk_id_ = 1;
  tok.cls_id_ = 2;
  tok.sep_id_ = 3;
  return tok;
}

std::optional<std::int64_t> Tokenizer::token_to_id(const std::string& token) const {
  auto it = vocab_.find(token);
  if (it == vocab_.end()) return std::nullopt;
  return it->second;
}

std::string Tokenizer::normalize(std::string_view text) const {
  std::u32string cur;
  cur.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char32_t c = unicode::decode(text, pos);
    if (norm_.clean_text) {
      if (c == 0 || c == unicode::kReplacement || is_control(c)) continue;
      if (is_space(c)) {
        cur.push_back(U' ');
        continue;
      }
    }
    if (norm_.handle_chinese_chars && unicode::is_cjk_ideograph(c)) {
      cur.push_back(U' ');
      cur.push_back(c);
      cur.push_back(U' ');
      continue;
    }
    cur.push_back(c);
  }
  if (norm_.strips_accents()) {
    std::u32string decomposed;
    for (char32_t c : cur) unicode::append_nfd(decomposed, c);
    cur.clear();
    for (char32_t c : decomposed) {
      if (!unicode::is_nonspacing_mark(c)) cur.push_back(c);
    }
  }
  if (norm_.lowercase) {
    std::u32string lowered;
    for (char32_t c : cur) unicode::append_lowercase(lowered, c);
    cur.swap(lowered);
  }
  return unicode::to_utf8(cur);
}

std::vector<std::string> Tokenizer::pre_tokenize(std::string_view normalized) const {
  std::vector<std::string> words;
  std::string word;
  std::size_t pos = 0;
  while (pos < normalized.size()) {
    const std::size_t start = pos;
    const char32_t c = unicode::decode(normalized, pos);
    if (unicode::is_whitespace(c)) {
      if (!word.empty()) words.push_back(std::move(word));
      word.clear();
    } else if (is_punct(c)) {
      if (!word.empty()) words.push_back(std::move(word));
      word.clear();
      words.emplace_back(normalized.substr(start, pos - start));
    } else {
      word.append(normalized.substr(start, pos - start));
    }
  }
  if (!word.empty()) words.push_back(std::move(word));
  return words;
}

void Tokenizer::word_pieces(const std::string& word, std::vector<Piece>& out) const {
  if (unicode::length(word) > max_word_chars_) {
    out.push_back({unk_id_, "[UNK]"});
    return;
  }
  if (hashing_) {
    const std::int64_t id =
        kHashSpecials +
        static_cast<std::int64_t>(fnv1a(word) % static_cast<std::uint64_t>(vocab_size_ - kHashSpecials));
    out.push_back({id, "#" + std::to_string(id)});
    return;
  }
  // Character boundaries, so candidate substrings never split a code point.
  std::vector<std::size_t> bounds{0};
  for (std::size_t pos = 0; pos < word.size();) {
    unicode::decode(word, pos);
    bounds.push_back(pos);
  }
  const std::size_t n = bounds.size() - 1;
  std::vector<Piece> pieces;
  std::size_t start = 0;
  std::string candidate;
  while (start < n) {
    std::size_t end = n;
    bool found = false;
    while (end > start) {
      candidate.clear();
      if (start > 0) candidate = prefix_;
      candidate.append(word, bounds[start], bounds[end] - bounds[start]);
      auto it = vocab_.find(candidate);
      if (it != vocab_.end()) {
        pieces.push_back({it->second, candidate});
        found = true;
        break;
      }
      --end;
    }
    if (!found) {
      out.push_back({unk_id_, "[UNK]"});
      return;
    }
    start = end;
  }
  out.insert(out.end(), pieces.begin(), pieces.end());
}

std::vector<Tokenizer::Piece> Tokenizer::run(std::string_view text) const {
  std::vector<Piece> out;
  auto plain = [&](std::string_view segment) {
    if (segment.empty()) return;
    for (const std::string& word : pre_tokenize(normalize(segment))) word_pieces(word, out);
  };
  std::size_t seg_start = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::pair<std::string, std::int64_t>* match = nullptr;
    for (const auto& added : added_) {
      if (text.compare(pos, added.first.size(), added.first) == 0) {
        match = &added;  // longest first
        break;
      }
    }
    if (match) {
      plain(text.substr(seg_start, pos - seg_start));
      out.push_back({match->second, match->first});
      pos += match->first.size();
      seg_start = pos;
    } else {
      ++pos;
    }
  }
  plain(text.substr(seg_start));
  return out;
}

std::vector<std::int64_t> Tokenizer::encode(std::string_view text) const {
  std::vector<std::int64_t> ids;
  for (const Piece& p : run(text)) ids.push_back(p.id);
  return ids;
}

std::vector<std::string> Tokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  for (Piece& p : run(text)) out.push_back(std::move(p.text));
  return out;
}

}  // namespace refneed
