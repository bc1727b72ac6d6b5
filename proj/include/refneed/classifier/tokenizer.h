#ifndef REFNEED_CLASSIFIER_TOKENIZER_H_
#define REFNEED_CLASSIFIER_TOKENIZER_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace refneed {

// BERT-style text normalization, as in the HF "BertNormalizer".
struct NormalizerOptions {
  bool clean_text = true;
  bool handle_chinese_chars = true;
  bool lowercase = false;
  std::optional<bool> strip_accents;  // unset: follows `lowercase`

  bool strips_accents() const { return strip_accents.value_or(lowercase); }
};

// Subword tokenizer compatible with HF tokenizer.json WordPiece artifacts
// (BertNormalizer + BertPreTokenizer + WordPiece). Special tokens listed in
// "added_tokens" are matched verbatim before normalization, so a literal
// "[SEP]" in the text becomes the separator id.
//
// Tokenizer::hashing() builds the vocabulary-free fallback used with the
// stub backend: same normalization and pre-tokenization, each word hashed
// into a fixed id range.
class Tokenizer {
 public:
  // Throws TokenizerError on a corrupt or unsupported artifact.
  static Tokenizer from_json(std::string_view text);
  static Tokenizer load(const std::filesystem::path& path);
  static Tokenizer hashing(std::int64_t vocab_size = 30000);

  // Token ids without [CLS]/[SEP] framing.
  std::vector<std::int64_t> encode(std::string_view text) const;
  // Token strings; hashed words come back as "#<id>".
  std::vector<std::string> tokenize(std::string_view text) const;

  std::int64_t cls_id() const { return cls_id_; }
  std::int64_t sep_id() const { return sep_id_; }
  std::int64_t pad_id() const { return pad_id_; }
  std::int64_t unk_id() const { return unk_id_; }
  std::int64_t vocab_size() const { return vocab_size_; }
  bool is_hashing() const { return hashing_; }
  const NormalizerOptions& normalizer() const { return norm_; }
  std::optional<std::int64_t> token_to_id(const std::string& token) const;

  // Exposed for tests: the normalized text and its pre-tokenized words.
  std::string normalize(std::string_view text) const;
  std::vector<std::string> pre_tokenize(std::string_view normalized) const;

 private:
  Tokenizer() = default;

  struct Piece {
    std::int64_t id;
    std::string text;
  };
  void word_pieces(const std::string& word, std::vector<Piece>& out) const;
  std::vector<Piece> run(std::string_view text) const;

  NormalizerOptions norm_;
  bool hashing_ = false;
  std::unordered_map<std::string, std::int64_t> vocab_;
  std::vector<std::pair<std::string, std::int64_t>> added_;  // longest first
  std::string prefix_ = "##";
  std::size_t max_word_chars_ = 100;
  std::int64_t vocab_size_ = 0;
  std::int64_t cls_id_ = 0, sep_id_ = 0, pad_id_ = 0, unk_id_ = 0;
};

}  // namespace refneed

#endif  // REFNEED_CLASSIFIER_TOKENIZER_H_
