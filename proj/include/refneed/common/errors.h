#ifndef REFNEED_COMMON_ERRORS_H_
#define REFNEED_COMMON_ERRORS_H_

#include <stdexcept>
#include <string>

namespace refneed {

// Base class for all errors raised by the library. Every error carries a
// short machine-readable code that the HTTP layer and CLI surface verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

#define REFNEED_DEFINE_ERROR(Name, code_str)                      \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& message)                     \
        : Error(code_str, message) {}                             \
  }

REFNEED_DEFINE_ERROR(ConfigError, "config_error");
REFNEED_DEFINE_ERROR(UnknownLanguage, "unsupported_language");
REFNEED_DEFINE_ERROR(MalformedMarkup, "malformed_markup");
REFNEED_DEFINE_ERROR(AnchorOutOfRange, "anchor_out_of_range");
REFNEED_DEFINE_ERROR(SchemaError, "schema_error");
REFNEED_DEFINE_ERROR(TokenizerError, "tokenizer_error");
REFNEED_DEFINE_ERROR(BackendError, "backend_error");
REFNEED_DEFINE_ERROR(RevisionNotFound, "revision_not_found");
REFNEED_DEFINE_ERROR(UpstreamTimeout, "upstream_timeout");
REFNEED_DEFINE_ERROR(EmptyArticle, "empty_article");
REFNEED_DEFINE_ERROR(DeadlineExceeded, "deadline_exceeded");
REFNEED_DEFINE_ERROR(DegenerateLabels, "degenerate_labels");
REFNEED_DEFINE_ERROR(ClientError, "client_error");
REFNEED_DEFINE_ERROR(MissingLogprob, "missing_logprob");

#undef REFNEED_DEFINE_ERROR

class UpstreamError : public Error {
 public:
  UpstreamError(int status, const std::string& message)
      : Error("upstream_error", message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

// Not enough records of one label in one language to draw a balanced sample.
class InsufficientData : public Error {
 public:
  InsufficientData(std::string wiki_db, int label, std::size_t available,
                   std::size_t required)
      : Error("insufficient_data",
              "insufficient data for " + wiki_db + " label " +
                  std::to_string(label) + ": have " +
                  std::to_string(available) + ", need " +
                  std::to_string(required)),
        wiki_db_(std::move(wiki_db)),
        label_(label) {}

  const std::string& wiki_db() const { return wiki_db_; }
  int label() const { return label_; }

 private:
  std::string wiki_db_;
  int label_;
};

// A model bundle failed validation. `field` names the offending file/key,
// e.g. "meta.json:max_seq_len".
class BundleValidationError : public Error {
 public:
  BundleValidationError(std::string field, const std::string& message)
      : Error("bundle_invalid", field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace refneed

#endif  // REFNEED_COMMON_ERRORS_H_
