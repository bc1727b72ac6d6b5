#ifndef REFNEED_PIPELINE_REVISION_SOURCE_H_
#define REFNEED_PIPELINE_REVISION_SOURCE_H_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "refneed/wikitext/document.h"

namespace refneed {

// Where assess_revision gets its wikitext from. Implementations must be safe
// to call from several threads at once.
class RevisionSource {
 public:
  virtual ~RevisionSource() = default;
  // Throws RevisionNotFound, UpstreamTimeout or UpstreamError.
  virtual RawRevision fetch(std::string_view lang, std::int64_t rev_id) const = 0;
};

// --- HTTP transport ----------------------------------------------------------

struct HttpResult {
  int status = 0;
  std::string body;
};

// Raised by a transport when no HTTP response arrived at all.
class TransportError : public std::runtime_error {
 public:
  TransportError(bool timed_out, const std::string& message)
      : std::runtime_error(message), timed_out_(timed_out) {}
  bool timed_out() const { return timed_out_; }

 private:
  bool timed_out_;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult get(const std::string& url, std::chrono::milliseconds timeout) const = 0;
};

// cpp-httplib backed transport (http and https).
std::shared_ptr<const HttpTransport> httplib_transport(std::string user_agent);

// --- MediaWiki ---------------------------------------------------------------

struct MediaWikiOptions {
  // "{lang}" is replaced by the wiki code.
  std::string url_template = "https://{lang}.wikipedia.org/w/api.php";
  std::chrono::milliseconds timeout{5000};
  int max_retries = 2;                     // extra attempts after the first
  std::chrono::milliseconds backoff{250};  // doubled after every retry
  std::string user_agent = "refneed/0.1 (reference need scoring)";
};

// Turns an action=query&prop=revisions response (formatversion 1 or 2) into a
// RawRevision. Throws RevisionNotFound for bad/deleted revisions and
// UpstreamError(200) for anything it can't make sense of.
RawRevision parse_revision_response(std::string_view body, std::string_view lang,
                                    std::int64_t rev_id);

class MediaWikiClient : public RevisionSource {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit MediaWikiClient(MediaWikiOptions options,
                           std::shared_ptr<const HttpTransport> transport = nullptr,
                           Sleeper sleep = nullptr);

  RawRevision fetch(std::string_view lang, std::int64_t rev_id) const override;
  std::string request_url(std::string_view lang, std::int64_t rev_id) const;
  const MediaWikiOptions& options() const { return options_; }

 private:
  MediaWikiOptions options_;
  std::shared_ptr<const HttpTransport> transport_;
  Sleeper sleep_;
};

// Reads saved API responses from `dir`/<lang>-<rev_id>.json.
class FileRevisionSource : public RevisionSource {
 public:
  explicit FileRevisionSource(std::filesystem::path dir) : dir_(std::move(dir)) {}
  RawRevision fetch(std::string_view lang, std::int64_t rev_id) const override;
  std::filesystem::path path_for(std::string_view lang, std::int64_t rev_id) const;

 private:
  std::filesystem::path dir_;
};

// Size-bounded LRU in front of another source. Revisions never change, so
// entries never go stale; errors are not cached.
class CachingRevisionSource : public RevisionSource {
 public:
  CachingRevisionSource(std::shared_ptr<const RevisionSource> inner, std::size_t capacity);

  RawRevision fetch(std::string_view lang, std::int64_t rev_id) const override;

  std::size_t size() const;
  std::size_t hits() const;
  std::size_t misses() const;

 private:
  using Key = std::pair<std::string, std::int64_t>;
  using Entry = std::pair<Key, std::shared_ptr<const RawRevision>>;

  std::shared_ptr<const RevisionSource> inner_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  mutable std::list<Entry> order_;  // most recent first
  mutable std::map<Key, std::list<Entry>::iterator> index_;
  mutable std::size_t hits_ = 0, misses_ = 0;
};

}  // namespace refneed

#endif  // REFNEED_PIPELINE_REVISION_SOURCE_H_
