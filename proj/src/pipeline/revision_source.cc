#include "refneed/pipeline/revision_source.h"

#include <fstream>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "json.hpp"
#include "refneed/common/errors.h"

namespace refneed {

namespace {

using nlohmann::json;

class HttplibTransport : public HttpTransport {
 public:
  explicit HttplibTransport(std::string user_agent) : user_agent_(std::move(user_agent)) {}

  HttpResult get(const std::string& url, std::chrono::milliseconds timeout) const override {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw TransportError(false, "bad url " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string target = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    if (!client.is_valid()) throw TransportError(false, "unsupported url " + url);
    const auto sec = timeout.count() / 1000;
    const auto usec = (timeout.count() % 1000) * 1000;
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    client.set_follow_location(true);
    auto res = client.Get(target, {{"User-Agent", user_agent_}, {"Accept", "application/json"}});
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
      throw TransportError(timed_out, "GET " + url + ": " + httplib::to_string(err));
    }
    return {res->status, res->body};
  }

 private:
  std::string user_agent_;
};

bool valid_lang(std::string_view lang) {
  if (lang.empty() || lang.size() > 32) return false;
  for (char c : lang) {
    if (!((c >= 'a' && c <= 'z') || c == '-' || (c >= '0' && c <= '9'))) return false;
  }
  return true;
}

bool retryable(int status) {
  return status == 429 || status == 500 || status == 502 || status == 503 || status == 504;
}

std::string rev_label(std::string_view lang, std::int64_t rev_id) {
  return std::string(lang) + ":" + std::to_string(rev_id);
}

[[noreturn]] void malformed(const std::string& what) {
  throw UpstreamError(200, "malformed revision response: " + what);
}

// MediaWiki API errors that go away on their own.
bool transient_api_error(const std::string& code) {
  return code == "maxlag" || code == "ratelimited" || code == "readonly" ||
         code == "internal_api_error_DBQueryTimeoutError";
}

}  // namespace

std::shared_ptr<const HttpTransport> httplib_transport(std::string user_agent) {
  return std::make_shared<HttplibTransport>(std::move(user_agent));
}

RawRevision parse_revision_response(std::string_view body, std::string_view lang,
                                    std::int64_t rev_id) {
  json root;
  try {
    root = json::parse(body);
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  if (!root.is_object()) malformed("not an object");
  if (root.contains("error")) {
    const json& err = root.at("error");
    const std::string code = err.is_object() ? err.value("code", std::string("unknown")) : "unknown";
    if (code == "nosuchrevid" || code == "badid_revids") {
      throw RevisionNotFound("revision " + rev_label(lang, rev_id) + " does not exist");
    }
    throw UpstreamError(200, "MediaWiki API error: " + code);
  }
  const json& query = root.contains("query") ? root.at("query") : json();
  if (!query.is_object()) malformed("missing query");
  if (query.contains("badrevids") && !query.at("badrevids").empty()) {
    throw RevisionNotFound("revision " + rev_label(lang, rev_id) + " does not exist");
  }
  if (!query.contains("pages")) malformed("missing query.pages");

  // formatversion=2 gives a list of pages, formatversion=1 an object keyed by page id.
  std::vector<const json*> pages;
  for (const json& p : query.at("pages")) pages.push_back(&p);
  for (const json* page : pages) {
    if (!page->is_object()) malformed("page is not an object");
    if (page->contains("missing") || page->contains("invalid")) continue;
    if (!page->contains("revisions")) continue;
    for (const json& rev : page->at("revisions")) {
      if (rev.value("revid", std::int64_t{-1}) != rev_id) continue;
      if (rev.contains("texthidden") || rev.contains("sha1hidden")) {
        throw RevisionNotFound("revision " + rev_label(lang, rev_id) + " is hidden");
      }
      const json* content = nullptr;
      if (rev.contains("slots")) {
        const json& slots = rev.at("slots");
        if (!slots.is_object() || !slots.contains("main")) malformed("revision has no main slot");
        const json& main = slots.at("main");
        if (main.contains("content")) content = &main.at("content");
        else if (main.contains("*")) content = &main.at("*");
        if (main.contains("texthidden")) {
          throw RevisionNotFound("revision " + rev_label(lang, rev_id) + " is hidden");
        }
      } else if (rev.contains("content")) {
        content = &rev.at("content");
      } else if (rev.contains("*")) {
        content = &rev.at("*");
      }
      if (!content || !content->is_string()) malformed("revision has no text content");
      RawRevision out;
      out.lang = std::string(lang);
      out.rev_id = rev_id;
      out.page_id = page->value("pageid", std::int64_t{0});
      out.page_title = page->value("title", std::string());
      out.wikitext = content->get<std::string>();
      if (out.page_id <= 0) malformed("missing pageid");
      return out;
    }
  }
  throw RevisionNotFound("revision " + rev_label(lang, rev_id) + " not in response");
}

MediaWikiClient::MediaWikiClient(MediaWikiOptions options,
                                 std::shared_ptr<const HttpTransport> transport, Sleeper sleep)
    : options_(std::move(options)),
      transport_(transport ? std::move(transport) : httplib_transport(options_.user_agent)),
      sleep_(sleep ? std::move(sleep)
                   : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })) {
  if (options_.url_template.find("{lang}") == std::string::npos) {
    throw ConfigError("MediaWiki url template must contain {lang}: " + options_.url_template);
  }
  if (options_.max_retries < 0 || options_.timeout.count() <= 0) {
    throw ConfigError("MediaWiki client needs a positive timeout and non-negative retries");
  }
}

std::string MediaWikiClient::request_url(std::string_view lang, std::int64_t rev_id) const {
  std::string base = options_.url_template;
  for (auto pos = base.find("{lang}"); pos != std::string::npos; pos = base.find("{lang}")) {
    base.replace(pos, 6, lang);
  }
  return base + (base.find('?') == std::string::npos ? "?" : "&") +
         "action=query&prop=revisions&revids=" + std::to_string(rev_id) +
         "&rvprop=ids%7Ccontent&rvslots=main&format=json&formatversion=2";
}

RawRevision MediaWikiClient::fetch(std::string_view lang, std::int64_t rev_id) const {
  if (!valid_lang(lang)) throw UnknownLanguage("invalid wiki code '" + std::string(lang) + "'");
  if (rev_id <= 0) throw RevisionNotFound("revision ids are positive, got " + std::to_string(rev_id));
  const std::string url = request_url(lang, rev_id);

  auto delay = options_.backoff;
  for (int attempt = 0;; ++attempt) {
    const bool last = attempt >= options_.max_retries;
    try {
      const HttpResult res = transport_->get(url, options_.timeout);
      if (res.status == 200) {
        try {
          return parse_revision_response(res.body, lang, rev_id);
        } catch (const UpstreamError&) {
          const json err = json::parse(res.body, nullptr, false);
          const bool transient = err.is_object() && err.contains("error") &&
                                 err.at("error").is_object() &&
                                 transient_api_error(err.at("error").value("code", ""));
          if (!transient || last) throw;
        }
      } else if (!retryable(res.status) || last) {
        if (res.status == 404) {
          throw RevisionNotFound("revision " + rev_label(lang, rev_id) + ": HTTP 404");
        }
        throw UpstreamError(res.status, "GET " + url + " returned HTTP " + std::to_string(res.status));
      }
    } catch (const TransportError& e) {
      if (last) {
        if (e.timed_out()) throw UpstreamTimeout(e.what());
        throw UpstreamError(0, e.what());
      }
    }
    sleep_(delay);
    delay *= 2;
  }
}

std::filesystem::path FileRevisionSource::path_for(std::string_view lang,
                                                   std::int64_t rev_id) const {
  return dir_ / (std::string(lang) + "-" + std::to_string(rev_id) + ".json");
}

RawRevision FileRevisionSource::fetch(std::string_view lang, std::int64_t rev_id) const {
  if (!valid_lang(lang)) throw UnknownLanguage("invalid wiki code '" + std::string(lang) + "'");
  std::ifstream in(path_for(lang, rev_id), std::ios::binary);
  if (!in) throw RevisionNotFound("no saved revision " + rev_label(lang, rev_id));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_revision_response(buf.str(), lang, rev_id);
}

CachingRevisionSource::CachingRevisionSource(std::shared_ptr<const RevisionSource> inner,
                                             std::size_t capacity)
    : inner_(std::move(inner)), capacity_(capacity) {
  if (!inner_) throw ConfigError("caching source needs an inner source");
  if (capacity_ == 0) throw ConfigError("cache capacity must be positive");
}

RawRevision CachingRevisionSource::fetch(std::string_view lang, std::int64_t rev_id) const {
  Key key{std::string(lang), rev_id};
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = index_.find(key);
    if (it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      ++hits_;
      return *it->second->second;
    }
    ++misses_;
  }
  // Fetch outside the lock; two concurrent misses may both go upstream.
  auto rev = std::make_shared<const RawRevision>(inner_->fetch(lang, rev_id));
  std::lock_guard<std::mutex> lock(mu_);
  if (index_.find(key) == index_.end()) {
    order_.emplace_front(key, rev);
    index_[key] = order_.begin();
    while (order_.size() > capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
  }
  return *rev;
}

std::size_t CachingRevisionSource::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return order_.size();
}

std::size_t CachingRevisionSource::hits() const {
  std::lock_guard<std::mutex> lock(mu_);
  return hits_;
}

std::size_t CachingRevisionSource::misses() const {
  std::lock_guard<std::mutex> lock(mu_);
  return misses_;
}

}  // namespace refneed
