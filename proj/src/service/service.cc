#include "refneed/service/service.h"

#include <utility>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "json.hpp"
#include "refneed/common/errors.h"

namespace refneed {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

int status_for(const Error& e) {
  const std::string& code = e.code();
  if (code == "unsupported_language") return 400;
  if (code == "revision_not_found") return 404;
  if (code == "upstream_timeout" || code == "deadline_exceeded") return 504;
  if (code == "upstream_error") return 502;
  if (code == "empty_article") return 422;
  return 500;
}

}  // namespace

int ServiceOptions::intra_op_threads() const { return std::max(1, threads / classify_slots); }

void ServiceOptions::validate() const {
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (classify_slots < 1 || classify_slots > threads) {
    throw ConfigError("classify_slots must be in [1, threads]");
  }
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be at least 1");
  if (deadline.count() <= 0) throw ConfigError("deadline must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  if (port < 0 || port > 65535) throw ConfigError("port out of range");
}

HttpReply error_reply(int status, std::string_view code, std::string_view message) {
  nlohmann::ordered_json j;
  j["error"]["code"] = code;
  j["error"]["message"] = message;
  return {status, j.dump(-1, ' ', false, json::error_handler_t::replace)};
}

ScoreService::ScoreService(std::shared_ptr<const RevisionSource> source,
                           std::shared_ptr<const Classifier> classifier, const LangConfig& config,
                           ServiceOptions options)
    : source_(std::move(source)),
      classifier_(std::move(classifier)),
      config_(config),
      options_(std::move(options)),
      slots_(options_.classify_slots) {
  options_.validate();
  if (!source_ || !classifier_) throw ConfigError("service needs a revision source and a model");
}

ScoreService::Admission::~Admission() {
  if (owner_) owner_->in_flight_.fetch_sub(1);
}

ScoreService::Admission ScoreService::try_admit() const {
  std::size_t cur = in_flight_.load();
  while (cur < static_cast<std::size_t>(options_.max_in_flight)) {
    if (in_flight_.compare_exchange_weak(cur, cur + 1)) return Admission(this);
  }
  return Admission();
}

HttpReply ScoreService::score(std::string_view body) const {
  Admission admission = try_admit();
  if (!admission) {
    return error_reply(503, "overloaded",
                       "too many requests in flight (limit " +
                           std::to_string(options_.max_in_flight) + ")");
  }
  return handle_score(body);
}

HttpReply ScoreService::handle_score(std::string_view body) const {
  const json req = json::parse(body, nullptr, false);
  if (req.is_discarded() || !req.is_object()) {
    return error_reply(400, "bad_request", "body must be a JSON object");
  }
  if (!req.contains("rev_id") || !req.at("rev_id").is_number_integer()) {
    return error_reply(400, "bad_request", "rev_id must be an integer");
  }
  if (!req.contains("lang") || !req.at("lang").is_string()) {
    return error_reply(400, "bad_request", "lang must be a string");
  }
  const std::string lang = req.at("lang");
  const std::int64_t rev_id = req.at("rev_id");
  if (!config_.supports(lang)) {
    return error_reply(400, "unsupported_language", "unsupported language '" + lang + "'");
  }
  try {
    const RawRevision rev = source_->fetch(lang, rev_id);

    // Classification phase: wait for a slot, then classify, all within the deadline.
    const auto start = Clock::now();
    if (!slots_.try_acquire_for(options_.deadline)) {
      throw DeadlineExceeded("no classification slot within " +
                             std::to_string(options_.deadline.count()) + " ms");
    }
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{slots_};
    AssessOptions opts;
    opts.threshold = options_.threshold;
    opts.deadline = options_.deadline -
                    std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
    if (opts.deadline.count() <= 0) throw DeadlineExceeded("deadline spent waiting for a slot");
    const ReferenceNeedResult result = assess_raw_revision(rev, *classifier_, config_, opts);
    return {200, result.to_json()};
  } catch (const Error& e) {
    return error_reply(status_for(e), e.code(), e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "internal_error", e.what());
  }
}

HttpReply ScoreService::handle_health() const {
  nlohmann::ordered_json j;
  j["status"] = "ok";
  j["model_name"] = classifier_->meta().model_name;
  j["model_version"] = classifier_->meta().model_version;
  j["backend"] = classifier_->backend().describe();
  j["ready"] = true;
  j["in_flight"] = in_flight_.load();
  return {200, j.dump()};
}

struct HttpServer::Impl {
  std::shared_ptr<const ScoreService> service;
  httplib::Server server;
};

HttpServer::HttpServer(std::shared_ptr<const ScoreService> service) : impl_(new Impl) {
  impl_->service = std::move(service);
  const ServiceOptions& opts = impl_->service->options();
  // One connection thread per admissible request plus a few spare ones
  // so that excess load reaches the handler and gets a 503.
  const std::size_t conn_threads = static_cast<std::size_t>(opts.max_in_flight) + 4;
  impl_->server.new_task_queue = [conn_threads] { return new httplib::ThreadPool(conn_threads); };
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  };
  const ScoreService* svc = impl_->service.get();
  impl_->server.Post("/v1/score", [svc, send](const httplib::Request& req, httplib::Response& res) {
    send(res, svc->score(req.body));
  });
  impl_->server.Get("/healthz", [svc, send](const httplib::Request&, httplib::Response& res) {
    send(res, svc->handle_health());
  });
  impl_->server.set_error_handler([send](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;  // already an error reply of ours
    if (res.status == 404) send(res, error_reply(404, "not_found", "no such endpoint"));
    if (res.status == 405) send(res, error_reply(405, "method_not_allowed", "method not allowed"));
  });
  impl_->server.set_payload_max_length(1 << 16);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace refneed
