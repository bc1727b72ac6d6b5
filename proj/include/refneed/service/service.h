#ifndef REFNEED_SERVICE_SERVICE_H_
#define REFNEED_SERVICE_SERVICE_H_

#include <atomic>
#include <chrono>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>

#include "refneed/classifier/classifier.h"
#include "refneed/common/lang_config.h"
#include "refneed/pipeline/pipeline.h"
#include "refneed/pipeline/revision_source.h"

namespace refneed {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  // CPU budget. The model runs with threads / classify_slots intra-op
  // threads in each of classify_slots concurrent classifications.
  int threads = 4;
  int classify_slots = 1;
  // Requests being served at once (fetching, waiting or classifying);
  // more than this are turned away with 503.
  int max_in_flight = 16;
  // Budget for the classification phase, including the wait for a slot.
  std::chrono::milliseconds deadline{500};
  double threshold = kDefaultThreshold;

  int intra_op_threads() const;
  void validate() const;  // throws ConfigError
};

struct HttpReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Error body: {"error":{"code":...,"message":...}}.
HttpReply error_reply(int status, std::string_view code, std::string_view message);

// Transport-independent request handling; the HTTP server is a thin shell
// around it. Thread-safe.
class ScoreService {
 public:
  ScoreService(std::shared_ptr<const RevisionSource> source,
               std::shared_ptr<const Classifier> classifier, const LangConfig& config,
               ServiceOptions options);

  // POST /v1/score with admission control.
  HttpReply score(std::string_view body) const;
  // The same without the in-flight bound.
  HttpReply handle_score(std::string_view body) const;
  // GET /healthz
  HttpReply handle_health() const;

  // Occupies one in-flight place while alive; empty if the service is full.
  class Admission {
   public:
    Admission() = default;
    explicit Admission(const ScoreService* owner) : owner_(owner) {}
    Admission(Admission&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)) {}
    Admission& operator=(Admission&&) = delete;
    ~Admission();
    explicit operator bool() const { return owner_ != nullptr; }

   private:
    const ScoreService* owner_ = nullptr;
  };
  Admission try_admit() const;

  std::size_t in_flight() const { return in_flight_.load(); }
  const ServiceOptions& options() const { return options_; }

 private:
  std::shared_ptr<const RevisionSource> source_;
  std::shared_ptr<const Classifier> classifier_;
  const LangConfig& config_;
  ServiceOptions options_;
  mutable std::atomic<std::size_t> in_flight_{0};
  mutable std::counting_semaphore<1024> slots_;
};

// cpp-httplib server exposing POST /v1/score and GET /healthz.
class HttpServer {
 public:
  HttpServer(std::shared_ptr<const ScoreService> service);
  ~HttpServer();

  // Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void serve();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace refneed

#endif  // REFNEED_SERVICE_SERVICE_H_
