#include <condition_variable>
#include <fstream>
#include <mutex>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "refneed/common/errors.h"
#include "refneed/service/service.h"
#include "test_util.h"

using namespace refneed;
using nlohmann::json;
using refneed::testing::source_path;
using namespace std::chrono_literals;

namespace {

const std::string kRevisions = "tests/fixtures/revisions";

std::string read_file(const std::string& rel) {
  std::ifstream in(source_path(rel), std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::shared_ptr<const RevisionSource> files() {
  return std::make_shared<FileRevisionSource>(source_path(kRevisions));
}

std::shared_ptr<const Classifier> stub(std::uint64_t seed) {
  return std::make_shared<Classifier>(Classifier::stub(seed));
}

class ThrowingSource : public RevisionSource {
 public:
  explicit ThrowingSource(std::function<void()> fn) : fn_(std::move(fn)) {}
  RawRevision fetch(std::string_view, std::int64_t) const override {
    fn_();
    return {};
  }

 private:
  std::function<void()> fn_;
};

// Holds every fetch until open() is called.
class GateSource : public RevisionSource {
 public:
  RawRevision fetch(std::string_view lang, std::int64_t rev_id) const override {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return open_; });
    return inner_.fetch(lang, rev_id);
  }
  void open() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      open_ = true;
    }
    cv_.notify_all();
  }

 private:
  FileRevisionSource inner_{source_path(kRevisions)};
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  bool open_ = false;
};

class SlowBackend : public Backend {
 public:
  std::vector<std::array<double, 2>> logits(const std::vector<EncodedInput>& batch) const override {
    std::this_thread::sleep_for(25ms * batch.size());
    return std::vector<std::array<double, 2>>(batch.size(), {0.0, 1.0});
  }
  std::string describe() const override { return "slow"; }
};

std::string error_code(const HttpReply& r) {
  const json j = json::parse(r.body);
  return j.at("error").at("code");
}

std::vector<std::string> keys_in_order(const std::string& body) {
  std::vector<std::string> keys;
  const auto j = nlohmann::ordered_json::parse(body);
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  return keys;
}

}  // namespace

TEST_CASE("service: documented request and response shape") {
  ScoreService svc(files(), stub(0), LangConfig::defaults(), {});
  const HttpReply r = svc.score(R"({"rev_id": 1242378206, "lang": "en"})");
  CHECK(r.status == 200);
  CHECK(r.content_type == "application/json");
  CHECK(r.body ==
        R"({"model_name":"reference-need","model_version":0,"wiki_db":"enwiki",)"
        R"("revision_id":1242378206,"reference_need_score":0.16666666666666666})");
  CHECK(keys_in_order(r.body) == std::vector<std::string>{"model_name", "model_version", "wiki_db",
                                                          "revision_id", "reference_need_score"});
}

TEST_CASE("service: golden body is byte-identical across calls") {
  const std::string golden = read_file("tests/fixtures/golden/score_en_1001_stub7.json");
  ScoreService svc(files(), stub(7), LangConfig::defaults(), {});
  for (int i = 0; i < 5; ++i) {
    const HttpReply r = svc.score(R"({"lang":"en","rev_id":1001})");
    CHECK(r.status == 200);
    CHECK(r.body + "\n" == golden);
  }
}

TEST_CASE("service: error mapping") {
  const LangConfig& cfg = LangConfig::defaults();
  ScoreService svc(files(), stub(1), cfg, {});
  struct Case {
    std::string body;
    int status;
    std::string code;
  };
  const std::vector<Case> cases = {
      {"", 400, "bad_request"},
      {"not json", 400, "bad_request"},
      {"[1,2]", 400, "bad_request"},
      {R"({"lang": "en"})", 400, "bad_request"},
      {R"({"rev_id": 1001})", 400, "bad_request"},
      {R"({"rev_id": "1001", "lang": "en"})", 400, "bad_request"},
      {R"({"rev_id": 1001.5, "lang": "en"})", 400, "bad_request"},
      {R"({"rev_id": 1001, "lang": 7})", 400, "bad_request"},
      {R"({"rev_id": 1001, "lang": "xx"})", 400, "unsupported_language"},
      {R"({"rev_id": 0, "lang": "en"})", 404, "revision_not_found"},
      {R"({"rev_id": 1005, "lang": "en"})", 404, "revision_not_found"},
      {R"({"rev_id": 1003, "lang": "en"})", 422, "empty_article"},
  };
  for (const Case& c : cases) {
    CAPTURE(c.body);
    const HttpReply r = svc.score(c.body);
    CHECK(r.status == c.status);
    CHECK(error_code(r) == c.code);
  }

  ScoreService timeout(std::make_shared<ThrowingSource>([] { throw UpstreamTimeout("slow"); }),
                       stub(1), cfg, {});
  CHECK(timeout.score(R"({"rev_id": 1, "lang": "en"})").status == 504);
  CHECK(error_code(timeout.score(R"({"rev_id": 1, "lang": "en"})")) == "upstream_timeout");
  ScoreService upstream(std::make_shared<ThrowingSource>([] { throw UpstreamError(500, "boom"); }),
                        stub(1), cfg, {});
  CHECK(upstream.score(R"({"rev_id": 1, "lang": "en"})").status == 502);
  ScoreService broken(std::make_shared<ThrowingSource>([] { throw std::logic_error("bug"); }),
                      stub(1), cfg, {});
  CHECK(error_code(broken.score(R"({"rev_id": 1, "lang": "en"})")) == "internal_error");

  ServiceOptions tight;
  tight.deadline = 30ms;
  ScoreService slow(files(), std::make_shared<Classifier>(Tokenizer::hashing(),
                                                          std::make_shared<SlowBackend>(),
                                                          BundleMeta{}),
                    cfg, tight);
  const HttpReply r = slow.score(R"({"rev_id": 1001, "lang": "en"})");
  CHECK(r.status == 504);
  CHECK(error_code(r) == "deadline_exceeded");
}

TEST_CASE("service: in-flight bound sheds load with 503") {
  ServiceOptions opts;
  opts.max_in_flight = 1;
  ScoreService svc(files(), stub(7), LangConfig::defaults(), opts);
  {
    auto held = svc.try_admit();
    REQUIRE(held);
    CHECK_FALSE(svc.try_admit());
    const HttpReply r = svc.score(R"({"rev_id": 1001, "lang": "en"})");
    CHECK(r.status == 503);
    CHECK(error_code(r) == "overloaded");
  }
  CHECK(svc.in_flight() == 0);
  CHECK(svc.score(R"({"rev_id": 1001, "lang": "en"})").status == 200);
}

TEST_CASE("service: options validation") {
  auto bad = [](auto edit) {
    ServiceOptions o;
    edit(o);
    return o;
  };
  CHECK_THROWS_AS(bad([](ServiceOptions& o) { o.threads = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](ServiceOptions& o) { o.classify_slots = 5; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](ServiceOptions& o) { o.deadline = 0ms; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](ServiceOptions& o) { o.threshold = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](ServiceOptions& o) { o.max_in_flight = 0; }).validate(), ConfigError);
  ServiceOptions d;
  CHECK(d.threads == 4);
  CHECK(d.deadline == 500ms);
  CHECK(d.intra_op_threads() == 4);
  d.classify_slots = 2;
  CHECK(d.intra_op_threads() == 2);
}

TEST_CASE("service: over HTTP") {
  auto gate = std::make_shared<GateSource>();
  ServiceOptions opts;
  opts.max_in_flight = 2;
  auto svc = std::make_shared<ScoreService>(gate, stub(7), LangConfig::defaults(), opts);
  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  std::thread th([&] { server.serve(); });
  server.wait_until_ready();
  auto client = [&] {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(10, 0);
    return c;
  };

  auto health = client().Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  const json h = json::parse(health->body);
  CHECK(h.at("model_version") == 0);
  CHECK(h.at("ready") == true);

  auto missing = client().Get("/nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body).at("error").at("code") == "not_found");

  // Two requests park in the gated source; a third is shed.
  std::vector<std::string> bodies(2);
  std::vector<std::thread> parked;
  for (int i = 0; i < 2; ++i) {
    parked.emplace_back([&, i] {
      auto res = client().Post("/v1/score", R"({"rev_id":1001,"lang":"en"})", "application/json");
      if (res && res->status == 200) bodies[i] = res->body;
    });
  }
  for (int i = 0; i < 500 && svc->in_flight() < 2; ++i) std::this_thread::sleep_for(2ms);
  REQUIRE(svc->in_flight() == 2);
  auto shed = client().Post("/v1/score", R"({"rev_id":1001,"lang":"en"})", "application/json");
  REQUIRE(shed);
  CHECK(shed->status == 503);
  CHECK(json::parse(shed->body).at("error").at("code") == "overloaded");
  gate->open();
  for (auto& t : parked) t.join();

  const std::string golden = read_file("tests/fixtures/golden/score_en_1001_stub7.json");
  CHECK(bodies[0] + "\n" == golden);
  CHECK(bodies[1] + "\n" == golden);
  for (int i = 0; i < 3; ++i) {
    auto res = client().Post("/v1/score", R"({"rev_id":1001,"lang":"en"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "application/json");
    CHECK(res->body + "\n" == golden);
  }
  auto bad = client().Post("/v1/score", R"({"lang":"en"})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  auto notfound = client().Post("/v1/score", R"({"rev_id":0,"lang":"en"})", "application/json");
  REQUIRE(notfound);
  CHECK(notfound->status == 404);
  CHECK(json::parse(notfound->body).at("error").at("code") == "revision_not_found");

  server.stop();
  th.join();
}
