#include <atomic>
#include <cstdlib>
#include <fstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "refneed/common/errors.h"
#include "refneed/pipeline/pipeline.h"
#include "test_util.h"

using namespace refneed;
using nlohmann::json;
using refneed::testing::Gen;
using refneed::testing::source_path;
using namespace std::chrono_literals;

namespace {

const std::string kRevisions = "tests/fixtures/revisions";

std::string read_file(const std::string& rel) {
  std::ifstream in(source_path(rel), std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), {}};
}

json oracle() { return json::parse(read_file(kRevisions + "/oracle.json")); }

// k/(r+k), written out the long way.
double rn_oracle(int r, const std::vector<bool>& y) {
  int k = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i]) k = k + 1;
  }
  if (r == 0 && k == 0) return 0.0;
  return double(k) / double(r + k);
}

// Counts how many inputs reach the model.
class CountingBackend : public Backend {
 public:
  explicit CountingBackend(std::shared_ptr<const Backend> inner) : inner_(std::move(inner)) {}
  std::vector<std::array<double, 2>> logits(const std::vector<EncodedInput>& batch) const override {
    seen_ += batch.size();
    return inner_->logits(batch);
  }
  std::string describe() const override { return "counting"; }
  std::size_t seen() const { return seen_; }

 private:
  std::shared_ptr<const Backend> inner_;
  mutable std::atomic<std::size_t> seen_{0};
};

class ConstantBackend : public Backend {
 public:
  ConstantBackend(double z, std::chrono::milliseconds delay = 0ms) : z_(z), delay_(delay) {}
  std::vector<std::array<double, 2>> logits(const std::vector<EncodedInput>& batch) const override {
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
    return std::vector<std::array<double, 2>>(batch.size(), {0.0, z_});
  }
  std::string describe() const override { return "constant"; }

 private:
  double z_;
  std::chrono::milliseconds delay_;
};

Classifier with_backend(std::shared_ptr<const Backend> backend) {
  return Classifier(Tokenizer::hashing(), std::move(backend), BundleMeta{});
}

// Replays canned responses in order and records the requests.
class ScriptedTransport : public HttpTransport {
 public:
  struct Step {
    int status;
    std::string body;
    bool timeout = false;
    bool refuse = false;
  };
  explicit ScriptedTransport(std::vector<Step> steps) : steps_(std::move(steps)) {}

  HttpResult get(const std::string& url, std::chrono::milliseconds) const override {
    urls.push_back(url);
    const Step& s = steps_.at(std::min(next_++, steps_.size() - 1));
    if (s.timeout) throw TransportError(true, "timed out");
    if (s.refuse) throw TransportError(false, "connection refused");
    return {s.status, s.body};
  }
  mutable std::vector<std::string> urls;

 private:
  std::vector<Step> steps_;
  mutable std::size_t next_ = 0;
};

struct SleepLog {
  std::vector<std::chrono::milliseconds> calls;
  MediaWikiClient::Sleeper fn() {
    return [this](std::chrono::milliseconds d) { calls.push_back(d); };
  }
};

}  // namespace

TEST_CASE("compute_rn: worked examples") {
  CHECK(compute_rn(5, {true, false, true, false}) == 2.0 / 7.0);
  CHECK(compute_rn(0, {false, false, false}) == 0.0);
  CHECK(compute_rn(0, {}) == 0.0);
  CHECK(compute_rn(5, {true}) == 0.16666666666666666);
  CHECK(compute_rn(0, {false, true}) == 1.0);
  CHECK(compute_rn(3, {}) == 0.0);
}

TEST_CASE("compute_rn: random instances against the oracle, with bit-flip monotonicity") {
  Gen g(71);
  for (int trial = 0; trial < 1000; ++trial) {
    const int r = static_cast<int>(g.below(51));
    std::vector<bool> y(g.below(51));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = g.chance(0.4);
    const double rn = compute_rn(r, y);
    CHECK(rn == rn_oracle(r, y));
    CHECK(rn >= 0.0);
    CHECK(rn <= 1.0);
    const bool any = std::find(y.begin(), y.end(), true) != y.end();
    CHECK((rn == 1.0) == (r == 0 && any));
    if (!any) CHECK(rn == 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i]) continue;
      auto flipped = y;
      flipped[i] = true;
      const double after = compute_rn(r, flipped);
      CHECK(after >= rn);
      if (r > 0) {
        CHECK(after > rn);
      } else {
        CHECK(after == 1.0);  // 0 -> 1 from the degenerate case, else already 1
      }
    }
  }
}

TEST_CASE("parse_revision_response: canned API bodies") {
  const std::string body = read_file(kRevisions + "/en-1001.json");
  const json j = json::parse(body);
  const RawRevision rev = parse_revision_response(body, "en", 1001);
  CHECK(rev.lang == "en");
  CHECK(rev.rev_id == 1001);
  CHECK(rev.page_id == 5001);
  CHECK(rev.page_title == "Western jackdaw");
  CHECK(rev.wikitext == j["query"]["pages"][0]["revisions"][0]["slots"]["main"]["content"]);

  const RawRevision v1 = parse_revision_response(read_file(kRevisions + "/en-1004.json"), "en", 1004);
  CHECK(v1.page_id == 5004);
  CHECK(v1.page_title == "Jackdaw (v1 format)");
  CHECK(v1.wikitext == parse_revision_response(read_file(kRevisions + "/en-1002.json"), "en", 1002).wikitext);

  CHECK_THROWS_AS(parse_revision_response(read_file(kRevisions + "/en-1005.json"), "en", 1005),
                  RevisionNotFound);
  CHECK_THROWS_AS(parse_revision_response(body, "en", 1002), RevisionNotFound);
  CHECK_THROWS_AS(parse_revision_response(R"({"error":{"code":"nosuchrevid"}})", "en", 9),
                  RevisionNotFound);
  CHECK_THROWS_AS(parse_revision_response(R"({"error":{"code":"maxlag"}})", "en", 9), UpstreamError);
  CHECK_THROWS_AS(parse_revision_response("<html>", "en", 9), UpstreamError);
  CHECK_THROWS_AS(parse_revision_response(R"({"query":{}})", "en", 9), UpstreamError);
}

TEST_CASE("MediaWikiClient: request shape and canned response") {
  auto transport = std::make_shared<ScriptedTransport>(
      std::vector<ScriptedTransport::Step>{{200, read_file(kRevisions + "/en-1001.json")}});
  SleepLog sleeps;
  MediaWikiClient client({}, transport, sleeps.fn());
  const RawRevision rev = client.fetch("en", 1001);
  CHECK(rev == parse_revision_response(read_file(kRevisions + "/en-1001.json"), "en", 1001));
  REQUIRE(transport->urls.size() == 1);
  CHECK(transport->urls[0] ==
        "https://en.wikipedia.org/w/api.php?action=query&prop=revisions&revids=1001"
        "&rvprop=ids%7Ccontent&rvslots=main&format=json&formatversion=2");
  CHECK(sleeps.calls.empty());
}

TEST_CASE("MediaWikiClient: retries with backoff, then gives up") {
  const std::string ok = read_file(kRevisions + "/en-1001.json");
  {
    auto t = std::make_shared<ScriptedTransport>(
        std::vector<ScriptedTransport::Step>{{503, ""}, {0, "", true}, {200, ok}});
    SleepLog sleeps;
    MediaWikiClient client({}, t, sleeps.fn());
    CHECK(client.fetch("en", 1001).page_id == 5001);
    CHECK(t->urls.size() == 3);
    CHECK(sleeps.calls == std::vector<std::chrono::milliseconds>{250ms, 500ms});
  }
  {
    auto t = std::make_shared<ScriptedTransport>(
        std::vector<ScriptedTransport::Step>{{200, R"({"error":{"code":"maxlag"}})"}, {200, ok}});
    SleepLog sleeps;
    MediaWikiClient client({}, t, sleeps.fn());
    CHECK(client.fetch("en", 1001).page_id == 5001);
  }
  {
    auto t = std::make_shared<ScriptedTransport>(std::vector<ScriptedTransport::Step>{{500, ""}});
    SleepLog sleeps;
    MediaWikiClient client({}, t, sleeps.fn());
    try {
      client.fetch("en", 1001);
      FAIL("expected UpstreamError");
    } catch (const UpstreamError& e) {
      CHECK(e.status() == 500);
    }
    CHECK(t->urls.size() == 3);
  }
  {
    auto t = std::make_shared<ScriptedTransport>(std::vector<ScriptedTransport::Step>{{0, "", true}});
    SleepLog sleeps;
    MediaWikiOptions opts;
    opts.max_retries = 4;
    MediaWikiClient client(opts, t, sleeps.fn());
    CHECK_THROWS_AS(client.fetch("en", 1001), UpstreamTimeout);
    CHECK(t->urls.size() == 5);
    CHECK(sleeps.calls.back() == 2000ms);
  }
  {
    auto t = std::make_shared<ScriptedTransport>(std::vector<ScriptedTransport::Step>{{0, "", false, true}});
    SleepLog sleeps;
    MediaWikiClient client({}, t, sleeps.fn());
    CHECK_THROWS_AS(client.fetch("en", 1001), UpstreamError);
  }
  {
    // Client errors are not retried.
    auto t = std::make_shared<ScriptedTransport>(std::vector<ScriptedTransport::Step>{{403, ""}});
    SleepLog sleeps;
    MediaWikiClient client({}, t, sleeps.fn());
    CHECK_THROWS_AS(client.fetch("en", 1001), UpstreamError);
    CHECK(t->urls.size() == 1);
  }
}

TEST_CASE("MediaWikiClient: rejects bad input before any request") {
  auto t = std::make_shared<ScriptedTransport>(std::vector<ScriptedTransport::Step>{{200, "{}"}});
  MediaWikiClient client({}, t, SleepLog().fn());
  CHECK_THROWS_AS(client.fetch("en", 0), RevisionNotFound);
  CHECK_THROWS_AS(client.fetch("en", -3), RevisionNotFound);
  CHECK_THROWS_AS(client.fetch("en/../x", 1), UnknownLanguage);
  CHECK_THROWS_AS(client.fetch("", 1), UnknownLanguage);
  CHECK(t->urls.empty());
  CHECK_THROWS_AS(MediaWikiClient(MediaWikiOptions{"https://example.org/api.php"}), ConfigError);
}

TEST_CASE("MediaWikiClient: real HTTP transport against a local server") {
  httplib::Server server;
  std::atomic<int> flaky_calls{0};
  const std::string ok = read_file(kRevisions + "/en-1001.json");
  server.Get("/ok/api.php", [&](const httplib::Request& req, httplib::Response& res) {
    CHECK(req.get_param_value("revids") == "1001");
    CHECK(req.get_param_value("rvprop") == "ids|content");
    res.set_content(ok, "application/json");
  });
  server.Get("/flaky/api.php", [&](const httplib::Request&, httplib::Response& res) {
    if (flaky_calls++ == 0) {
      res.status = 503;
      return;
    }
    res.set_content(ok, "application/json");
  });
  server.Get("/slow/api.php", [&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(600ms);
    res.set_content(ok, "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  // The wiki code doubles as the route name.
  auto make = [&](std::chrono::milliseconds timeout) {
    MediaWikiOptions o;
    o.url_template = "http://127.0.0.1:" + std::to_string(port) + "/{lang}/api.php";
    o.timeout = timeout;
    o.max_retries = 1;
    o.backoff = 1ms;
    return MediaWikiClient(o);
  };
  CHECK(make(2000ms).fetch("ok", 1001).page_id == 5001);
  CHECK(make(2000ms).fetch("flaky", 1001).page_id == 5001);
  CHECK(flaky_calls == 2);
  CHECK_THROWS_AS(make(150ms).fetch("slow", 1001), UpstreamTimeout);
  CHECK_THROWS_AS(make(2000ms).fetch("missing", 1001), RevisionNotFound);  // HTTP 404

  server.stop();
  th.join();
}

TEST_CASE("MediaWikiClient: live fetch (set REFNEED_LIVE_TESTS=1)") {
  const char* flag = std::getenv("REFNEED_LIVE_TESTS");
  if (!flag || std::string(flag) != "1") {
    MESSAGE("skipped: network tests disabled");
    return;
  }
  MediaWikiClient client({});
  const RawRevision rev = client.fetch("en", 1242378206);
  CHECK(rev.page_id > 0);
  CHECK(!rev.wikitext.empty());
  CHECK_THROWS_AS(client.fetch("en", 0), RevisionNotFound);
}

TEST_CASE("CachingRevisionSource: bounded LRU, errors not cached") {
  class Counting : public RevisionSource {
   public:
    RawRevision fetch(std::string_view lang, std::int64_t rev_id) const override {
      ++calls;
      if (rev_id == 404) throw RevisionNotFound("nope");
      return {std::string(lang), rev_id, rev_id + 1, "t", "text " + std::to_string(rev_id)};
    }
    mutable std::atomic<int> calls{0};
  };
  auto inner = std::make_shared<Counting>();
  CachingRevisionSource cache(inner, 2);
  CHECK(cache.fetch("en", 1).wikitext == "text 1");
  CHECK(cache.fetch("en", 1).wikitext == "text 1");
  CHECK(inner->calls == 1);
  cache.fetch("de", 1);  // different key
  CHECK(inner->calls == 2);
  cache.fetch("en", 1);  // refresh en:1, de:1 is now oldest
  cache.fetch("en", 2);  // evicts de:1
  CHECK(cache.size() == 2);
  cache.fetch("en", 1);
  CHECK(inner->calls == 3);
  cache.fetch("de", 1);
  CHECK(inner->calls == 4);
  CHECK_THROWS_AS(cache.fetch("en", 404), RevisionNotFound);
  CHECK_THROWS_AS(cache.fetch("en", 404), RevisionNotFound);
  CHECK(inner->calls == 6);
  CHECK(cache.hits() + cache.misses() == 9);
  CHECK(cache.size() <= 2);
  CHECK_THROWS_AS(CachingRevisionSource(inner, 0), ConfigError);

  // Hammer it from several threads.
  CachingRevisionSource shared(inner, 8);
  std::vector<std::thread> threads;
  std::atomic<int> wrong{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      Gen g(t);
      for (int i = 0; i < 500; ++i) {
        const auto id = static_cast<std::int64_t>(1 + g.below(20));
        if (shared.fetch("en", id).wikitext != "text " + std::to_string(id)) ++wrong;
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(wrong == 0);
  CHECK(shared.size() <= 8);
}

TEST_CASE("collect_sentences: fixture revision yields the hand-labelled units") {
  const json o = oracle();
  FileRevisionSource files(source_path(kRevisions));
  for (const char* id : {"1001", "1002", "1004", "1242378206"}) {
    CAPTURE(id);
    const RevisionStats stats =
        collect_sentences(files.fetch("en", std::stoll(id)), LangConfig::defaults());
    const json& want = o.at(id);
    CHECK(stats.n_cited == want.at("n_cited").get<std::size_t>());
    REQUIRE(stats.uncited.size() == want.at("uncited").size());
    for (std::size_t i = 0; i < stats.uncited.size(); ++i) {
      const json& u = want.at("uncited")[i];
      const ClassifierInput& got = stats.uncited[i];
      CHECK(got.lang == u.at("lang"));
      CHECK(got.section_title == u.at("section"));
      CHECK(got.sentence == u.at("sentence"));
      CHECK(got.next_sent == u.at("next"));
      CHECK(got.prev_sent == u.at("prev"));
    }
  }
}

TEST_CASE("assess_revision: stub scores recomputed from the oracle's predictions") {
  const json o = oracle();
  FileRevisionSource files(source_path(kRevisions));
  for (const char* id : {"1001", "1002", "1242378206"}) {
    for (const char* seed : {"0", "7", "42"}) {
      CAPTURE(id);
      CAPTURE(seed);
      const json& want = o.at(id);
      auto counting = std::make_shared<CountingBackend>(stub_backend(std::stoull(seed)));
      const Classifier clf = with_backend(counting);
      RevisionStats stats;
      const ReferenceNeedResult r = assess_revision("en", std::stoll(id), files, clf,
                                                    LangConfig::defaults(), {}, &stats);
      // Cited sentences never reach the model.
      CHECK(counting->seen() == want.at("uncited").size());
      const auto probs = want.at("probs").at(seed).get<std::vector<double>>();
      REQUIRE(stats.probs.size() == probs.size());
      std::vector<bool> y;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        CHECK(stats.probs[i] == doctest::Approx(probs[i]).epsilon(1e-12));
        y.push_back(probs[i] >= 0.5);
      }
      CHECK(stats.predicted_labels == y);
      CHECK(r.reference_need_score == rn_oracle(want.at("n_cited"), y));
      CHECK(r.wiki_db == "enwiki");
      CHECK(r.revision_id == std::stoll(id));
      CHECK(r.model_name == "reference-need");
      CHECK(r.model_version == 0);
    }
  }
}

TEST_CASE("assess_revision: edge cases") {
  FileRevisionSource files(source_path(kRevisions));
  const LangConfig& cfg = LangConfig::defaults();
  // Seed 0 puts every uncited sentence of 1001 below 0.5.
  CHECK(assess_revision("en", 1001, files, Classifier::stub(0), cfg).reference_need_score == 0.0);
  CHECK(assess_revision("en", 1001, files, with_backend(std::make_shared<ConstantBackend>(-3)), cfg)
            .reference_need_score == 0.0);
  CHECK(assess_revision("en", 1001, files, with_backend(std::make_shared<ConstantBackend>(3)), cfg)
            .reference_need_score == 6.0 / 10.0);
  // No cited sentences, something predicted: 1.
  CHECK(assess_revision("en", 1002, files, with_backend(std::make_shared<ConstantBackend>(3)), cfg)
            .reference_need_score == 1.0);
  CHECK(assess_revision("en", 1002, files, with_backend(std::make_shared<ConstantBackend>(-3)), cfg)
            .reference_need_score == 0.0);
  // Threshold is applied to the probability.
  AssessOptions strict;
  strict.threshold = 0.96;  // sigmoid(3) = 0.9526
  CHECK(assess_revision("en", 1002, files, with_backend(std::make_shared<ConstantBackend>(3)), cfg,
                        strict)
            .reference_need_score == 0.0);

  auto counting = std::make_shared<CountingBackend>(stub_backend(1));
  CHECK_THROWS_AS(assess_revision("en", 1003, files, with_backend(counting), cfg), EmptyArticle);
  CHECK(counting->seen() == 0);
  CHECK_THROWS_AS(assess_revision("en", 1005, files, Classifier::stub(1), cfg), RevisionNotFound);
  CHECK_THROWS_AS(assess_revision("en", 77, files, Classifier::stub(1), cfg), RevisionNotFound);
  CHECK_THROWS_AS(assess_revision("xx", 1001, files, Classifier::stub(1), cfg), UnknownLanguage);
  AssessOptions bad;
  bad.threshold = 1.0;
  CHECK_THROWS_AS(assess_revision("en", 1001, files, Classifier::stub(1), cfg, bad), ConfigError);
}

TEST_CASE("assess_revision: classification deadline") {
  FileRevisionSource files(source_path(kRevisions));
  AssessOptions opts;
  opts.deadline = 30ms;
  opts.batch_size = 1;
  const Classifier slow = with_backend(std::make_shared<ConstantBackend>(1, 20ms));
  CHECK_THROWS_AS(assess_revision("en", 1001, files, slow, LangConfig::defaults(), opts),
                  DeadlineExceeded);
  opts.deadline = 5000ms;
  CHECK(assess_revision("en", 1001, files, slow, LangConfig::defaults(), opts)
            .reference_need_score == 0.6);
}

TEST_CASE("ReferenceNeedResult: wire format") {
  FileRevisionSource files(source_path(kRevisions));
  // Five cited claims and one uncited claim predicted to need a citation.
  const ReferenceNeedResult r =
      assess_revision("en", 1242378206, files, Classifier::stub(0), LangConfig::defaults());
  CHECK(r.to_json() ==
        R"({"model_name":"reference-need","model_version":0,"wiki_db":"enwiki",)"
        R"("revision_id":1242378206,"reference_need_score":0.16666666666666666})");
  ReferenceNeedResult zero{"reference-need", 3, "dewiki", 12, 0.0};
  CHECK(zero.to_json() ==
        R"({"model_name":"reference-need","model_version":3,"wiki_db":"dewiki",)"
        R"("revision_id":12,"reference_need_score":0.0})");
  Gen g(81);
  for (int i = 0; i < 500; ++i) {
    ReferenceNeedResult x{"reference-need", 1, "enwiki", 5, g.uniform()};
    CHECK(json::parse(x.to_json())["reference_need_score"].get<double>() == x.reference_need_score);
  }
}

TEST_CASE("assess_revision: concurrent calls agree") {
  FileRevisionSource files(source_path(kRevisions));
  const Classifier graph = Classifier::from_bundle(source_path("tests/fixtures/bundle_tiny"), 1);
  const std::string want =
      assess_revision("en", 1001, files, graph, LangConfig::defaults()).to_json();
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 5; ++i) {
        if (assess_revision("en", 1001, files, graph, LangConfig::defaults()).to_json() != want) {
          ++mismatches;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(mismatches == 0);
}
