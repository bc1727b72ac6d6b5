#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "json.hpp"
#include "refneed/common/errors.h"
#include "refneed/eval/metrics.h"
#include "refneed/eval/verbalizer.h"
#include "test_util.h"

using namespace refneed;
using nlohmann::json;
using refneed::testing::Gen;
using refneed::testing::source_path;

namespace {

// Concordant-pair count, ties half.
double pair_auc(const std::vector<double>& s, const std::vector<bool>& y) {
  double wins = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / static_cast<double>(pairs);
}

struct Dataset {
  std::vector<double> scores;
  std::vector<bool> labels;
};

// Both classes present; coarse scores so ties show up.
Dataset random_dataset(Gen& g, std::size_t max_n, bool coarse) {
  Dataset d;
  const std::size_t n = 2 + g.below(max_n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const bool y = i == 0 ? true : i == 1 ? false : g.chance(0.5);
    d.labels.push_back(y);
    const double s = coarse ? static_cast<double>(g.below(6)) / 5.0 : g.uniform() + (y ? 0.3 : 0.0);
    d.scores.push_back(s);
  }
  return d;
}

ClassifierInput example_input() {
  return {"en", "systematics",
          "An archaic collective noun for a group of jackdaws is a \"clattering\".",
          "Another name for a flock is a \"train\".", ""};
}

ClassifierInput from_item(const json& it) {
  return {it.at("lang"), it.at("section"), it.at("sentence"), it.at("next"), it.at("prev")};
}

class CountingClient : public LogprobClient {
 public:
  double answer_logprob(const std::string& prompt, std::string_view answer) const override {
    const int now = ++active_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {}
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --active_;
    return answer == "yes" ? -1.0 : -2.0;
  }
  int peak() const { return peak_; }

 private:
  mutable std::atomic<int> active_{0};
  mutable std::atomic<int> peak_{0};
};

}  // namespace

TEST_CASE("auc_roc: examples") {
  CHECK(auc_roc({0.9, 0.4, 0.6, 0.2}, {true, true, false, false}) == 0.75);
  CHECK(auc_roc({0.3, 0.3, 0.3, 0.3}, {true, false, true, false}) == 0.5);
  CHECK(auc_roc({0.9, 0.8, 0.1, 0.2}, {true, true, false, false}) == 1.0);
  CHECK(auc_roc({0.1, 0.2, 0.9, 0.8}, {true, true, false, false}) == 0.0);
  CHECK_THROWS_AS(auc_roc({0.1, 0.2}, {true, true}), DegenerateLabels);
  CHECK_THROWS_AS(auc_roc({}, {}), DegenerateLabels);
  CHECK_THROWS_AS(auc_roc({0.1}, {true, false}), std::invalid_argument);
  CHECK_THROWS_AS(auc_roc({NAN, 0.2}, {true, false}), std::invalid_argument);
}

TEST_CASE("auc_roc: equals pair counting on 500 random datasets") {
  Gen g(11);
  for (int t = 0; t < 500; ++t) {
    const Dataset d = random_dataset(g, 50, t % 2 == 0);
    CAPTURE(t);
    CHECK(auc_roc(d.scores, d.labels) == pair_auc(d.scores, d.labels));
  }
}

TEST_CASE("auc_roc: monotone-transform invariance and label complement") {
  Gen g(12);
  for (int t = 0; t < 200; ++t) {
    const Dataset d = random_dataset(g, 50, t % 3 == 0);
    const double a = auc_roc(d.scores, d.labels);
    std::vector<double> warped;
    for (double s : d.scores) warped.push_back(std::exp(3.0 * s) - 7.0);
    CHECK(auc_roc(warped, d.labels) == a);
    std::vector<bool> flipped;
    for (bool y : d.labels) flipped.push_back(!y);
    CHECK(auc_roc(d.scores, flipped) + a == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("bootstrap_ci: determinism, clipping, errors") {
  Gen g(13);
  const Dataset d = random_dataset(g, 40, false);
  const Interval a = bootstrap_ci(d.scores, d.labels, 300, 99);
  const Interval b = bootstrap_ci(d.scores, d.labels, 300, 99);
  CHECK(a.lo == b.lo);
  CHECK(a.hi == b.hi);
  const Interval c = bootstrap_ci(d.scores, d.labels, 300, 100);
  CHECK((c.lo != a.lo || c.hi != a.hi));

  const Interval sep = bootstrap_ci({0.9, 0.8, 0.7, 0.1, 0.2, 0.3}, {true, true, true, false, false, false},
                                    200, 1);
  CHECK(sep.lo == 1.0);
  CHECK(sep.hi == 1.0);

  CHECK_THROWS_AS(bootstrap_ci(d.scores, d.labels, 99, 1), std::invalid_argument);
  CHECK_THROWS_AS(bootstrap_ci({0.1, 0.2}, {false, false}, 100, 1), DegenerateLabels);
  // Two points, one per class: half the resamples are single-class and redrawn.
  const Interval two = bootstrap_ci({0.2, 0.7}, {false, true}, 100, 3);
  CHECK(two.lo == 1.0);
}

TEST_CASE("bootstrap_ci: contains the point AUC on >= 95% of 200 datasets") {
  Gen g(14);
  int contained = 0;
  for (int t = 0; t < 200; ++t) {
    const Dataset d = random_dataset(g, 50, t % 4 == 0);
    const double a = auc_roc(d.scores, d.labels);
    const Interval ci = bootstrap_ci(d.scores, d.labels, 200, 1000 + t);
    CHECK(ci.lo >= 0.0);
    CHECK(ci.hi <= 1.0);
    if (ci.lo <= a && a <= ci.hi) ++contained;
  }
  CHECK(contained >= 190);
}

TEST_CASE("bootstrap_ci: duplicating the data does not widen the interval") {
  Gen g(15);
  Dataset d;
  for (int i = 0; i < 40; ++i) {
    const bool y = i % 2 == 0;
    d.labels.push_back(y);
    d.scores.push_back(g.uniform() + (y ? 0.25 : 0.0));
  }
  Dataset twice = d;
  twice.scores.insert(twice.scores.end(), d.scores.begin(), d.scores.end());
  twice.labels.insert(twice.labels.end(), d.labels.begin(), d.labels.end());
  std::vector<double> w1, w2;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Interval a = bootstrap_ci(d.scores, d.labels, 200, seed);
    const Interval b = bootstrap_ci(twice.scores, twice.labels, 200, seed);
    w1.push_back(a.hi - a.lo);
    w2.push_back(b.hi - b.lo);
  }
  std::sort(w1.begin(), w1.end());
  std::sort(w2.begin(), w2.end());
  CHECK(w2[10] <= w1[10]);
}

TEST_CASE("thresholded_metrics: hand counts") {
  // Predictions [1,1,1,0] for labels [1,0,1,0].
  const ThresholdMetrics m = thresholded_metrics({0.9, 0.6, 0.5, 0.1}, {true, false, true, false}, 0.5);
  CHECK(m.confusion == Confusion{2, 1, 1, 0});
  CHECK(m.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.recall == 1.0);
  CHECK(m.accuracy == 0.75);
  CHECK(m.f1 == doctest::Approx(0.8).epsilon(1e-15));

  const ThresholdMetrics right = thresholded_metrics({0.9, 0.1}, {true, false}, 0.5);
  CHECK(right.accuracy == 1.0);
  CHECK(right.f1 == 1.0);
  CHECK(right.precision == 1.0);
  CHECK(right.recall == 1.0);
  const ThresholdMetrics wrong = thresholded_metrics({0.1, 0.9}, {true, false}, 0.5);
  CHECK(wrong.accuracy == 0.0);
  CHECK(wrong.f1 == 0.0);
  // Nothing predicted positive: precision is 0, not NaN.
  const ThresholdMetrics none = thresholded_metrics({0.1, 0.2}, {true, false}, 0.5);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
}

TEST_CASE("thresholded_metrics: random data vs hand count") {
  Gen g(16);
  for (int t = 0; t < 300; ++t) {
    const Dataset d = random_dataset(g, 50, t % 2 == 0);
    const double thr = g.uniform();
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < d.scores.size(); ++i) {
      const bool p = !(d.scores[i] < thr);
      tp += p && d.labels[i];
      fp += p && !d.labels[i];
      tn += !p && !d.labels[i];
      fn += !p && d.labels[i];
    }
    const ThresholdMetrics m = thresholded_metrics(d.scores, d.labels, thr);
    CHECK(m.confusion == Confusion{tp, fp, tn, fn});
    const double prec = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double rec = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    CHECK(m.precision == prec);
    CHECK(m.recall == rec);
    if (prec + rec > 0) CHECK(m.f1 == doctest::Approx(2 * prec * rec / (prec + rec)).epsilon(1e-12));
    for (double r : {m.accuracy, m.precision, m.recall, m.f1}) {
      CHECK(r >= 0.0);
      CHECK(r <= 1.0);
    }
  }
}

TEST_CASE("make_report: per-language sums and pooled metrics") {
  Gen g(17);
  const std::vector<std::string> pool{"en", "de", "ja", "fr"};
  for (int t = 0; t < 30; ++t) {
    const Dataset d = random_dataset(g, 50, false);
    std::vector<std::string> langs;
    for (std::size_t i = 0; i < d.scores.size(); ++i) langs.push_back(g.pick(pool));
    const EvalReport r = make_report(d.scores, d.labels, langs, 0.5, 100, 5);
    CHECK(r.n == d.scores.size());
    Confusion sum;
    for (const auto& [lang, lr] : r.per_language) {
      CHECK(lr.confusion.total() == static_cast<std::size_t>(std::count(langs.begin(), langs.end(), lang)));
      CHECK(lr.n == lr.confusion.total());
      sum += lr.confusion;
    }
    CHECK(sum == r.metrics.confusion);
    const ThresholdMetrics pooled = metrics_from_confusion(sum);
    CHECK(pooled.f1 == r.metrics.f1);
    CHECK(pooled.accuracy == r.metrics.accuracy);
    CHECK(r.auc == auc_roc(d.scores, d.labels));
  }
  const EvalReport r = make_report({0.9, 0.1, 0.8}, {true, false, true}, {"en", "en", "de"}, 0.5, 100, 1);
  CHECK(r.per_language.at("en").auc.has_value());
  CHECK_FALSE(r.per_language.at("de").auc.has_value());
  const json j = json::parse(r.to_json());
  CHECK(j.at("per_language").at("de").at("auc").is_null());
  CHECK(j.at("auc_ci").size() == 2);
  CHECK(j.at("confusion").at("tp") == 2);
}

TEST_CASE("evaluate and latency_bench with the stub") {
  const Classifier stub = Classifier::stub(7);
  std::vector<SentenceRecord> records;
  Gen g(18);
  for (int i = 0; i < 60; ++i) {
    SentenceRecord r;
    r.wiki_db = i % 3 == 0 ? "dewiki" : "enwiki";
    r.section_name = "History";
    r.sentence = "Sentence number " + std::to_string(i) + " about the river and the town.";
    r.label = i % 2;
    records.push_back(r);
  }
  EvalOptions opts;
  opts.n_boot = 200;
  const EvalReport rep = evaluate(records, stub, opts);
  std::vector<double> scores;
  std::vector<bool> labels;
  for (const auto& r : records) {
    scores.push_back(stub.predict(ClassifierInput::from_record(r)).prob);
    labels.push_back(r.label == 1);
  }
  CHECK(rep.auc == auc_roc(scores, labels));
  CHECK(rep.scores == scores);
  CHECK(rep.per_language.at("de").n == 20);
  CHECK(rep.per_language.at("en").n == 40);
  CHECK(rep.mean_latency_s < 1e-3);

  std::vector<ClassifierInput> inputs;
  for (const auto& r : records) inputs.push_back(ClassifierInput::from_record(r));
  const LatencyStats a = latency_bench(stub, inputs, 200, 2000);
  const LatencyStats b = latency_bench(stub, inputs, 200, 2000);
  CHECK(a.n == 2000);
  CHECK(a.mean_s < 1e-3);
  CHECK(a.mean_s > 0.0);
  CHECK(std::abs(a.mean_s - b.mean_s) <= 0.5 * std::max(a.mean_s, b.mean_s));
  CHECK_THROWS_AS(latency_bench(stub, inputs, 0, 99), std::invalid_argument);
}

TEST_CASE("verbalizer: p_yes") {
  CHECK(p_yes_from_logprobs(-0.7, -0.7) == 0.5);
  CHECK(std::abs(p_yes_from_logprobs(-0.5, -1.5) - 0.7311) <= 1e-4);
  CHECK(std::abs(p_yes_from_logprobs(-0.5, -1.5) - 1.0 / (1.0 + std::exp(-1.0))) < 1e-15);
  CHECK(p_yes_from_logprobs(-1000.0, -1001.0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(p_yes_from_logprobs(-INFINITY, -0.1) == 0.0);
  CHECK(p_yes_from_logprobs(-0.1, -INFINITY) == 1.0);
  CHECK(p_yes_from_logprobs(-INFINITY, -INFINITY) == 0.5);
  CHECK_THROWS_AS(p_yes_from_logprobs(NAN, -1.0), MissingLogprob);
}

TEST_CASE("verbalizer: prompt rendering") {
  const ClassifierInput in = example_input();
  const std::string yes = render_prompt(in, "yes");
  const std::string no = render_prompt(in, "no");
  CHECK(yes.rfind("You are an experienced Wikipedia editor.\n", 0) == 0);
  CHECK(yes.substr(0, yes.size() - 3) == no.substr(0, no.size() - 2));
  CHECK(yes.ends_with("\nAnswer: yes"));
  CHECK(no.ends_with("\nAnswer: no"));
  CHECK(yes.find("Text to assess: <<An archaic collective noun for a group of jackdaws is a "
                 "\"clattering\".>>\n") != std::string::npos);
  CHECK(yes.find("The language code of the article is `en`, and the section name is `systematics`.") !=
        std::string::npos);
  CHECK(yes.find("INPUT: \n\nText to assess: <<") != std::string::npos);
  CHECK(yes.find(">>\n<<<Another name for a flock is a \"train\".>>>\nAnswer: yes") != std::string::npos);
  CHECK(yes.find("{{") == std::string::npos);
  CHECK_THROWS_AS(render_prompt(in, "maybe"), std::invalid_argument);

  ClassifierInput bare = in;
  bare.next_sent.clear();
  const std::string p = render_prompt(bare, "no");
  const std::string tail = p.substr(p.find("INPUT: \n"));
  CHECK(tail == "INPUT: \n\nText to assess: <<" + in.sentence + ">>\n\nAnswer: no");

  ClassifierInput both = in;
  both.prev_sent = "Jackdaws are corvids.";
  const std::string q = render_prompt(both, "yes");
  CHECK(q.find("INPUT: \n<Jackdaws are corvids.>\nText to assess: <<") != std::string::npos);

  // Placeholder-looking text inside the sentence is not expanded.
  ClassifierInput tricky = in;
  tricky.sentence = "Uses {{section}} and {{text}} literally.";
  CHECK(render_prompt(tricky, "yes").find("<<Uses {{section}} and {{text}} literally.>>") !=
        std::string::npos);
}

TEST_CASE("verbalizer: replay fixture matches the pair-counting oracle") {
  const std::string path = source_path("tests/fixtures/verbalizer/replay.json");
  std::ifstream in(path);
  REQUIRE(in);
  const json fx = json::parse(in);
  const ReplayClient client = ReplayClient::load(path);
  CHECK(client.size() == 40);

  std::vector<ClassifierInput> inputs;
  std::vector<bool> labels;
  for (const json& it : fx.at("items")) {
    inputs.push_back(from_item(it));
    labels.push_back(it.at("label") == 1);
    // Independent renderer agrees byte for byte.
    CHECK(render_prompt(inputs.back(), "yes") == it.at("prompts").at("yes").get<std::string>());
    CHECK(render_prompt(inputs.back(), "no") == it.at("prompts").at("no").get<std::string>());
  }
  REQUIRE(inputs.size() == 20);
  const std::vector<VerbalizerScore> scores = verbalizer_scores(client, inputs, 4);
  std::vector<double> p;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    CHECK(scores[i].p_yes == doctest::Approx(fx["items"][i].at("p_yes").get<double>()).epsilon(1e-12));
    CHECK(scores[i].lp_yes == fx["items"][i]["logprobs"]["yes"].get<double>());
    p.push_back(scores[i].p_yes);
  }
  CHECK(auc_roc(p, labels) == doctest::Approx(fx.at("expected_auc").get<double>()).epsilon(1e-12));
  CHECK(auc_roc(p, labels) == pair_auc(p, labels));

  ClassifierInput unknown = inputs[0];
  unknown.sentence += " extra";
  CHECK_THROWS_AS(verbalizer_score(client, unknown), MissingLogprob);
  CHECK_THROWS_AS(ReplayClient::load("/nonexistent/replay.json"), ClientError);
}

TEST_CASE("verbalizer: bounded parallelism") {
  CountingClient client;
  const std::vector<ClassifierInput> inputs(12, example_input());
  const auto scores = verbalizer_scores(client, inputs, 3);
  CHECK(scores.size() == 12);
  CHECK(client.peak() <= 3);
  for (const auto& s : scores) CHECK(s.p_yes == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("verbalizer: completions client request and response") {
  CHECK_THROWS_AS(CompletionsClient(CompletionsOptions{"localhost/v1", "m"}), ConfigError);
  CHECK_THROWS_AS(CompletionsClient(CompletionsOptions{"http://localhost/v1/completions", ""}), ConfigError);
  const CompletionsClient c(CompletionsOptions{"http://localhost:9/v1/completions", "some-model"});
  const json body = json::parse(c.request_body("hello"));
  CHECK(body.at("model") == "some-model");
  CHECK(body.at("prompt") == "hello");
  CHECK(body.at("max_tokens") == 0);
  CHECK(body.at("echo") == true);
  CHECK(body.at("logprobs") == 1);

  const std::string ok =
      R"({"choices":[{"logprobs":{"tokens":["Answer",":"," yes"],"token_logprobs":[null,-0.2,-0.75]}}]})";
  CHECK(CompletionsClient::parse_answer_logprob(ok, "yes") == -0.75);
  CHECK_THROWS_AS(CompletionsClient::parse_answer_logprob(ok, "no"), MissingLogprob);
  const std::string sp = R"({"choices":[{"logprobs":{"tokens":["▁no"],"token_logprobs":[-2.5]}}]})";
  CHECK(CompletionsClient::parse_answer_logprob(sp, "no") == -2.5);
  CHECK_THROWS_AS(CompletionsClient::parse_answer_logprob(R"({"choices":[]})", "yes"), MissingLogprob);
  CHECK_THROWS_AS(CompletionsClient::parse_answer_logprob(
                      R"({"choices":[{"logprobs":{"tokens":["yes"],"token_logprobs":[null]}}]})", "yes"),
                  MissingLogprob);
  CHECK_THROWS_AS(CompletionsClient::parse_answer_logprob("<html>", "yes"), ClientError);
  // Nothing listens on port 9.
  CHECK_THROWS_AS(c.answer_logprob("x yes", "yes"), ClientError);
}
