#include "refneed/eval/metrics.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "refneed/common/errors.h"
#include "refneed/common/random.h"

namespace refneed {

namespace {

void check_inputs(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("scores and labels differ in length");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw std::invalid_argument("NaN score");
  }
}

// Midrank AUC on an index subset (indices may repeat).
double auc_of(const std::vector<double>& scores, const std::vector<bool>& labels,
              std::vector<std::size_t>& idx) {
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::size_t tie_pos = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      if (labels[idx[j]]) ++tie_pos;
      ++j;
    }
    // Ranks i+1 .. j share the average (i + 1 + j) / 2.
    pos_rank_sum += static_cast<double>(tie_pos) * static_cast<double>(i + 1 + j) / 2.0;
    pos += tie_pos;
    i = j;
  }
  const std::size_t neg = idx.size() - pos;
  if (pos == 0 || neg == 0) throw DegenerateLabels("AUC needs both positive and negative labels");
  const double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

nlohmann::ordered_json confusion_json(const Confusion& c) {
  nlohmann::ordered_json j;
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["tn"] = c.tn;
  j["fn"] = c.fn;
  return j;
}

}  // namespace

double auc_roc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  check_inputs(scores, labels);
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  return auc_of(scores, labels, idx);
}

Interval bootstrap_ci(const std::vector<double>& scores, const std::vector<bool>& labels,
                      std::size_t n_boot, std::uint64_t seed) {
  if (n_boot < 100) throw std::invalid_argument("bootstrap needs at least 100 resamples");
  auc_roc(scores, labels);  // validates, throws DegenerateLabels up front
  const std::size_t n = scores.size();
  SplitMix64 rng(seed);
  std::vector<double> aucs;
  aucs.reserve(n_boot);
  std::vector<std::size_t> idx(n);
  constexpr int kMaxRedraws = 10000;
  for (std::size_t b = 0; b < n_boot; ++b) {
    for (int attempt = 0;; ++attempt) {
      std::size_t pos = 0;
      for (std::size_t i = 0; i < n; ++i) {
        idx[i] = static_cast<std::size_t>(rng.below(n));
        if (labels[idx[i]]) ++pos;
      }
      if (pos > 0 && pos < n) break;
      if (attempt >= kMaxRedraws) {
        throw DegenerateLabels("bootstrap keeps drawing single-class resamples");
      }
    }
    aucs.push_back(auc_of(scores, labels, idx));
  }
  const double mean = std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(n_boot);
  double var = 0.0;
  for (double a : aucs) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(n_boot));
  return {std::clamp(mean - 2.0 * sd, 0.0, 1.0), std::clamp(mean + 2.0 * sd, 0.0, 1.0)};
}

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

ThresholdMetrics metrics_from_confusion(const Confusion& c) {
  auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  ThresholdMetrics m;
  m.confusion = c;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  // 2TP / (2TP + FP + FN), the same value as the harmonic mean.
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

ThresholdMetrics thresholded_metrics(const std::vector<double>& scores,
                                     const std::vector<bool>& labels, double threshold) {
  check_inputs(scores, labels);
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (predicted && labels[i]) ++c.tp;
    else if (predicted) ++c.fp;
    else if (labels[i]) ++c.fn;
    else ++c.tn;
  }
  return metrics_from_confusion(c);
}

EvalReport make_report(const std::vector<double>& scores, const std::vector<bool>& labels,
                       const std::vector<std::string>& langs, double threshold,
                       std::size_t n_boot, std::uint64_t seed) {
  if (langs.size() != scores.size()) throw std::invalid_argument("langs and scores differ in length");
  EvalReport r;
  r.n = scores.size();
  r.threshold = threshold;
  r.n_boot = n_boot;
  r.seed = seed;
  r.auc = auc_roc(scores, labels);
  r.auc_ci = bootstrap_ci(scores, labels, n_boot, seed);
  r.metrics = thresholded_metrics(scores, labels, threshold);

  std::map<std::string, std::pair<std::vector<double>, std::vector<bool>>> by_lang;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    by_lang[langs[i]].first.push_back(scores[i]);
    by_lang[langs[i]].second.push_back(labels[i]);
  }
  for (const auto& [lang, data] : by_lang) {
    LanguageReport lr;
    lr.n = data.first.size();
    lr.confusion = thresholded_metrics(data.first, data.second, threshold).confusion;
    const auto positives = std::count(data.second.begin(), data.second.end(), true);
    if (positives > 0 && static_cast<std::size_t>(positives) < lr.n) {
      lr.auc = auc_roc(data.first, data.second);
    }
    r.per_language[lang] = lr;
  }
  return r;
}

std::string EvalReport::to_json(int indent) const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["threshold"] = threshold;
  j["auc"] = auc;
  j["auc_ci"] = {auc_ci.lo, auc_ci.hi};
  j["n_boot"] = n_boot;
  j["seed"] = seed;
  j["accuracy"] = metrics.accuracy;
  j["f1"] = metrics.f1;
  j["precision"] = metrics.precision;
  j["recall"] = metrics.recall;
  j["confusion"] = confusion_json(metrics.confusion);
  j["mean_latency_s"] = mean_latency_s;
  j["per_language"] = nlohmann::ordered_json::object();
  for (const auto& [lang, lr] : per_language) {
    nlohmann::ordered_json l;
    l["n"] = lr.n;
    l["auc"] = lr.auc ? nlohmann::ordered_json(*lr.auc) : nlohmann::ordered_json();
    l["confusion"] = confusion_json(lr.confusion);
    j["per_language"][lang] = l;
  }
  return j.dump(indent);
}

EvalReport evaluate(const std::vector<SentenceRecord>& records, const Classifier& classifier,
                    const EvalOptions& options) {
  using Clock = std::chrono::steady_clock;
  std::vector<double> scores;
  std::vector<bool> labels;
  std::vector<std::string> langs;
  double total_s = 0.0;
  for (const SentenceRecord& r : records) {
    const ClassifierInput in = ClassifierInput::from_record(r);
    const auto t0 = Clock::now();
    const double p = classifier.predict(in).prob;
    total_s += std::chrono::duration<double>(Clock::now() - t0).count();
    scores.push_back(p);
    labels.push_back(r.label == 1);
    langs.push_back(in.lang);
  }
  EvalReport report = make_report(scores, labels, langs, options.threshold, options.n_boot,
                                  options.seed);
  report.scores = std::move(scores);
  report.mean_latency_s = records.empty() ? 0.0 : total_s / static_cast<double>(records.size());
  return report;
}

LatencyStats latency_bench(const Classifier& classifier, const std::vector<ClassifierInput>& inputs,
                           std::size_t warmup_n, std::size_t measure_n) {
  using Clock = std::chrono::steady_clock;
  if (measure_n < 100) throw std::invalid_argument("latency_bench needs measure_n >= 100");
  if (inputs.empty()) throw std::invalid_argument("latency_bench needs at least one input");
  // Tokenization is timed too; the service pays for it on every request.
  for (std::size_t i = 0; i < warmup_n; ++i) classifier.predict(inputs[i % inputs.size()]);
  std::vector<double> times;
  times.reserve(measure_n);
  for (std::size_t i = 0; i < measure_n; ++i) {
    const auto t0 = Clock::now();
    classifier.predict(inputs[i % inputs.size()]);
    times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
  }
  LatencyStats s;
  s.n = measure_n;
  s.mean_s = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(measure_n);
  double var = 0.0;
  for (double t : times) var += (t - s.mean_s) * (t - s.mean_s);
  s.std_s = std::sqrt(var / static_cast<double>(measure_n));
  return s;
}

}  // namespace refneed
