#ifndef REFNEED_EVAL_METRICS_H_
#define REFNEED_EVAL_METRICS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "refneed/classifier/classifier.h"
#include "refneed/sentences/record.h"

namespace refneed {

// P(score of a random positive > score of a random negative), ties count
// half; computed from midranks. Throws DegenerateLabels when a class is
// missing and std::invalid_argument on size mismatch or NaN scores.
double auc_roc(const std::vector<double>& scores, const std::vector<bool>& labels);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Mean +- 2 standard deviations of n_boot resampled AUCs, clipped to [0, 1].
// Resamples that miss a class are drawn again. Same seed, same interval.
Interval bootstrap_ci(const std::vector<double>& scores, const std::vector<bool>& labels,
                      std::size_t n_boot, std::uint64_t seed);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  Confusion& operator+=(const Confusion& o);
  bool operator==(const Confusion&) const = default;
};

struct ThresholdMetrics {
  double accuracy = 0.0;
  double precision = 0.0;  // 0 when nothing is predicted positive
  double recall = 0.0;     // 0 when there are no positives
  double f1 = 0.0;
  Confusion confusion;
};

// Predicted positive when score >= threshold.
ThresholdMetrics thresholded_metrics(const std::vector<double>& scores,
                                     const std::vector<bool>& labels, double threshold);
ThresholdMetrics metrics_from_confusion(const Confusion& c);

struct LanguageReport {
  std::size_t n = 0;
  Confusion confusion;
  std::optional<double> auc;  // absent when the language has one class only
};

struct EvalReport {
  std::size_t n = 0;
  double threshold = kDefaultThreshold;
  double auc = 0.0;
  Interval auc_ci;
  std::size_t n_boot = 0;
  std::uint64_t seed = 0;
  ThresholdMetrics metrics;
  double mean_latency_s = 0.0;
  std::map<std::string, LanguageReport> per_language;
  // Per-item scores in input order; not part of to_json().
  std::vector<double> scores;

  std::string to_json(int indent = 2) const;
};

// Builds the report from scores already computed; `langs` gives the
// language of each item.
EvalReport make_report(const std::vector<double>& scores, const std::vector<bool>& labels,
                       const std::vector<std::string>& langs, double threshold,
                       std::size_t n_boot, std::uint64_t seed);

struct EvalOptions {
  double threshold = kDefaultThreshold;
  std::size_t n_boot = 1000;
  std::uint64_t seed = 7;
};

// Scores every record one at a time (so mean latency is per prediction) and
// builds the report.
EvalReport evaluate(const std::vector<SentenceRecord>& records, const Classifier& classifier,
                    const EvalOptions& options = {});

struct LatencyStats {
  double mean_s = 0.0;
  double std_s = 0.0;
  std::size_t n = 0;
};

// Wall-clock seconds per single-input prediction after `warmup_n` untimed
// calls, cycling through `inputs`. The thread count is whatever the
// classifier's backend was loaded with. Requires measure_n >= 100.
LatencyStats latency_bench(const Classifier& classifier, const std::vector<ClassifierInput>& inputs,
                           std::size_t warmup_n, std::size_t measure_n);

}  // namespace refneed

#endif  // REFNEED_EVAL_METRICS_H_
