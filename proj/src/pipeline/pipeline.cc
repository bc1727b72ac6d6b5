#include "refneed/pipeline/pipeline.h"

#include <algorithm>

#include "json.hpp"
#include "refneed/common/errors.h"
#include "refneed/sentences/sentences.h"
#include "refneed/wikitext/parser.h"

namespace refneed {

double compute_rn(std::size_t n_cited, const std::vector<bool>& y) {
  const auto k = static_cast<std::size_t>(std::count(y.begin(), y.end(), true));
  if (n_cited + k == 0) return 0.0;
  return static_cast<double>(k) / static_cast<double>(n_cited + k);
}

RevisionStats collect_sentences(const RawRevision& rev, const LangConfig& config) {
  const ParsedDocument doc = parse_document(rev, config);
  RevisionStats stats;
  for (const SentenceRecord& r : filter_records(build_records(doc, config), config)) {
    if (r.label == 1) {
      ++stats.n_cited;
    } else {
      stats.uncited.push_back(ClassifierInput::from_record(r));
    }
  }
  return stats;
}

std::string ReferenceNeedResult::to_json() const {
  nlohmann::ordered_json j;
  j["model_name"] = model_name;
  j["model_version"] = model_version;
  j["wiki_db"] = wiki_db;
  j["revision_id"] = revision_id;
  j["reference_need_score"] = reference_need_score;
  return j.dump();
}

void classify_uncited(RevisionStats& stats, const Classifier& classifier,
                      const AssessOptions& options) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  stats.probs.clear();
  stats.predicted_labels.clear();
  for (std::size_t i = 0; i < stats.uncited.size(); i += batch) {
    if (options.deadline.count() > 0 && Clock::now() - start > options.deadline) {
      throw DeadlineExceeded("classification exceeded " +
                             std::to_string(options.deadline.count()) + " ms after " +
                             std::to_string(i) + " of " + std::to_string(stats.uncited.size()) +
                             " sentences");
    }
    const std::size_t end = std::min(stats.uncited.size(), i + batch);
    const std::vector<ClassifierInput> chunk(stats.uncited.begin() + i, stats.uncited.begin() + end);
    for (const Prediction& p : classifier.predict_batch(chunk)) {
      stats.probs.push_back(p.prob);
      stats.predicted_labels.push_back(p.label(options.threshold));
    }
  }
  if (options.deadline.count() > 0 && Clock::now() - start > options.deadline) {
    throw DeadlineExceeded("classification exceeded " + std::to_string(options.deadline.count()) +
                           " ms");
  }
}

ReferenceNeedResult assess_raw_revision(const RawRevision& rev, const Classifier& classifier,
                                        const LangConfig& config, const AssessOptions& options,
                                        RevisionStats* stats_out) {
  if (!(options.threshold > 0.0 && options.threshold < 1.0)) {
    throw ConfigError("threshold must lie in (0, 1)");
  }
  RevisionStats stats = collect_sentences(rev, config);
  if (stats.n_cited == 0 && stats.uncited.empty()) {
    throw EmptyArticle("revision " + rev.lang + ":" + std::to_string(rev.rev_id) +
                       " has no assessable sentences");
  }
  classify_uncited(stats, classifier, options);

  ReferenceNeedResult result;
  result.model_name = classifier.meta().model_name;
  result.model_version = classifier.meta().model_version;
  result.wiki_db = rev.meta().wiki_db();
  result.revision_id = rev.rev_id;
  result.reference_need_score = compute_rn(stats.n_cited, stats.predicted_labels);
  if (stats_out) *stats_out = std::move(stats);
  return result;
}

ReferenceNeedResult assess_revision(std::string_view lang, std::int64_t rev_id,
                                    const RevisionSource& source, const Classifier& classifier,
                                    const LangConfig& config, const AssessOptions& options,
                                    RevisionStats* stats_out) {
  config.at(lang);  // unsupported languages fail before any network traffic
  const RawRevision rev = source.fetch(lang, rev_id);
  return assess_raw_revision(rev, classifier, config, options, stats_out);
}

}  // namespace refneed
