#ifndef REFNEED_PIPELINE_PIPELINE_H_
#define REFNEED_PIPELINE_PIPELINE_H_

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "refneed/classifier/classifier.h"
#include "refneed/common/lang_config.h"
#include "refneed/pipeline/revision_source.h"
#include "refneed/wikitext/document.h"

namespace refneed {

// k / (n_cited + k) where k counts the true entries of y; 0.0 when both are 0.
double compute_rn(std::size_t n_cited, const std::vector<bool>& y);

// Sentences of one revision after the corpus filters: cited ones are only
// counted, uncited ones are what the classifier sees.
struct RevisionStats {
  std::size_t n_cited = 0;
  std::vector<ClassifierInput> uncited;
  std::vector<bool> predicted_labels;  // filled by classify_uncited
  std::vector<double> probs;
};

// Parses, segments and filters (minimum length, duplicates, excluded
// sections) exactly like corpus building does.
RevisionStats collect_sentences(const RawRevision& rev, const LangConfig& config);

struct ReferenceNeedResult {
  std::string model_name{kModelName};
  std::int64_t model_version = 0;
  std::string wiki_db;
  std::int64_t revision_id = 0;
  double reference_need_score = 0.0;

  // Compact JSON with keys in the order above; the score is printed with
  // the shortest representation that round-trips.
  std::string to_json() const;
  bool operator==(const ReferenceNeedResult&) const = default;
};

struct AssessOptions {
  double threshold = kDefaultThreshold;
  // Budget for the classification phase; zero disables the check.
  std::chrono::milliseconds deadline{0};
  // Sentences per predict_batch call; the deadline is checked between calls.
  std::size_t batch_size = 8;
};

// Classifies the uncited sentences in `stats` in place. Throws
// DeadlineExceeded once the deadline has passed with work left.
void classify_uncited(RevisionStats& stats, const Classifier& classifier,
                      const AssessOptions& options);

// fetch -> parse -> sentences -> classify uncited -> score. Throws
// EmptyArticle when no sentence survives the filters, UnknownLanguage for
// languages missing from `config`, and whatever the source throws.
ReferenceNeedResult assess_revision(std::string_view lang, std::int64_t rev_id,
                                    const RevisionSource& source, const Classifier& classifier,
                                    const LangConfig& config, const AssessOptions& options = {},
                                    RevisionStats* stats_out = nullptr);

// Same, for a revision already in hand.
ReferenceNeedResult assess_raw_revision(const RawRevision& rev, const Classifier& classifier,
                                        const LangConfig& config,
                                        const AssessOptions& options = {},
                                        RevisionStats* stats_out = nullptr);

}  // namespace refneed

#endif  // REFNEED_PIPELINE_PIPELINE_H_
