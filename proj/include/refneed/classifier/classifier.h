#ifndef REFNEED_CLASSIFIER_CLASSIFIER_H_
#define REFNEED_CLASSIFIER_CLASSIFIER_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "refneed/classifier/tokenizer.h"
#include "refneed/runtime/graph.h"
#include "refneed/sentences/record.h"

namespace refneed {

// Order of the features in the model's input text: language code, section
// title, then the sentence followed by its next and previous neighbours.
inline constexpr std::string_view kFeatureTemplate =
    "{lang} [SEP] {section} [SEP] {sentence} [SEP] {next} [SEP] {prev}";
inline constexpr std::size_t kDefaultMaxSeqLen = 128;
inline constexpr std::size_t kMinSeqLen = 8;
inline constexpr double kDefaultThreshold = 0.5;
inline constexpr std::string_view kModelName = "reference-need";
inline constexpr std::array<std::string_view, 2> kClassOrder = {"no-citation",
                                                               "needs-citation"};

struct ClassifierInput {
  std::string lang;
  std::string section_title;
  std::string sentence;
  std::string next_sent;
  std::string prev_sent;

  static ClassifierInput from_record(const SentenceRecord& record);
  bool operator==(const ClassifierInput&) const = default;
};

struct EncodedInput {
  std::vector<std::int64_t> token_ids;
  std::vector<std::int64_t> attention_mask;

  std::size_t size() const { return token_ids.size(); }
  bool operator==(const EncodedInput&) const = default;
};

struct Prediction {
  double prob = 0.0;  // P(needs-citation)

  bool label(double threshold = kDefaultThreshold) const { return prob >= threshold; }
};

// Substitutes {lang} {section} {sentence} {next} {prev} in `tmpl`.
std::string render_features(const ClassifierInput& input,
                            std::string_view tmpl = kFeatureTemplate);

// [CLS] + subword ids of the rendered text + [SEP], cut from the end so the
// result is at most max_seq_len long. Throws std::invalid_argument when
// max_seq_len < kMinSeqLen or the sentence is empty.
EncodedInput encode(const ClassifierInput& input, const Tokenizer& tokenizer,
                    std::size_t max_seq_len = kDefaultMaxSeqLen,
                    std::string_view tmpl = kFeatureTemplate);

// Two-class softmax, probability of the second class; stable for any
// finite logits.
double needs_citation_prob(double no_citation_logit, double needs_citation_logit);

// Produces [no-citation, needs-citation] logits. Implementations are
// immutable once constructed and safe to share between threads.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::vector<std::array<double, 2>> logits(
      const std::vector<EncodedInput>& batch) const = 0;
  virtual std::string describe() const = 0;
};

Prediction predict(const EncodedInput& encoded, const Backend& backend);
std::vector<Prediction> predict_batch(const std::vector<EncodedInput>& batch,
                                      const Backend& backend);

// Deterministic stand-in for a trained model: the needs-citation logit is a
// seeded FNV-1a/splitmix64 hash of the attended token ids mapped uniformly
// onto [-6, 6). Same ids and seed give the same probability everywhere.
std::shared_ptr<const Backend> stub_backend(std::uint64_t seed);

// meta.json of a model bundle.
struct BundleMeta {
  std::size_t max_seq_len = kDefaultMaxSeqLen;
  std::vector<std::string> class_order{std::string(kClassOrder[0]),
                                       std::string(kClassOrder[1])};
  std::int64_t model_version = 0;
  std::string feature_template{kFeatureTemplate};
  std::string model_name{kModelName};

  // Throws BundleValidationError naming the offending key.
  static BundleMeta from_json(std::string_view text);
};

// A model directory: model.onnx, tokenizer.json, meta.json.
struct ModelBundle {
  std::filesystem::path dir;
  BundleMeta meta;

  std::filesystem::path graph_path() const { return dir / "model.onnx"; }
  std::filesystem::path tokenizer_path() const { return dir / "tokenizer.json"; }
  std::filesystem::path meta_path() const { return dir / "meta.json"; }

  // Checks the layout and parses meta.json. Throws BundleValidationError.
  static ModelBundle open(const std::filesystem::path& dir);
};

// Loads the graph and checks it against the bundle metadata by running a
// probe of max_seq_len tokens. Throws BundleValidationError with the field
// at fault ("model.onnx", "meta.json:max_seq_len", ...).
std::shared_ptr<const Backend> load_graph_backend(
    const ModelBundle& bundle, int num_threads,
    runtime::ExecMode mode = runtime::ExecMode::kParallel);

// Tokenizer + backend + metadata, the unit the pipeline and service use.
class Classifier {
 public:
  Classifier(Tokenizer tokenizer, std::shared_ptr<const Backend> backend, BundleMeta meta);

  // Loads and validates a bundle directory.
  static Classifier from_bundle(const std::filesystem::path& dir, int num_threads,
                                runtime::ExecMode mode = runtime::ExecMode::kParallel);
  // Hashing tokenizer + stub backend; no artifacts needed.
  static Classifier stub(std::uint64_t seed);

  EncodedInput encode(const ClassifierInput& input) const;
  Prediction predict(const ClassifierInput& input) const;
  std::vector<Prediction> predict_batch(const std::vector<ClassifierInput>& inputs) const;

  const Tokenizer& tokenizer() const { return tokenizer_; }
  const Backend& backend() const { return *backend_; }
  const BundleMeta& meta() const { return meta_; }

 private:
  Tokenizer tokenizer_;
  std::shared_ptr<const Backend> backend_;
  BundleMeta meta_;
};

}  // namespace refneed

#endif  // REFNEED_CLASSIFIER_CLASSIFIER_H_
