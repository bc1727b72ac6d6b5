#include "refneed/classifier/classifier.h"

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "refneed/common/errors.h"
#include "refneed/common/random.h"

namespace refneed {

namespace {

using nlohmann::json;

constexpr std::string_view kPlaceholders[] = {"{lang}", "{section}", "{sentence}", "{next}",
                                              "{prev}"};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

class StubBackend : public Backend {
 public:
  explicit StubBackend(std::uint64_t seed) : seed_(seed) {}

  std::vector<std::array<double, 2>> logits(const std::vector<EncodedInput>& batch) const override {
    std::vector<std::array<double, 2>> out;
    out.reserve(batch.size());
    for (const EncodedInput& e : batch) {
      std::uint64_t h = fnv1a_u64(seed_, 0xCBF29CE484222325ULL);
      for (std::size_t i = 0; i < e.token_ids.size(); ++i) {
        if (e.attention_mask[i] != 0) h = fnv1a_u64(static_cast<std::uint64_t>(e.token_ids[i]), h);
      }
      h = mix64(h);
      const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
      out.push_back({0.0, u * 12.0 - 6.0});
    }
    return out;
  }

  std::string describe() const override { return "stub(seed=" + std::to_string(seed_) + ")"; }

 private:
  std::uint64_t seed_;
};

class GraphBackend : public Backend {
 public:
  GraphBackend(runtime::Graph graph, bool has_mask, bool has_type_ids)
      : graph_(std::move(graph)), has_mask_(has_mask), has_type_ids_(has_type_ids) {}

  std::vector<std::array<double, 2>> logits(const std::vector<EncodedInput>& batch) const override {
    std::vector<std::array<double, 2>> out;
    out.reserve(batch.size());
    // One graph run per item: no padding, so every item costs its own length.
    for (const EncodedInput& e : batch) {
      const auto n = static_cast<std::int64_t>(e.size());
      if (n == 0 || e.attention_mask.size() != e.token_ids.size()) {
        throw BackendError("encoded input is empty or its mask length differs");
      }
      std::vector<std::pair<std::string, runtime::Tensor>> feeds;
      feeds.emplace_back("input_ids", runtime::Tensor::from<std::int64_t>({1, n}, e.token_ids));
      if (has_mask_) {
        feeds.emplace_back("attention_mask",
                           runtime::Tensor::from<std::int64_t>({1, n}, e.attention_mask));
      }
      if (has_type_ids_) {
        feeds.emplace_back("token_type_ids", runtime::Tensor(runtime::DType::kInt64, {1, n}));
      }
      const auto result = graph_.run(feeds);
      const runtime::Tensor& logits = result.at(0);
      if (logits.size() != 2 || logits.dtype() != runtime::DType::kFloat) {
        throw BackendError("model produced logits of shape " + runtime::shape_string(logits.shape()) +
                           ", expected [1, 2] float");
      }
      out.push_back({logits.data<float>()[0], logits.data<float>()[1]});
    }
    return out;
  }

  std::string describe() const override {
    return std::string("onnx(") +
           (graph_.options().mode == runtime::ExecMode::kParallel ? "parallel" : "reference") +
           ", threads=" + std::to_string(graph_.options().num_threads) + ")";
  }

 private:
  runtime::Graph graph_;
  bool has_mask_;
  bool has_type_ids_;
};

}  // namespace

ClassifierInput ClassifierInput::from_record(const SentenceRecord& record) {
  return {record.lang(), record.section_name, record.sentence, record.next_sent,
          record.prev_sent};
}

std::string render_features(const ClassifierInput& input, std::string_view tmpl) {
  const std::string* values[] = {&input.lang, &input.section_title, &input.sentence,
                                 &input.next_sent, &input.prev_sent};
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    bool replaced = false;
    if (tmpl[pos] == '{') {
      for (std::size_t i = 0; i < std::size(kPlaceholders); ++i) {
        if (tmpl.substr(pos, kPlaceholders[i].size()) == kPlaceholders[i]) {
          out += *values[i];
          pos += kPlaceholders[i].size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += tmpl[pos++];
  }
  return out;
}

EncodedInput encode(const ClassifierInput& input, const Tokenizer& tokenizer,
                    std::size_t max_seq_len, std::string_view tmpl) {
  if (max_seq_len < kMinSeqLen) {
    throw std::invalid_argument("max_seq_len must be at least " + std::to_string(kMinSeqLen));
  }
  if (input.sentence.empty()) throw std::invalid_argument("sentence must not be empty");
  std::vector<std::int64_t> body = tokenizer.encode(render_features(input, tmpl));
  if (body.size() > max_seq_len - 2) body.resize(max_seq_len - 2);
  EncodedInput e;
  e.token_ids.reserve(body.size() + 2);
  e.token_ids.push_back(tokenizer.cls_id());
  e.token_ids.insert(e.token_ids.end(), body.begin(), body.end());
  e.token_ids.push_back(tokenizer.sep_id());
  e.attention_mask.assign(e.token_ids.size(), 1);
  return e;
}

double needs_citation_prob(double no_citation_logit, double needs_citation_logit) {
  const double d = needs_citation_logit - no_citation_logit;
  if (std::isnan(d)) throw BackendError("logits are NaN");
  if (d >= 0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

Prediction predict(const EncodedInput& encoded, const Backend& backend) {
  return predict_batch({encoded}, backend).at(0);
}

std::vector<Prediction> predict_batch(const std::vector<EncodedInput>& batch,
                                      const Backend& backend) {
  const auto logits = backend.logits(batch);
  if (logits.size() != batch.size()) {
    throw BackendError("backend returned " + std::to_string(logits.size()) + " results for " +
                       std::to_string(batch.size()) + " inputs");
  }
  std::vector<Prediction> out;
  out.reserve(logits.size());
  for (const auto& l : logits) out.push_back({needs_citation_prob(l[0], l[1])});
  return out;
}

std::shared_ptr<const Backend> stub_backend(std::uint64_t seed) {
  return std::make_shared<StubBackend>(seed);
}

BundleMeta BundleMeta::from_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw BundleValidationError("meta.json", std::string("not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw BundleValidationError("meta.json", "must be a JSON object");
  BundleMeta meta;
  auto field = [&](const char* key) -> const json& {
    if (!root.contains(key)) {
      throw BundleValidationError(std::string("meta.json:") + key, "missing");
    }
    return root.at(key);
  };
  const json& len = field("max_seq_len");
  if (!len.is_number_integer() || len.get<std::int64_t>() < static_cast<std::int64_t>(kMinSeqLen)) {
    throw BundleValidationError("meta.json:max_seq_len",
                                "must be an integer >= " + std::to_string(kMinSeqLen));
  }
  meta.max_seq_len = len.get<std::size_t>();
  const json& order = field("class_order");
  if (order != json::array({kClassOrder[0], kClassOrder[1]})) {
    throw BundleValidationError("meta.json:class_order",
                                "must be [\"no-citation\", \"needs-citation\"]");
  }
  const json& version = field("model_version");
  if (!version.is_number_integer() || version.get<std::int64_t>() < 0) {
    throw BundleValidationError("meta.json:model_version", "must be a non-negative integer");
  }
  meta.model_version = version.get<std::int64_t>();
  const json& tmpl = field("feature_template");
  if (!tmpl.is_string()) {
    throw BundleValidationError("meta.json:feature_template", "must be a string");
  }
  meta.feature_template = tmpl.get<std::string>();
  for (std::string_view p : kPlaceholders) {
    if (meta.feature_template.find(p) == std::string::npos) {
      throw BundleValidationError("meta.json:feature_template",
                                  "missing placeholder " + std::string(p));
    }
  }
  if (root.contains("model_name")) {
    if (!root.at("model_name").is_string() || root.at("model_name").get<std::string>().empty()) {
      throw BundleValidationError("meta.json:model_name", "must be a non-empty string");
    }
    meta.model_name = root.at("model_name").get<std::string>();
  }
  return meta;
}

ModelBundle ModelBundle::open(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw BundleValidationError("model_dir", "'" + dir.string() + "' is not a directory");
  }
  ModelBundle bundle;
  bundle.dir = dir;
  for (const char* name : {"model.onnx", "tokenizer.json", "meta.json"}) {
    if (!std::filesystem::is_regular_file(dir / name)) {
      throw BundleValidationError(name, "missing from " + dir.string());
    }
  }
  bundle.meta = BundleMeta::from_json(read_file(bundle.meta_path()));
  return bundle;
}

namespace {

std::shared_ptr<const Backend> load_checked(const ModelBundle& bundle, int num_threads,
                                            runtime::ExecMode mode, const Tokenizer* tokenizer) {
  if (num_threads < 1) throw std::invalid_argument("num_threads must be >= 1");
  std::optional<runtime::Graph> graph;
  try {
    graph.emplace(runtime::Graph::load(bundle.graph_path(), {mode, num_threads}));
  } catch (const BackendError& e) {
    throw BundleValidationError("model.onnx", e.what());
  }
  bool has_ids = false, has_mask = false, has_type_ids = false;
  for (const std::string& name : graph->input_names()) {
    if (name == "input_ids") {
      has_ids = true;
    } else if (name == "attention_mask") {
      has_mask = true;
    } else if (name == "token_type_ids") {
      has_type_ids = true;
    } else {
      throw BundleValidationError("model.onnx:inputs", "unexpected graph input '" + name + "'");
    }
  }
  if (!has_ids) throw BundleValidationError("model.onnx:inputs", "graph has no input_ids input");
  if (graph->output_names().empty()) {
    throw BundleValidationError("model.onnx:outputs", "graph has no outputs");
  }
  auto backend = std::make_shared<GraphBackend>(std::move(*graph), has_mask, has_type_ids);

  // Probe: the longest allowed input must run and yield two logits.
  EncodedInput probe;
  const std::int64_t top_id = tokenizer ? tokenizer->vocab_size() - 1 : 0;
  probe.token_ids.assign(bundle.meta.max_seq_len, 0);
  probe.token_ids.back() = top_id;
  probe.attention_mask.assign(bundle.meta.max_seq_len, 1);
  try {
    backend->logits({probe});
  } catch (const BackendError& e) {
    // Tell a too-long sequence apart from an out-of-range vocabulary id.
    EncodedInput shorter = probe;
    shorter.token_ids.assign(kMinSeqLen, 0);
    shorter.attention_mask.assign(kMinSeqLen, 1);
    try {
      backend->logits({shorter});
    } catch (const BackendError& e2) {
      throw BundleValidationError("model.onnx", std::string("probe run failed: ") + e2.what());
    }
    if (tokenizer) {
      shorter.token_ids.back() = top_id;
      try {
        backend->logits({shorter});
      } catch (const BackendError&) {
        throw BundleValidationError("tokenizer.json:vocab",
                                    "vocabulary has " + std::to_string(tokenizer->vocab_size()) +
                                        " ids, more than the model's embedding table");
      }
    }
    throw BundleValidationError("meta.json:max_seq_len",
                                "model cannot run " + std::to_string(bundle.meta.max_seq_len) +
                                    " tokens: " + e.what());
  }
  return backend;
}

}  // namespace

std::shared_ptr<const Backend> load_graph_backend(const ModelBundle& bundle, int num_threads,
                                                  runtime::ExecMode mode) {
  return load_checked(bundle, num_threads, mode, nullptr);
}

Classifier::Classifier(Tokenizer tokenizer, std::shared_ptr<const Backend> backend,
                       BundleMeta meta)
    : tokenizer_(std::move(tokenizer)), backend_(std::move(backend)), meta_(std::move(meta)) {
  if (!backend_) throw std::invalid_argument("backend must not be null");
}

Classifier Classifier::from_bundle(const std::filesystem::path& dir, int num_threads,
                                   runtime::ExecMode mode) {
  ModelBundle bundle = ModelBundle::open(dir);
  std::optional<Tokenizer> tokenizer;
  try {
    tokenizer.emplace(Tokenizer::load(bundle.tokenizer_path()));
  } catch (const TokenizerError& e) {
    throw BundleValidationError("tokenizer.json", e.what());
  }
  auto backend = load_checked(bundle, num_threads, mode, &*tokenizer);
  return Classifier(std::move(*tokenizer), std::move(backend), bundle.meta);
}

Classifier Classifier::stub(std::uint64_t seed) {
  return Classifier(Tokenizer::hashing(), stub_backend(seed), BundleMeta{});
}

EncodedInput Classifier::encode(const ClassifierInput& input) const {
  return refneed::encode(input, tokenizer_, meta_.max_seq_len, meta_.feature_template);
}

Prediction Classifier::predict(const ClassifierInput& input) const {
  return refneed::predict(encode(input), *backend_);
}

std::vector<Prediction> Classifier::predict_batch(const std::vector<ClassifierInput>& inputs) const {
  std::vector<EncodedInput> batch;
  batch.reserve(inputs.size());
  for (const ClassifierInput& in : inputs) batch.push_back(encode(in));
  return refneed::predict_batch(batch, *backend_);
}

}  // namespace refneed
