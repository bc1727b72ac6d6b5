#ifndef REFNEED_EVAL_VERBALIZER_H_
#define REFNEED_EVAL_VERBALIZER_H_

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "refneed/classifier/classifier.h"

namespace refneed {

// Zero-shot baseline: an instruction-tuned LLM is shown the prompt twice,
// once ending in "yes" and once in "no", and the two answer-token
// log-probabilities are normalized into P(yes).

extern const std::string_view kVerbalizerTemplate;

// Fills {{language}} {{section}} {{text}} {{context_b}} {{context_a}} and
// replaces the answer placeholder with `answer` ("yes" or "no"), which
// becomes the last token of the prompt. Context lines are left empty when
// the neighbouring sentence is empty.
std::string render_prompt(const ClassifierInput& input, std::string_view answer);

struct VerbalizerScore {
  double p_yes = 0.0;
  double lp_yes = 0.0;
  double lp_no = 0.0;
};

// e^lp_yes / (e^lp_yes + e^lp_no), without overflow.
double p_yes_from_logprobs(double lp_yes, double lp_no);

// Returns the log-probability the model assigns to `answer` as the final
// token of `prompt`. Throws ClientError or MissingLogprob.
class LogprobClient {
 public:
  virtual ~LogprobClient() = default;
  virtual double answer_logprob(const std::string& prompt, std::string_view answer) const = 0;
};

VerbalizerScore verbalizer_score(const LogprobClient& client, const ClassifierInput& input);

// Scores inputs with at most `parallelism` requests in flight.
std::vector<VerbalizerScore> verbalizer_scores(const LogprobClient& client,
                                               const std::vector<ClassifierInput>& inputs,
                                               std::size_t parallelism = 4);

// Replays recorded log-probabilities keyed by the exact prompt text.
// File format: {"items": [{"prompts": {"yes": ..., "no": ...},
//                          "logprobs": {"yes": ..., "no": ...}, ...}, ...]}
class ReplayClient : public LogprobClient {
 public:
  static ReplayClient load(const std::string& path);
  void add(std::string prompt, double logprob);
  double answer_logprob(const std::string& prompt, std::string_view answer) const override;
  std::size_t size() const { return recorded_.size(); }

 private:
  std::map<std::string, double, std::less<>> recorded_;
};

// OpenAI-compatible /v1/completions endpoint with echo + logprobs and
// max_tokens 0: the prompt's own token log-probabilities come back and the
// last one belongs to the answer. The bearer token is read from the
// environment variable named by api_key_env.
struct CompletionsOptions {
  std::string endpoint;  // full URL, e.g. https://host/v1/completions
  std::string model;
  std::string api_key_env = "REFNEED_LLM_API_KEY";
  std::chrono::milliseconds timeout{30000};
};

class CompletionsClient : public LogprobClient {
 public:
  explicit CompletionsClient(CompletionsOptions options);
  double answer_logprob(const std::string& prompt, std::string_view answer) const override;

  // Request body and response parsing, exposed for tests.
  std::string request_body(const std::string& prompt) const;
  static double parse_answer_logprob(std::string_view response, std::string_view answer);

 private:
  CompletionsOptions options_;
};

}  // namespace refneed

#endif  // REFNEED_EVAL_VERBALIZER_H_
