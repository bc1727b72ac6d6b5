#include "refneed/eval/verbalizer.h"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "json.hpp"
#include "refneed/common/errors.h"

namespace refneed {

namespace {

using nlohmann::json;

std::string trim_token(std::string_view t) {
  std::size_t b = 0, e = t.size();
  auto junk = [](char c) { return c == ' ' || c == '"' || c == '\'' || c == '\n' || c == '\t'; };
  while (b < e && junk(t[b])) ++b;
  while (e > b && junk(t[e - 1])) --e;
  // SentencePiece/BPE word markers.
  std::string out(t.substr(b, e - b));
  for (std::string_view marker : {"\xe2\x96\x81", "\xc4\xa0"}) {
    if (out.rfind(marker, 0) == 0) out.erase(0, marker.size());
  }
  return out;
}

}  // namespace

// Trailing spaces on some lines are part of the template.
const std::string_view kVerbalizerTemplate =
    "You are an experienced Wikipedia editor.\n"
    "\n"
    "You are provided with a piece of text from a Wikipedia article enclosed in `<<>>`.\n"
    "The language code of the article is `{{language}}`, and the section name is `{{section}}`.\n"
    "Optionally, you may also be provided with context before \n"
    "the text snippet (enclosed in `< context before >`) and \n"
    "after the text snippet (enclosed in `<<< context after >>>`).\n"
    "\n"
    "Follow these guidelines while making your assessment:\n"
    "\n"
    "### Text that REQUIRES a citation:\n"
    "- Text that includes facts likely to be challenged or not considered common knowledge.\n"
    "- Statements that present opinions, analyses, or claims that need verification.\n"
    "- Statistics, data, or direct quotations.\n"
    "- Assertions that could be considered original research.\n"
    "\n"
    "### Text that DOES NOT REQUIRE a citation:\n"
    "- Text that is widely accepted as common knowledge.\n"
    "- Content within sections where the main topic is already properly referenced.\n"
    "- Plot summaries for works of fiction.\n"
    "- Statements that are already supported by a preceding or nearby citation.\n"
    "- Other cases where a citation is clearly redundant or unnecessary.\n"
    "\n"
    "**Your task is to determine whether the text snippet in `<<>>` \n"
    "requires a citation according to Wikipedia's citation policies.**\n"
    "\n"
    "ANSWER FORMAT:\n"
    "yes - Text to assess snippet requires a citation.\n"
    "no - Text to assess snippet does NOT require a citation.\n"
    "\n"
    "INPUT: \n"
    "{{context_b}}\n"
    "Text to assess: <<{{text}}>>\n"
    "{{context_a}}\n"
    "Answer: {{answer}}";

std::string render_prompt(const ClassifierInput& input, std::string_view answer) {
  if (answer != "yes" && answer != "no") {
    throw std::invalid_argument("answer must be \"yes\" or \"no\"");
  }
  // Placeholders are filled in one pass so that text containing "{{...}}"
  // is never substituted again.
  const std::pair<std::string_view, std::string> fields[] = {
      {"{{language}}", input.lang},
      {"{{section}}", input.section_title},
      {"{{text}}", input.sentence},
      {"{{context_b}}", input.prev_sent.empty() ? "" : "<" + input.prev_sent + ">"},
      {"{{context_a}}", input.next_sent.empty() ? "" : "<<<" + input.next_sent + ">>>"},
      {"{{answer}}", std::string(answer)},
  };
  const std::string_view t = kVerbalizerTemplate;
  std::string out;
  out.reserve(t.size() + input.sentence.size() * 2);
  std::size_t pos = 0;
  while (pos < t.size()) {
    bool hit = false;
    if (t.compare(pos, 2, "{{") == 0) {
      for (const auto& [key, value] : fields) {
        if (t.compare(pos, key.size(), key) == 0) {
          out += value;
          pos += key.size();
          hit = true;
          break;
        }
      }
    }
    if (!hit) out += t[pos++];
  }
  return out;
}

double p_yes_from_logprobs(double lp_yes, double lp_no) {
  if (std::isnan(lp_yes) || std::isnan(lp_no)) throw MissingLogprob("NaN log-probability");
  if (lp_yes == lp_no) return 0.5;  // also covers both -inf
  return 1.0 / (1.0 + std::exp(lp_no - lp_yes));
}

VerbalizerScore verbalizer_score(const LogprobClient& client, const ClassifierInput& input) {
  VerbalizerScore s;
  s.lp_yes = client.answer_logprob(render_prompt(input, "yes"), "yes");
  s.lp_no = client.answer_logprob(render_prompt(input, "no"), "no");
  s.p_yes = p_yes_from_logprobs(s.lp_yes, s.lp_no);
  return s;
}

std::vector<VerbalizerScore> verbalizer_scores(const LogprobClient& client,
                                               const std::vector<ClassifierInput>& inputs,
                                               std::size_t parallelism) {
  parallelism = std::max<std::size_t>(1, parallelism);
  std::vector<VerbalizerScore> out(inputs.size());
  for (std::size_t start = 0; start < inputs.size(); start += parallelism) {
    const std::size_t end = std::min(inputs.size(), start + parallelism);
    std::vector<std::future<VerbalizerScore>> pending;
    for (std::size_t i = start; i < end; ++i) {
      pending.push_back(std::async(std::launch::async,
                                   [&, i] { return verbalizer_score(client, inputs[i]); }));
    }
    for (std::size_t i = start; i < end; ++i) out[i] = pending[i - start].get();
  }
  return out;
}

ReplayClient ReplayClient::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ClientError("cannot open replay file " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ClientError("replay file " + path + ": " + e.what());
  }
  ReplayClient client;
  try {
    for (const json& item : root.at("items")) {
      for (const char* answer : {"yes", "no"}) {
        client.add(item.at("prompts").at(answer), item.at("logprobs").at(answer));
      }
    }
  } catch (const json::exception& e) {
    throw ClientError("replay file " + path + ": " + e.what());
  }
  return client;
}

void ReplayClient::add(std::string prompt, double logprob) {
  recorded_[std::move(prompt)] = logprob;
}

double ReplayClient::answer_logprob(const std::string& prompt, std::string_view answer) const {
  auto it = recorded_.find(prompt);
  if (it == recorded_.end()) {
    throw MissingLogprob("no recorded log-probability for this prompt (answer '" +
                         std::string(answer) + "')");
  }
  return it->second;
}

CompletionsClient::CompletionsClient(CompletionsOptions options) : options_(std::move(options)) {
  if (options_.endpoint.find("://") == std::string::npos) {
    throw ConfigError("completions endpoint must be a full URL: " + options_.endpoint);
  }
  if (options_.model.empty()) throw ConfigError("completions client needs a model name");
}

std::string CompletionsClient::request_body(const std::string& prompt) const {
  nlohmann::ordered_json j;
  j["model"] = options_.model;
  j["prompt"] = prompt;
  j["max_tokens"] = 0;
  j["echo"] = true;
  j["logprobs"] = 1;
  j["temperature"] = 0;
  return j.dump();
}

double CompletionsClient::parse_answer_logprob(std::string_view response, std::string_view answer) {
  const json j = json::parse(response, nullptr, false);
  if (j.is_discarded()) throw ClientError("completions response is not JSON");
  try {
    const json& lp = j.at("choices").at(0).at("logprobs");
    const json& tokens = lp.at("tokens");
    const json& values = lp.at("token_logprobs");
    if (tokens.empty() || tokens.size() != values.size()) {
      throw MissingLogprob("response has no prompt token log-probabilities");
    }
    // With max_tokens 0 the last echoed token is the answer.
    const std::string last = tokens.back().get<std::string>();
    if (trim_token(last) != answer) {
      throw MissingLogprob("last prompt token is '" + last + "', expected '" + std::string(answer) + "'");
    }
    if (!values.back().is_number()) throw MissingLogprob("answer token has no log-probability");
    return values.back().get<double>();
  } catch (const json::exception& e) {
    throw MissingLogprob(std::string("unexpected completions response: ") + e.what());
  }
}

double CompletionsClient::answer_logprob(const std::string& prompt, std::string_view answer) const {
  const auto scheme_end = options_.endpoint.find("://");
  const auto path_start = options_.endpoint.find('/', scheme_end + 3);
  httplib::Client http(options_.endpoint.substr(0, path_start));
  const auto ms = options_.timeout.count();
  http.set_connection_timeout(ms / 1000, (ms % 1000) * 1000);
  http.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
  httplib::Headers headers;
  if (const char* key = std::getenv(options_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string path =
      path_start == std::string::npos ? "/" : options_.endpoint.substr(path_start);
  auto res = http.Post(path, headers, request_body(prompt), "application/json");
  if (!res) throw ClientError("POST " + options_.endpoint + ": " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw ClientError("POST " + options_.endpoint + " returned HTTP " + std::to_string(res->status));
  }
  return parse_answer_logprob(res->body, answer);
}

}  // namespace refneed
