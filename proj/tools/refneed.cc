// refneed: corpus building, scoring, serving and evaluation from the shell.

#include <csignal>
#include <fstream>
#include <iostream>
#include <regex>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "refneed/common/errors.h"
#include "refneed/dataset/dataset.h"
#include "refneed/eval/metrics.h"
#include "refneed/eval/verbalizer.h"
#include "refneed/pipeline/pipeline.h"
#include "refneed/sentences/sentences.h"
#include "refneed/service/service.h"
#include "refneed/wikitext/parser.h"

namespace fs = std::filesystem;
using namespace refneed;

namespace {

struct ModelFlags {
  std::string model_dir;
  std::int64_t stub_seed = -1;
  int threads = 4;

  void add(CLI::App* cmd, bool with_threads = true) {
    auto* m = cmd->add_option("--model", model_dir, "Model bundle directory");
    auto* s = cmd->add_option("--stub", stub_seed, "Use the seeded stub model instead of a bundle");
    m->excludes(s);
    if (with_threads) cmd->add_option("--threads", threads, "Intra-op threads")->check(CLI::PositiveNumber);
  }

  Classifier load() const {
    if (!model_dir.empty()) return Classifier::from_bundle(model_dir, threads);
    if (stub_seed >= 0) return Classifier::stub(static_cast<std::uint64_t>(stub_seed));
    throw ConfigError("one of --model DIR or --stub SEED is required");
  }
};

const LangConfig& lang_config(const std::string& path) {
  static LangConfig loaded;
  if (path.empty()) return LangConfig::defaults();
  loaded = LangConfig::load(path);
  return loaded;
}

std::array<double, 3> parse_ratios(const std::string& text) {
  std::array<double, 3> r{};
  std::stringstream in(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(in, part, ',')) {
    if (i == 3) throw ConfigError("--ratios takes three numbers");
    r[i++] = std::stod(part);
  }
  if (i != 3) throw ConfigError("--ratios takes three numbers");
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

// A wikitext file named "<page_id>_<rev_id>_<Title>.wikitext" carries its
// ids; any other "<Title>.wikitext" gets page_id = its position in the
// sorted listing and rev_id 0.
RawRevision revision_from_file(const fs::path& p, std::string_view lang, std::int64_t ordinal) {
  static const std::regex named(R"(^(\d+)_(\d+)_(.+)$)");
  RawRevision rev;
  rev.lang = lang;
  rev.wikitext = slurp(p);
  const std::string stem = p.stem().string();
  std::smatch m;
  if (std::regex_match(stem, m, named)) {
    rev.page_id = std::stoll(m[1]);
    rev.rev_id = std::stoll(m[2]);
    rev.page_title = m[3];
  } else {
    rev.page_id = ordinal;
    rev.page_title = stem;
  }
  std::replace(rev.page_title.begin(), rev.page_title.end(), '_', ' ');
  return rev;
}

int cmd_build_corpus(const std::string& lang, const std::string& input,
                     const std::vector<std::int64_t>& rev_ids, bool all_articles,
                     const std::string& out, const LangConfig& config) {
  config.at(lang);
  std::vector<RawRevision> revisions;
  if (input == "api") {
    if (rev_ids.empty()) throw ConfigError("--input api needs --rev-ids");
    MediaWikiClient client{MediaWikiOptions{}};
    for (std::int64_t id : rev_ids) revisions.push_back(client.fetch(lang, id));
  } else {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(input)) {
      if (e.is_regular_file() && e.path().extension() == ".wikitext") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (std::size_t i = 0; i < files.size(); ++i) {
      revisions.push_back(revision_from_file(files[i], lang, static_cast<std::int64_t>(i + 1)));
    }
  }
  RecordFilter filter(config);
  std::vector<SentenceRecord> kept;
  std::size_t skipped = 0, total = 0;
  for (const RawRevision& rev : revisions) {
    if (!all_articles && !detect_featured(rev.wikitext, lang, config)) {
      ++skipped;
      continue;
    }
    std::vector<SentenceRecord> records;
    try {
      records = build_records(parse_document(rev, config), config);
    } catch (const MalformedMarkup& e) {
      std::cerr << "skipping " << rev.page_title << ": " << e.what() << "\n";
      ++skipped;
      continue;
    }
    total += records.size();
    for (auto& r : records) {
      if (filter.keep(r)) kept.push_back(std::move(r));
    }
  }
  write_records(kept, fs::path(out));
  std::cerr << revisions.size() - skipped << " articles, " << total << " sentences, " << kept.size()
            << " kept; " << skipped << " articles skipped\n";
  return 0;
}

int cmd_score(const std::string& lang, std::int64_t rev_id, const ModelFlags& model,
              double threshold, const std::string& revisions_dir, const LangConfig& config) {
  const Classifier classifier = model.load();
  std::unique_ptr<RevisionSource> source;
  if (!revisions_dir.empty()) source = std::make_unique<FileRevisionSource>(revisions_dir);
  else source = std::make_unique<MediaWikiClient>(MediaWikiOptions{});
  AssessOptions opts;
  opts.threshold = threshold;
  std::cout << assess_revision(lang, rev_id, *source, classifier, config, opts).to_json() << "\n";
  return 0;
}

HttpServer* g_server = nullptr;
extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

struct ServeFlags {
  std::string listen = "127.0.0.1:8080";
  std::string revisions_dir;
  std::string upstream = MediaWikiOptions{}.url_template;
  std::size_t cache_size = 256;
  int deadline_ms = 500;
  int upstream_timeout_ms = 5000;
};

int cmd_serve(const ServeFlags& f, const ModelFlags& model, ServiceOptions opts, const LangConfig& config) {
  const auto colon = f.listen.rfind(':');
  if (colon == std::string::npos) throw ConfigError("--listen must be host:port");
  opts.host = f.listen.substr(0, colon);
  opts.port = std::stoi(f.listen.substr(colon + 1));
  opts.deadline = std::chrono::milliseconds(f.deadline_ms);
  opts.validate();

  ModelFlags sized = model;
  sized.threads = opts.intra_op_threads();
  auto classifier = std::make_shared<const Classifier>(sized.load());
  std::shared_ptr<const RevisionSource> source;
  if (!f.revisions_dir.empty()) {
    source = std::make_shared<FileRevisionSource>(f.revisions_dir);
  } else {
    MediaWikiOptions mw;
    mw.url_template = f.upstream;
    mw.timeout = std::chrono::milliseconds(f.upstream_timeout_ms);
    source = std::make_shared<MediaWikiClient>(mw);
  }
  if (f.cache_size > 0) source = std::make_shared<CachingRevisionSource>(source, f.cache_size);

  auto service = std::make_shared<const ScoreService>(source, classifier, config, opts);
  HttpServer server(service);
  const int port = server.bind(opts.host, opts.port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "serving " << classifier->meta().model_name << " v" << classifier->meta().model_version
            << " (" << classifier->backend().describe() << ") on " << opts.host << ":" << port << "\n";
  server.serve();
  g_server = nullptr;
  return 0;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text << "\n";
}

int cmd_evaluate(const std::string& data, const ModelFlags& model, const EvalOptions& opts,
                 const std::string& out, const std::string& scores_out) {
  const Classifier classifier = model.load();
  const std::vector<SentenceRecord> records = read_records(fs::path(data));
  const EvalReport report = evaluate(records, classifier, opts);
  write_text(out, report.to_json());
  if (!scores_out.empty()) {
    std::string lines;
    for (std::size_t i = 0; i < records.size(); ++i) {
      nlohmann::ordered_json j;
      j["revision_id"] = records[i].revision_id;
      j["label"] = records[i].label;
      j["score"] = report.scores[i];
      if (i) lines += "\n";
      lines += j.dump();
    }
    write_text(scores_out, lines);
  }
  return 0;
}

std::vector<ClassifierInput> bench_inputs(const std::string& data) {
  std::vector<ClassifierInput> inputs;
  if (!data.empty()) {
    for (const auto& r : read_records(fs::path(data))) inputs.push_back(ClassifierInput::from_record(r));
  } else {
    inputs.push_back({"en", "History",
                      "The bridge was completed in 1932 after four years of construction and "
                      "remained the longest in the region until 1965.",
                      "It was designed by a local engineering firm.",
                      "Plans for a crossing had existed since the 1890s."});
  }
  if (inputs.empty()) throw ConfigError("no inputs to benchmark");
  return inputs;
}

int cmd_bench(const ModelFlags& model, const std::string& data, std::size_t n, std::size_t warmup) {
  const Classifier classifier = model.load();
  const LatencyStats s = latency_bench(classifier, bench_inputs(data), warmup, n);
  nlohmann::ordered_json j;
  j["backend"] = classifier.backend().describe();
  j["threads"] = model.model_dir.empty() ? 1 : model.threads;
  j["n"] = s.n;
  j["mean_s"] = s.mean_s;
  j["std_s"] = s.std_s;
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_verbalize(const std::string& data, const std::string& endpoint, const std::string& model,
                  const std::string& replay, std::size_t parallel, const EvalOptions& eval,
                  const std::string& out) {
  const std::vector<SentenceRecord> records = read_records(fs::path(data));
  std::unique_ptr<LogprobClient> client;
  if (!replay.empty()) {
    client = std::make_unique<ReplayClient>(ReplayClient::load(replay));
  } else {
    CompletionsOptions o;
    o.endpoint = endpoint;
    o.model = model;
    client = std::make_unique<CompletionsClient>(o);
  }
  std::vector<ClassifierInput> inputs;
  std::vector<bool> labels;
  std::vector<std::string> langs;
  for (const auto& r : records) {
    inputs.push_back(ClassifierInput::from_record(r));
    labels.push_back(r.label == 1);
    langs.push_back(inputs.back().lang);
  }
  const auto scores = verbalizer_scores(*client, inputs, parallel);
  std::vector<double> p;
  for (const auto& s : scores) p.push_back(s.p_yes);
  write_text(out, make_report(p, labels, langs, eval.threshold, eval.n_boot, eval.seed).to_json());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference need scoring for Wikipedia revisions"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--lang-config", config_path, "Language configuration JSON (default: built in)")
      ->envname("REFNEED_LANG_CONFIG");

  // build-corpus
  auto* build = app.add_subcommand("build-corpus", "Wikitext to labeled sentence records");
  std::string b_lang, b_input, b_out;
  std::vector<std::int64_t> b_revs;
  bool b_all = false;
  build->add_option("--lang", b_lang)->required();
  build->add_option("--input", b_input, "Directory of .wikitext files, or 'api'")->required();
  build->add_option("--rev-ids", b_revs, "Revision ids to fetch with --input api")->delimiter(',');
  build->add_flag("--all-articles", b_all, "Keep articles without a featured-article template");
  build->add_option("--out", b_out)->required();

  // split
  auto* split = app.add_subcommand("split", "Page-disjoint train/valid/test split");
  std::string s_in, s_dir, s_ratios = "0.8,0.1,0.1";
  std::uint64_t s_seed = 0;
  split->add_option("--in", s_in)->required();
  split->add_option("--out-dir", s_dir)->required();
  split->add_option("--ratios", s_ratios, "train,valid,test")->capture_default_str();
  split->add_option("--seed", s_seed)->capture_default_str();

  // sample
  auto* sample = app.add_subcommand("sample", "Label-balanced sample per language");
  std::string m_in, m_out;
  std::size_t m_n = 0;
  std::uint64_t m_seed = 0;
  std::vector<std::string> m_dbs;
  sample->add_option("--in", m_in)->required();
  sample->add_option("--out", m_out)->required();
  sample->add_option("--per-lang", m_n)->required();
  sample->add_option("--seed", m_seed)->capture_default_str();
  sample->add_option("--wiki-db", m_dbs, "Restrict to these wiki_dbs (repeatable)");

  // score
  auto* score = app.add_subcommand("score", "Reference need score of one revision");
  std::string c_lang, c_revs_dir;
  std::int64_t c_rev = 0;
  double c_thr = kDefaultThreshold;
  ModelFlags c_model;
  score->add_option("--lang", c_lang)->required();
  score->add_option("--rev-id", c_rev)->required();
  c_model.add(score);
  score->add_option("--threshold", c_thr)->capture_default_str();
  score->add_option("--revisions-dir", c_revs_dir, "Read canned API responses instead of the network");

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP scoring service");
  ServeFlags v;
  ServiceOptions v_opts;
  ModelFlags v_model;
  serve->add_option("--listen", v.listen, "host:port")->envname("REFNEED_LISTEN")->capture_default_str();
  serve->add_option("--model", v_model.model_dir)->envname("REFNEED_MODEL_DIR");
  serve->add_option("--stub", v_model.stub_seed)->envname("REFNEED_STUB_SEED");
  serve->add_option("--threads", v_opts.threads)->envname("REFNEED_THREADS")->capture_default_str();
  serve->add_option("--classify-slots", v_opts.classify_slots)->envname("REFNEED_CLASSIFY_SLOTS")->capture_default_str();
  serve->add_option("--max-in-flight", v_opts.max_in_flight)->envname("REFNEED_MAX_IN_FLIGHT")->capture_default_str();
  serve->add_option("--deadline-ms", v.deadline_ms)->envname("REFNEED_DEADLINE_MS")->capture_default_str();
  serve->add_option("--threshold", v_opts.threshold)->envname("REFNEED_THRESHOLD")->capture_default_str();
  serve->add_option("--upstream", v.upstream, "MediaWiki API URL template")->envname("REFNEED_UPSTREAM_URL")->capture_default_str();
  serve->add_option("--upstream-timeout-ms", v.upstream_timeout_ms)->envname("REFNEED_UPSTREAM_TIMEOUT_MS")->capture_default_str();
  serve->add_option("--cache-size", v.cache_size, "Revisions kept in memory; 0 disables")->envname("REFNEED_CACHE_SIZE")->capture_default_str();
  serve->add_option("--revisions-dir", v.revisions_dir, "Serve canned API responses")->envname("REFNEED_REVISIONS_DIR");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Metrics report on a labeled dataset");
  std::string e_data, e_out, e_scores;
  ModelFlags e_model;
  EvalOptions e_opts;
  ev->add_option("--data", e_data)->required();
  e_model.add(ev);
  ev->add_option("--threshold", e_opts.threshold)->capture_default_str();
  ev->add_option("--boot", e_opts.n_boot)->capture_default_str();
  ev->add_option("--seed", e_opts.seed)->capture_default_str();
  ev->add_option("--out", e_out, "Report path (default stdout)");
  ev->add_option("--scores-out", e_scores, "Per-record scores as JSON lines");

  // bench
  auto* bench = app.add_subcommand("bench", "Single-input latency of a model");
  ModelFlags k_model;
  std::string k_data;
  std::size_t k_n = 1000, k_warmup = 50;
  k_model.add(bench);
  bench->add_option("--n", k_n)->capture_default_str();
  bench->add_option("--warmup", k_warmup)->capture_default_str();
  bench->add_option("--data", k_data, "Records to cycle through (default: one built-in sentence)");

  // verbalize
  auto* verb = app.add_subcommand("verbalize", "Zero-shot LLM baseline via answer log-probabilities");
  std::string z_data, z_endpoint, z_model, z_replay, z_out;
  std::size_t z_parallel = 4;
  EvalOptions z_eval;
  verb->add_option("--data", z_data)->required();
  auto* ep = verb->add_option("--endpoint", z_endpoint, "OpenAI-compatible completions URL");
  verb->add_option("--model", z_model, "Model name sent to the endpoint");
  auto* rp = verb->add_option("--replay", z_replay, "Recorded log-probabilities instead of an endpoint");
  ep->excludes(rp);
  verb->add_option("--parallel", z_parallel)->capture_default_str();
  verb->add_option("--boot", z_eval.n_boot)->capture_default_str();
  verb->add_option("--seed", z_eval.seed)->capture_default_str();
  verb->add_option("--out", z_out);

  CLI11_PARSE(app, argc, argv);

  try {
    const LangConfig& config = lang_config(config_path);
    if (*build) return cmd_build_corpus(b_lang, b_input, b_revs, b_all, b_out, config);
    if (*split) {
      const DatasetSplit parts = split_by_page(read_records(fs::path(s_in)), parse_ratios(s_ratios), s_seed);
      fs::create_directories(s_dir);
      write_records(parts.train, fs::path(s_dir) / "train.jsonl");
      write_records(parts.valid, fs::path(s_dir) / "valid.jsonl");
      write_records(parts.test, fs::path(s_dir) / "test.jsonl");
      std::cerr << parts.train.size() << "/" << parts.valid.size() << "/" << parts.test.size()
                << " records\n";
      return 0;
    }
    if (*sample) {
      write_records(balanced_sample(read_records(fs::path(m_in)), m_n, m_seed, m_dbs), fs::path(m_out));
      return 0;
    }
    if (*score) return cmd_score(c_lang, c_rev, c_model, c_thr, c_revs_dir, config);
    if (*serve) return cmd_serve(v, v_model, v_opts, config);
    if (*ev) return cmd_evaluate(e_data, e_model, e_opts, e_out, e_scores);
    if (*bench) return cmd_bench(k_model, k_data, k_n, k_warmup);
    if (*verb) {
      if (z_replay.empty() && (z_endpoint.empty() || z_model.empty())) {
        throw ConfigError("verbalize needs --endpoint and --model, or --replay");
      }
      return cmd_verbalize(z_data, z_endpoint, z_model, z_replay, z_parallel, z_eval, z_out);
    }
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
