#include "refneed/dataset/dataset.h"

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "refneed/common/errors.h"
#include "refneed/common/random.h"

namespace refneed {

namespace {

using nlohmann::ordered_json;

constexpr std::array<const char*, 10> kFields = {
    "wiki_db",  "page_id",   "page_title", "revision_id", "section_name",
    "sentence", "next_sent", "prev_sent",  "paragraph",   "label"};

const std::string& string_field(const ordered_json& obj, const char* key) {
  const ordered_json& v = obj.at(key);
  if (!v.is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
  return v.get_ref<const std::string&>();
}

std::int64_t int_field(const ordered_json& obj, const char* key) {
  const ordered_json& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw SchemaError(std::string("field '") + key + "' must be an integer");
  }
  return v.get<std::int64_t>();
}

}  // namespace

std::string record_to_json(const SentenceRecord& r) {
  ordered_json obj;
  obj["wiki_db"] = r.wiki_db;
  obj["page_id"] = r.page_id;
  obj["page_title"] = r.page_title;
  obj["revision_id"] = r.revision_id;
  obj["section_name"] = r.section_name;
  obj["sentence"] = r.sentence;
  obj["next_sent"] = r.next_sent;
  obj["prev_sent"] = r.prev_sent;
  obj["paragraph"] = r.paragraph;
  obj["label"] = r.label;
  return obj.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
}

SentenceRecord record_from_json(std::string_view line) {
  ordered_json obj;
  try {
    obj = ordered_json::parse(line);
  } catch (const ordered_json::exception& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw SchemaError("record must be a JSON object");
  for (const char* key : kFields) {
    if (!obj.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
  }
  if (obj.size() != kFields.size()) {
    for (const auto& [key, _] : obj.items()) {
      bool known = false;
      for (const char* f : kFields) known = known || key == f;
      if (!known) throw SchemaError("unexpected field '" + key + "'");
    }
  }
  SentenceRecord r;
  r.wiki_db = string_field(obj, "wiki_db");
  r.page_id = int_field(obj, "page_id");
  r.page_title = string_field(obj, "page_title");
  r.revision_id = int_field(obj, "revision_id");
  r.section_name = string_field(obj, "section_name");
  r.sentence = string_field(obj, "sentence");
  r.next_sent = string_field(obj, "next_sent");
  r.prev_sent = string_field(obj, "prev_sent");
  r.paragraph = string_field(obj, "paragraph");
  const std::int64_t label = int_field(obj, "label");
  if (label != 0 && label != 1) {
    throw SchemaError("label must be 0 or 1, got " + std::to_string(label));
  }
  r.label = static_cast<int>(label);
  return r;
}

void write_records(const std::vector<SentenceRecord>& records, std::ostream& out) {
  for (const SentenceRecord& r : records) out << record_to_json(r) << '\n';
}

void write_records(const std::vector<SentenceRecord>& records,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_records(records, out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<SentenceRecord> read_records(std::istream& in) {
  std::vector<SentenceRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      records.push_back(record_from_json(line));
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::vector<SentenceRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_records(in);
}

double page_hash_unit(const std::string& wiki_db, std::int64_t page_id,
                      std::uint64_t seed) {
  std::uint64_t h = fnv1a_u64(seed, 0xCBF29CE484222325ULL);
  h = fnv1a(wiki_db, h);
  h = fnv1a_u64(static_cast<std::uint64_t>(page_id), fnv1a(std::string_view("\0", 1), h));
  return static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
}

DatasetSplit split_by_page(const std::vector<SentenceRecord>& records,
                           const std::array<double, 3>& ratios, std::uint64_t seed) {
  double sum = 0;
  for (double r : ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw std::invalid_argument("split ratios must be non-negative");
    }
    sum += r;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  DatasetSplit split;
  split.seed = seed;
  for (const SentenceRecord& r : records) {
    const double u = page_hash_unit(r.wiki_db, r.page_id, seed);
    if (u < ratios[0]) {
      split.train.push_back(r);
    } else if (u < ratios[0] + ratios[1]) {
      split.valid.push_back(r);
    } else {
      split.test.push_back(r);
    }
  }
  return split;
}

std::vector<SentenceRecord> balanced_sample(const std::vector<SentenceRecord>& records,
                                            std::size_t n_per_lang, std::uint64_t seed,
                                            const std::vector<std::string>& wiki_dbs) {
  if (n_per_lang % 2 != 0) {
    throw std::invalid_argument("n_per_lang must be even to balance two labels");
  }
  // Indices per wiki_db and label, in input order.
  std::map<std::string, std::array<std::vector<std::size_t>, 2>> groups;
  for (const std::string& db : wiki_dbs) groups[db];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const SentenceRecord& r = records[i];
    if (!wiki_dbs.empty() && !groups.count(r.wiki_db)) continue;
    groups[r.wiki_db][r.label == 1 ? 1 : 0].push_back(i);
  }
  std::vector<SentenceRecord> out;
  if (n_per_lang == 0) return out;
  const std::size_t half = n_per_lang / 2;
  for (auto& [db, by_label] : groups) {
    for (int label : {1, 0}) {
      if (by_label[label].size() < half) {
        throw InsufficientData(db, label, by_label[label].size(), half);
      }
    }
  }
  for (auto& [db, by_label] : groups) {
    std::vector<std::size_t> chosen;
    for (int label : {0, 1}) {
      SplitMix64 rng(mix64(fnv1a(db, fnv1a_u64(seed, 0xCBF29CE484222325ULL)) + label));
      std::vector<std::size_t>& pool = by_label[label];
      partial_shuffle(pool, half, rng);
      chosen.insert(chosen.end(), pool.begin(), pool.begin() + half);
    }
    SplitMix64 rng(mix64(fnv1a(db, seed)));
    partial_shuffle(chosen, chosen.size(), rng);
    for (std::size_t i : chosen) out.push_back(records[i]);
  }
  return out;
}

}  // namespace refneed
