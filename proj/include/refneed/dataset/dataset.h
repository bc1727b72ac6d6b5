#ifndef REFNEED_DATASET_DATASET_H_
#define REFNEED_DATASET_DATASET_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "refneed/sentences/record.h"

namespace refneed {

// Line-delimited JSON, one record per line, keys in the order wiki_db,
// page_id, page_title, revision_id, section_name, sentence, next_sent,
// prev_sent, paragraph, label.
std::string record_to_json(const SentenceRecord& record);
// Throws SchemaError on missing, extra or mistyped fields and labels other
// than 0/1.
SentenceRecord record_from_json(std::string_view line);

void write_records(const std::vector<SentenceRecord>& records,
                   const std::filesystem::path& path);
void write_records(const std::vector<SentenceRecord>& records, std::ostream& out);
// Blank lines are skipped. SchemaError messages carry the line number.
std::vector<SentenceRecord> read_records(const std::filesystem::path& path);
std::vector<SentenceRecord> read_records(std::istream& in);

struct DatasetSplit {
  std::vector<SentenceRecord> train;
  std::vector<SentenceRecord> valid;
  std::vector<SentenceRecord> test;
  std::uint64_t seed = 0;
};

constexpr std::array<double, 3> kDefaultSplitRatios = {0.8, 0.1, 0.1};

// Position of a page in [0, 1) under a seeded hash of (wiki_db, page_id).
double page_hash_unit(const std::string& wiki_db, std::int64_t page_id,
                      std::uint64_t seed);

// Page-disjoint split: each page goes wholly to the split whose cumulative
// ratio interval contains its hash position. Record order is preserved
// within each split. Throws std::invalid_argument unless the ratios are
// non-negative and sum to 1.
DatasetSplit split_by_page(const std::vector<SentenceRecord>& records,
                           const std::array<double, 3>& ratios, std::uint64_t seed);

// n_per_lang records for every wiki_db present (or listed in `wiki_dbs`),
// half of each label, sampled without replacement. Output is grouped by
// wiki_db in sorted order and shuffled within a group. Throws
// InsufficientData for the first deficient (wiki_db, label) and
// std::invalid_argument when n_per_lang is odd.
std::vector<SentenceRecord> balanced_sample(const std::vector<SentenceRecord>& records,
                                            std::size_t n_per_lang, std::uint64_t seed,
                                            const std::vector<std::string>& wiki_dbs = {});

}  // namespace refneed

#endif  // REFNEED_DATASET_DATASET_H_
