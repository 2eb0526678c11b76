#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <unordered_set>
#include <vector>

#include "defproj/errors.hpp"

namespace defproj {

// One headword with its definition sentences. Definitions are unique within
// an entry; ids are dense and assigned by the owning dataset.
struct Entry {
  std::string surface;
  std::vector<std::string> definitions;
  int entry_id = -1;
};

enum class DictFormat { Jsonl, WordnetGlossTsv };

struct DatasetStats {
  std::int64_t n_definitions = 0;
  std::int64_t n_entries = 0;
  int max_length_tokens = 0;
  int median_length_tokens = 0;
};

struct ParseReport {
  int skipped_empty = 0;
};

class DictionaryDataset {
 public:
  DictionaryDataset() = default;

  explicit DictionaryDataset(std::vector<Entry> entries,
                             std::vector<std::string> source_tags = {});

  const std::vector<Entry>& entries() const { return entries_; }
  const std::vector<std::string>& source_tags() const { return source_tags_; }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::int64_t definition_count() const;

 private:
  std::vector<Entry> entries_;
  std::vector<std::string> source_tags_;
};

// JSON-Lines {"surface": ..., "definition": ...} or tab-separated
// surface\tgloss. Records are grouped by surface in first-seen order and
// duplicate definitions within an entry are dropped (keys are compared after
// trailing-whitespace trim). Empty definitions are skipped and counted.
DictionaryDataset parse_dictionary(std::istream& in, DictFormat format,
                                   const std::string& source_tag = "",
                                   ParseReport* report = nullptr);

// One {surface, definition} JSON line per pair, in entry order.
void serialize_dictionary(const DictionaryDataset& dataset, std::ostream& out);

// Entries with equal surfaces are unioned across sources, duplicate
// definitions removed, ids reassigned densely in first-seen order.
DictionaryDataset merge(const std::vector<DictionaryDataset>& datasets);

struct FilterResult {
  DictionaryDataset dataset;
  double exploitation_rate = 0.0;  // kept / total
};

// Keeps entries whose surface is one token present in the vocabulary.
FilterResult filter_single_word(const DictionaryDataset& dataset,
                                const std::unordered_set<std::string>& vocab);

// Token-length stats over all definitions; median is the lower of the two
// middles for even counts.
DatasetStats stats(const DictionaryDataset& dataset,
                   const std::function<int(const std::string&)>& token_length);

struct TrainingPair {
  int entry_id = -1;
  int definition_index = -1;
};

// Every (entry, definition) pair exactly once, order fixed by the seed.
std::vector<TrainingPair> pair_iterator(const DictionaryDataset& dataset,
                                        std::uint64_t shuffle_seed);

}  // namespace defproj
