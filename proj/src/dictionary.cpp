#include "defproj/dictionary.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

#include "defproj/rng.hpp"
#include "defproj/tokenizer.hpp"

namespace defproj {

namespace {

std::string trim_trailing(std::string s) {
  while (!s.empty() &&
         std::isspace(static_cast<unsigned char>(s.back())))
    s.pop_back();
  return s;
}

struct Builder {
  std::vector<Entry> entries;
  std::unordered_map<std::string, int> index;  // surface -> position
  std::vector<std::unordered_set<std::string>> seen;

  // returns false when the definition was a duplicate or empty
  bool insert(const std::string& surface, const std::string& raw_definition,
              ParseReport* report) {
    const std::string definition = trim_trailing(raw_definition);
    if (definition.empty()) {
      if (report) ++report->skipped_empty;
      return false;
    }
    auto [it, inserted] =
        index.emplace(surface, static_cast<int>(entries.size()));
    if (inserted) {
      entries.push_back(Entry{surface, {}, static_cast<int>(entries.size())});
      seen.emplace_back();
    }
    const int pos = it->second;
    if (!seen[static_cast<std::size_t>(pos)].insert(definition).second)
      return false;
    entries[static_cast<std::size_t>(pos)].definitions.push_back(definition);
    return true;
  }

  std::vector<Entry> take() {
    // drop surfaces whose every definition was empty
    std::vector<Entry> out;
    out.reserve(entries.size());
    for (Entry& e : entries) {
      if (e.definitions.empty()) continue;
      e.entry_id = static_cast<int>(out.size());
      out.push_back(std::move(e));
    }
    return out;
  }
};

}  // namespace

DictionaryDataset::DictionaryDataset(std::vector<Entry> entries,
                                     std::vector<std::string> source_tags)
    : entries_(std::move(entries)), source_tags_(std::move(source_tags)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].definitions.empty())
      throw data_error("entry '" + entries_[i].surface +
                       "' has no definitions");
    entries_[i].entry_id = static_cast<int>(i);
  }
}

std::int64_t DictionaryDataset::definition_count() const {
  std::int64_t n = 0;
  for (const Entry& e : entries_)
    n += static_cast<std::int64_t>(e.definitions.size());
  return n;
}

DictionaryDataset parse_dictionary(std::istream& in, DictFormat format,
                                   const std::string& source_tag,
                                   ParseReport* report) {
  Builder b;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (format == DictFormat::Jsonl) {
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("surface") ||
          !j.contains("definition") || !j["surface"].is_string() ||
          !j["definition"].is_string())
        throw data_error("malformed record at line " +
                         std::to_string(line_no));
      b.insert(j["surface"].get<std::string>(),
               j["definition"].get<std::string>(), report);
    } else {
      const std::size_t tab = line.find('\t');
      if (tab == std::string::npos)
        throw data_error("malformed record at line " + std::to_string(line_no) +
                         ": expected surface<TAB>gloss");
      b.insert(line.substr(0, tab), line.substr(tab + 1), report);
    }
  }
  std::vector<std::string> tags;
  if (!source_tag.empty()) tags.push_back(source_tag);
  return DictionaryDataset(b.take(), std::move(tags));
}

void serialize_dictionary(const DictionaryDataset& dataset,
                          std::ostream& out) {
  for (const Entry& e : dataset.entries()) {
    for (const std::string& def : e.definitions) {
      nlohmann::json j;
      j["surface"] = e.surface;
      j["definition"] = def;
      out << j.dump() << '\n';
    }
  }
}

DictionaryDataset merge(const std::vector<DictionaryDataset>& datasets) {
  Builder b;
  std::vector<std::string> tags;
  for (const DictionaryDataset& d : datasets) {
    for (const Entry& e : d.entries())
      for (const std::string& def : e.definitions)
        b.insert(e.surface, def, nullptr);
    for (const std::string& t : d.source_tags()) tags.push_back(t);
  }
  return DictionaryDataset(b.take(), std::move(tags));
}

FilterResult filter_single_word(
    const DictionaryDataset& dataset,
    const std::unordered_set<std::string>& vocab) {
  std::vector<Entry> kept;
  for (const Entry& e : dataset.entries()) {
    const std::vector<std::string> toks = tokenize_words(e.surface);
    if (toks.size() == 1 && vocab.count(toks[0])) kept.push_back(e);
  }
  FilterResult r;
  r.exploitation_rate =
      dataset.empty() ? 0.0
                      : static_cast<double>(kept.size()) /
                            static_cast<double>(dataset.size());
  r.dataset = DictionaryDataset(std::move(kept), dataset.source_tags());
  return r;
}

DatasetStats stats(
    const DictionaryDataset& dataset,
    const std::function<int(const std::string&)>& token_length) {
  DatasetStats s;
  s.n_entries = static_cast<std::int64_t>(dataset.size());
  std::vector<int> lengths;
  for (const Entry& e : dataset.entries())
    for (const std::string& def : e.definitions)
      lengths.push_back(token_length(def));
  s.n_definitions = static_cast<std::int64_t>(lengths.size());
  if (!lengths.empty()) {
    std::sort(lengths.begin(), lengths.end());
    s.max_length_tokens = lengths.back();
    s.median_length_tokens = lengths[(lengths.size() - 1) / 2];
  }
  return s;
}

std::vector<TrainingPair> pair_iterator(const DictionaryDataset& dataset,
                                        std::uint64_t shuffle_seed) {
  if (dataset.empty()) throw data_error("pair_iterator on empty dataset");
  std::vector<TrainingPair> pairs;
  for (const Entry& e : dataset.entries())
    for (std::size_t j = 0; j < e.definitions.size(); ++j)
      pairs.push_back(TrainingPair{e.entry_id, static_cast<int>(j)});
  Rng rng(derive_seed(shuffle_seed, "pair-shuffle"));
  rng.shuffle(pairs);
  return pairs;
}

}  // namespace defproj
