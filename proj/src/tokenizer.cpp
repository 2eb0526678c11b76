#include "defproj/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "defproj/dictionary.hpp"
#include "defproj/encoder.hpp"
#include "defproj/errors.hpp"

namespace defproj {

namespace {

bool is_word_char(unsigned char c) {
  // bytes >= 0x80 stay inside words so UTF-8 sequences survive intact
  return std::isalnum(c) || c == '\'' || c >= 0x80;
}

}  // namespace

Vocab::Vocab() {
  add("[PAD]");
  add("[UNK]");
  add("[CLS]");
  add("[SEP]");
  add("[MASK]");
}

int Vocab::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  const int id = static_cast<int>(id_to_token_.size());
  id_to_token_.push_back(token);
  token_to_id_.emplace(token, id);
  return id;
}

int Vocab::id_of(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) > 0;
}

std::unordered_set<std::string> Vocab::word_set() const {
  std::unordered_set<std::string> out;
  for (std::size_t i = kMask + 1; i < id_to_token_.size(); ++i)
    out.insert(id_to_token_[i]);
  return out;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (c == '[') {
      // pass bracketed specials like [MASK] through as one token
      const std::size_t close = text.find(']', i);
      if (close != std::string_view::npos && close - i <= 8) {
        flush();
        tokens.emplace_back(text.substr(i, close - i + 1));
        i = close;
        continue;
      }
    }
    if (std::isspace(c)) {
      flush();
    } else if (is_word_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return tokens;
}

Vocab build_vocab(const DictionaryDataset& dataset, int min_freq) {
  std::map<std::string, int> freq;
  for (const Entry& e : dataset.entries())
    for (const std::string& def : e.definitions)
      for (const std::string& tok : tokenize_words(def)) ++freq[tok];
  Vocab vocab;
  // prompt template words are always encodable
  for (const char* t : {"this", "sentence", ":", "\"", "means", "."})
    vocab.add(t);
  for (const auto& [tok, count] : freq)
    if (count >= min_freq) vocab.add(tok);
  return vocab;
}

std::vector<int> encode_tokens(const Vocab& vocab,
                               std::span<const std::string> tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(vocab.id_of(t));
  return ids;
}

std::vector<int> encode_sentence(const Vocab& vocab, std::string_view text,
                                 int max_len, bool* truncated) {
  const std::vector<std::string> tokens = tokenize_words(text);
  std::vector<int> ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(Vocab::kCls);
  for (const std::string& t : tokens) ids.push_back(vocab.id_of(t));
  ids.push_back(Vocab::kSep);
  if (static_cast<int>(ids.size()) > max_len) {
    if (truncated) *truncated = true;
    ids.resize(static_cast<std::size_t>(max_len) - 1);
    ids.push_back(Vocab::kSep);
  } else if (truncated) {
    *truncated = false;
  }
  return ids;
}

PoolingStrategy default_prompt_strategy(Vocab& vocab) {
  PoolingStrategy s;
  s.kind = Pooling::Prompt;
  s.prompt_template = {Vocab::kCls,
                       vocab.add("this"),
                       vocab.add("sentence"),
                       vocab.add(":"),
                       vocab.add("\""),
                       PoolingStrategy::kSlot,
                       vocab.add("\""),
                       vocab.add("means"),
                       Vocab::kMask,
                       vocab.add("."),
                       Vocab::kSep};
  s.validate();
  return s;
}

}  // namespace defproj
