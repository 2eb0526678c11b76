#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace defproj {

class DictionaryDataset;

// Word-level vocabulary with the reserved ids the encoder expects.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;

  Vocab();

  // returns the id, inserting if new
  int add(const std::string& token);

  // [UNK] for unseen tokens
  int id_of(std::string_view token) const;

  bool contains(std::string_view token) const;

  int size() const { return static_cast<int>(id_to_token_.size()); }

  const std::string& token_of(int id) const { return id_to_token_.at(id); }

  std::unordered_set<std::string> word_set() const;

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

// Lowercases, splits on whitespace, and breaks punctuation into single-char
// tokens. Bracketed specials like [MASK] pass through whole.
std::vector<std::string> tokenize_words(std::string_view text);

// Vocabulary over definition tokens with a frequency cutoff, plus the prompt
// template words which must always be encodable.
Vocab build_vocab(const DictionaryDataset& dataset, int min_freq = 1);

std::vector<int> encode_tokens(const Vocab& vocab,
                               std::span<const std::string> tokens);

// [CLS] tokens(text) [SEP], truncated to max_len when necessary.
// Sets *truncated when a definition had to be cut.
std::vector<int> encode_sentence(const Vocab& vocab, std::string_view text,
                                 int max_len, bool* truncated = nullptr);

}  // namespace defproj
