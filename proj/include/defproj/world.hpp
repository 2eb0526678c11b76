#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "defproj/dictionary.hpp"
#include "defproj/sts.hpp"

namespace defproj {

// Synthetic semantic world: latent concept vectors, concept-tilted token
// distributions, a generated dictionary, and held-out similarity pairs whose
// gold score is the cosine of the generating latents. Stands in for the
// real similarity benchmarks at desk scale.
struct SyntheticWorldConfig {
  std::uint64_t seed = 7;
  int n_entries = 256;
  int vocab_size = 2000;
  int defs_min = 2;
  int defs_max = 4;
  int n_sts_pairs = 400;  // test split; dev gets half as many
  int latent_dim = 8;
  double concept_tilt = 14.0;
  int n_stopwords = 40;
  double stopword_prob = 0.15;
  int def_len_min = 8;
  int def_len_max = 16;

  void validate() const;
};

struct SyntheticWorld {
  SyntheticWorldConfig config;
  DictionaryDataset dictionary;
  std::vector<StsPair> dev_pairs;
  std::vector<StsPair> test_pairs;
  std::vector<std::vector<double>> entry_latents;
  std::vector<std::string> tokens;  // content + stop words
  std::vector<std::vector<double>> token_latents;

  // latent direction of a token, or nullptr for unknown words
  const std::vector<double>* latent_of(const std::string& token) const;

 private:
  friend SyntheticWorld make_synthetic_world(const SyntheticWorldConfig&);
  std::unordered_map<std::string, int> token_index_;
};

SyntheticWorld make_synthetic_world(const SyntheticWorldConfig& config);

class Rng;

// One definition-style sentence for a latent concept. Exposed so tests can
// generate sentences for hand-picked latents.
std::string sentence_for_latent(const SyntheticWorld& world,
                                const std::vector<double>& latent, Rng& rng);

// Fresh sentence pair for two latents; gold is their exact cosine.
StsPair sts_pair_for_latents(const SyntheticWorld& world,
                             const std::vector<double>& latent_a,
                             const std::vector<double>& latent_b, Rng& rng);

}  // namespace defproj
