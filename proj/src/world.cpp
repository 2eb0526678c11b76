#include "defproj/world.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "defproj/errors.hpp"
#include "defproj/rng.hpp"

namespace defproj {

void SyntheticWorldConfig::validate() const {
  if (n_entries < 16) throw data_error("synthetic world needs >= 16 entries");
  if (vocab_size < 10.0 * std::sqrt(static_cast<double>(n_entries)))
    throw data_error("vocab_size too small for " +
                     std::to_string(n_entries) + " entries");
  if (defs_min < 1 || defs_max < defs_min)
    throw data_error("bad definitions-per-entry range");
  if (n_sts_pairs < 2) throw data_error("need at least 2 similarity pairs");
  if (latent_dim < 2 || def_len_min < 1 || def_len_max < def_len_min)
    throw data_error("bad synthetic world dimensions");
  if (n_stopwords < 0 || n_stopwords >= vocab_size ||
      stopword_prob < 0.0 || stopword_prob >= 1.0)
    throw data_error("bad stopword configuration");
}

namespace {

std::vector<double> random_unit(Rng& rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.gaussian();
      norm += x * x;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// short pronounceable pseudo-words, unique across the call sequence
class WordMint {
 public:
  explicit WordMint(Rng& rng) : rng_(rng) {}

  std::string fresh() {
    static const char* consonants = "bcdfghjklmnprstvz";
    static const char* vowels = "aeiou";
    for (;;) {
      std::string w;
      const int syllables = 2 + static_cast<int>(rng_.below(3));
      for (int s = 0; s < syllables; ++s) {
        w.push_back(consonants[rng_.below(17)]);
        w.push_back(vowels[rng_.below(5)]);
        if (rng_.uniform() < 0.25) w.push_back(consonants[rng_.below(17)]);
      }
      if (used_.insert(w).second) return w;
    }
  }

  void reserve(const std::string& w) { used_.insert(w); }

 private:
  Rng& rng_;
  std::unordered_set<std::string> used_;
};

}  // namespace

const std::vector<double>* SyntheticWorld::latent_of(
    const std::string& token) const {
  auto it = token_index_.find(token);
  if (it == token_index_.end()) return nullptr;
  return &token_latents[static_cast<std::size_t>(it->second)];
}

std::string sentence_for_latent(const SyntheticWorld& world,
                                const std::vector<double>& latent, Rng& rng) {
  const SyntheticWorldConfig& cfg = world.config;
  const int n_stop = cfg.n_stopwords;
  const int n_content = cfg.vocab_size - n_stop;

  // concept-tilted weights over content tokens (stopwords sit at the front
  // of the token list and are drawn uniformly)
  std::vector<double> cdf(static_cast<std::size_t>(n_content));
  double max_score = -1e300;
  std::vector<double> scores(static_cast<std::size_t>(n_content));
  for (int t = 0; t < n_content; ++t) {
    const double s =
        cfg.concept_tilt *
        dot(latent, world.token_latents[static_cast<std::size_t>(n_stop + t)]);
    scores[static_cast<std::size_t>(t)] = s;
    max_score = std::max(max_score, s);
  }
  double acc = 0.0;
  for (int t = 0; t < n_content; ++t) {
    acc += std::exp(scores[static_cast<std::size_t>(t)] - max_score);
    cdf[static_cast<std::size_t>(t)] = acc;
  }

  const int len = cfg.def_len_min +
                  static_cast<int>(rng.below(
                      static_cast<std::uint64_t>(cfg.def_len_max -
                                                 cfg.def_len_min + 1)));
  std::string sentence;
  for (int i = 0; i < len; ++i) {
    int token_id;
    if (n_stop > 0 && rng.uniform() < cfg.stopword_prob) {
      token_id = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_stop)));
    } else {
      const double u = rng.uniform() * acc;
      const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
      token_id = n_stop + static_cast<int>(it - cdf.begin());
      token_id = std::min(token_id, cfg.vocab_size - 1);
    }
    if (!sentence.empty()) sentence.push_back(' ');
    sentence += world.tokens[static_cast<std::size_t>(token_id)];
  }
  return sentence;
}

StsPair sts_pair_for_latents(const SyntheticWorld& world,
                             const std::vector<double>& latent_a,
                             const std::vector<double>& latent_b, Rng& rng) {
  StsPair p;
  p.sentence_a = sentence_for_latent(world, latent_a, rng);
  p.sentence_b = sentence_for_latent(world, latent_b, rng);
  p.gold_score = dot(latent_a, latent_b);
  return p;
}

SyntheticWorld make_synthetic_world(const SyntheticWorldConfig& config) {
  config.validate();
  SyntheticWorld world;
  world.config = config;

  Rng rng(derive_seed(config.seed, "synthetic-world"));
  WordMint mint(rng);

  world.tokens.reserve(static_cast<std::size_t>(config.vocab_size));
  world.token_latents.reserve(static_cast<std::size_t>(config.vocab_size));
  for (int t = 0; t < config.vocab_size; ++t) {
    world.tokens.push_back(mint.fresh());
    world.token_latents.push_back(random_unit(rng, config.latent_dim));
    world.token_index_.emplace(world.tokens.back(), t);
  }

  // entry surfaces are disjoint from the definition vocabulary
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(config.n_entries));
  world.entry_latents.reserve(static_cast<std::size_t>(config.n_entries));
  for (int e = 0; e < config.n_entries; ++e) {
    world.entry_latents.push_back(random_unit(rng, config.latent_dim));
    Entry entry;
    entry.surface = mint.fresh();
    entry.entry_id = e;
    entries.push_back(std::move(entry));
  }

  std::unordered_set<std::string> training_sentences;
  for (int e = 0; e < config.n_entries; ++e) {
    Entry& entry = entries[static_cast<std::size_t>(e)];
    const int m = config.defs_min +
                  static_cast<int>(rng.below(static_cast<std::uint64_t>(
                      config.defs_max - config.defs_min + 1)));
    std::unordered_set<std::string> mine;
    while (static_cast<int>(entry.definitions.size()) < m) {
      std::string def = sentence_for_latent(
          world, world.entry_latents[static_cast<std::size_t>(e)], rng);
      if (!mine.insert(def).second) continue;  // duplicate within the entry
      training_sentences.insert(def);
      entry.definitions.push_back(std::move(def));
    }
  }
  world.dictionary = DictionaryDataset(std::move(entries), {"synthetic"});

  // held-out pairs: anchor on an entry latent, partner at a sampled cosine
  auto draw_pair = [&]() {
    const std::size_t anchor = rng.below(
        static_cast<std::uint64_t>(config.n_entries));
    const std::vector<double>& za = world.entry_latents[anchor];
    std::vector<double> zb;
    if (rng.uniform() < 0.2) {
      zb = za;  // paraphrase pair
    } else {
      const double c = rng.uniform();  // target cosine in [0,1)
      std::vector<double> r = random_unit(rng, config.latent_dim);
      const double proj = dot(r, za);
      double norm = 0.0;
      for (std::size_t i = 0; i < r.size(); ++i) {
        r[i] -= proj * za[i];
        norm += r[i] * r[i];
      }
      norm = std::sqrt(std::max(norm, 1e-12));
      zb.resize(r.size());
      const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
      for (std::size_t i = 0; i < r.size(); ++i)
        zb[i] = c * za[i] + s * r[i] / norm;
    }
    for (int attempt = 0; attempt < 100; ++attempt) {
      StsPair p = sts_pair_for_latents(world, za, zb, rng);
      if (training_sentences.count(p.sentence_a) ||
          training_sentences.count(p.sentence_b) ||
          p.sentence_a == p.sentence_b)
        continue;
      return p;
    }
    throw data_error(
        "could not sample held-out sentences disjoint from training data");
  };

  const int n_dev = config.n_sts_pairs / 2;
  world.dev_pairs.reserve(static_cast<std::size_t>(n_dev));
  for (int i = 0; i < n_dev; ++i) world.dev_pairs.push_back(draw_pair());
  world.test_pairs.reserve(static_cast<std::size_t>(config.n_sts_pairs));
  for (int i = 0; i < config.n_sts_pairs; ++i)
    world.test_pairs.push_back(draw_pair());
  return world;
}

}  // namespace defproj
