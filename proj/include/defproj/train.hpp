#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "defproj/dictionary.hpp"
#include "defproj/encoder.hpp"
#include "defproj/entry_matrix.hpp"
#include "defproj/geometry.hpp"
#include "defproj/optimizer.hpp"
#include "defproj/sts.hpp"
#include "defproj/tokenizer.hpp"

namespace defproj {

// (sentence pooling used during training, entry embedding type)
struct EncodingCombination {
  Pooling sentence_pooling = Pooling::Cls;  // Cls or Mean
  EntryPooling entry_type = EntryPooling::AMP;

  bool operator==(const EncodingCombination&) const = default;
};

std::string to_string(EncodingCombination c);

// fixed preference order, also the grid-search tie-break order
inline std::array<EncodingCombination, 4> all_combinations() {
  return {EncodingCombination{Pooling::Cls, EntryPooling::AMP},
          EncodingCombination{Pooling::Mean, EntryPooling::AMP},
          EncodingCombination{Pooling::Cls, EntryPooling::AC},
          EncodingCombination{Pooling::Mean, EntryPooling::AC}};
}

struct TrainConfig {
  double learning_rate = 5e-3;
  int batch_size = 16;
  std::uint64_t seed = 0;
  AdamWConfig optimizer;
  static constexpr int epochs = 1;  // more than one epoch degrades quality

  void validate() const {
    if (learning_rate < 0 || batch_size < 1)
      throw data_error("invalid training configuration");
  }
};

// Classification loss of a projected sentence vector against the frozen
// entry rows: cross-entropy of (h . entry_embed(e')) over all entries.
// entry_weights_t is the d x n transposed matrix as a tape constant, so the
// gradient flows into h only.
template <typename S>
typename TapeT<S>::Var defsent_loss(TapeT<S>& tape,
                                    typename TapeT<S>::Var entry_weights_t,
                                    typename TapeT<S>::Var projected,
                                    int target) {
  auto logits = tape.matmul(projected, entry_weights_t);
  return tape.cross_entropy_from_logits(logits, target);
}

struct TrainResult {
  EncoderParams params;
  std::vector<double> batch_losses;
};

// One pass over every (entry, definition) pair, order fixed by the seed.
// Starts from a copy of `base`; the entry matrix is never touched. Linear
// learning-rate decay to zero across the epoch, no warmup.
TrainResult train_one_epoch(const EncoderParams& base,
                            const EntryEmbeddingMatrix& entry_matrix,
                            const DictionaryDataset& dataset,
                            const Vocab& vocab, EncodingCombination combination,
                            const TrainConfig& config);

// Scores a trained encoder for one combination (average Spearman rho x 100
// on a dev split, in the real wiring).
using CombinationEvaluator =
    std::function<double(const EncoderParams&, EncodingCombination)>;

struct GridSearchResult {
  EncodingCombination best;
  std::vector<std::pair<EncodingCombination, double>> scores;  // fixed order
};

// Trains each of the four combinations with the same seed and returns the
// dev argmax; ties resolve in the all_combinations() order.
GridSearchResult grid_search_combination(const EncoderParams& base,
                                         const DictionaryDataset& dataset,
                                         const Vocab& vocab,
                                         const EntryEmbeddingMatrix& ac_matrix,
                                         const EntryEmbeddingMatrix& amp_matrix,
                                         const CombinationEvaluator& dev_eval,
                                         const TrainConfig& config);

struct MultiSeedSummary {
  std::vector<double> scores;  // aligned with the seed list
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  std::size_t best_index = 0;
  std::uint64_t best_seed = 0;
};

MultiSeedSummary summarize_scores(std::span<const double> scores,
                                  std::span<const std::uint64_t> seeds);

// Runs runner(seed) once per seed, optionally across threads. Seeds must be
// distinct; runs share no state, so results are independent of `jobs`.
template <typename Runner>
MultiSeedSummary multi_seed(Runner&& runner,
                            std::span<const std::uint64_t> seeds,
                            int jobs = 1) {
  if (seeds.empty()) throw data_error("multi_seed with no seeds");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      if (seeds[i] == seeds[j])
        throw data_error("multi_seed seeds must be distinct");
  std::vector<double> scores(seeds.size());
  if (jobs <= 1 || seeds.size() == 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i)
      scores[i] = runner(seeds[i]);
  } else {
    const int workers =
        std::min<int>(jobs, static_cast<int>(seeds.size()));
    std::vector<std::exception_ptr> errors(
        static_cast<std::size_t>(workers));
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          for (std::size_t i = static_cast<std::size_t>(w); i < seeds.size();
               i += static_cast<std::size_t>(workers))
            scores[i] = runner(seeds[i]);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return summarize_scores(scores, seeds);
}

enum class SpaceBranch { QuasiIsotropic, IcaTransformed };

inline const char* to_string(SpaceBranch b) {
  return b == SpaceBranch::QuasiIsotropic ? "quasi_isotropic"
                                          : "ica_transformed";
}

// Schedule for progressive separate training. Learning rates must not
// increase across steps; raw models run at most 3 steps, models continued
// from an already-trained checkpoint at most 2.
struct PSTPlan {
  int total_steps = 3;
  std::vector<double> learning_rates = {5e-3, 4e-3, 3e-3};
  std::optional<EncodingCombination> combination;  // grid-searched when unset
  bool research_at_step2 = false;
  bool compare_final_branches = true;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int batch_size = 16;
  bool from_checkpoint = false;
  IcaConfig ica;
  int jobs = 1;
  AdamWConfig optimizer;

  void validate() const;
};

struct SeedRunRecord {
  std::uint64_t seed = 0;
  double dev_score = 0.0;
  EvalResult test_result;
};

struct BranchRecord {
  SpaceBranch branch = SpaceBranch::QuasiIsotropic;
  EntryEmbeddingMatrix matrix;
  std::string matrix_fingerprint;
  std::string builder_tag;
  GeometryReport geometry;
  bool ica_converged = true;
  std::vector<SeedRunRecord> runs;
  MultiSeedSummary dev_summary;
  double mean_test_average = 0.0;
  EncoderParams best_params;  // encoder of the dev-argmax seed
};

struct StepRecord {
  int step_index = 0;
  double learning_rate = 0.0;
  EncodingCombination combination;
  std::string trainable_init_fingerprint;  // always the base model's
  std::string matrix_source_fingerprint;   // encoder the matrix came from
  std::optional<GridSearchResult> grid;
  std::vector<BranchRecord> branches;
  std::size_t chosen_branch = 0;
};

struct PSTState {
  std::string base_fingerprint;
  std::vector<StepRecord> steps;
  EncoderParams final_params;
  double final_test_average = 0.0;

  const BranchRecord& chosen(int step) const {
    const StepRecord& s = steps.at(static_cast<std::size_t>(step));
    return s.branches.at(s.chosen_branch);
  }
};

struct PstEvaluators {
  // drives grid search and best-seed selection
  CombinationEvaluator dev;
  // reported per seed; also picks the final-step branch
  std::function<EvalResult(const EncoderParams&, EncodingCombination)> test;
};

// The full progressive schedule. Every step trains fresh copies of `base`
// against an entry matrix built from the previous step's best encoder; the
// final step optionally races the matrix as-is against its ICA transform.
PSTState pst_run(const PSTPlan& plan, const EncoderParams& base,
                 const DictionaryDataset& dataset, const Vocab& vocab,
                 const PstEvaluators& eval);

}  // namespace defproj
