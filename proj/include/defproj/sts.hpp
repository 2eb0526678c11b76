#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "defproj/encoder.hpp"
#include "defproj/tokenizer.hpp"

namespace defproj {

struct StsPair {
  std::string sentence_a;
  std::string sentence_b;
  double gold_score = 0.0;
};

using StsSet = std::pair<std::string, std::vector<StsPair>>;

struct EvalResult {
  std::vector<std::pair<std::string, double>> per_set_rho_x100;
  double average = 0.0;
};

double cosine(std::span<const double> u, std::span<const double> v);

// Pearson correlation of average ranks; ties get the mean of their rank
// span. Constant inputs are rejected (the correlation is undefined).
double spearman(std::span<const double> x, std::span<const double> y);

// score<TAB>sentence_a<TAB>sentence_b per line
std::vector<StsPair> read_sts_tsv(std::istream& in);
void write_sts_tsv(std::span<const StsPair> pairs, std::ostream& out);

// Embeds one sentence with the given pooling (Prompt wraps the sentence in
// the template first).
std::vector<double> embed_sentence(const EncoderParams& params,
                                   const Vocab& vocab,
                                   const PoolingStrategy& pooling,
                                   const std::string& sentence);

// Spearman rho x 100 per set between gold scores and embedding cosines,
// plus the plain average across sets.
EvalResult sts_evaluate(const EncoderParams& params, const Vocab& vocab,
                        const PoolingStrategy& pooling,
                        std::span<const StsSet> sets);

}  // namespace defproj
