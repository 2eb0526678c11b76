#pragma once

#include <string>
#include <Eigen/Dense>

#include "defproj/dictionary.hpp"
#include "defproj/encoder.hpp"
#include "defproj/tokenizer.hpp"

namespace defproj {

enum class EntryPooling { AC, AMP };

inline const char* to_string(EntryPooling p) {
  return p == EntryPooling::AC ? "AC" : "AMP";
}

// The frozen classification head: one row per dictionary entry, aligned with
// entry ids. Immutable once built; training never touches it.
class EntryEmbeddingMatrix {
 public:
  EntryEmbeddingMatrix() = default;

  EntryEmbeddingMatrix(Eigen::MatrixXd weights, std::string builder_tag,
                       std::string source_encoder_fingerprint);

  const Eigen::MatrixXd& weights() const { return weights_; }
  Eigen::Index entry_count() const { return weights_.rows(); }
  Eigen::Index dim() const { return weights_.cols(); }

  const std::string& builder_tag() const { return builder_tag_; }
  const std::string& source_encoder_fingerprint() const {
    return source_fingerprint_;
  }

  std::string fingerprint() const;

  // float copy for the training loss (logits = h * weights^T)
  Tensor to_float_tensor() const;

 private:
  Eigen::MatrixXd weights_;
  std::string builder_tag_;
  std::string source_fingerprint_;
};

struct BuildReport {
  int truncated_definitions = 0;
};

// Per entry: encode "[CLS] definition [SEP]" for each definition, pool
// (CLS for AC, mean over real tokens for AMP), then average the pooled
// vectors arithmetically. Accumulation is done in double.
EntryEmbeddingMatrix build_entry_matrix(const EncoderParams& params,
                                        const DictionaryDataset& dataset,
                                        const Vocab& vocab,
                                        EntryPooling entry_pooling,
                                        BuildReport* report = nullptr);

}  // namespace defproj
