#include "defproj/entry_matrix.hpp"

#include "defproj/fingerprint.hpp"

namespace defproj {

EntryEmbeddingMatrix::EntryEmbeddingMatrix(Eigen::MatrixXd weights,
                                           std::string builder_tag,
                                           std::string source_fingerprint)
    : weights_(std::move(weights)),
      builder_tag_(std::move(builder_tag)),
      source_fingerprint_(std::move(source_fingerprint)) {
  if (!weights_.allFinite())
    throw numeric_error("entry embedding matrix contains non-finite values");
}

std::string EntryEmbeddingMatrix::fingerprint() const {
  Fingerprint fp;
  fp.mix("entry-matrix");
  fp.mix(builder_tag_);
  fp.mix_i64(weights_.rows());
  fp.mix_i64(weights_.cols());
  fp.mix_values(weights_.data(),
                static_cast<std::size_t>(weights_.size()));
  return fp.hex();
}

Tensor EntryEmbeddingMatrix::to_float_tensor() const {
  Tensor t({static_cast<int>(weights_.rows()),
            static_cast<int>(weights_.cols())});
  for (Eigen::Index i = 0; i < weights_.rows(); ++i)
    for (Eigen::Index j = 0; j < weights_.cols(); ++j)
      t.at(static_cast<int>(i), static_cast<int>(j)) =
          static_cast<float>(weights_(i, j));
  return t;
}

EntryEmbeddingMatrix build_entry_matrix(const EncoderParams& params,
                                        const DictionaryDataset& dataset,
                                        const Vocab& vocab,
                                        EntryPooling entry_pooling,
                                        BuildReport* report) {
  if (dataset.empty())
    throw data_error("cannot build entry embeddings from an empty dataset");
  const int d = params.config.d_model;
  Eigen::MatrixXd weights(static_cast<Eigen::Index>(dataset.size()), d);

  const Pooling pooling =
      entry_pooling == EntryPooling::AC ? Pooling::Cls : Pooling::Mean;
  for (const Entry& e : dataset.entries()) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
    for (const std::string& def : e.definitions) {
      bool truncated = false;
      const std::vector<int> ids =
          encode_sentence(vocab, def, params.config.max_position, &truncated);
      if (truncated && report) ++report->truncated_definitions;
      const std::vector<int> mask(ids.size(), 1);
      const Tensor hidden = run_encoder(params, ids, mask);
      const std::vector<double> pooled = pool_hidden(hidden, mask, pooling);
      for (int j = 0; j < d; ++j) acc(j) += pooled[static_cast<std::size_t>(j)];
    }
    acc /= static_cast<double>(e.definitions.size());
    weights.row(e.entry_id) = acc.transpose();
  }
  return EntryEmbeddingMatrix(std::move(weights), to_string(entry_pooling),
                              fingerprint_params(params));
}

}  // namespace defproj
