#include "defproj/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "defproj/errors.hpp"

namespace defproj {

namespace {

constexpr char kMagic[4] = {'D', 'P', 'A', 'K'};

struct TensorBlob {
  std::string name;
  std::string dtype;
  std::vector<int> shape;
  const char* bytes = nullptr;
  std::size_t nbytes = 0;
};

void write_container(const std::string& path, nlohmann::json manifest,
                     const std::vector<TensorBlob>& blobs) {
  nlohmann::json dir = nlohmann::json::array();
  std::size_t offset = 0;
  for (const TensorBlob& b : blobs) {
    dir.push_back({{"name", b.name},
                   {"dtype", b.dtype},
                   {"shape", b.shape},
                   {"offset", offset},
                   {"nbytes", b.nbytes}});
    offset += b.nbytes;
  }
  manifest["format_version"] = kContainerVersion;
  manifest["tensors"] = std::move(dir);
  const std::string m = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  const std::uint32_t version = kContainerVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  const std::uint64_t mlen = m.size();
  out.write(reinterpret_cast<const char*>(&mlen), sizeof mlen);
  out.write(m.data(), static_cast<std::streamsize>(m.size()));
  for (const TensorBlob& b : blobs)
    out.write(b.bytes, static_cast<std::streamsize>(b.nbytes));
  if (!out) throw data_error("failed writing " + path);
}

struct Container {
  nlohmann::json manifest;
  std::vector<char> payload;

  struct Found {
    std::vector<int> shape;
    const char* bytes;
    std::size_t nbytes;
    std::string dtype;
  };

  Found find(const std::string& name) const {
    for (const auto& t : manifest.at("tensors")) {
      if (t.at("name").get<std::string>() != name) continue;
      Found f;
      f.shape = t.at("shape").get<std::vector<int>>();
      f.dtype = t.at("dtype").get<std::string>();
      const auto offset = t.at("offset").get<std::size_t>();
      f.nbytes = t.at("nbytes").get<std::size_t>();
      if (offset + f.nbytes > payload.size())
        throw data_error("tensor " + name + " extends past the payload");
      f.bytes = payload.data() + offset;
      return f;
    }
    throw data_error("tensor " + name + " missing from container");
  }
};

Container read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw data_error(path + " is not a checkpoint container");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != kContainerVersion)
    throw data_error("unsupported container version " +
                     std::to_string(version));
  std::uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), sizeof mlen);
  std::string m(mlen, '\0');
  in.read(m.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw data_error("truncated container manifest in " + path);
  Container c;
  c.manifest = nlohmann::json::parse(m, nullptr, false);
  if (c.manifest.is_discarded())
    throw data_error("corrupt container manifest in " + path);
  c.payload.assign(std::istreambuf_iterator<char>(in),
                   std::istreambuf_iterator<char>());
  return c;
}

nlohmann::json encoder_config_json(const EncoderConfig& c) {
  return {{"vocab_size", c.vocab_size},   {"d_model", c.d_model},
          {"n_layers", c.n_layers},       {"n_heads", c.n_heads},
          {"d_ff", c.d_ff},               {"max_position", c.max_position},
          {"model_family", to_string(c.family)}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.max_position = j.at("max_position").get<int>();
  const std::string fam = j.at("model_family").get<std::string>();
  if (fam == "bert-like")
    c.family = ModelFamily::BertLike;
  else if (fam == "roberta-like")
    c.family = ModelFamily::RobertaLike;
  else
    throw data_error("unknown model family " + fam);
  return c;
}

}  // namespace

void save_encoder(const std::string& path, const EncoderParams& params) {
  std::vector<TensorBlob> blobs;
  params.for_each([&](const std::string& name, const Tensor& t) {
    TensorBlob b;
    b.name = name;
    b.dtype = "f32";
    b.shape = t.shape;
    b.bytes = reinterpret_cast<const char*>(t.data.data());
    b.nbytes = t.data.size() * sizeof(float);
    blobs.push_back(std::move(b));
  });
  nlohmann::json manifest;
  manifest["kind"] = "encoder";
  manifest["config"] = encoder_config_json(params.config);
  manifest["pooler_activation"] = to_string(params.pooler_act);
  manifest["fingerprint"] = fingerprint_params(params);
  write_container(path, std::move(manifest), blobs);
}

EncoderParams load_encoder(const std::string& path) {
  const Container c = read_container(path);
  if (c.manifest.at("kind").get<std::string>() != "encoder")
    throw data_error(path + " does not hold an encoder checkpoint");
  EncoderParams p;
  p.config = encoder_config_from_json(c.manifest.at("config"));
  p.config.validate();
  const std::string act =
      c.manifest.at("pooler_activation").get<std::string>();
  p.pooler_act = act == "gelu" ? Activation::Gelu : Activation::Tanh;
  p.layers.resize(static_cast<std::size_t>(p.config.n_layers));
  p.for_each([&](const std::string& name, Tensor& t) {
    const Container::Found f = c.find(name);
    if (f.dtype != "f32")
      throw data_error("tensor " + name + " has dtype " + f.dtype);
    t.shape = f.shape;
    t.data.resize(f.nbytes / sizeof(float));
    std::memcpy(t.data.data(), f.bytes, f.nbytes);
    if (t.data.size() !=
        static_cast<std::size_t>(t.rows()) * static_cast<std::size_t>(t.cols()))
      throw data_error("tensor " + name + " shape/payload mismatch");
  });
  return p;
}

void save_entry_matrix(const std::string& path,
                       const EntryEmbeddingMatrix& matrix) {
  // row-major copy so the container layout is independent of Eigen's default
  const Eigen::MatrixXd& w = matrix.weights();
  std::vector<double> rowmajor(static_cast<std::size_t>(w.size()));
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      rowmajor[static_cast<std::size_t>(i * w.cols() + j)] = w(i, j);
  TensorBlob b;
  b.name = "weights";
  b.dtype = "f64";
  b.shape = {static_cast<int>(w.rows()), static_cast<int>(w.cols())};
  b.bytes = reinterpret_cast<const char*>(rowmajor.data());
  b.nbytes = rowmajor.size() * sizeof(double);
  nlohmann::json manifest;
  manifest["kind"] = "entry_matrix";
  manifest["builder_tag"] = matrix.builder_tag();
  manifest["source_encoder_fingerprint"] =
      matrix.source_encoder_fingerprint();
  manifest["fingerprint"] = matrix.fingerprint();
  write_container(path, std::move(manifest), {b});
}

EntryEmbeddingMatrix load_entry_matrix(const std::string& path) {
  const Container c = read_container(path);
  if (c.manifest.at("kind").get<std::string>() != "entry_matrix")
    throw data_error(path + " does not hold an entry matrix");
  const Container::Found f = c.find("weights");
  if (f.dtype != "f64" || f.shape.size() != 2)
    throw data_error("unexpected entry matrix payload in " + path);
  Eigen::MatrixXd w(f.shape[0], f.shape[1]);
  const double* src = reinterpret_cast<const double*>(f.bytes);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      w(i, j) = src[i * w.cols() + j];
  return EntryEmbeddingMatrix(
      std::move(w), c.manifest.at("builder_tag").get<std::string>(),
      c.manifest.at("source_encoder_fingerprint").get<std::string>());
}

nlohmann::json read_container_manifest(const std::string& path) {
  return read_container(path).manifest;
}

}  // namespace defproj
