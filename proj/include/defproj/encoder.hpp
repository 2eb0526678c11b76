#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "defproj/errors.hpp"
#include "defproj/fingerprint.hpp"
#include "defproj/rng.hpp"
#include "defproj/tensor.hpp"
#include "defproj/tokenizer.hpp"

namespace defproj {

enum class ModelFamily { BertLike, RobertaLike };
enum class Activation { Tanh, Gelu };
enum class Pooling { Cls, Mean, Prompt };

inline const char* to_string(ModelFamily f) {
  return f == ModelFamily::BertLike ? "bert-like" : "roberta-like";
}
inline const char* to_string(Activation a) {
  return a == Activation::Tanh ? "tanh" : "gelu";
}
inline const char* to_string(Pooling p) {
  switch (p) {
    case Pooling::Cls: return "cls";
    case Pooling::Mean: return "mean";
    default: return "prompt";
  }
}

struct EncoderConfig {
  int vocab_size = 4096;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int max_position = 64;
  ModelFamily family = ModelFamily::BertLike;

  void validate() const {
    if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 ||
        max_position <= 0)
      throw data_error("encoder config has non-positive dimensions");
    if (d_model % n_heads != 0)
      throw data_error("d_model " + std::to_string(d_model) +
                       " not divisible by n_heads " + std::to_string(n_heads));
    if (vocab_size <= Vocab::kMask)
      throw data_error("vocab_size too small for the reserved token ids");
  }
};

template <typename S>
struct EncoderLayerT {
  TensorT<S> wq, bq, wk, bk, wv, bv, wo, bo;
  TensorT<S> ln1_g, ln1_b;
  TensorT<S> w1, b1, w2, b2;
  TensorT<S> ln2_g, ln2_b;
};

// Full parameter set: embeddings, transformer layers, the trainable pooler,
// and the masked-word prediction dense used for the pooler swap on
// roberta-like models.
template <typename S>
struct EncoderParamsT {
  EncoderConfig config;
  TensorT<S> token_embed;  // vocab x d
  TensorT<S> pos_embed;    // max_position x d
  TensorT<S> emb_ln_g, emb_ln_b;
  std::vector<EncoderLayerT<S>> layers;
  TensorT<S> pooler_w, pooler_b;  // d x d, d
  Activation pooler_act = Activation::Tanh;
  TensorT<S> mlm_w, mlm_b;  // d x d, d

  template <typename F>
  void for_each(F&& f) {
    f("token_embed", token_embed);
    f("pos_embed", pos_embed);
    f("emb_ln_g", emb_ln_g);
    f("emb_ln_b", emb_ln_b);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string p = "layer" + std::to_string(i) + ".";
      EncoderLayerT<S>& l = layers[i];
      f(p + "wq", l.wq); f(p + "bq", l.bq);
      f(p + "wk", l.wk); f(p + "bk", l.bk);
      f(p + "wv", l.wv); f(p + "bv", l.bv);
      f(p + "wo", l.wo); f(p + "bo", l.bo);
      f(p + "ln1_g", l.ln1_g); f(p + "ln1_b", l.ln1_b);
      f(p + "w1", l.w1); f(p + "b1", l.b1);
      f(p + "w2", l.w2); f(p + "b2", l.b2);
      f(p + "ln2_g", l.ln2_g); f(p + "ln2_b", l.ln2_b);
    }
    f("pooler_w", pooler_w);
    f("pooler_b", pooler_b);
    f("mlm_w", mlm_w);
    f("mlm_b", mlm_b);
  }

  template <typename F>
  void for_each(F&& f) const {
    const_cast<EncoderParamsT*>(this)->for_each(
        [&](const std::string& n, TensorT<S>& t) {
          f(n, static_cast<const TensorT<S>&>(t));
        });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const TensorT<S>& t) { n += t.numel(); });
    return n;
  }

  template <typename T>
  EncoderParamsT<T> cast() const {
    EncoderParamsT<T> out;
    out.config = config;
    out.pooler_act = pooler_act;
    out.token_embed = token_embed.template cast<T>();
    out.pos_embed = pos_embed.template cast<T>();
    out.emb_ln_g = emb_ln_g.template cast<T>();
    out.emb_ln_b = emb_ln_b.template cast<T>();
    out.layers.resize(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const EncoderLayerT<S>& a = layers[i];
      EncoderLayerT<T>& b = out.layers[i];
      b.wq = a.wq.template cast<T>(); b.bq = a.bq.template cast<T>();
      b.wk = a.wk.template cast<T>(); b.bk = a.bk.template cast<T>();
      b.wv = a.wv.template cast<T>(); b.bv = a.bv.template cast<T>();
      b.wo = a.wo.template cast<T>(); b.bo = a.bo.template cast<T>();
      b.ln1_g = a.ln1_g.template cast<T>(); b.ln1_b = a.ln1_b.template cast<T>();
      b.w1 = a.w1.template cast<T>(); b.b1 = a.b1.template cast<T>();
      b.w2 = a.w2.template cast<T>(); b.b2 = a.b2.template cast<T>();
      b.ln2_g = a.ln2_g.template cast<T>(); b.ln2_b = a.ln2_b.template cast<T>();
    }
    out.pooler_w = pooler_w.template cast<T>();
    out.pooler_b = pooler_b.template cast<T>();
    out.mlm_w = mlm_w.template cast<T>();
    out.mlm_b = mlm_b.template cast<T>();
    return out;
  }
};

using EncoderParams = EncoderParamsT<float>;

// normal(0, 0.02) weights, unit layer-norm gains, zero biases. The pooler
// and masked-word dense start near identity: a pretrained pooler preserves
// the sentence vector it projects, and the frozen-head objective needs that
// property from the first step (a 0.02-normal dense outputs near-zero, so
// logits start flat and the loss never leaves chance level).
template <typename S>
EncoderParamsT<S> init_encoder_t(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  EncoderParamsT<S> p;
  p.config = cfg;
  Rng rng(derive_seed(seed, "encoder-init"));
  auto normal = [&](std::vector<int> shape) {
    TensorT<S> t(std::move(shape));
    for (S& v : t.data) v = static_cast<S>(0.02 * rng.gaussian());
    return t;
  };
  auto near_identity = [&](int n) {
    TensorT<S> t = normal({n, n});
    for (int i = 0; i < n; ++i) t.at(i, i) += S(1);
    return t;
  };
  auto ones = [](int n) { return TensorT<S>::full({n}, S(1)); };
  auto zeros_vec = [](int n) { return TensorT<S>::zeros({n}); };

  const int d = cfg.d_model;
  p.token_embed = normal({cfg.vocab_size, d});
  p.pos_embed = normal({cfg.max_position, d});
  p.emb_ln_g = ones(d);
  p.emb_ln_b = zeros_vec(d);
  p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& l : p.layers) {
    l.wq = normal({d, d}); l.bq = zeros_vec(d);
    l.wk = normal({d, d}); l.bk = zeros_vec(d);
    l.wv = normal({d, d}); l.bv = zeros_vec(d);
    l.wo = normal({d, d}); l.bo = zeros_vec(d);
    l.ln1_g = ones(d); l.ln1_b = zeros_vec(d);
    l.w1 = normal({d, cfg.d_ff}); l.b1 = zeros_vec(cfg.d_ff);
    l.w2 = normal({cfg.d_ff, d}); l.b2 = zeros_vec(d);
    l.ln2_g = ones(d); l.ln2_b = zeros_vec(d);
  }
  p.pooler_w = near_identity(d);
  p.pooler_b = zeros_vec(d);
  p.pooler_act = Activation::Tanh;
  p.mlm_w = near_identity(d);
  p.mlm_b = zeros_vec(d);
  return p;
}

inline EncoderParams init_encoder(const EncoderConfig& cfg,
                                  std::uint64_t seed) {
  return init_encoder_t<float>(cfg, seed);
}

template <typename S>
std::string fingerprint_params(const EncoderParamsT<S>& p) {
  Fingerprint fp;
  fp.mix("encoder");
  fp.mix_i64(p.config.vocab_size);
  fp.mix_i64(p.config.d_model);
  fp.mix_i64(p.config.n_layers);
  fp.mix_i64(p.config.n_heads);
  fp.mix_i64(p.config.d_ff);
  fp.mix_i64(p.config.max_position);
  fp.mix(to_string(p.config.family));
  fp.mix(to_string(p.pooler_act));
  p.for_each([&](const std::string& name, const TensorT<S>& t) {
    fp.mix(name);
    for (int d : t.shape) fp.mix_i64(d);
    fp.mix_values(t.data.data(), t.data.size());
  });
  return fp.hex();
}

// Tape handles for every parameter, so one forward pass trains them all.
template <typename S>
struct EncoderVarsT {
  using Var = typename TapeT<S>::Var;
  Var token_embed, pos_embed, emb_ln_g, emb_ln_b;
  struct Layer {
    Var wq, bq, wk, bk, wv, bv, wo, bo;
    Var ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
  };
  std::vector<Layer> layers;
  Var pooler_w, pooler_b, mlm_w, mlm_b;
  Activation pooler_act = Activation::Tanh;
  const EncoderConfig* config = nullptr;

  // visits vars in the same order as EncoderParamsT::for_each
  template <typename F>
  void for_each(F&& f) const {
    f("token_embed", token_embed);
    f("pos_embed", pos_embed);
    f("emb_ln_g", emb_ln_g);
    f("emb_ln_b", emb_ln_b);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string p = "layer" + std::to_string(i) + ".";
      const Layer& l = layers[i];
      f(p + "wq", l.wq); f(p + "bq", l.bq);
      f(p + "wk", l.wk); f(p + "bk", l.bk);
      f(p + "wv", l.wv); f(p + "bv", l.bv);
      f(p + "wo", l.wo); f(p + "bo", l.bo);
      f(p + "ln1_g", l.ln1_g); f(p + "ln1_b", l.ln1_b);
      f(p + "w1", l.w1); f(p + "b1", l.b1);
      f(p + "w2", l.w2); f(p + "b2", l.b2);
      f(p + "ln2_g", l.ln2_g); f(p + "ln2_b", l.ln2_b);
    }
    f("pooler_w", pooler_w);
    f("pooler_b", pooler_b);
    f("mlm_w", mlm_w);
    f("mlm_b", mlm_b);
  }
};

template <typename S>
EncoderVarsT<S> lift(TapeT<S>& tape, const EncoderParamsT<S>& p,
                     bool requires_grad) {
  EncoderVarsT<S> v;
  v.config = &p.config;
  v.pooler_act = p.pooler_act;
  auto L = [&](const TensorT<S>& t) { return tape.leaf(t, requires_grad); };
  v.token_embed = L(p.token_embed);
  v.pos_embed = L(p.pos_embed);
  v.emb_ln_g = L(p.emb_ln_g);
  v.emb_ln_b = L(p.emb_ln_b);
  v.layers.resize(p.layers.size());
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& a = p.layers[i];
    auto& b = v.layers[i];
    b.wq = L(a.wq); b.bq = L(a.bq);
    b.wk = L(a.wk); b.bk = L(a.bk);
    b.wv = L(a.wv); b.bv = L(a.bv);
    b.wo = L(a.wo); b.bo = L(a.bo);
    b.ln1_g = L(a.ln1_g); b.ln1_b = L(a.ln1_b);
    b.w1 = L(a.w1); b.b1 = L(a.b1);
    b.w2 = L(a.w2); b.b2 = L(a.b2);
    b.ln2_g = L(a.ln2_g); b.ln2_b = L(a.ln2_b);
  }
  v.pooler_w = L(p.pooler_w);
  v.pooler_b = L(p.pooler_b);
  v.mlm_w = L(p.mlm_w);
  v.mlm_b = L(p.mlm_b);
  return v;
}

// Bidirectional self-attention encoder. Returns last hidden states
// [len x d_model]. Padded key positions are masked out of every softmax, so
// real positions never attend to padding.
template <typename S>
typename TapeT<S>::Var encode(TapeT<S>& tape, const EncoderVarsT<S>& ev,
                              std::span<const int> token_ids,
                              std::span<const int> attention_mask) {
  const EncoderConfig& cfg = *ev.config;
  const int len = static_cast<int>(token_ids.size());
  if (len == 0) throw data_error("encode on an empty token sequence");
  if (len > cfg.max_position)
    throw data_error("sequence length " + std::to_string(len) +
                     " exceeds max_position " +
                     std::to_string(cfg.max_position));
  if (static_cast<int>(attention_mask.size()) != len)
    throw data_error("attention mask length mismatch");
  if (attention_mask[0] != 1)
    throw data_error("attention mask must keep position 0");
  for (int id : token_ids)
    if (id < 0 || id >= cfg.vocab_size)
      throw data_error("unknown token id " + std::to_string(id));

  using Var = typename TapeT<S>::Var;
  const int d = cfg.d_model;
  const int nh = cfg.n_heads;
  const int dh = d / nh;

  // additive key mask, shared across heads
  TensorT<S> mask_bias({len, len});
  for (int i = 0; i < len; ++i)
    for (int j = 0; j < len; ++j)
      mask_bias.at(i, j) = attention_mask[static_cast<std::size_t>(j)]
                               ? S(0)
                               : S(-1e9);

  std::vector<int> ids(token_ids.begin(), token_ids.end());
  Var x = tape.embedding_lookup(ev.token_embed, ids);
  Var pos = tape.slice_rows(ev.pos_embed, 0, len);
  x = tape.add(x, pos);
  x = tape.layer_norm(x, ev.emb_ln_g, ev.emb_ln_b);

  const S inv_sqrt_dh = S(1) / static_cast<S>(std::sqrt(double(dh)));
  for (const auto& l : ev.layers) {
    Var q = tape.add_rowvec(tape.matmul(x, l.wq), l.bq);
    Var k = tape.add_rowvec(tape.matmul(x, l.wk), l.bk);
    Var v = tape.add_rowvec(tape.matmul(x, l.wv), l.bv);
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(nh));
    for (int h = 0; h < nh; ++h) {
      Var qh = tape.slice_cols(q, h * dh, dh);
      Var kh = tape.slice_cols(k, h * dh, dh);
      Var vh = tape.slice_cols(v, h * dh, dh);
      Var scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt_dh);
      scores = tape.add_const(scores, mask_bias);
      Var attn = tape.softmax_rows(scores);
      heads.push_back(tape.matmul(attn, vh));
    }
    Var ctx = tape.concat_cols(heads);
    Var o = tape.add_rowvec(tape.matmul(ctx, l.wo), l.bo);
    x = tape.layer_norm(tape.add(x, o), l.ln1_g, l.ln1_b);
    Var f = tape.gelu(tape.add_rowvec(tape.matmul(x, l.w1), l.b1));
    f = tape.add_rowvec(tape.matmul(f, l.w2), l.b2);
    x = tape.layer_norm(tape.add(x, f), l.ln2_g, l.ln2_b);
  }
  return x;
}

// Sentence vector from hidden states, on the tape (training path).
template <typename S>
typename TapeT<S>::Var pool_on_tape(TapeT<S>& tape,
                                    typename TapeT<S>::Var hidden,
                                    std::span<const int> attention_mask,
                                    Pooling kind,
                                    std::optional<int> mask_index = {}) {
  switch (kind) {
    case Pooling::Cls:
      return tape.slice_rows(hidden, 0, 1);
    case Pooling::Mean: {
      std::vector<int> mask(attention_mask.begin(), attention_mask.end());
      return tape.masked_mean(hidden, std::move(mask));
    }
    case Pooling::Prompt:
      if (!mask_index)
        throw data_error("prompt pooling requires the mask position");
      return tape.slice_rows(hidden, *mask_index, 1);
  }
  throw data_error("unreachable pooling kind");
}

// Inference-path pooling: accumulates in double regardless of S.
template <typename S>
std::vector<double> pool_hidden(const TensorT<S>& hidden,
                                std::span<const int> attention_mask,
                                Pooling kind,
                                std::optional<int> mask_index = {}) {
  const int len = hidden.rows(), d = hidden.cols();
  if (static_cast<int>(attention_mask.size()) != len)
    throw data_error("pool mask length mismatch");
  std::vector<double> out(static_cast<std::size_t>(d), 0.0);
  switch (kind) {
    case Pooling::Cls: {
      for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] =
          static_cast<double>(hidden.at(0, j));
      return out;
    }
    case Pooling::Mean: {
      int count = 0;
      for (int i = 0; i < len; ++i) {
        if (!attention_mask[static_cast<std::size_t>(i)]) continue;
        ++count;
        for (int j = 0; j < d; ++j)
          out[static_cast<std::size_t>(j)] +=
              static_cast<double>(hidden.at(i, j));
      }
      if (count == 0) throw data_error("mean pooling with all-zero mask");
      for (double& v : out) v /= count;
      return out;
    }
    case Pooling::Prompt: {
      if (!mask_index)
        throw data_error("prompt pooling requires the mask position");
      if (*mask_index < 0 || *mask_index >= len)
        throw data_error("prompt mask position out of range");
      for (int j = 0; j < d; ++j)
        out[static_cast<std::size_t>(j)] =
            static_cast<double>(hidden.at(*mask_index, j));
      return out;
    }
  }
  throw data_error("unreachable pooling kind");
}

// Dense + activation on the sentence vector (the trainable projection head).
template <typename S>
typename TapeT<S>::Var pooler_forward(TapeT<S>& tape,
                                      const EncoderVarsT<S>& ev,
                                      typename TapeT<S>::Var pooled) {
  auto h = tape.add_rowvec(tape.matmul(pooled, ev.pooler_w), ev.pooler_b);
  return ev.pooler_act == Activation::Tanh ? tape.tanh(h) : tape.gelu(h);
}

// Roberta-like poolers start semantically empty (no next-sentence
// pre-training), so the masked-word dense is copied in and the activation
// switched to GELU. Bert-like poolers are left alone.
template <typename S>
EncoderParamsT<S> apply_roberta_pooler_surgery(EncoderParamsT<S> params) {
  if (params.config.family != ModelFamily::RobertaLike)
    throw data_error("pooler surgery only applies to roberta-like models");
  params.pooler_w = params.mlm_w;
  params.pooler_b = params.mlm_b;
  params.pooler_act = Activation::Gelu;
  return params;
}

// A prompt template is a full token sequence ([CLS] ... [SEP]) with one
// sentence slot and exactly one [MASK].
struct PoolingStrategy {
  static constexpr int kSlot = -1;

  Pooling kind = Pooling::Cls;
  std::vector<int> prompt_template;

  void validate() const {
    if (kind != Pooling::Prompt) return;
    int masks = 0, slots = 0;
    for (int t : prompt_template) {
      masks += (t == Vocab::kMask);
      slots += (t == kSlot);
    }
    if (masks != 1)
      throw data_error("prompt template must contain exactly one [MASK]");
    if (slots != 1)
      throw data_error("prompt template must contain exactly one slot");
  }
};

// `This sentence: "<s>" means [MASK].` over the toy vocabulary.
PoolingStrategy default_prompt_strategy(Vocab& vocab);

struct WrappedPrompt {
  std::vector<int> token_ids;
  int mask_index = -1;
};

inline WrappedPrompt wrap_prompt(std::span<const int> sentence_ids,
                                 const PoolingStrategy& strategy,
                                 int max_position) {
  strategy.validate();
  if (strategy.kind != Pooling::Prompt)
    throw data_error("wrap_prompt called with a non-prompt strategy");
  WrappedPrompt out;
  const std::size_t wrapped_len =
      strategy.prompt_template.size() - 1 + sentence_ids.size();
  if (wrapped_len > static_cast<std::size_t>(max_position))
    throw data_error("sentence too long to wrap: needs " +
                     std::to_string(wrapped_len) + " positions of " +
                     std::to_string(max_position));
  out.token_ids.reserve(wrapped_len);
  for (int t : strategy.prompt_template) {
    if (t == PoolingStrategy::kSlot) {
      out.token_ids.insert(out.token_ids.end(), sentence_ids.begin(),
                           sentence_ids.end());
    } else {
      if (t == Vocab::kMask)
        out.mask_index = static_cast<int>(out.token_ids.size());
      out.token_ids.push_back(t);
    }
  }
  return out;
}

// Convenience: encode a sequence with no tape and return the hidden states.
template <typename S>
TensorT<S> run_encoder(const EncoderParamsT<S>& params,
                       std::span<const int> token_ids,
                       std::span<const int> attention_mask) {
  TapeT<S> tape(false);
  auto ev = lift(tape, params, false);
  auto h = encode(tape, ev, token_ids, attention_mask);
  return tape.value(h);
}

}  // namespace defproj
