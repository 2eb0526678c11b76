#include "defproj/sts.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "defproj/errors.hpp"

namespace defproj {

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw data_error("cosine of vectors with different lengths");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu <= 0.0 || nv <= 0.0) throw numeric_error("cosine of a zero vector");
  const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw numeric_error("correlation undefined for a constant sequence");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw data_error("spearman of sequences with different lengths");
  if (x.size() < 2) throw data_error("spearman needs at least 2 points");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  return pearson(rx, ry);
}

std::vector<StsPair> read_sts_tsv(std::istream& in) {
  std::vector<StsPair> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 =
        t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw data_error("malformed STS line " + std::to_string(line_no) +
                       ": expected score<TAB>a<TAB>b");
    StsPair p;
    try {
      p.gold_score = std::stod(line.substr(0, t1));
    } catch (const std::exception&) {
      throw data_error("bad score on STS line " + std::to_string(line_no));
    }
    if (!std::isfinite(p.gold_score))
      throw data_error("non-finite score on STS line " +
                       std::to_string(line_no));
    p.sentence_a = line.substr(t1 + 1, t2 - t1 - 1);
    p.sentence_b = line.substr(t2 + 1);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void write_sts_tsv(std::span<const StsPair> pairs, std::ostream& out) {
  std::ostringstream os;
  os.precision(17);
  for (const StsPair& p : pairs) {
    os.str("");
    os << p.gold_score;
    out << os.str() << '\t' << p.sentence_a << '\t' << p.sentence_b << '\n';
  }
}

std::vector<double> embed_sentence(const EncoderParams& params,
                                   const Vocab& vocab,
                                   const PoolingStrategy& pooling,
                                   const std::string& sentence) {
  const int max_pos = params.config.max_position;
  if (pooling.kind == Pooling::Prompt) {
    std::vector<int> sent_ids;
    for (const std::string& t : tokenize_words(sentence))
      sent_ids.push_back(vocab.id_of(t));
    // leave room for the template around the sentence
    const int budget =
        max_pos - static_cast<int>(pooling.prompt_template.size()) + 1;
    if (budget < 1) throw data_error("prompt template exceeds max_position");
    if (static_cast<int>(sent_ids.size()) > budget)
      sent_ids.resize(static_cast<std::size_t>(budget));
    const WrappedPrompt wrapped = wrap_prompt(sent_ids, pooling, max_pos);
    const std::vector<int> mask(wrapped.token_ids.size(), 1);
    const Tensor hidden = run_encoder(params, wrapped.token_ids, mask);
    return pool_hidden(hidden, mask, Pooling::Prompt, wrapped.mask_index);
  }
  const std::vector<int> ids = encode_sentence(vocab, sentence, max_pos);
  const std::vector<int> mask(ids.size(), 1);
  const Tensor hidden = run_encoder(params, ids, mask);
  return pool_hidden(hidden, mask, pooling.kind);
}

EvalResult sts_evaluate(const EncoderParams& params, const Vocab& vocab,
                        const PoolingStrategy& pooling,
                        std::span<const StsSet> sets) {
  if (sets.empty()) throw data_error("sts_evaluate with no sets");
  std::unordered_map<std::string, std::vector<double>> cache;
  auto embed = [&](const std::string& s) -> const std::vector<double>& {
    auto it = cache.find(s);
    if (it == cache.end())
      it = cache.emplace(s, embed_sentence(params, vocab, pooling, s)).first;
    return it->second;
  };

  EvalResult result;
  double total = 0.0;
  for (const StsSet& set : sets) {
    if (set.second.empty())
      throw data_error("empty STS set: " + set.first);
    std::vector<double> golds, sims;
    golds.reserve(set.second.size());
    sims.reserve(set.second.size());
    for (const StsPair& p : set.second) {
      golds.push_back(p.gold_score);
      sims.push_back(cosine(embed(p.sentence_a), embed(p.sentence_b)));
    }
    const double rho = spearman(sims, golds) * 100.0;
    result.per_set_rho_x100.emplace_back(set.first, rho);
    total += rho;
  }
  result.average = total / static_cast<double>(sets.size());
  return result;
}

}  // namespace defproj
