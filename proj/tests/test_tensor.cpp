#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "defproj/optimizer.hpp"
#include "defproj/rng.hpp"
#include "defproj/tensor.hpp"

#include "testutil.hpp"

using namespace defproj;

TEST_CASE("softmax of uniform logits is uniform") {
  TapeD tape(false);
  auto x = tape.constant(TensorD({1, 4}, {0, 0, 0, 0}));
  auto y = tape.softmax_rows(x);
  for (double v : tape.value(y).data) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("softmax rows sum to one and stay in [0,1]") {
  Rng rng(11);
  TapeD tape(false);
  auto x = tape.constant(testutil::random_tensor({5, 9}, rng, 30.0));
  auto y = tape.softmax_rows(x);
  const TensorD& v = tape.value(y);
  for (int i = 0; i < 5; ++i) {
    double sum = 0;
    for (int j = 0; j < 9; ++j) {
      CHECK(v.at(i, j) >= 0.0);
      CHECK(v.at(i, j) <= 1.0);
      sum += v.at(i, j);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("gelu fixes the origin") {
  Tape tape(false);
  auto x = tape.constant(Tensor({1, 1}, {0.0f}));
  CHECK(tape.value(tape.gelu(x)).data[0] == 0.0f);
}

TEST_CASE("matmul matches a naive triple loop") {
  Rng rng(3);
  const TensorD a = testutil::random_tensor({2, 3}, rng);
  const TensorD b = testutil::random_tensor({3, 4}, rng);
  TapeD tape(false);
  auto c = tape.matmul(tape.constant(a), tape.constant(b));
  // independent oracle: accumulate in the k-inner order
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) {
      double acc = 0;
      for (int k = 0; k < 3; ++k) acc += a.at(i, k) * b.at(k, j);
      CHECK(tape.value(c).at(i, j) == doctest::Approx(acc).epsilon(1e-6));
    }
}

TEST_CASE("matmul rejects mismatched shapes with both shapes reported") {
  TapeD tape(false);
  auto a = tape.constant(TensorD({2, 3}));
  auto b = tape.constant(TensorD({4, 2}));
  CHECK_THROWS_WITH_AS(tape.matmul(a, b), doctest::Contains("[2x3]"),
                       data_error);
}

TEST_CASE("cross entropy: uniform logits give ln n") {
  TapeD tape(false);
  auto l = tape.constant(TensorD({1, 4}, {1.5, 1.5, 1.5, 1.5}));
  auto loss = tape.cross_entropy_from_logits(l, 2);
  CHECK(tape.value(loss).data[0] ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy: dominant logit is near zero loss") {
  TapeD tape(false);
  auto l = tape.constant(TensorD({1, 3}, {20.0, 0.0, 0.0}));
  auto loss = tape.cross_entropy_from_logits(l, 0);
  CHECK(tape.value(loss).data[0] == doctest::Approx(4.12e-9).epsilon(0.05));
}

TEST_CASE("cross entropy matches the direct softmax formula") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    TensorD logits = testutil::random_tensor({1, 10}, rng, 3.0);
    const int target = static_cast<int>(rng.below(10));
    TapeD tape(false);
    auto loss = tape.cross_entropy_from_logits(tape.constant(logits), target);
    double denom = 0;
    for (double v : logits.data) denom += std::exp(v);
    const double direct =
        -std::log(std::exp(logits.data[static_cast<std::size_t>(target)]) /
                  denom);
    CHECK(tape.value(loss).data[0] == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("cross entropy is invariant to a constant logit shift") {
  Rng rng(23);
  TensorD logits = testutil::random_tensor({1, 8}, rng, 2.0);
  TensorD shifted = logits;
  for (double& v : shifted.data) v += 123.456;
  TapeD t1(false), t2(false);
  const double a =
      t1.value(t1.cross_entropy_from_logits(t1.constant(logits), 3)).data[0];
  const double b =
      t2.value(t2.cross_entropy_from_logits(t2.constant(shifted), 3)).data[0];
  CHECK(a == doctest::Approx(b).epsilon(1e-10));
}

TEST_CASE("cross entropy rejects bad targets and non-finite logits") {
  TapeD tape(false);
  auto l = tape.constant(TensorD({1, 3}, {0.0, 1.0, 2.0}));
  CHECK_THROWS_AS(tape.cross_entropy_from_logits(l, 3), data_error);
  CHECK_THROWS_AS(tape.cross_entropy_from_logits(l, -1), data_error);
  auto bad = tape.constant(
      TensorD({1, 2}, {std::numeric_limits<double>::infinity(), 0.0}));
  CHECK_THROWS_AS(tape.cross_entropy_from_logits(bad, 0), numeric_error);
}

TEST_CASE("backward of sum gives ones") {
  TapeD tape;
  auto x = tape.leaf(TensorD({3}, {1.0, 2.0, 3.0}), true);
  tape.backward(tape.sum(x));
  for (double g : tape.grad(x).data) CHECK(g == 1.0);
}

TEST_CASE("backward of dot(x,x) gives 2x") {
  TapeD tape;
  auto x = tape.leaf(TensorD({2}, {1.0, 2.0}), true);
  tape.backward(tape.sum(tape.mul(x, x)));
  CHECK(tape.grad(x).data[0] == doctest::Approx(2.0));
  CHECK(tape.grad(x).data[1] == doctest::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar losses and double invocation") {
  TapeD tape;
  auto x = tape.leaf(TensorD({2}, {1.0, 2.0}), true);
  CHECK_THROWS_AS(tape.backward(x), data_error);
  auto s = tape.sum(x);
  tape.backward(s);
  CHECK_THROWS_AS(tape.backward(s), data_error);
}

namespace {

// generic per-kernel gradient audit through a randomly weighted scalar head
template <typename BuildFn>
void check_kernel_grad(const std::vector<std::vector<int>>& shapes,
                       BuildFn&& build, std::uint64_t seed,
                       double scale = 1.0) {
  Rng rng(seed);
  std::vector<TensorD> inputs;
  for (const auto& s : shapes)
    inputs.push_back(testutil::random_tensor(s, rng, scale));
  auto head = [&](TapeD& tape, TapeD::Var out) {
    const TensorD& val = tape.value(out);
    TensorD w(val.shape);
    Rng wr(seed ^ 0x5a5au);
    for (double& v : w.data) v = wr.gaussian();
    return tape.sum(tape.mul(out, tape.constant(w)));
  };

  TapeD tape;
  std::vector<TapeD::Var> vars;
  for (const TensorD& t : inputs) vars.push_back(tape.leaf(t, true));
  tape.backward(head(tape, build(tape, vars)));

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const TensorD analytic = tape.grad(vars[i]);
    auto f = [&]() {
      TapeD t2(false);
      std::vector<TapeD::Var> vs;
      for (const TensorD& t : inputs) vs.push_back(t2.leaf(t, false));
      return t2.value(head(t2, build(t2, vs))).data[0];
    };
    const auto r = testutil::finite_diff_check(
        f, inputs[i], analytic, "input" + std::to_string(i), 1e-4, 1e-3);
    CHECK_MESSAGE(r.max_rel_err < 1e-4, r.worst);
  }
}

}  // namespace

TEST_CASE("analytic gradients match finite differences per kernel") {
  using Vars = std::vector<TapeD::Var>;
  check_kernel_grad(
      {{3, 4}, {4, 2}},
      [](TapeD& t, Vars& v) { return t.matmul(v[0], v[1]); }, 1);
  check_kernel_grad({{3, 4}, {3, 4}},
                    [](TapeD& t, Vars& v) { return t.add(v[0], v[1]); }, 2);
  check_kernel_grad(
      {{3, 4}, {1, 4}},
      [](TapeD& t, Vars& v) { return t.add_rowvec(v[0], v[1]); }, 3);
  check_kernel_grad(
      {{3, 4}}, [](TapeD& t, Vars& v) { return t.scale(v[0], 2.5); }, 4);
  check_kernel_grad({{2, 5}},
                    [](TapeD& t, Vars& v) { return t.tanh(v[0]); }, 5);
  check_kernel_grad({{2, 5}},
                    [](TapeD& t, Vars& v) { return t.gelu(v[0]); }, 6);
  check_kernel_grad(
      {{3, 6}}, [](TapeD& t, Vars& v) { return t.softmax_rows(v[0]); }, 7,
      2.0);
  check_kernel_grad(
      {{4, 3}, {3}, {3}},
      [](TapeD& t, Vars& v) { return t.layer_norm(v[0], v[1], v[2]); }, 8);
  check_kernel_grad(
      {{5, 3}},
      [](TapeD& t, Vars& v) { return t.masked_mean(v[0], {1, 0, 1, 1, 0}); },
      9);
  check_kernel_grad(
      {{4, 6}},
      [](TapeD& t, Vars& v) { return t.slice_cols(v[0], 2, 3); }, 10);
  check_kernel_grad(
      {{4, 6}},
      [](TapeD& t, Vars& v) { return t.slice_rows(v[0], 1, 2); }, 11);
  check_kernel_grad(
      {{4, 2}, {4, 3}},
      [](TapeD& t, Vars& v) { return t.concat_cols({v[0], v[1]}); }, 12);
  check_kernel_grad({{3, 4}},
                    [](TapeD& t, Vars& v) { return t.transpose(v[0]); }, 13);
  check_kernel_grad(
      {{5, 3}},
      [](TapeD& t, Vars& v) { return t.embedding_lookup(v[0], {0, 2, 2, 4}); },
      14);
  check_kernel_grad(
      {{1, 7}},
      [](TapeD& t, Vars& v) { return t.cross_entropy_from_logits(v[0], 3); },
      15, 2.0);
}

TEST_CASE("inference tape records no gradients") {
  TapeD tape(false);
  auto x = tape.leaf(TensorD({2, 2}, {1, 2, 3, 4}), true);
  auto y = tape.tanh(x);
  CHECK_THROWS_AS(tape.grad(y), data_error);
  CHECK_THROWS_AS(tape.backward(tape.sum(y)), data_error);
}

TEST_CASE("optimizer: zero gradient and zero decay leave parameters alone") {
  AdamWConfig cfg;
  cfg.weight_decay = 0.0f;
  AdamW opt(cfg);
  Tensor p({3}, {1.0f, -2.0f, 0.5f});
  const Tensor g = Tensor::zeros({3});
  const Tensor before = p;
  opt.step(std::vector<ParamUpdate>{{"p", &p, &g}}, 0.1f);
  CHECK(p.data == before.data);
}

TEST_CASE("optimizer: first-step update matches the hand-derived value") {
  AdamWConfig cfg;
  cfg.weight_decay = 0.0f;
  AdamW opt(cfg);
  Tensor p({1}, {1.0f});
  const Tensor g({1}, {1.0f});
  opt.step(std::vector<ParamUpdate>{{"p", &p, &g}}, 0.1f);
  // m_hat = 1, v_hat = 1 -> p' = 1 - 0.1 * 1/(1 + eps)
  CHECK(p.data[0] == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("optimizer: decoupled decay with zero gradient") {
  AdamWConfig cfg;
  cfg.weight_decay = 0.01f;
  AdamW opt(cfg);
  Tensor p({2}, {2.0f, -4.0f});
  const Tensor g = Tensor::zeros({2});
  opt.step(std::vector<ParamUpdate>{{"p", &p, &g}}, 0.5f);
  CHECK(p.data[0] == doctest::Approx(2.0f * (1.0f - 0.5f * 0.01f)));
  CHECK(p.data[1] == doctest::Approx(-4.0f * (1.0f - 0.5f * 0.01f)));
}

TEST_CASE("optimizer rejects NaN gradients naming the parameter") {
  AdamW opt;
  Tensor p({1}, {1.0f});
  const Tensor g({1}, {std::nanf("")});
  CHECK_THROWS_WITH_AS(
      opt.step(std::vector<ParamUpdate>{{"pooler_w", &p, &g}}, 0.1f),
      doctest::Contains("pooler_w"), numeric_error);
}

TEST_CASE("rng streams are deterministic and label-separated") {
  Rng a(derive_seed(42, "x"));
  Rng b(derive_seed(42, "x"));
  Rng c(derive_seed(42, "y"));
  CHECK(a.next() == b.next());
  CHECK(a.next() == b.next());
  Rng a2(derive_seed(42, "x"));
  a2.next();
  a2.next();
  CHECK(a2.next() != c.next());
}
