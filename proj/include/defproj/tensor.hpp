#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "defproj/errors.hpp"

namespace defproj {

// Dense row-major tensor. float for training, double for geometry and
// oracle-grade checks; the tape below is templated the same way.
template <typename S>
struct TensorT {
  std::vector<int> shape;
  std::vector<S> data;

  TensorT() = default;

  explicit TensorT(std::vector<int> shp)
      : shape(std::move(shp)), data(checked_numel(shape), S(0)) {}

  TensorT(std::vector<int> shp, std::vector<S> values)
      : shape(std::move(shp)), data(std::move(values)) {
    if (data.size() != checked_numel(shape))
      throw data_error("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str());
  }

  static TensorT zeros(std::vector<int> shp) { return TensorT(std::move(shp)); }

  static TensorT full(std::vector<int> shp, S v) {
    TensorT t(std::move(shp));
    for (S& x : t.data) x = v;
    return t;
  }

  std::size_t numel() const { return data.size(); }

  bool is_scalar() const { return data.size() == 1; }

  int rows() const { return shape.empty() ? 1 : shape[0]; }

  int cols() const {
    if (shape.size() < 2) return shape.empty() ? 1 : shape[0];
    return shape[1];
  }

  S& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  S at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols() + c];
  }

  bool all_finite() const {
    for (S v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
      os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
  }

  template <typename T>
  TensorT<T> cast() const {
    TensorT<T> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      out.data[i] = static_cast<T>(data[i]);
    return out;
  }

 private:
  static std::size_t checked_numel(const std::vector<int>& shp) {
    std::size_t n = 1;
    for (int d : shp) {
      if (d < 0) throw data_error("negative tensor dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

namespace detail {

// C[m x n] += A[m x k] * B[k x n]
template <typename S>
void gemm_nn(const S* a, const S* b, S* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<std::size_t>(i) * k;
    S* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const S av = arow[p];
      if (av == S(0)) continue;
      const S* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x k] += A[m x n] * B^T where B is [k x n]
template <typename S>
void gemm_nt(const S* a, const S* b, S* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<std::size_t>(i) * n;
    S* crow = c + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      const S* brow = b + static_cast<std::size_t>(j) * n;
      S acc = S(0);
      for (int p = 0; p < n; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[k x n] += A^T * B where A is [m x k], B is [m x n]
template <typename S>
void gemm_tn(const S* a, const S* b, S* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<std::size_t>(i) * k;
    const S* brow = b + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const S av = arow[p];
      if (av == S(0)) continue;
      S* crow = c + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace detail

// Reverse-mode tape. Append-only: node creation order is a valid topological
// order, so backward() is a single reverse sweep. One tape per forward pass;
// construct with grad_enabled=false for inference (no closures recorded).
template <typename S>
class TapeT {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  explicit TapeT(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var leaf(TensorT<S> value, bool requires_grad) {
    return push(std::move(value), requires_grad && grad_enabled_, {});
  }

  Var constant(TensorT<S> value) { return push(std::move(value), false, {}); }

  const TensorT<S>& value(Var v) const { return node(v).value; }

  const TensorT<S>& grad(Var v) const {
    const Node& n = node(v);
    if (!n.requires_grad)
      throw data_error("grad requested for a non-differentiable node");
    return n.grad;
  }

  // ---- kernels ----

  Var matmul(Var a, Var b) {
    const TensorT<S>&A = value(a), &B = value(b);
    require_2d(A, "matmul lhs");
    require_2d(B, "matmul rhs");
    if (A.shape[1] != B.shape[0])
      throw data_error("matmul shape mismatch: " + A.shape_str() + " * " +
                       B.shape_str());
    const int m = A.shape[0], k = A.shape[1], n = B.shape[1];
    TensorT<S> out({m, n});
    detail::gemm_nn(A.data.data(), B.data.data(), out.data.data(), m, k, n);
    return record(std::move(out), {a, b}, [this, a, b, m, k, n](Var o) {
      const TensorT<S>& g = node(o).grad;
      if (wants_grad(a))
        detail::gemm_nt(g.data.data(), node(b).value.data.data(),
                        node(a).grad.data.data(), m, n, k);
      if (wants_grad(b))
        detail::gemm_tn(node(a).value.data.data(), g.data.data(),
                        node(b).grad.data.data(), m, k, n);
    });
  }

  Var add(Var a, Var b) {
    const TensorT<S>&A = value(a), &B = value(b);
    if (A.shape != B.shape)
      throw data_error("add shape mismatch: " + A.shape_str() + " + " +
                       B.shape_str());
    TensorT<S> out = A;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += B.data[i];
    return record(std::move(out), {a, b}, [this, a, b](Var o) {
      const TensorT<S>& g = node(o).grad;
      if (wants_grad(a)) axpy(node(a).grad, g);
      if (wants_grad(b)) axpy(node(b).grad, g);
    });
  }

  // a[m x n] + row[1 x n] broadcast over rows (bias add)
  Var add_rowvec(Var a, Var b) {
    const TensorT<S>&A = value(a), &B = value(b);
    require_2d(A, "add_rowvec lhs");
    if (B.numel() != static_cast<std::size_t>(A.cols()))
      throw data_error("add_rowvec shape mismatch: " + A.shape_str() + " + " +
                       B.shape_str());
    TensorT<S> out = A;
    const int m = A.rows(), n = A.cols();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out.at(i, j) += B.data[j];
    return record(std::move(out), {a, b}, [this, a, b, m, n](Var o) {
      const TensorT<S>& g = node(o).grad;
      if (wants_grad(a)) axpy(node(a).grad, g);
      if (wants_grad(b)) {
        TensorT<S>& gb = node(b).grad;
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j)
            gb.data[j] += g.data[static_cast<std::size_t>(i) * n + j];
      }
    });
  }

  Var mul(Var a, Var b) {
    const TensorT<S>&A = value(a), &B = value(b);
    if (A.shape != B.shape)
      throw data_error("mul shape mismatch: " + A.shape_str() + " * " +
                       B.shape_str());
    TensorT<S> out = A;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
    return record(std::move(out), {a, b}, [this, a, b](Var o) {
      const TensorT<S>& g = node(o).grad;
      if (wants_grad(a)) {
        TensorT<S>& ga = node(a).grad;
        const TensorT<S>& bv = node(b).value;
        for (std::size_t i = 0; i < g.data.size(); ++i)
          ga.data[i] += g.data[i] * bv.data[i];
      }
      if (wants_grad(b)) {
        TensorT<S>& gb = node(b).grad;
        const TensorT<S>& av = node(a).value;
        for (std::size_t i = 0; i < g.data.size(); ++i)
          gb.data[i] += g.data[i] * av.data[i];
      }
    });
  }

  Var scale(Var a, S c) {
    TensorT<S> out = value(a);
    for (S& x : out.data) x *= c;
    return record(std::move(out), {a}, [this, a, c](Var o) {
      if (!wants_grad(a)) return;
      const TensorT<S>& g = node(o).grad;
      TensorT<S>& ga = node(a).grad;
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += c * g.data[i];
    });
  }

  // adds a constant tensor (no gradient through the constant)
  Var add_const(Var a, const TensorT<S>& c) {
    const TensorT<S>& A = value(a);
    if (A.shape != c.shape)
      throw data_error("add_const shape mismatch: " + A.shape_str() + " + " +
                       c.shape_str());
    TensorT<S> out = A;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += c.data[i];
    return record(std::move(out), {a}, [this, a](Var o) {
      if (wants_grad(a)) axpy(node(a).grad, node(o).grad);
    });
  }

  Var transpose(Var a) {
    const TensorT<S>& A = value(a);
    require_2d(A, "transpose");
    const int m = A.rows(), n = A.cols();
    TensorT<S> out({n, m});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out.at(j, i) = A.at(i, j);
    return record(std::move(out), {a}, [this, a, m, n](Var o) {
      if (!wants_grad(a)) return;
      const TensorT<S>& g = node(o).grad;
      TensorT<S>& ga = node(a).grad;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) ga.at(i, j) += g.at(j, i);
    });
  }

  Var slice_rows(Var a, int begin, int count) {
    const TensorT<S>& A = value(a);
    require_2d(A, "slice_rows");
    if (begin < 0 || count < 1 || begin + count > A.rows())
      throw data_error("slice_rows range [" + std::to_string(begin) + "," +
                       std::to_string(begin + count) + ") out of " +
                       A.shape_str());
    const int n = A.cols();
    TensorT<S> out({count, n});
    for (int i = 0; i < count; ++i)
      for (int j = 0; j < n; ++j) out.at(i, j) = A.at(begin + i, j);
    return record(std::move(out), {a}, [this, a, begin, count, n](Var o) {
      if (!wants_grad(a)) return;
      const TensorT<S>& g = node(o).grad;
      TensorT<S>& ga = node(a).grad;
      for (int i = 0; i < count; ++i)
        for (int j = 0; j < n; ++j) ga.at(begin + i, j) += g.at(i, j);
    });
  }

  Var slice_cols(Var a, int begin, int count) {
    const TensorT<S>& A = value(a);
    require_2d(A, "slice_cols");
    if (begin < 0 || count < 1 || begin + count > A.cols())
      throw data_error("slice_cols range [" + std::to_string(begin) + "," +
                       std::to_string(begin + count) + ") out of " +
                       A.shape_str());
    const int m = A.rows();
    TensorT<S> out({m, count});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < count; ++j) out.at(i, j) = A.at(i, begin + j);
    return record(std::move(out), {a}, [this, a, begin, count, m](Var o) {
      if (!wants_grad(a)) return;
      const TensorT<S>& g = node(o).grad;
      TensorT<S>& ga = node(a).grad;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < count; ++j) ga.at(i, begin + j) += g.at(i, j);
    });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw data_error("concat_cols of zero tensors");
    const int m = value(parts[0]).rows();
    int total = 0;
    for (Var p : parts) {
      const TensorT<S>& t = value(p);
      require_2d(t, "concat_cols");
      if (t.rows() != m)
        throw data_error("concat_cols row mismatch: " + t.shape_str());
      total += t.cols();
    }
    TensorT<S> out({m, total});
    int off = 0;
    for (Var p : parts) {
      const TensorT<S>& t = value(p);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < t.cols(); ++j) out.at(i, off + j) = t.at(i, j);
      off += t.cols();
    }
    std::vector<Var> deps = parts;
    return record(std::move(out), deps, [this, deps, m](Var o) {
      const TensorT<S>& g = node(o).grad;
      int off2 = 0;
      for (Var p : deps) {
        const int w = node(p).value.cols();
        if (wants_grad(p)) {
          TensorT<S>& gp = node(p).grad;
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j) gp.at(i, j) += g.at(i, off2 + j);
        }
        off2 += w;
      }
    });
  }

  Var tanh(Var a) {
    TensorT<S> out = value(a);
    for (S& x : out.data) x = std::tanh(x);
    return record(std::move(out), {a}, [this, a](Var o) {
      if (!wants_grad(a)) return;
      const TensorT<S>&g = node(o).grad, &y = node(o).value;
      TensorT<S>& ga = node(a).grad;
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * (S(1) - y.data[i] * y.data[i]);
    });
  }

  // exact erf form, matching BERT
  Var gelu(Var a) {
    TensorT<S> out = value(a);
    for (S& x : out.data) x = gelu_fwd(x);
    return record(std::move(out), {a}, [this, a](Var o) {
      if (!wants_grad(a)) return;
      const TensorT<S>&g = node(o).grad, &x = node(a).value;
      TensorT<S>& ga = node(a).grad;
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * gelu_bwd(x.data[i]);
    });
  }

  // row-wise softmax with max subtraction
  Var softmax_rows(Var a) {
    const TensorT<S>& A = value(a);
    require_2d(A, "softmax_rows");
    const int m = A.rows(), n = A.cols();
    TensorT<S> out({m, n});
    for (int i = 0; i < m; ++i) {
      S mx = A.at(i, 0);
      for (int j = 1; j < n; ++j) mx = std::max(mx, A.at(i, j));
      S sum = S(0);
      for (int j = 0; j < n; ++j) {
        const S e = std::exp(A.at(i, j) - mx);
        out.at(i, j) = e;
        sum += e;
      }
      for (int j = 0; j < n; ++j) out.at(i, j) /= sum;
    }
    return record(std::move(out), {a}, [this, a, m, n](Var o) {
      if (!wants_grad(a)) return;
      const TensorT<S>&g = node(o).grad, &y = node(o).value;
      TensorT<S>& ga = node(a).grad;
      for (int i = 0; i < m; ++i) {
        S dot = S(0);
        for (int j = 0; j < n; ++j) dot += g.at(i, j) * y.at(i, j);
        for (int j = 0; j < n; ++j)
          ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
      }
    });
  }

  // rows of an embedding table; ids are constants
  Var embedding_lookup(Var table, std::vector<int> ids) {
    const TensorT<S>& T = value(table);
    require_2d(T, "embedding_lookup table");
    if (ids.empty()) throw data_error("embedding_lookup on empty sequence");
    const int v = T.rows(), d = T.cols();
    for (int id : ids)
      if (id < 0 || id >= v)
        throw data_error("token id " + std::to_string(id) +
                         " outside table of " + std::to_string(v) + " rows");
    TensorT<S> out({static_cast<int>(ids.size()), d});
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < d; ++j)
        out.at(static_cast<int>(i), j) = T.at(ids[i], j);
    return record(std::move(out), {table},
                  [this, table, ids = std::move(ids), d](Var o) {
                    if (!wants_grad(table)) return;
                    const TensorT<S>& g = node(o).grad;
                    TensorT<S>& gt = node(table).grad;
                    for (std::size_t i = 0; i < ids.size(); ++i)
                      for (int j = 0; j < d; ++j)
                        gt.at(ids[i], j) += g.at(static_cast<int>(i), j);
                  });
  }

  // mean over rows with mask==1; mask is a constant 0/1 vector
  Var masked_mean(Var a, std::vector<int> mask) {
    const TensorT<S>& A = value(a);
    require_2d(A, "masked_mean");
    if (static_cast<int>(mask.size()) != A.rows())
      throw data_error("masked_mean mask length " +
                       std::to_string(mask.size()) + " vs " + A.shape_str());
    int count = 0;
    for (int v : mask) count += (v != 0);
    if (count == 0) throw data_error("masked_mean with all-zero mask");
    const int m = A.rows(), n = A.cols();
    TensorT<S> out({1, n});
    for (int i = 0; i < m; ++i) {
      if (!mask[static_cast<std::size_t>(i)]) continue;
      for (int j = 0; j < n; ++j) out.data[j] += A.at(i, j);
    }
    const S inv = S(1) / static_cast<S>(count);
    for (S& x : out.data) x *= inv;
    return record(std::move(out), {a},
                  [this, a, mask = std::move(mask), m, n, inv](Var o) {
                    if (!wants_grad(a)) return;
                    const TensorT<S>& g = node(o).grad;
                    TensorT<S>& ga = node(a).grad;
                    for (int i = 0; i < m; ++i) {
                      if (!mask[static_cast<std::size_t>(i)]) continue;
                      for (int j = 0; j < n; ++j)
                        ga.at(i, j) += inv * g.data[j];
                    }
                  });
  }

  // row-wise layer norm over the last dimension, biased variance
  Var layer_norm(Var x, Var gamma, Var beta, S eps = S(1e-12)) {
    const TensorT<S>& X = value(x);
    require_2d(X, "layer_norm");
    const int m = X.rows(), n = X.cols();
    if (value(gamma).numel() != static_cast<std::size_t>(n) ||
        value(beta).numel() != static_cast<std::size_t>(n))
      throw data_error("layer_norm parameter shape mismatch for " +
                       X.shape_str());
    TensorT<S> out({m, n});
    std::vector<S> inv_std(static_cast<std::size_t>(m));
    std::vector<S> xhat(X.data.size());
    const TensorT<S>&G = value(gamma), &B = value(beta);
    for (int i = 0; i < m; ++i) {
      S mean = S(0);
      for (int j = 0; j < n; ++j) mean += X.at(i, j);
      mean /= static_cast<S>(n);
      S var = S(0);
      for (int j = 0; j < n; ++j) {
        const S d = X.at(i, j) - mean;
        var += d * d;
      }
      var /= static_cast<S>(n);
      const S is = S(1) / std::sqrt(var + eps);
      inv_std[static_cast<std::size_t>(i)] = is;
      for (int j = 0; j < n; ++j) {
        const S h = (X.at(i, j) - mean) * is;
        xhat[static_cast<std::size_t>(i) * n + j] = h;
        out.at(i, j) = h * G.data[j] + B.data[j];
      }
    }
    return record(
        std::move(out), {x, gamma, beta},
        [this, x, gamma, beta, m, n, inv_std = std::move(inv_std),
         xhat = std::move(xhat)](Var o) {
          const TensorT<S>& g = node(o).grad;
          const TensorT<S>& G = node(gamma).value;
          if (wants_grad(gamma) || wants_grad(beta)) {
            for (int i = 0; i < m; ++i)
              for (int j = 0; j < n; ++j) {
                const S gy = g.at(i, j);
                if (wants_grad(gamma))
                  node(gamma).grad.data[j] +=
                      gy * xhat[static_cast<std::size_t>(i) * n + j];
                if (wants_grad(beta)) node(beta).grad.data[j] += gy;
              }
          }
          if (!wants_grad(x)) return;
          TensorT<S>& gx = node(x).grad;
          for (int i = 0; i < m; ++i) {
            S sum_dh = S(0), sum_dh_h = S(0);
            for (int j = 0; j < n; ++j) {
              const S dh = g.at(i, j) * G.data[j];
              sum_dh += dh;
              sum_dh_h += dh * xhat[static_cast<std::size_t>(i) * n + j];
            }
            const S is = inv_std[static_cast<std::size_t>(i)];
            const S invn = S(1) / static_cast<S>(n);
            for (int j = 0; j < n; ++j) {
              const S dh = g.at(i, j) * G.data[j];
              const S h = xhat[static_cast<std::size_t>(i) * n + j];
              gx.at(i, j) += is * (dh - invn * sum_dh - invn * h * sum_dh_h);
            }
          }
        });
  }

  Var sum(Var a) {
    const TensorT<S>& A = value(a);
    S total = S(0);
    for (S v : A.data) total += v;
    TensorT<S> out({1});
    out.data[0] = total;
    return record(std::move(out), {a}, [this, a](Var o) {
      if (!wants_grad(a)) return;
      const S g = node(o).grad.data[0];
      for (S& v : node(a).grad.data) v += g;
    });
  }

  // -log softmax(logits)[target], max-subtracted; gradient softmax - onehot
  Var cross_entropy_from_logits(Var logits, int target) {
    const TensorT<S>& L = value(logits);
    const int n = static_cast<int>(L.numel());
    if (L.shape.size() == 2 && L.shape[0] != 1)
      throw data_error("cross_entropy expects a single logit row, got " +
                       L.shape_str());
    if (target < 0 || target >= n)
      throw data_error("cross_entropy target " + std::to_string(target) +
                       " out of range [0," + std::to_string(n) + ")");
    for (S v : L.data)
      if (!std::isfinite(static_cast<double>(v)))
        throw numeric_error("cross_entropy on non-finite logit");
    S mx = L.data[0];
    for (S v : L.data) mx = std::max(mx, v);
    S sum = S(0);
    for (S v : L.data) sum += std::exp(v - mx);
    TensorT<S> out({1});
    out.data[0] = std::log(sum) - (L.data[static_cast<std::size_t>(target)] - mx);
    return record(std::move(out), {logits},
                  [this, logits, target, mx, sum](Var o) {
                    if (!wants_grad(logits)) return;
                    const S g = node(o).grad.data[0];
                    const TensorT<S>& L2 = node(logits).value;
                    TensorT<S>& gl = node(logits).grad;
                    for (std::size_t i = 0; i < L2.data.size(); ++i) {
                      S p = std::exp(L2.data[i] - mx) / sum;
                      if (static_cast<int>(i) == target) p -= S(1);
                      gl.data[i] += g * p;
                    }
                  });
  }

  // Single reverse sweep from a scalar loss. The tape is consumed: a second
  // backward on the same tape is rejected.
  void backward(Var loss) {
    if (!grad_enabled_)
      throw data_error("backward on an inference-mode tape");
    if (consumed_) throw data_error("backward called twice on one tape");
    const TensorT<S>& L = value(loss);
    if (!L.is_scalar())
      throw data_error("backward requires a scalar loss, got " +
                       L.shape_str());
    consumed_ = true;
    Node& ln = node(loss);
    if (!ln.requires_grad) return;  // loss does not depend on any parameter
    ln.grad.data[0] = S(1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.requires_grad && n.back) n.back(Var{i});
    }
  }

  bool all_grads_finite() const {
    for (const Node& n : nodes_)
      if (n.requires_grad && !n.grad.all_finite()) return false;
    return true;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorT<S> value;
    TensorT<S> grad;
    bool requires_grad = false;
    std::function<void(Var)> back;
  };

  static S gelu_fwd(S x) {
    return S(0.5) * x * (S(1) + static_cast<S>(std::erf(
                                    static_cast<double>(x) *
                                    0.70710678118654752440)));
  }

  static S gelu_bwd(S x) {
    const double xd = static_cast<double>(x);
    const double cdf = 0.5 * (1.0 + std::erf(xd * 0.70710678118654752440));
    const double pdf = 0.39894228040143267794 * std::exp(-0.5 * xd * xd);
    return static_cast<S>(cdf + xd * pdf);
  }

  Node& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
  const Node& node(Var v) const {
    return nodes_.at(static_cast<std::size_t>(v.id));
  }

  bool wants_grad(Var v) const { return node(v).requires_grad; }

  static void axpy(TensorT<S>& acc, const TensorT<S>& g) {
    for (std::size_t i = 0; i < acc.data.size(); ++i)
      acc.data[i] += g.data[i];
  }

  void require_2d(const TensorT<S>& t, const char* what) const {
    if (t.shape.size() != 2)
      throw data_error(std::string(what) + " expects a 2-d tensor, got " +
                       t.shape_str());
  }

  Var push(TensorT<S> value, bool requires_grad, std::function<void(Var)> back) {
    Node n;
    n.requires_grad = requires_grad;
    if (requires_grad) n.grad = TensorT<S>::zeros(value.shape);
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  template <typename F>
  Var record(TensorT<S> out, const std::vector<Var>& deps, F&& back) {
    bool needs = false;
    if (grad_enabled_)
      for (Var d : deps) needs = needs || node(d).requires_grad;
    if (!needs) return push(std::move(out), false, {});
    return push(std::move(out), true, std::function<void(Var)>(back));
  }

  std::vector<Node> nodes_;
  bool grad_enabled_;
  bool consumed_ = false;
};

using Tape = TapeT<float>;
using TapeD = TapeT<double>;

}  // namespace defproj
