#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "uecg/nn/tensor.hpp"

// Differentiable ops over dense row-major tensors. Forward kernels are plain
// loops ordered for auto-vectorization; each backward closure accumulates into
// parent grads and guards on requires_grad so constants never allocate grads.

namespace uecg::nn {

namespace detail {

template <typename S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

}  // namespace detail

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<S> out(a.size());
  const auto& av = a.v();
  const auto& bv = b.v();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  auto pa = a.ptr(), pb = b.ptr();
  return make_op<S>(a.shape(), std::move(out), {a, b}, [pa, pb](TensorNode<S>& o) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] += o.grad[i];
    }
  });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<S> out(a.size());
  const auto& av = a.v();
  const auto& bv = b.v();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  auto pa = a.ptr(), pb = b.ptr();
  return make_op<S>(a.shape(), std::move(out), {a, b}, [pa, pb](TensorNode<S>& o) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] -= o.grad[i];
    }
  });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<S> out(a.size());
  const auto& av = a.v();
  const auto& bv = b.v();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  auto pa = a.ptr(), pb = b.ptr();
  return make_op<S>(a.shape(), std::move(out), {a, b}, [pa, pb](TensorNode<S>& o) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] += o.grad[i] * pa->value[i];
    }
  });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S c) {
  std::vector<S> out(a.size());
  const auto& av = a.v();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  auto pa = a.ptr();
  return make_op<S>(a.shape(), std::move(out), {a}, [pa, c](TensorNode<S>& o) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * c;
  });
}

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<S> out(m * n, S(0));
  {
    const S* av = a.v().data();
    const S* bv = b.v().data();
    for (std::size_t i = 0; i < m; ++i) {
      S* orow = out.data() + i * n;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const S aik = av[i * k + kk];
        const S* brow = bv + kk * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
      }
    }
  }
  auto pa = a.ptr(), pb = b.ptr();
  return make_op<S>({m, n}, std::move(out), {a, b}, [pa, pb, m, k, n](TensorNode<S>& o) {
    const S* go = o.grad.data();
    if (pa->requires_grad) {
      pa->ensure_grad();
      S* ga = pa->grad.data();
      const S* bv = pb->value.data();
      // dA[i,kk] = sum_j dC[i,j] * B[kk,j]
      for (std::size_t i = 0; i < m; ++i) {
        const S* grow = go + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const S* brow = bv + kk * n;
          S acc = S(0);
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + kk] += acc;
        }
      }
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      S* gb = pb->grad.data();
      const S* av = pa->value.data();
      // dB[kk,j] = sum_i A[i,kk] * dC[i,j]
      for (std::size_t i = 0; i < m; ++i) {
        const S* grow = go + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const S aik = av[i * k + kk];
          S* gbrow = gb + kk * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aik * grow[j];
        }
      }
    }
  });
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<S> out(r * c);
  const auto& av = a.v();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  auto pa = a.ptr();
  return make_op<S>({c, r}, std::move(out), {a}, [pa, r, c](TensorNode<S>& o) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (std::size_t j = 0; j < c; ++j)
      for (std::size_t i = 0; i < r; ++i) pa->grad[i * c + j] += o.grad[j * r + i];
  });
}

// y = M v for a [m x k] matrix and length-k vector.
template <typename S>
Tensor<S> matvec(const Tensor<S>& mat, const Tensor<S>& vec) {
  if (mat.shape().size() != 2 || vec.shape().size() != 1 || mat.shape()[1] != vec.shape()[0])
    throw DimensionError("matvec: incompatible shapes " + shape_str(mat.shape()) + " and " +
                         shape_str(vec.shape()));
  const std::size_t m = mat.shape()[0], k = mat.shape()[1];
  std::vector<S> out(m, S(0));
  const S* mv = mat.v().data();
  const S* vv = vec.v().data();
  for (std::size_t i = 0; i < m; ++i) {
    const S* row = mv + i * k;
    S acc = S(0);
    for (std::size_t j = 0; j < k; ++j) acc += row[j] * vv[j];
    out[i] = acc;
  }
  auto pm = mat.ptr(), pv = vec.ptr();
  return make_op<S>({m}, std::move(out), {mat, vec}, [pm, pv, m, k](TensorNode<S>& o) {
    if (pm->requires_grad) {
      pm->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        const S gi = o.grad[i];
        S* grow = pm->grad.data() + i * k;
        const S* vv = pv->value.data();
        for (std::size_t j = 0; j < k; ++j) grow[j] += gi * vv[j];
      }
    }
    if (pv->requires_grad) {
      pv->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        const S gi = o.grad[i];
        const S* mrow = pm->value.data() + i * k;
        for (std::size_t j = 0; j < k; ++j) pv->grad[j] += gi * mrow[j];
      }
    }
  });
}

// Broadcast a length-C vector across every row of [R x C].
template <typename S>
Tensor<S> add_rowvec(const Tensor<S>& x, const Tensor<S>& v) {
  if (v.shape().size() != 1 || v.shape()[0] != x.cols())
    throw DimensionError("add_rowvec: " + shape_str(x.shape()) + " vs " + shape_str(v.shape()));
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<S> out(r * c);
  const auto& xv = x.v();
  const auto& vv = v.v();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] + vv[j];
  auto px = x.ptr(), pv = v.ptr();
  return make_op<S>({r, c}, std::move(out), {x, v}, [px, pv, r, c](TensorNode<S>& o) {
    if (px->requires_grad) {
      px->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) px->grad[i] += o.grad[i];
    }
    if (pv->requires_grad) {
      pv->ensure_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) pv->grad[j] += o.grad[i * c + j];
    }
  });
}

// Per-row (channel) affine pieces used for feature-wise conditioning.
template <typename S>
Tensor<S> mul_colvec(const Tensor<S>& x, const Tensor<S>& s) {
  if (s.shape().size() != 1 || s.shape()[0] != x.rows())
    throw DimensionError("mul_colvec: " + shape_str(x.shape()) + " vs " + shape_str(s.shape()));
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<S> out(r * c);
  const auto& xv = x.v();
  const auto& sv = s.v();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] * sv[i];
  auto px = x.ptr(), ps = s.ptr();
  return make_op<S>({r, c}, std::move(out), {x, s}, [px, ps, r, c](TensorNode<S>& o) {
    if (px->requires_grad) {
      px->ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        const S si = ps->value[i];
        for (std::size_t j = 0; j < c; ++j) px->grad[i * c + j] += o.grad[i * c + j] * si;
      }
    }
    if (ps->requires_grad) {
      ps->ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        S acc = S(0);
        for (std::size_t j = 0; j < c; ++j) acc += o.grad[i * c + j] * px->value[i * c + j];
        ps->grad[i] += acc;
      }
    }
  });
}

template <typename S>
Tensor<S> add_colvec(const Tensor<S>& x, const Tensor<S>& b) {
  if (b.shape().size() != 1 || b.shape()[0] != x.rows())
    throw DimensionError("add_colvec: " + shape_str(x.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<S> out(r * c);
  const auto& xv = x.v();
  const auto& bv = b.v();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] + bv[i];
  auto px = x.ptr(), pb = b.ptr();
  return make_op<S>({r, c}, std::move(out), {x, b}, [px, pb, r, c](TensorNode<S>& o) {
    if (px->requires_grad) {
      px->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) px->grad[i] += o.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        S acc = S(0);
        for (std::size_t j = 0; j < c; ++j) acc += o.grad[i * c + j];
        pb->grad[i] += acc;
      }
    }
  });
}

// Row-wise softmax. Masked attention relies on exp(-1e9 - max) underflowing to
// exactly zero, which keeps logits at earlier positions bitwise independent of
// later ones.
template <typename S>
Tensor<S> softmax_rows(const Tensor<S>& x) {
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<S> out(r * c);
  const auto& xv = x.v();
  for (std::size_t i = 0; i < r; ++i) {
    const S* row = xv.data() + i * c;
    S mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    S sum = S(0);
    S* orow = out.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    const S inv = S(1) / sum;
    for (std::size_t j = 0; j < c; ++j) orow[j] *= inv;
  }
  auto px = x.ptr();
  return make_op<S>({r, c}, std::move(out), {x}, [px, r, c](TensorNode<S>& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < r; ++i) {
      const S* y = o.value.data() + i * c;
      const S* gy = o.grad.data() + i * c;
      S dot = S(0);
      for (std::size_t j = 0; j < c; ++j) dot += gy[j] * y[j];
      S* gx = px->grad.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) gx[j] += y[j] * (gy[j] - dot);
    }
  });
}

// Summed negative log-likelihood of selected (row, target) entries of a logit
// matrix. This is the shared kernel behind both cross-entropy losses.
template <typename S>
Tensor<S> nll_positions(const Tensor<S>& logits,
                        std::vector<std::pair<std::size_t, int>> targets) {
  const std::size_t r = logits.rows(), c = logits.cols();
  for (const auto& [row, t] : targets) {
    if (row >= r)
      throw IndexError("nll: row " + std::to_string(row) + " outside logits with " +
                       std::to_string(r) + " rows");
    if (t < 0 || static_cast<std::size_t>(t) >= c)
      throw IndexError("nll: target id " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(c));
  }
  const auto& xv = logits.v();
  double loss = 0.0;
  for (const auto& [row, t] : targets) {
    const S* lrow = xv.data() + row * c;
    S mx = lrow[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, lrow[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(static_cast<double>(lrow[j] - mx));
    loss += std::log(sum) + static_cast<double>(mx) - static_cast<double>(lrow[t]);
  }
  auto px = logits.ptr();
  return make_op<S>({1}, {static_cast<S>(loss)}, {logits},
                    [px, c, targets = std::move(targets)](TensorNode<S>& o) {
                      if (!px->requires_grad) return;
                      px->ensure_grad();
                      const S g0 = o.grad[0];
                      for (const auto& [row, t] : targets) {
                        const S* lrow = px->value.data() + row * c;
                        S* grow = px->grad.data() + row * c;
                        S mx = lrow[0];
                        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, lrow[j]);
                        double sum = 0.0;
                        for (std::size_t j = 0; j < c; ++j)
                          sum += std::exp(static_cast<double>(lrow[j] - mx));
                        const double inv = 1.0 / sum;
                        for (std::size_t j = 0; j < c; ++j)
                          grow[j] += g0 * static_cast<S>(std::exp(static_cast<double>(lrow[j] - mx)) * inv);
                        grow[t] -= g0;
                      }
                    });
}

// Mean cross-entropy over all rows of [T x V] against integer targets.
template <typename S>
Tensor<S> softmax_cross_entropy(const Tensor<S>& logits, const std::vector<int>& targets) {
  if (targets.size() != logits.rows())
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_str(logits.shape()));
  std::vector<std::pair<std::size_t, int>> pos;
  pos.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) pos.emplace_back(i, targets[i]);
  return scale(nll_positions(logits, std::move(pos)), S(1) / static_cast<S>(targets.size()));
}

template <typename S>
Tensor<S> mse(const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape(a, b, "mse");
  const auto& av = a.v();
  const auto& bv = b.v();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
    acc += d * d;
  }
  const S n = static_cast<S>(av.size());
  auto pa = a.ptr(), pb = b.ptr();
  return make_op<S>({1}, {static_cast<S>(acc / static_cast<double>(av.size()))}, {a, b},
                    [pa, pb, n](TensorNode<S>& o) {
                      const S g0 = o.grad[0];
                      const S k = S(2) / n;
                      if (pa->requires_grad) {
                        pa->ensure_grad();
                        for (std::size_t i = 0; i < pa->value.size(); ++i)
                          pa->grad[i] += g0 * k * (pa->value[i] - pb->value[i]);
                      }
                      if (pb->requires_grad) {
                        pb->ensure_grad();
                        for (std::size_t i = 0; i < pb->value.size(); ++i)
                          pb->grad[i] -= g0 * k * (pa->value[i] - pb->value[i]);
                      }
                    });
}

// Row-wise layer norm with learned gain/bias over the last dimension.
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias,
                     S eps = static_cast<S>(1e-5)) {
  const std::size_t r = x.rows(), c = x.cols();
  if (gain.shape() != Shape{c} || bias.shape() != Shape{c})
    throw DimensionError("layer_norm: gain/bias must be length " + std::to_string(c));
  std::vector<S> out(r * c), mu(r), inv_sd(r);
  const auto& xv = x.v();
  const auto& gv = gain.v();
  const auto& bv = bias.v();
  for (std::size_t i = 0; i < r; ++i) {
    const S* row = xv.data() + i * c;
    S m = S(0);
    for (std::size_t j = 0; j < c; ++j) m += row[j];
    m /= static_cast<S>(c);
    S var = S(0);
    for (std::size_t j = 0; j < c; ++j) {
      const S d = row[j] - m;
      var += d * d;
    }
    var /= static_cast<S>(c);
    const S isd = S(1) / std::sqrt(var + eps);
    mu[i] = m;
    inv_sd[i] = isd;
    S* orow = out.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) orow[j] = (row[j] - m) * isd * gv[j] + bv[j];
  }
  auto px = x.ptr(), pg = gain.ptr(), pb = bias.ptr();
  return make_op<S>({r, c}, std::move(out), {x, gain, bias},
                    [px, pg, pb, r, c, mu = std::move(mu),
                     inv_sd = std::move(inv_sd)](TensorNode<S>& o) {
                      for (std::size_t i = 0; i < r; ++i) {
                        const S* xrow = px->value.data() + i * c;
                        const S* grow = o.grad.data() + i * c;
                        const S isd = inv_sd[i];
                        const S m = mu[i];
                        if (pg->requires_grad || pb->requires_grad) {
                          pg->ensure_grad();
                          pb->ensure_grad();
                          for (std::size_t j = 0; j < c; ++j) {
                            const S xh = (xrow[j] - m) * isd;
                            if (pg->requires_grad) pg->grad[j] += grow[j] * xh;
                            if (pb->requires_grad) pb->grad[j] += grow[j];
                          }
                        }
                        if (px->requires_grad) {
                          px->ensure_grad();
                          // dx = isd * (gy*g - mean(gy*g) - xh * mean(gy*g*xh))
                          S mean_gg = S(0), mean_ggx = S(0);
                          for (std::size_t j = 0; j < c; ++j) {
                            const S gg = grow[j] * pg->value[j];
                            const S xh = (xrow[j] - m) * isd;
                            mean_gg += gg;
                            mean_ggx += gg * xh;
                          }
                          mean_gg /= static_cast<S>(c);
                          mean_ggx /= static_cast<S>(c);
                          S* gx = px->grad.data() + i * c;
                          for (std::size_t j = 0; j < c; ++j) {
                            const S gg = grow[j] * pg->value[j];
                            const S xh = (xrow[j] - m) * isd;
                            gx[j] += isd * (gg - mean_gg - xh * mean_ggx);
                          }
                        }
                      }
                    });
}

// Exact GELU, x * Phi(x).
template <typename S>
Tensor<S> gelu(const Tensor<S>& x) {
  std::vector<S> out(x.size());
  const auto& xv = x.v();
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = static_cast<double>(xv[i]);
    out[i] = static_cast<S>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  }
  auto px = x.ptr();
  return make_op<S>(x.shape(), std::move(out), {x}, [px](TensorNode<S>& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double v = static_cast<double>(px->value[i]);
      const double phi = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      px->grad[i] += o.grad[i] * static_cast<S>(phi + v * pdf);
    }
  });
}

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
  std::vector<S> out(x.size());
  const auto& xv = x.v();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > S(0) ? xv[i] : S(0);
  auto px = x.ptr();
  return make_op<S>(x.shape(), std::move(out), {x}, [px](TensorNode<S>& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      if (px->value[i] > S(0)) px->grad[i] += o.grad[i];
  });
}

// Gather rows of an embedding table. The optional row mask marks trainable
// rows; scatter in the backward pass skips frozen rows so they never see
// gradient, which is what the stage-2 freeze contract requires.
template <typename S>
Tensor<S> embedding_rows(const Tensor<S>& table, const std::vector<int>& ids,
                         const std::vector<std::uint8_t>* trainable_rows = nullptr) {
  const std::size_t v = table.rows(), e = table.cols();
  if (trainable_rows && trainable_rows->size() != v)
    throw DimensionError("embedding: mask length " + std::to_string(trainable_rows->size()) +
                         " for table with " + std::to_string(v) + " rows");
  std::vector<S> out(ids.size() * e);
  const auto& tv = table.v();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= v)
      throw IndexError("embedding: token id " + std::to_string(id) +
                       " outside table with " + std::to_string(v) + " rows");
    std::copy_n(tv.data() + static_cast<std::size_t>(id) * e, e, out.data() + i * e);
  }
  auto pt = table.ptr();
  std::vector<std::uint8_t> mask = trainable_rows ? *trainable_rows : std::vector<std::uint8_t>{};
  return make_op<S>({ids.size(), e}, std::move(out), {table},
                    [pt, e, ids, mask = std::move(mask)](TensorNode<S>& o) {
                      if (!pt->requires_grad) return;
                      pt->ensure_grad();
                      for (std::size_t i = 0; i < ids.size(); ++i) {
                        const auto id = static_cast<std::size_t>(ids[i]);
                        if (!mask.empty() && !mask[id]) continue;
                        S* trow = pt->grad.data() + id * e;
                        const S* grow = o.grad.data() + i * e;
                        for (std::size_t j = 0; j < e; ++j) trow[j] += grow[j];
                      }
                    });
}

template <typename S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  for (const auto& p : parts) {
    if (p.cols() != c)
      throw DimensionError("concat_rows: column mismatch " + shape_str(p.shape()));
    r += p.rows();
  }
  std::vector<S> out;
  out.reserve(r * c);
  std::vector<std::size_t> row_counts;
  for (const auto& p : parts) {
    out.insert(out.end(), p.v().begin(), p.v().end());
    row_counts.push_back(p.rows());
  }
  std::vector<std::shared_ptr<TensorNode<S>>> ptrs;
  for (const auto& p : parts) ptrs.push_back(p.ptr());
  return make_op<S>({r, c}, std::move(out), parts,
                    [ptrs = std::move(ptrs), row_counts = std::move(row_counts),
                     c](TensorNode<S>& o) {
                      std::size_t row0 = 0;
                      for (std::size_t pi = 0; pi < ptrs.size(); ++pi) {
                        auto& p = *ptrs[pi];
                        if (p.requires_grad) {
                          p.ensure_grad();
                          const S* src = o.grad.data() + row0 * c;
                          for (std::size_t i = 0; i < row_counts[pi] * c; ++i) p.grad[i] += src[i];
                        }
                        row0 += row_counts[pi];
                      }
                    });
}

template <typename S>
Tensor<S> slice_rows(const Tensor<S>& x, std::size_t r0, std::size_t r1) {
  const std::size_t r = x.rows(), c = x.cols();
  if (r0 >= r1 || r1 > r)
    throw IndexError("slice_rows: [" + std::to_string(r0) + ", " + std::to_string(r1) +
                     ") of " + std::to_string(r) + " rows");
  std::vector<S> out(x.v().begin() + r0 * c, x.v().begin() + r1 * c);
  auto px = x.ptr();
  return make_op<S>({r1 - r0, c}, std::move(out), {x}, [px, r0, c](TensorNode<S>& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    S* dst = px->grad.data() + r0 * c;
    for (std::size_t i = 0; i < o.grad.size(); ++i) dst[i] += o.grad[i];
  });
}

template <typename S>
Tensor<S> slice_cols(const Tensor<S>& x, std::size_t c0, std::size_t c1) {
  const std::size_t r = x.rows(), c = x.cols();
  if (c0 >= c1 || c1 > c)
    throw IndexError("slice_cols: [" + std::to_string(c0) + ", " + std::to_string(c1) +
                     ") of " + std::to_string(c) + " cols");
  const std::size_t w = c1 - c0;
  std::vector<S> out(r * w);
  const auto& xv = x.v();
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(xv.data() + i * c + c0, w, out.data() + i * w);
  auto px = x.ptr();
  return make_op<S>({r, w}, std::move(out), {x}, [px, r, c, c0, w](TensorNode<S>& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < r; ++i) {
      const S* src = o.grad.data() + i * w;
      S* dst = px->grad.data() + i * c + c0;
      for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
    }
  });
}

template <typename S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::size_t c = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) throw DimensionError("concat_cols: row mismatch " + shape_str(p.shape()));
    c += p.cols();
  }
  std::vector<S> out(r * c);
  std::size_t col0 = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(p.v().data() + i * w, w, out.data() + i * c + col0);
    widths.push_back(w);
    col0 += w;
  }
  std::vector<std::shared_ptr<TensorNode<S>>> ptrs;
  for (const auto& p : parts) ptrs.push_back(p.ptr());
  return make_op<S>({r, c}, std::move(out), parts,
                    [ptrs = std::move(ptrs), widths = std::move(widths), r, c](TensorNode<S>& o) {
                      std::size_t col0 = 0;
                      for (std::size_t pi = 0; pi < ptrs.size(); ++pi) {
                        auto& p = *ptrs[pi];
                        const std::size_t w = widths[pi];
                        if (p.requires_grad) {
                          p.ensure_grad();
                          for (std::size_t i = 0; i < r; ++i) {
                            const S* src = o.grad.data() + i * c + col0;
                            S* dst = p.grad.data() + i * w;
                            for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
                          }
                        }
                        col0 += w;
                      }
                    });
}

// Mean over rows: [R x C] -> length-C vector.
template <typename S>
Tensor<S> mean_rows(const Tensor<S>& x) {
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<S> out(c, S(0));
  const auto& xv = x.v();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += xv[i * c + j];
  const S inv = S(1) / static_cast<S>(r);
  for (auto& v : out) v *= inv;
  auto px = x.ptr();
  return make_op<S>({c}, std::move(out), {x}, [px, r, c, inv](TensorNode<S>& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) px->grad[i * c + j] += o.grad[j] * inv;
  });
}

template <typename S>
Tensor<S> mean_all(const Tensor<S>& x) {
  double acc = 0.0;
  for (const S v : x.v()) acc += static_cast<double>(v);
  const S inv = S(1) / static_cast<S>(x.size());
  auto px = x.ptr();
  return make_op<S>({1}, {static_cast<S>(acc) * inv}, {x}, [px, inv](TensorNode<S>& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    const S g = o.grad[0] * inv;
    for (std::size_t i = 0; i < px->grad.size(); ++i) px->grad[i] += g;
  });
}

// Reinterpret a length-n vector as a [1 x n] row.
template <typename S>
Tensor<S> as_row(const Tensor<S>& v) {
  if (v.shape().size() != 1) throw DimensionError("as_row: expected a vector, got " + shape_str(v.shape()));
  const std::size_t n = v.shape()[0];
  std::vector<S> out(v.v());
  auto pv = v.ptr();
  return make_op<S>({1, n}, std::move(out), {v}, [pv](TensorNode<S>& o) {
    if (!pv->requires_grad) return;
    pv->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) pv->grad[i] += o.grad[i];
  });
}

template <typename S>
Tensor<S> flatten(const Tensor<S>& x) {
  std::vector<S> out(x.v());
  auto px = x.ptr();
  return make_op<S>({x.size()}, std::move(out), {x}, [px](TensorNode<S>& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) px->grad[i] += o.grad[i];
  });
}

// 1-D convolution over [Cin x T] with weights [Cout x Cin*K], zero padding.
template <typename S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, std::size_t kernel,
                 std::size_t stride, std::size_t pad) {
  const std::size_t cin = x.rows(), t = x.cols(), cout = w.rows();
  if (w.cols() != cin * kernel)
    throw DimensionError("conv1d: weight " + shape_str(w.shape()) + " does not match Cin*K = " +
                         std::to_string(cin * kernel));
  if (b.shape() != Shape{cout})
    throw DimensionError("conv1d: bias must be length " + std::to_string(cout));
  if (stride == 0) throw DimensionError("conv1d: stride must be positive");
  if (t + 2 * pad < kernel) throw DimensionError("conv1d: input shorter than kernel");
  const std::size_t tout = (t + 2 * pad - kernel) / stride + 1;
  std::vector<S> out(cout * tout);
  const S* xv = x.v().data();
  const S* wv = w.v().data();
  const S* bv = b.v().data();
  for (std::size_t co = 0; co < cout; ++co) {
    S* orow = out.data() + co * tout;
    for (std::size_t ot = 0; ot < tout; ++ot) orow[ot] = bv[co];
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const S* xrow = xv + ci * t;
      const S* wrow = wv + co * cin * kernel + ci * kernel;
      for (std::size_t kk = 0; kk < kernel; ++kk) {
        const S wk = wrow[kk];
        // input index = ot*stride + kk - pad
        for (std::size_t ot = 0; ot < tout; ++ot) {
          const std::ptrdiff_t ix =
              static_cast<std::ptrdiff_t>(ot * stride + kk) - static_cast<std::ptrdiff_t>(pad);
          if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(t)) orow[ot] += wk * xrow[ix];
        }
      }
    }
  }
  auto px = x.ptr(), pw = w.ptr(), pb = b.ptr();
  return make_op<S>({cout, tout}, std::move(out), {x, w, b},
                    [px, pw, pb, cin, t, cout, kernel, stride, pad, tout](TensorNode<S>& o) {
                      const S* go = o.grad.data();
                      if (pb->requires_grad) {
                        pb->ensure_grad();
                        for (std::size_t co = 0; co < cout; ++co) {
                          S acc = S(0);
                          const S* grow = go + co * tout;
                          for (std::size_t ot = 0; ot < tout; ++ot) acc += grow[ot];
                          pb->grad[co] += acc;
                        }
                      }
                      if (pw->requires_grad) {
                        pw->ensure_grad();
                        for (std::size_t co = 0; co < cout; ++co) {
                          const S* grow = go + co * tout;
                          for (std::size_t ci = 0; ci < cin; ++ci) {
                            const S* xrow = px->value.data() + ci * t;
                            S* wrow = pw->grad.data() + co * cin * kernel + ci * kernel;
                            for (std::size_t kk = 0; kk < kernel; ++kk) {
                              S acc = S(0);
                              for (std::size_t ot = 0; ot < tout; ++ot) {
                                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ot * stride + kk) -
                                                          static_cast<std::ptrdiff_t>(pad);
                                if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(t))
                                  acc += grow[ot] * xrow[ix];
                              }
                              wrow[kk] += acc;
                            }
                          }
                        }
                      }
                      if (px->requires_grad) {
                        px->ensure_grad();
                        for (std::size_t co = 0; co < cout; ++co) {
                          const S* grow = go + co * tout;
                          for (std::size_t ci = 0; ci < cin; ++ci) {
                            S* gxrow = px->grad.data() + ci * t;
                            const S* wrow = pw->value.data() + co * cin * kernel + ci * kernel;
                            for (std::size_t kk = 0; kk < kernel; ++kk) {
                              const S wk = wrow[kk];
                              for (std::size_t ot = 0; ot < tout; ++ot) {
                                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ot * stride + kk) -
                                                          static_cast<std::ptrdiff_t>(pad);
                                if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(t))
                                  gxrow[ix] += wk * grow[ot];
                              }
                            }
                          }
                        }
                      }
                    });
}

// Nearest-neighbor doubling along time, used on the decoder's up path.
template <typename S>
Tensor<S> upsample2_cols(const Tensor<S>& x) {
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<S> out(r * c * 2);
  const auto& xv = x.v();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c * 2 + 2 * j] = xv[i * c + j];
      out[i * c * 2 + 2 * j + 1] = xv[i * c + j];
    }
  auto px = x.ptr();
  return make_op<S>({r, c * 2}, std::move(out), {x}, [px, r, c](TensorNode<S>& o) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        px->grad[i * c + j] += o.grad[i * c * 2 + 2 * j] + o.grad[i * c * 2 + 2 * j + 1];
  });
}

}  // namespace uecg::nn
