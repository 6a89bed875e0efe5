// Copyright 2026 The SOTA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SOTA_AUTOGRAD_HPP_
#define SOTA_AUTOGRAD_HPP_

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sota/linalg.hpp"
#include "sota/tensor.hpp"

// Reverse-mode autodiff on a dynamically built tape. Every op returns a new
// node holding the forward value and a closure that routes the node's gradient
// to its parents. Subgraphs whose inputs all have requires_grad == false are
// pruned at construction, so inference and frozen components pay no tape cost.

namespace sota::ag {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated on first use
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backprop;

  Tensor<T>& ensure_grad() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
  void zero_grad() {
    if (!grad.empty()) grad.fill(T(0));
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return n;
}

template <typename T>
Var<T> leaf(Tensor<T> value, bool requires_grad) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backprop) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  for (const auto& p : parents) {
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

template <typename T>
void accumulate(const Var<T>& p, const Tensor<T>& g) {
  if (!p->requires_grad) return;
  Tensor<T>& dst = p->ensure_grad();
  for (std::int64_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

/// Backpropagates from a scalar root (grad seeded with 1).
template <typename T>
void backward(const Var<T>& root) {
  if (root->value.size() != 1) throw ShapeError("backward: root must be scalar");
  if (!root->requires_grad) return;
  // Iterative post-order topological sort over the requires_grad subgraph.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<T>* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad()[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise and scalar ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (!a->value.same_shape(b->value)) throw ShapeError("add: shape mismatch");
  Tensor<T> y = a->value;
  for (std::int64_t i = 0; i < y.size(); ++i) y[i] += b->value[i];
  return make_op<T>(std::move(y), {a, b}, [a, b](Node<T>& n) {
    accumulate(a, n.grad);
    accumulate(b, n.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  if (!a->value.same_shape(b->value)) throw ShapeError("sub: shape mismatch");
  Tensor<T> y = a->value;
  for (std::int64_t i = 0; i < y.size(); ++i) y[i] -= b->value[i];
  return make_op<T>(std::move(y), {a, b}, [a, b](Node<T>& n) {
    accumulate(a, n.grad);
    if (b->requires_grad) {
      Tensor<T>& g = b->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  if (!a->value.same_shape(b->value)) throw ShapeError("mul: shape mismatch");
  Tensor<T> y = a->value;
  for (std::int64_t i = 0; i < y.size(); ++i) y[i] *= b->value[i];
  return make_op<T>(std::move(y), {a, b}, [a, b](Node<T>& n) {
    if (a->requires_grad) {
      Tensor<T>& g = a->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      Tensor<T>& g = b->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * a->value[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> y = a->value;
  for (std::int64_t i = 0; i < y.size(); ++i) y[i] *= s;
  return make_op<T>(std::move(y), {a}, [a, s](Node<T>& n) {
    if (a->requires_grad) {
      Tensor<T>& g = a->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * s;
    }
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Tensor<T> y = a->value;
  for (std::int64_t i = 0; i < y.size(); ++i) y[i] += s;
  return make_op<T>(std::move(y), {a}, [a](Node<T>& n) { accumulate(a, n.grad); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> y = a->value;
  for (std::int64_t i = 0; i < y.size(); ++i) {
    const T x = y[i];
    y[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                     : std::exp(x) / (T(1) + std::exp(x));
  }
  auto out = make_op<T>(std::move(y), {a}, nullptr);
  if (out->requires_grad) {
    Node<T>* self = out.get();
    out->backprop = [a, self](Node<T>& n) {
      Tensor<T>& g = a->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) {
        const T yv = self->value[i];
        g[i] += n.grad[i] * yv * (T(1) - yv);
      }
    };
  }
  return out;
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  Tensor<T> y = a->value;
  for (std::int64_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
  auto out = make_op<T>(std::move(y), {a}, nullptr);
  if (out->requires_grad) {
    Node<T>* self = out.get();
    out->backprop = [a, self](Node<T>& n) {
      Tensor<T>& g = a->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) {
        const T yv = self->value[i];
        g[i] += n.grad[i] * (T(1) - yv * yv);
      }
    };
  }
  return out;
}

template <typename T>
Var<T> gelu(const Var<T>& a) {
  // Exact erf form; derivative is Phi(x) + x * phi(x).
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  Tensor<T> y = a->value;
  for (std::int64_t i = 0; i < y.size(); ++i) {
    const double x = static_cast<double>(y[i]);
    y[i] = static_cast<T>(x * 0.5 * (1.0 + std::erf(x * kInvSqrt2)));
  }
  return make_op<T>(std::move(y), {a}, [a](Node<T>& n) {
    if (!a->requires_grad) return;
    Tensor<T>& g = a->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.size(); ++i) {
      const double x = static_cast<double>(a->value[i]);
      const double phi = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      const double Phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      g[i] += n.grad[i] * static_cast<T>(Phi + x * phi);
    }
  });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& a, std::vector<int> shape) {
  Tensor<T> y = a->value.reshaped(shape);
  return make_op<T>(std::move(y), {a}, [a](Node<T>& n) {
    if (!a->requires_grad) return;
    accumulate(a, n.grad.reshaped(a->value.shape()));
  });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  const int m = a->value.dim(0), k = a->value.dim(1);
  Tensor<T> y({k, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j) y.at2(j, i) = a->value.at2(i, j);
  return make_op<T>(std::move(y), {a}, [a, m, k](Node<T>& n) {
    if (!a->requires_grad) return;
    Tensor<T>& g = a->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < k; ++j) g.at2(i, j) += n.grad.at2(j, i);
  });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const int ca = a->value.dim(0), cb = b->value.dim(0);
  const int h = a->value.dim(1), w = a->value.dim(2);
  if (b->value.dim(1) != h || b->value.dim(2) != w)
    throw ShapeError("concat_channels: spatial mismatch");
  Tensor<T> y({ca + cb, h, w});
  std::copy(a->value.data(), a->value.data() + a->value.size(), y.data());
  std::copy(b->value.data(), b->value.data() + b->value.size(),
            y.data() + a->value.size());
  return make_op<T>(std::move(y), {a, b}, [a, b](Node<T>& n) {
    const std::int64_t na = a->value.size();
    if (a->requires_grad) {
      Tensor<T>& g = a->ensure_grad();
      for (std::int64_t i = 0; i < na; ++i) g[i] += n.grad[i];
    }
    if (b->requires_grad) {
      Tensor<T>& g = b->ensure_grad();
      for (std::int64_t i = 0; i < b->value.size(); ++i) g[i] += n.grad[na + i];
    }
  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& a, int r0, int r1) {
  const int cols = a->value.dim(1);
  Tensor<T> y({r1 - r0, cols});
  std::copy(a->value.data() + static_cast<std::int64_t>(r0) * cols,
            a->value.data() + static_cast<std::int64_t>(r1) * cols, y.data());
  return make_op<T>(std::move(y), {a}, [a, r0, cols](Node<T>& n) {
    if (!a->requires_grad) return;
    Tensor<T>& g = a->ensure_grad();
    const std::int64_t off = static_cast<std::int64_t>(r0) * cols;
    for (std::int64_t i = 0; i < n.grad.size(); ++i) g[off + i] += n.grad[i];
  });
}

template <typename T>
Var<T> concat_rows(const Var<T>& a, const Var<T>& b) {
  const int cols = a->value.dim(1);
  if (b->value.dim(1) != cols) throw ShapeError("concat_rows: column mismatch");
  Tensor<T> y({a->value.dim(0) + b->value.dim(0), cols});
  std::copy(a->value.data(), a->value.data() + a->value.size(), y.data());
  std::copy(b->value.data(), b->value.data() + b->value.size(),
            y.data() + a->value.size());
  return make_op<T>(std::move(y), {a, b}, [a, b](Node<T>& n) {
    const std::int64_t na = a->value.size();
    if (a->requires_grad) {
      Tensor<T>& g = a->ensure_grad();
      for (std::int64_t i = 0; i < na; ++i) g[i] += n.grad[i];
    }
    if (b->requires_grad) {
      Tensor<T>& g = b->ensure_grad();
      for (std::int64_t i = 0; i < b->value.size(); ++i) g[i] += n.grad[na + i];
    }
  });
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  Tensor<T> y = linalg::matmul(a->value, b->value);
  return make_op<T>(std::move(y), {a, b}, [a, b](Node<T>& n) {
    if (a->requires_grad) {
      Tensor<T> da = linalg::matmul_nt(n.grad, b->value);
      accumulate(a, da);
    }
    if (b->requires_grad) {
      Tensor<T> db = linalg::matmul_tn(a->value, n.grad);
      accumulate(b, db);
    }
  });
}

template <typename T>
Var<T> softmax_rows(const Var<T>& a) {
  const int m = a->value.dim(0), k = a->value.dim(1);
  Tensor<T> y = a->value;
  for (int r = 0; r < m; ++r) {
    T* row = y.data() + static_cast<std::int64_t>(r) * k;
    T mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T s = T(0);
    for (int j = 0; j < k; ++j) {
      row[j] = std::exp(row[j] - mx);
      s += row[j];
    }
    for (int j = 0; j < k; ++j) row[j] /= s;
  }
  auto out = make_op<T>(std::move(y), {a}, nullptr);
  if (out->requires_grad) {
    Node<T>* self = out.get();
    out->backprop = [a, self, m, k](Node<T>& n) {
      Tensor<T>& g = a->ensure_grad();
      for (int r = 0; r < m; ++r) {
        const T* yr = self->value.data() + static_cast<std::int64_t>(r) * k;
        const T* gr = n.grad.data() + static_cast<std::int64_t>(r) * k;
        T dot = T(0);
        for (int j = 0; j < k; ++j) dot += gr[j] * yr[j];
        T* dst = g.data() + static_cast<std::int64_t>(r) * k;
        for (int j = 0; j < k; ++j) dst[j] += yr[j] * (gr[j] - dot);
      }
    };
  }
  return out;
}

/// x: [m,n], bias: [n] added to every row.
template <typename T>
Var<T> add_bias_rows(const Var<T>& x, const Var<T>& b) {
  const int m = x->value.dim(0), k = x->value.dim(1);
  if (b->value.size() != k) throw ShapeError("add_bias_rows: bias length mismatch");
  Tensor<T> y = x->value;
  for (int r = 0; r < m; ++r)
    for (int j = 0; j < k; ++j) y.at2(r, j) += b->value[j];
  return make_op<T>(std::move(y), {x, b}, [x, b, m, k](Node<T>& n) {
    accumulate(x, n.grad);
    if (b->requires_grad) {
      Tensor<T>& g = b->ensure_grad();
      for (int r = 0; r < m; ++r)
        for (int j = 0; j < k; ++j) g[j] += n.grad.at2(r, j);
    }
  });
}

/// Row-wise layer norm over the last dim of [m,n], with per-column affine.
template <typename T>
Var<T> layer_norm_rows(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  const int m = x->value.dim(0), k = x->value.dim(1);
  Tensor<T> xhat({m, k});
  Tensor<T> inv_sigma({m});
  Tensor<T> y({m, k});
  for (int r = 0; r < m; ++r) {
    const T* row = x->value.data() + static_cast<std::int64_t>(r) * k;
    T mu = T(0);
    for (int j = 0; j < k; ++j) mu += row[j];
    mu /= T(k);
    T var = T(0);
    for (int j = 0; j < k; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= T(k);
    const T is = T(1) / std::sqrt(var + eps);
    inv_sigma[r] = is;
    for (int j = 0; j < k; ++j) {
      const T xh = (row[j] - mu) * is;
      xhat.at2(r, j) = xh;
      y.at2(r, j) = gamma->value[j] * xh + beta->value[j];
    }
  }
  return make_op<T>(
      std::move(y), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma), m,
       k](Node<T>& n) {
        if (x->requires_grad) {
          Tensor<T>& g = x->ensure_grad();
          for (int r = 0; r < m; ++r) {
            T mean_gh = T(0), mean_ghx = T(0);
            for (int j = 0; j < k; ++j) {
              const T gh = n.grad.at2(r, j) * gamma->value[j];
              mean_gh += gh;
              mean_ghx += gh * xhat.at2(r, j);
            }
            mean_gh /= T(k);
            mean_ghx /= T(k);
            for (int j = 0; j < k; ++j) {
              const T gh = n.grad.at2(r, j) * gamma->value[j];
              g.at2(r, j) += inv_sigma[r] * (gh - mean_gh - xhat.at2(r, j) * mean_ghx);
            }
          }
        }
        if (gamma->requires_grad) {
          Tensor<T>& g = gamma->ensure_grad();
          for (int r = 0; r < m; ++r)
            for (int j = 0; j < k; ++j) g[j] += n.grad.at2(r, j) * xhat.at2(r, j);
        }
        if (beta->requires_grad) {
          Tensor<T>& g = beta->ensure_grad();
          for (int r = 0; r < m; ++r)
            for (int j = 0; j < k; ++j) g[j] += n.grad.at2(r, j);
        }
      });
}

// ---------------------------------------------------------------------------
// Convolution ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
  Tensor<T> y = linalg::conv2d_fwd(x->value, w->value, b ? &b->value : nullptr, stride, pad);
  std::vector<Var<T>> parents{x, w};
  if (b) parents.push_back(b);
  return make_op<T>(std::move(y), std::move(parents), [x, w, b, stride, pad](Node<T>& n) {
    const int kh = w->value.dim(2), kw = w->value.dim(3);
    if (x->requires_grad) {
      Tensor<T> dx = linalg::conv2d_bwd_input(n.grad, w->value, x->value.dim(1),
                                              x->value.dim(2), stride, pad);
      accumulate(x, dx);
    }
    if (w->requires_grad) {
      Tensor<T> dw = linalg::conv2d_bwd_weight(n.grad, x->value, kh, kw, stride, pad);
      accumulate(w, dw);
    }
    if (b && b->requires_grad) {
      Tensor<T> db = linalg::conv2d_bwd_bias(n.grad);
      accumulate(b, db);
    }
  });
}

/// Transposed convolution. Weight layout [Cin,Cout,kh,kw]; output extent
/// (H-1)*stride + k. The forward pass is the adjoint of a conv with the same
/// weight, which fixes the backward passes by symmetry.
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride) {
  const int ci = x->value.dim(0);
  if (w->value.dim(0) != ci) throw ShapeError("conv_transpose2d: channel mismatch");
  const int co = w->value.dim(1), kh = w->value.dim(2), kw = w->value.dim(3);
  const int ho = (x->value.dim(1) - 1) * stride + kh;
  const int wo = (x->value.dim(2) - 1) * stride + kw;
  Tensor<T> y = linalg::conv2d_bwd_input(x->value, w->value, ho, wo, stride, 0);
  if (b) {
    for (int c = 0; c < co; ++c) {
      T* row = y.data() + static_cast<std::int64_t>(c) * ho * wo;
      for (int i = 0; i < ho * wo; ++i) row[i] += b->value[c];
    }
  }
  std::vector<Var<T>> parents{x, w};
  if (b) parents.push_back(b);
  return make_op<T>(std::move(y), std::move(parents),
                    [x, w, b, stride, kh, kw](Node<T>& n) {
                      if (x->requires_grad) {
                        Tensor<T> dx = linalg::conv2d_fwd(
                            n.grad, w->value, static_cast<const Tensor<T>*>(nullptr), stride, 0);
                        accumulate(x, dx);
                      }
                      if (w->requires_grad) {
                        Tensor<T> dw =
                            linalg::conv2d_bwd_weight(x->value, n.grad, kh, kw, stride, 0);
                        accumulate(w, dw);
                      }
                      if (b && b->requires_grad) {
                        Tensor<T> db = linalg::conv2d_bwd_bias(n.grad);
                        accumulate(b, db);
                      }
                    });
}

/// Channel-wise layer norm on [C,H,W]: at each position, normalize across C.
template <typename T>
Var<T> layer_norm_channels(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  auto flat = reshape(x, {c, h * w});
  auto t = transpose(flat);  // [HW, C]
  auto normed = layer_norm_rows(t, gamma, beta, eps);
  auto back = transpose(normed);
  return reshape(back, {c, h, w});
}

// ---------------------------------------------------------------------------
// Spatial ops
// ---------------------------------------------------------------------------

/// Area-average pooling with square factor f (stride == window == f).
template <typename T>
Var<T> avg_pool2d(const Var<T>& x, int f) {
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  if (h % f != 0 || w % f != 0) throw ShapeError("avg_pool2d: extent not divisible");
  const int ho = h / f, wo = w / f;
  Tensor<T> y({c, ho, wo});
  const T inv = T(1) / static_cast<T>(f * f);
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        T s = T(0);
        for (int dy = 0; dy < f; ++dy)
          for (int dx = 0; dx < f; ++dx) s += x->value.at3(ch, oy * f + dy, ox * f + dx);
        y.at3(ch, oy, ox) = s * inv;
      }
  return make_op<T>(std::move(y), {x}, [x, f](Node<T>& n) {
    if (!x->requires_grad) return;
    const int c = x->value.dim(0);
    const int ho = n.grad.dim(1), wo = n.grad.dim(2);
    const T inv = T(1) / static_cast<T>(f * f);
    Tensor<T>& g = x->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          const T gv = n.grad.at3(ch, oy, ox) * inv;
          for (int dy = 0; dy < f; ++dy)
            for (int dx = 0; dx < f; ++dx) g.at3(ch, oy * f + dy, ox * f + dx) += gv;
        }
  });
}

/// Bilinear resize of [C,h,w] to [C,H,W] (half-pixel centers, clamped edges).
template <typename T>
Var<T> bilinear_resize(const Var<T>& x, int out_h, int out_w) {
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  if (out_h == h && out_w == w) {
    Tensor<T> y = x->value;
    return make_op<T>(std::move(y), {x}, [x](Node<T>& n) { accumulate(x, n.grad); });
  }
  struct Tap {
    int i0, i1;
    T w0, w1;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      double src = (o + 0.5) * static_cast<double>(in) / out - 0.5;
      if (src < 0) src = 0;
      if (src > in - 1) src = in - 1;
      const int i0 = static_cast<int>(src);
      const int i1 = std::min(i0 + 1, in - 1);
      const T f = static_cast<T>(src - i0);
      t[static_cast<std::size_t>(o)] = {i0, i1, T(1) - f, f};
    }
    return t;
  };
  const auto ty = taps(h, out_h);
  const auto tx = taps(w, out_w);
  Tensor<T> y({c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox) {
        const Tap& a = ty[static_cast<std::size_t>(oy)];
        const Tap& b = tx[static_cast<std::size_t>(ox)];
        y.at3(ch, oy, ox) = a.w0 * (b.w0 * x->value.at3(ch, a.i0, b.i0) +
                                    b.w1 * x->value.at3(ch, a.i0, b.i1)) +
                            a.w1 * (b.w0 * x->value.at3(ch, a.i1, b.i0) +
                                    b.w1 * x->value.at3(ch, a.i1, b.i1));
      }
  return make_op<T>(std::move(y), {x}, [x, ty, tx, c, out_h, out_w](Node<T>& n) {
    if (!x->requires_grad) return;
    Tensor<T>& g = x->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          const Tap& a = ty[static_cast<std::size_t>(oy)];
          const Tap& b = tx[static_cast<std::size_t>(ox)];
          const T gv = n.grad.at3(ch, oy, ox);
          g.at3(ch, a.i0, b.i0) += gv * a.w0 * b.w0;
          g.at3(ch, a.i0, b.i1) += gv * a.w0 * b.w1;
          g.at3(ch, a.i1, b.i0) += gv * a.w1 * b.w0;
          g.at3(ch, a.i1, b.i1) += gv * a.w1 * b.w1;
        }
  });
}

/// y[c,:,:] = x[c,:,:] * m[0,:,:] (gate map broadcast over channels).
template <typename T>
Var<T> scale_by_map(const Var<T>& x, const Var<T>& m) {
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  if (m->value.dim(0) != 1 || m->value.dim(1) != h || m->value.dim(2) != w)
    throw ShapeError("scale_by_map: map must be [1,H,W] matching x");
  Tensor<T> y = x->value;
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  for (int ch = 0; ch < c; ++ch) {
    T* row = y.data() + ch * hw;
    for (std::int64_t i = 0; i < hw; ++i) row[i] *= m->value[i];
  }
  return make_op<T>(std::move(y), {x, m}, [x, m, c, hw](Node<T>& n) {
    if (x->requires_grad) {
      Tensor<T>& g = x->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        const T* gr = n.grad.data() + ch * hw;
        T* dst = g.data() + ch * hw;
        for (std::int64_t i = 0; i < hw; ++i) dst[i] += gr[i] * m->value[i];
      }
    }
    if (m->requires_grad) {
      Tensor<T>& g = m->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        const T* gr = n.grad.data() + ch * hw;
        const T* xr = x->value.data() + ch * hw;
        for (std::int64_t i = 0; i < hw; ++i) g[i] += gr[i] * xr[i];
      }
    }
  });
}

/// logits[h,w] = sum_c feat[c,h,w] * v[c].
template <typename T>
Var<T> channel_dot(const Var<T>& feat, const Var<T>& v) {
  const int c = feat->value.dim(0), h = feat->value.dim(1), w = feat->value.dim(2);
  if (v->value.size() != c) throw ShapeError("channel_dot: vector length mismatch");
  Tensor<T> y({h, w});
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  for (int ch = 0; ch < c; ++ch) {
    const T* row = feat->value.data() + ch * hw;
    const T vv = v->value[ch];
    for (std::int64_t i = 0; i < hw; ++i) y[i] += row[i] * vv;
  }
  return make_op<T>(std::move(y), {feat, v}, [feat, v, c, hw](Node<T>& n) {
    if (feat->requires_grad) {
      Tensor<T>& g = feat->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        T* dst = g.data() + ch * hw;
        const T vv = v->value[ch];
        for (std::int64_t i = 0; i < hw; ++i) dst[i] += n.grad[i] * vv;
      }
    }
    if (v->requires_grad) {
      Tensor<T>& g = v->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        const T* row = feat->value.data() + ch * hw;
        T s = T(0);
        for (std::int64_t i = 0; i < hw; ++i) s += n.grad[i] * row[i];
        g[ch] += s;
      }
    }
  });
}

/// Reduces [d,N] to [groups,d] token rows by averaging contiguous column
/// blocks; block g covers columns [gN/G, (g+1)N/G).
template <typename T>
Var<T> pooled_tokens(const Var<T>& p, int groups) {
  const int d = p->value.dim(0), n = p->value.dim(1);
  if (n < groups) throw ShapeError("pooled_tokens: fewer columns than groups");
  Tensor<T> y({groups, d});
  for (int g = 0; g < groups; ++g) {
    const int j0 = static_cast<int>(static_cast<std::int64_t>(g) * n / groups);
    const int j1 = static_cast<int>(static_cast<std::int64_t>(g + 1) * n / groups);
    const T inv = T(1) / static_cast<T>(j1 - j0);
    for (int k = 0; k < d; ++k) {
      T s = T(0);
      for (int j = j0; j < j1; ++j) s += p->value.at2(k, j);
      y.at2(g, k) = s * inv;
    }
  }
  return make_op<T>(std::move(y), {p}, [p, groups, d, n](Node<T>& node) {
    if (!p->requires_grad) return;
    Tensor<T>& gr = p->ensure_grad();
    for (int g = 0; g < groups; ++g) {
      const int j0 = static_cast<int>(static_cast<std::int64_t>(g) * n / groups);
      const int j1 = static_cast<int>(static_cast<std::int64_t>(g + 1) * n / groups);
      const T inv = T(1) / static_cast<T>(j1 - j0);
      for (int k = 0; k < d; ++k) {
        const T gv = node.grad.at2(g, k) * inv;
        for (int j = j0; j < j1; ++j) gr.at2(k, j) += gv;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& x) {
  T s = T(0);
  for (std::int64_t i = 0; i < x->value.size(); ++i) s += x->value[i];
  return make_op<T>(Tensor<T>::from_vector({1}, {s}), {x}, [x](Node<T>& n) {
    if (!x->requires_grad) return;
    Tensor<T>& g = x->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[0];
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
  return scale(sum_all(x), T(1) / static_cast<T>(x->value.size()));
}

template <typename T>
Var<T> reduce_min(const Var<T>& x) {
  std::int64_t arg = 0;
  for (std::int64_t i = 1; i < x->value.size(); ++i)
    if (x->value[i] < x->value[arg]) arg = i;
  return make_op<T>(Tensor<T>::from_vector({1}, {x->value[arg]}), {x}, [x, arg](Node<T>& n) {
    if (x->requires_grad) x->ensure_grad()[arg] += n.grad[0];
  });
}

template <typename T>
Var<T> reduce_max(const Var<T>& x) {
  std::int64_t arg = 0;
  for (std::int64_t i = 1; i < x->value.size(); ++i)
    if (x->value[i] > x->value[arg]) arg = i;
  return make_op<T>(Tensor<T>::from_vector({1}, {x->value[arg]}), {x}, [x, arg](Node<T>& n) {
    if (x->requires_grad) x->ensure_grad()[arg] += n.grad[0];
  });
}

/// y = x - s (s scalar node, broadcast).
template <typename T>
Var<T> sub_scalar_node(const Var<T>& x, const Var<T>& s) {
  Tensor<T> y = x->value;
  const T sv = s->value[0];
  for (std::int64_t i = 0; i < y.size(); ++i) y[i] -= sv;
  return make_op<T>(std::move(y), {x, s}, [x, s](Node<T>& n) {
    accumulate(x, n.grad);
    if (s->requires_grad) {
      T acc = T(0);
      for (std::int64_t i = 0; i < n.grad.size(); ++i) acc += n.grad[i];
      s->ensure_grad()[0] -= acc;
    }
  });
}

/// y = x / s (s scalar node, broadcast).
template <typename T>
Var<T> div_scalar_node(const Var<T>& x, const Var<T>& s) {
  Tensor<T> y = x->value;
  const T sv = s->value[0];
  for (std::int64_t i = 0; i < y.size(); ++i) y[i] /= sv;
  return make_op<T>(std::move(y), {x, s}, [x, s](Node<T>& n) {
    const T sv = s->value[0];
    if (x->requires_grad) {
      Tensor<T>& g = x->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] / sv;
    }
    if (s->requires_grad) {
      T acc = T(0);
      for (std::int64_t i = 0; i < n.grad.size(); ++i) acc += n.grad[i] * x->value[i];
      s->ensure_grad()[0] -= acc / (sv * sv);
    }
  });
}

/// Soft Dice loss on probabilities: 1 - (2*sum(p*t)+eps)/(sum(p)+sum(t)+eps).
template <typename T>
Var<T> dice_loss(const Var<T>& probs, const Tensor<T>& target, T eps) {
  if (!probs->value.same_shape(target)) throw ShapeError("dice_loss: shape mismatch");
  T inter = T(0), sp = T(0), st = T(0);
  for (std::int64_t i = 0; i < target.size(); ++i) {
    inter += probs->value[i] * target[i];
    sp += probs->value[i];
    st += target[i];
  }
  const T num = T(2) * inter + eps;
  const T den = sp + st + eps;
  const T loss = T(1) - num / den;
  return make_op<T>(Tensor<T>::from_vector({1}, {loss}), {probs},
                    [probs, target, num, den](Node<T>& n) {
                      if (!probs->requires_grad) return;
                      Tensor<T>& g = probs->ensure_grad();
                      const T g0 = n.grad[0];
                      for (std::int64_t i = 0; i < target.size(); ++i) {
                        // d/dp_i of (1 - num/den) = -(2*t_i*den - num) / den^2
                        g[i] += g0 * (num - T(2) * target[i] * den) / (den * den);
                      }
                    });
}

/// Mean binary cross-entropy on logits, log-sum-exp stabilized.
template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, const Tensor<T>& target) {
  if (!logits->value.same_shape(target)) throw ShapeError("bce_with_logits: shape mismatch");
  const std::int64_t n = target.size();
  T loss = T(0);
  for (std::int64_t i = 0; i < n; ++i) {
    const T z = logits->value[i];
    const T t = target[i];
    loss += std::max(z, T(0)) - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  loss /= static_cast<T>(n);
  return make_op<T>(Tensor<T>::from_vector({1}, {loss}), {logits},
                    [logits, target, n](Node<T>& node) {
                      if (!logits->requires_grad) return;
                      Tensor<T>& g = logits->ensure_grad();
                      const T g0 = node.grad[0] / static_cast<T>(n);
                      for (std::int64_t i = 0; i < n; ++i) {
                        const T z = logits->value[i];
                        const T p = z >= T(0) ? T(1) / (T(1) + std::exp(-z))
                                              : std::exp(z) / (T(1) + std::exp(z));
                        g[i] += g0 * (p - target[i]);
                      }
                    });
}

/// Mean softmax cross-entropy over pixels where mask != 0; labels are class
/// indices. Pixels with mask == 0 contribute nothing (loss and gradient).
template <typename T>
Var<T> masked_softmax_ce(const Var<T>& logits, const MaskU8& labels, const MaskU8& mask) {
  const int c = logits->value.dim(0), h = logits->value.dim(1), w = logits->value.dim(2);
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  std::int64_t active = 0;
  for (std::int64_t i = 0; i < hw; ++i)
    if (mask[i]) ++active;
  const T inv = active > 0 ? T(1) / static_cast<T>(active) : T(0);
  T loss = T(0);
  for (std::int64_t i = 0; i < hw; ++i) {
    if (!mask[i]) continue;
    T mx = logits->value[i];
    for (int k = 1; k < c; ++k) mx = std::max(mx, logits->value[k * hw + i]);
    T lse = T(0);
    for (int k = 0; k < c; ++k) lse += std::exp(logits->value[k * hw + i] - mx);
    lse = std::log(lse) + mx;
    loss += lse - logits->value[static_cast<std::int64_t>(labels[i]) * hw + i];
  }
  loss *= inv;
  return make_op<T>(Tensor<T>::from_vector({1}, {loss}), {logits},
                    [logits, labels, mask, c, hw, inv](Node<T>& n) {
                      if (!logits->requires_grad) return;
                      Tensor<T>& g = logits->ensure_grad();
                      const T g0 = n.grad[0] * inv;
                      for (std::int64_t i = 0; i < hw; ++i) {
                        if (!mask[i]) continue;
                        T mx = logits->value[i];
                        for (int k = 1; k < c; ++k)
                          mx = std::max(mx, logits->value[k * hw + i]);
                        T s = T(0);
                        for (int k = 0; k < c; ++k) s += std::exp(logits->value[k * hw + i] - mx);
                        for (int k = 0; k < c; ++k) {
                          const T p = std::exp(logits->value[k * hw + i] - mx) / s;
                          const T t = (k == labels[i]) ? T(1) : T(0);
                          g[k * hw + i] += g0 * (p - t);
                        }
                      }
                    });
}

}  // namespace sota::ag

#endif  // SOTA_AUTOGRAD_HPP_
