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

#ifndef SOTA_LINALG_HPP_
#define SOTA_LINALG_HPP_

#include <Eigen/Dense>

#include "sota/tensor.hpp"

// Tensor-level kernels shared by the forward and backward passes of the
// autograd ops. All GEMMs go through Eigen (single-threaded, fixed traversal
// order), so results are bitwise reproducible for any worker-thread count.

namespace sota::linalg {

template <typename T>
using EMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<EMatrix<T>> mat_view(Tensor<T>& t, int rows, int cols) {
  return Eigen::Map<EMatrix<T>>(t.data(), rows, cols);
}

template <typename T>
Eigen::Map<const EMatrix<T>> mat_view(const Tensor<T>& t, int rows, int cols) {
  return Eigen::Map<const EMatrix<T>>(t.data(), rows, cols);
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " * " + b.shape_str());
  }
  Tensor<T> y({a.dim(0), b.dim(1)});
  mat_view(y, a.dim(0), b.dim(1)).noalias() =
      mat_view(a, a.dim(0), a.dim(1)) * mat_view(b, b.dim(0), b.dim(1));
  return y;
}

// y += a * b
template <typename T>
void matmul_acc(Tensor<T>& y, const Tensor<T>& a, const Tensor<T>& b) {
  mat_view(y, a.dim(0), b.dim(1)).noalias() +=
      mat_view(a, a.dim(0), a.dim(1)) * mat_view(b, b.dim(0), b.dim(1));
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {  // a * b^T
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_nt: incompatible shapes");
  }
  Tensor<T> y({a.dim(0), b.dim(0)});
  mat_view(y, a.dim(0), b.dim(0)).noalias() =
      mat_view(a, a.dim(0), a.dim(1)) * mat_view(b, b.dim(0), b.dim(1)).transpose();
  return y;
}

template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {  // a^T * b
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw ShapeError("matmul_tn: incompatible shapes");
  }
  Tensor<T> y({a.dim(1), b.dim(1)});
  mat_view(y, a.dim(1), b.dim(1)).noalias() =
      mat_view(a, a.dim(0), a.dim(1)).transpose() * mat_view(b, b.dim(0), b.dim(1));
  return y;
}

// Floor semantics, as usual for strided convolution.
inline int conv_out_extent(int in, int k, int stride, int pad) {
  const int span = in + 2 * pad - k;
  if (span < 0) {
    throw ShapeError("conv: extent " + std::to_string(in) + " smaller than kernel " +
                     std::to_string(k) + " with pad " + std::to_string(pad));
  }
  return span / stride + 1;
}

// col has one row per (ci, dy, dx) and one column per output position.
template <typename T>
Tensor<T> im2col(const Tensor<T>& x, int kh, int kw, int stride, int pad) {
  const int ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int ho = conv_out_extent(h, kh, stride, pad);
  const int wo = conv_out_extent(w, kw, stride, pad);
  Tensor<T> col({ci * kh * kw, ho * wo});
  T* out = col.data();
  for (int c = 0; c < ci; ++c) {
    for (int dy = 0; dy < kh; ++dy) {
      for (int dx = 0; dx < kw; ++dx) {
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + dy - pad;
          if (iy < 0 || iy >= h) {
            for (int ox = 0; ox < wo; ++ox) *out++ = T(0);
            continue;
          }
          const T* src = &x.at3(c, iy, 0);
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + dx - pad;
            *out++ = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
  return col;
}

// Adjoint of im2col: scatter-add columns back into image layout.
template <typename T>
Tensor<T> col2im(const Tensor<T>& col, int ci, int h, int w, int kh, int kw, int stride,
                 int pad) {
  const int ho = conv_out_extent(h, kh, stride, pad);
  const int wo = conv_out_extent(w, kw, stride, pad);
  Tensor<T> x({ci, h, w});
  const T* in = col.data();
  for (int c = 0; c < ci; ++c) {
    for (int dy = 0; dy < kh; ++dy) {
      for (int dx = 0; dx < kw; ++dx) {
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + dy - pad;
          if (iy < 0 || iy >= h) {
            in += wo;
            continue;
          }
          T* dst = &x.at3(c, iy, 0);
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + dx - pad;
            if (ix >= 0 && ix < w) dst[ix] += *in;
            ++in;
          }
        }
      }
    }
  }
  return x;
}

/// x: [Ci,H,W], w: [Co,Ci,kh,kw], b: nullable [Co] -> [Co,Ho,Wo].
template <typename T>
Tensor<T> conv2d_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, int stride,
                     int pad) {
  const int ci = x.dim(0), co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != ci) throw ShapeError("conv2d: channel mismatch");
  const int ho = conv_out_extent(x.dim(1), kh, stride, pad);
  const int wo = conv_out_extent(x.dim(2), kw, stride, pad);
  const Tensor<T> col = im2col(x, kh, kw, stride, pad);
  Tensor<T> y({co, ho, wo});
  mat_view(y, co, ho * wo).noalias() =
      mat_view(w, co, ci * kh * kw) * mat_view(col, ci * kh * kw, ho * wo);
  if (b != nullptr) {
    for (int c = 0; c < co; ++c) {
      T* row = y.data() + static_cast<std::int64_t>(c) * ho * wo;
      const T bv = (*b)[c];
      for (int i = 0; i < ho * wo; ++i) row[i] += bv;
    }
  }
  return y;
}

/// gy: [Co,Ho,Wo] -> gradient w.r.t. the conv input of extent (H,W).
template <typename T>
Tensor<T> conv2d_bwd_input(const Tensor<T>& gy, const Tensor<T>& w, int h, int win, int stride,
                           int pad) {
  const int co = w.dim(0), ci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const int ho = gy.dim(1), wo = gy.dim(2);
  Tensor<T> dcol({ci * kh * kw, ho * wo});
  mat_view(dcol, ci * kh * kw, ho * wo).noalias() =
      mat_view(w, co, ci * kh * kw).transpose() * mat_view(gy, co, ho * wo);
  return col2im(dcol, ci, h, win, kh, kw, stride, pad);
}

/// gy: [Co,Ho,Wo], x: [Ci,H,W] -> gradient w.r.t. the conv weight [Co,Ci,kh,kw].
template <typename T>
Tensor<T> conv2d_bwd_weight(const Tensor<T>& gy, const Tensor<T>& x, int kh, int kw, int stride,
                            int pad) {
  const int co = gy.dim(0), ci = x.dim(0);
  const int ho = gy.dim(1), wo = gy.dim(2);
  const Tensor<T> col = im2col(x, kh, kw, stride, pad);
  Tensor<T> dw({co, ci, kh, kw});
  mat_view(dw, co, ci * kh * kw).noalias() =
      mat_view(gy, co, ho * wo) * mat_view(col, ci * kh * kw, ho * wo).transpose();
  return dw;
}

template <typename T>
Tensor<T> conv2d_bwd_bias(const Tensor<T>& gy) {
  const int co = gy.dim(0);
  const std::int64_t hw = static_cast<std::int64_t>(gy.dim(1)) * gy.dim(2);
  Tensor<T> db({co});
  for (int c = 0; c < co; ++c) {
    T s = T(0);
    const T* row = gy.data() + c * hw;
    for (std::int64_t i = 0; i < hw; ++i) s += row[i];
    db[c] = s;
  }
  return db;
}

}  // namespace sota::linalg

#endif  // SOTA_LINALG_HPP_
