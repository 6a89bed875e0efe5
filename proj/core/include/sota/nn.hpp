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

#ifndef SOTA_NN_HPP_
#define SOTA_NN_HPP_

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sota/autograd.hpp"
#include "sota/random.hpp"

namespace sota::nn {

using ag::Var;

/// Ordered, named parameter registry. Order is registration order, which
/// makes optimizer state, checkpoints, and update sweeps deterministic.
template <typename T>
struct ParamSet {
  std::vector<std::pair<std::string, Var<T>>> items;

  void add(const std::string& name, const Var<T>& v) { items.emplace_back(name, v); }
  void extend(const std::string& prefix, const ParamSet& other) {
    for (const auto& [n, v] : other.items) items.emplace_back(prefix + "." + n, v);
  }
  Var<T> find(const std::string& name) const {
    for (const auto& [n, v] : items)
      if (n == name) return v;
    return nullptr;
  }
  std::int64_t total_count() const {
    std::int64_t n = 0;
    for (const auto& [_, v] : items) n += v->value.size();
    return n;
  }
  void set_requires_grad(bool flag) const {
    for (const auto& [_, v] : items) v->requires_grad = flag;
  }
};

template <typename T>
Var<T> make_param(Tensor<T> init) {
  return ag::leaf(std::move(init), true);
}

// He-style fan-in init for GELU/conv stacks.
template <typename T>
Tensor<T> he_init(std::vector<int> shape, std::int64_t fan_in, Rng& rng) {
  const T stddev = static_cast<T>(std::sqrt(2.0 / static_cast<double>(fan_in)));
  return Tensor<T>::randn(std::move(shape), rng, stddev);
}

/// Dense layer y = x W^T + b with an optional low-rank adapter on W.
/// The adapted map computes W x + scaling * up (down x); `up` starts at zero
/// so a freshly attached adapter leaves the function unchanged.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(int d_in, int d_out, Rng& rng)
      : d_in_(d_in), d_out_(d_out) {
    w_ = make_param(he_init<T>({d_out, d_in}, d_in, rng));
    b_ = make_param(Tensor<T>({d_out}));
  }

  Var<T> forward(const Var<T>& x) const {
    Var<T> y = ag::add_bias_rows(ag::matmul(x, ag::transpose(w_)), b_);
    if (adapter_) {
      Var<T> low = ag::matmul(x, ag::transpose(adapter_->down));
      Var<T> delta = ag::matmul(low, ag::transpose(adapter_->up));
      y = ag::add(y, ag::scale(delta, adapter_->scaling));
    }
    return y;
  }

  int d_in() const { return d_in_; }
  int d_out() const { return d_out_; }
  Var<T> weight() const { return w_; }
  Var<T> bias() const { return b_; }
  bool has_adapter() const { return adapter_.has_value(); }

  void attach_adapter(int rank, T scaling, Rng& rng) {
    if (rank < 1 || rank > std::min(d_in_, d_out_))
      throw ShapeError("lora: rank exceeds wrapped map dimensions");
    Adapter a;
    a.down = make_param(Tensor<T>::randn({rank, d_in_}, rng,
                                         static_cast<T>(1.0 / std::sqrt((double)d_in_))));
    a.up = make_param(Tensor<T>({d_out_, rank}));  // zero: neutral at init
    a.scaling = scaling;
    a.rank = rank;
    adapter_ = std::move(a);
    w_->requires_grad = false;
    b_->requires_grad = false;
  }

  void merge_adapter() {
    if (!adapter_) throw ShapeError("lora: no adapter to merge");
    Tensor<T> delta = linalg::matmul(adapter_->up->value, adapter_->down->value);
    for (std::int64_t i = 0; i < delta.size(); ++i)
      w_->value[i] += adapter_->scaling * delta[i];
    adapter_.reset();
  }

  std::int64_t adapter_param_count() const {
    return adapter_ ? static_cast<std::int64_t>(adapter_->rank) * (d_in_ + d_out_) : 0;
  }

  void collect(ParamSet<T>& ps, const std::string& prefix) const {
    ps.add(prefix + ".w", w_);
    ps.add(prefix + ".b", b_);
  }
  void collect_adapter(ParamSet<T>& ps, const std::string& prefix) const {
    if (adapter_) {
      ps.add(prefix + ".lora_down", adapter_->down);
      ps.add(prefix + ".lora_up", adapter_->up);
    }
  }

 private:
  struct Adapter {
    Var<T> down, up;
    T scaling{};
    int rank{};
  };
  int d_in_ = 0, d_out_ = 0;
  Var<T> w_, b_;
  std::optional<Adapter> adapter_;
};

template <typename T>
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(int c_in, int c_out, int k, int stride, int pad, Rng& rng)
      : stride_(stride), pad_(pad) {
    w_ = make_param(he_init<T>({c_out, c_in, k, k},
                               static_cast<std::int64_t>(c_in) * k * k, rng));
    b_ = make_param(Tensor<T>({c_out}));
  }

  Var<T> forward(const Var<T>& x) const { return ag::conv2d(x, w_, b_, stride_, pad_); }

  void collect(ParamSet<T>& ps, const std::string& prefix) const {
    ps.add(prefix + ".w", w_);
    ps.add(prefix + ".b", b_);
  }

  Var<T> weight() const { return w_; }
  Var<T> bias() const { return b_; }

 private:
  int stride_ = 1, pad_ = 0;
  Var<T> w_, b_;
};

template <typename T>
class ConvTranspose2dLayer {
 public:
  ConvTranspose2dLayer() = default;
  ConvTranspose2dLayer(int c_in, int c_out, int k, int stride, Rng& rng) : stride_(stride) {
    w_ = make_param(he_init<T>({c_in, c_out, k, k},
                               static_cast<std::int64_t>(c_in) * k * k, rng));
    b_ = make_param(Tensor<T>({c_out}));
  }

  Var<T> forward(const Var<T>& x) const { return ag::conv_transpose2d(x, w_, b_, stride_); }

  void collect(ParamSet<T>& ps, const std::string& prefix) const {
    ps.add(prefix + ".w", w_);
    ps.add(prefix + ".b", b_);
  }

 private:
  int stride_ = 2;
  Var<T> w_, b_;
};

template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(int dim, T eps = static_cast<T>(1e-6)) : eps_(eps) {
    gamma_ = make_param(Tensor<T>::full({dim}, T(1)));
    beta_ = make_param(Tensor<T>({dim}));
  }

  // [m, dim] rows.
  Var<T> forward_rows(const Var<T>& x) const {
    return ag::layer_norm_rows(x, gamma_, beta_, eps_);
  }
  // [dim, H, W] across channels at each position.
  Var<T> forward_channels(const Var<T>& x) const {
    return ag::layer_norm_channels(x, gamma_, beta_, eps_);
  }

  void collect(ParamSet<T>& ps, const std::string& prefix) const {
    ps.add(prefix + ".gamma", gamma_);
    ps.add(prefix + ".beta", beta_);
  }

 private:
  T eps_ = static_cast<T>(1e-6);
  Var<T> gamma_, beta_;
};

/// Adam with bias correction. Parameters are swept in registration order;
/// entries whose requires_grad is false are skipped (frozen).
template <typename T>
class Adam {
 public:
  explicit Adam(ParamSet<T> params, T beta1 = T(0.9), T beta2 = T(0.999),
                T eps = static_cast<T>(1e-8))
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    states_.resize(params_.items.size());
  }

  void zero_grad() {
    for (auto& [_, v] : params_.items) v->zero_grad();
  }

  void step(T lr) {
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (std::size_t p = 0; p < params_.items.size(); ++p) {
      Var<T>& v = params_.items[p].second;
      if (!v->requires_grad || v->grad.empty()) continue;
      State& st = states_[p];
      if (st.m.empty()) {
        st.m = Tensor<T>(v->value.shape());
        st.v = Tensor<T>(v->value.shape());
      }
      for (std::int64_t i = 0; i < v->value.size(); ++i) {
        const T g = v->grad[i];
        st.m[i] = beta1_ * st.m[i] + (T(1) - beta1_) * g;
        st.v[i] = beta2_ * st.v[i] + (T(1) - beta2_) * g * g;
        const T mhat = st.m[i] / bc1;
        const T vhat = st.v[i] / bc2;
        v->value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  const ParamSet<T>& params() const { return params_; }

 private:
  struct State {
    Tensor<T> m, v;
  };
  ParamSet<T> params_;
  std::vector<State> states_;
  T beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace sota::nn

#endif  // SOTA_NN_HPP_
