#pragma once

#include <cstddef>
#include <vector>

#include "litevl/graph.hpp"
#include "litevl/ops.hpp"
#include "litevl/rng.hpp"

namespace litevl {

template <class Real>
struct AttnParams {
  Var<Real> wq, wk, wv, wo;  // D x D
  Var<Real> bq, bk, bv, bo;  // D
};

template <class Real>
struct LnParams {
  Var<Real> gain, bias;  // D
};

template <class Real>
struct FfnParams {
  Var<Real> w1, b1;  // D x F, F
  Var<Real> w2, b2;  // F x D, D
};

template <class Real>
Tensor<Real> normal_tensor(Rng& rng, Shape shape, double stddev) {
  Tensor<Real> t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    t[i] = static_cast<Real>(rng.normal(0.0, stddev));
  }
  return t;
}

inline constexpr double kInitStd = 0.02;

template <class Real>
AttnParams<Real> init_attn(Rng& rng, std::size_t dim) {
  AttnParams<Real> p;
  p.wq = make_param(normal_tensor<Real>(rng, {dim, dim}, kInitStd));
  p.wk = make_param(normal_tensor<Real>(rng, {dim, dim}, kInitStd));
  p.wv = make_param(normal_tensor<Real>(rng, {dim, dim}, kInitStd));
  p.wo = make_param(normal_tensor<Real>(rng, {dim, dim}, kInitStd));
  p.bq = make_param(Tensor<Real>({dim}));
  p.bk = make_param(Tensor<Real>({dim}));
  p.bv = make_param(Tensor<Real>({dim}));
  p.bo = make_param(Tensor<Real>({dim}));
  return p;
}

template <class Real>
LnParams<Real> init_ln(std::size_t dim) {
  LnParams<Real> p;
  p.gain = make_param(Tensor<Real>::full({dim}, Real(1)));
  p.bias = make_param(Tensor<Real>({dim}));
  return p;
}

template <class Real>
FfnParams<Real> init_ffn(Rng& rng, std::size_t dim, std::size_t ffn_dim) {
  FfnParams<Real> p;
  p.w1 = make_param(normal_tensor<Real>(rng, {dim, ffn_dim}, kInitStd));
  p.b1 = make_param(Tensor<Real>({ffn_dim}));
  p.w2 = make_param(normal_tensor<Real>(rng, {ffn_dim, dim}, kInitStd));
  p.b2 = make_param(Tensor<Real>({dim}));
  return p;
}

/// Standard multi-head attention. Queries come from q_in, keys/values from
/// kv_in (equal for self-attention). When head_probs_out is given, the
/// per-head post-softmax probability nodes (rows = query positions, cols =
/// key positions) are appended so callers can read their gradients later.
template <class Real>
Var<Real> multi_head_attention(const Var<Real>& q_in, const Var<Real>& kv_in,
                               const AttnParams<Real>& p, std::size_t num_heads,
                               std::vector<Var<Real>>* head_probs_out = nullptr) {
  const std::size_t dim = q_in.value().cols();
  if (dim % num_heads != 0) {
    throw std::invalid_argument("attention: dim not divisible by head count");
  }
  const std::size_t hd = dim / num_heads;
  auto q = ops::add_bias(ops::matmul(q_in, p.wq), p.bq);
  auto k = ops::add_bias(ops::matmul(kv_in, p.wk), p.bk);
  auto v = ops::add_bias(ops::matmul(kv_in, p.wv), p.bv);
  const Real inv_sqrt = Real(1) / std::sqrt(static_cast<Real>(hd));
  std::vector<Var<Real>> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    auto qh = ops::slice_cols(q, h * hd, (h + 1) * hd);
    auto kh = ops::slice_cols(k, h * hd, (h + 1) * hd);
    auto vh = ops::slice_cols(v, h * hd, (h + 1) * hd);
    auto scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt);
    auto probs = ops::softmax_rows(scores);
    if (head_probs_out) head_probs_out->push_back(probs);
    heads.push_back(ops::matmul(probs, vh));
  }
  auto cat = ops::concat_cols(heads);
  return ops::add_bias(ops::matmul(cat, p.wo), p.bo);
}

template <class Real>
Var<Real> ffn_forward(const Var<Real>& x, const FfnParams<Real>& p) {
  auto h = ops::gelu(ops::add_bias(ops::matmul(x, p.w1), p.b1));
  return ops::add_bias(ops::matmul(h, p.w2), p.b2);
}

}  // namespace litevl
