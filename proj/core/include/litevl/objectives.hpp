#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "litevl/graph.hpp"
#include "litevl/ops.hpp"
#include "litevl/rng.hpp"
#include "litevl/tensor.hpp"

namespace litevl {

/// tau_c lives in log space so positivity needs no clamping.
template <class Real>
Var<Real> init_log_tau_c(double tau_c_init) {
  if (!(tau_c_init > 0.0)) throw std::invalid_argument("tau_c init must be positive");
  return make_param(Tensor<Real>::scalar(static_cast<Real>(std::log(tau_c_init))),
                    "log_tau_c");
}

template <class Real>
void require_unit_rows(const Tensor<Real>& m, const char* what, double tol = 1e-4) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Real ss = 0;
    for (std::size_t j = 0; j < m.cols(); ++j) ss += m(i, j) * m(i, j);
    if (std::abs(std::sqrt(static_cast<double>(ss)) - 1.0) > tol) {
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(i) +
                                  " is not unit-norm");
    }
  }
}

/// Temperature-scaled similarity matrix: v_cls . t_cls^T / tau_c.
template <class Real>
Var<Real> scaled_similarity(const Var<Real>& v_cls, const Var<Real>& t_cls,
                            const Var<Real>& log_tau_c) {
  auto m = ops::matmul(v_cls, ops::transpose(t_cls));
  auto inv_tau = ops::exp_op(ops::neg(log_tau_c));
  return ops::scale_by(m, inv_tau);
}

/// Symmetric InfoNCE given a precomputed scaled similarity matrix; lets the
/// trainer reuse the same graph node for hard-negative mining.
template <class Real>
Var<Real> vtc_loss_from_scores(const Var<Real>& ms) {
  const std::size_t b = ms.value().rows();
  if (ms.value().rank() != 2 || ms.value().cols() != b) {
    throw std::invalid_argument("vtc_loss_from_scores: matrix must be square");
  }
  std::vector<std::size_t> diag(b);
  for (std::size_t i = 0; i < b; ++i) diag[i] = i;
  auto l_v2t = ops::cross_entropy_with_indices(ms, diag);
  auto l_t2v = ops::cross_entropy_with_indices(ops::transpose(ms), diag);
  return ops::scale(ops::add(l_v2t, l_t2v), Real(0.5));
}

/// Symmetric InfoNCE over a batch with positives on the diagonal.
template <class Real>
Var<Real> vtc_loss(const Var<Real>& v_cls, const Var<Real>& t_cls, const Var<Real>& log_tau_c) {
  if (v_cls.value().shape() != t_cls.value().shape() || v_cls.value().rank() != 2) {
    throw std::invalid_argument("vtc_loss: v_cls and t_cls must be equal-shape matrices");
  }
  const std::size_t b = v_cls.value().rows();
  if (b < 1) throw std::invalid_argument("vtc_loss: empty batch");
  require_unit_rows(v_cls.value(), "vtc_loss v_cls");
  require_unit_rows(t_cls.value(), "vtc_loss t_cls");
  return vtc_loss_from_scores(scaled_similarity(v_cls, t_cls, log_tau_c));
}

struct MinedNegatives {
  std::vector<std::size_t> text_for_video;  // per video k: a text j != k
  std::vector<std::size_t> video_for_text;  // per text k: a video i != k
};

/// Samples negatives proportional to the softmax of the scaled similarities
/// with the diagonal masked out: rows give hard text negatives per video,
/// columns give hard video negatives per text.
template <class Real>
MinedNegatives mine_hard_negatives(const Tensor<Real>& m_scaled, Rng& rng) {
  m_scaled.require_rank(2);
  const std::size_t b = m_scaled.rows();
  if (b != m_scaled.cols()) throw std::invalid_argument("mine_hard_negatives: matrix not square");
  if (b < 2) throw std::invalid_argument("mine_hard_negatives: need at least 2 pairs");

  MinedNegatives out;
  out.text_for_video.resize(b);
  out.video_for_text.resize(b);
  std::vector<double> w(b);

  for (std::size_t k = 0; k < b; ++k) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b; ++j) {
      if (j != k) mx = std::max(mx, static_cast<double>(m_scaled(k, j)));
    }
    for (std::size_t j = 0; j < b; ++j) {
      w[j] = (j == k) ? 0.0 : std::exp(static_cast<double>(m_scaled(k, j)) - mx);
    }
    out.text_for_video[k] = rng.categorical(w);
  }
  for (std::size_t k = 0; k < b; ++k) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < b; ++i) {
      if (i != k) mx = std::max(mx, static_cast<double>(m_scaled(i, k)));
    }
    for (std::size_t i = 0; i < b; ++i) {
      w[i] = (i == k) ? 0.0 : std::exp(static_cast<double>(m_scaled(i, k)) - mx);
    }
    out.video_for_text[k] = rng.categorical(w);
  }
  return out;
}

/// Two-class cross entropy over B matched and 2B mined pairs; class 1 means
/// matched.
template <class Real>
Var<Real> vtm_loss(const Var<Real>& t_enc_pos, const Var<Real>& t_enc_video_neg,
                   const Var<Real>& t_enc_text_neg, const Var<Real>& head_w,
                   const Var<Real>& head_b) {
  const std::size_t b = t_enc_pos.value().rows();
  if (t_enc_video_neg.value().rows() != b || t_enc_text_neg.value().rows() != b) {
    throw std::invalid_argument("vtm_loss: negative batches must match positive batch size");
  }
  auto all = ops::concat_rows<Real>({t_enc_pos, t_enc_video_neg, t_enc_text_neg});
  auto logits = ops::add_bias(ops::matmul(all, head_w), head_b);
  std::vector<std::size_t> labels(3 * b, 0);
  for (std::size_t i = 0; i < b; ++i) labels[i] = 1;
  return ops::cross_entropy_with_indices(logits, labels);
}

/// Matched-class (class 1) log-probability of a single t_enc; the VTM score
/// used for reranking.
template <class Real>
Var<Real> vtm_match_logit(const Var<Real>& t_enc, const Var<Real>& head_w,
                          const Var<Real>& head_b) {
  auto logits = ops::add_bias(ops::matmul(t_enc, head_w), head_b);
  return ops::slice_cols(logits, 1, 2);
}

template <class Real>
Real vtm_match_log_prob(const Tensor<Real>& logits_row) {
  const Real z0 = logits_row[0], z1 = logits_row[1];
  const Real mx = std::max(z0, z1);
  return z1 - (mx + std::log(std::exp(z0 - mx) + std::exp(z1 - mx)));
}

/// K-class cross entropy over the two-layer MLP head on t_enc.
template <class Real>
Var<Real> vqa_loss(const Var<Real>& t_enc_batch, const Var<Real>& w1, const Var<Real>& b1,
                   const Var<Real>& w2, const Var<Real>& b2,
                   const std::vector<std::size_t>& answers) {
  auto h = ops::gelu(ops::add_bias(ops::matmul(t_enc_batch, w1), b1));
  auto logits = ops::add_bias(ops::matmul(h, w2), b2);
  return ops::cross_entropy_with_indices(logits, answers);
}

template <class Real>
Var<Real> vqa_logits(const Var<Real>& t_enc_batch, const Var<Real>& w1, const Var<Real>& b1,
                     const Var<Real>& w2, const Var<Real>& b2) {
  auto h = ops::gelu(ops::add_bias(ops::matmul(t_enc_batch, w1), b1));
  return ops::add_bias(ops::matmul(h, w2), b2);
}

template <class Real>
Var<Real> retrieval_loss(const Var<Real>& vtc, const Var<Real>& vtm) {
  return ops::add(vtc, vtm);
}

}  // namespace litevl
