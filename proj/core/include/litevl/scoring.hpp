#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "litevl/corpus.hpp"
#include "litevl/frame_sampling.hpp"
#include "litevl/metrics.hpp"
#include "litevl/model.hpp"

namespace litevl {

/// Forward-only encodings of a whole corpus, reused across pairwise scoring.
template <class Real>
struct EncodedCorpus {
  std::vector<Var<Real>> v_l;          // per video
  std::vector<Var<Real>> t_cls_full;   // per caption, pre-projection
  std::vector<TokenSequence> captions;
  Tensor<Real> v_cls;  // N x D_p, unit rows
  Tensor<Real> t_cls;  // N x D_p, unit rows
};

template <class Real>
EncodedCorpus<Real> encode_corpus(const Model<Real>& model, const std::vector<SyntheticPair<Real>>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("encode_corpus: empty corpus");
  NoGradGuard guard;
  const auto& cfg = model.config();
  const std::size_t n = corpus.size();
  EncodedCorpus<Real> enc;
  enc.v_cls = Tensor<Real>({n, cfg.projection_dim});
  enc.t_cls = Tensor<Real>({n, cfg.projection_dim});
  for (std::size_t i = 0; i < n; ++i) {
    auto clip = patchify(eval_clip(cfg, corpus[i].frames), cfg.patch_size);
    auto ev = model.forward_video(clip);
    enc.v_l.push_back(ev.v_l);
    for (std::size_t j = 0; j < cfg.projection_dim; ++j) enc.v_cls(i, j) = ev.v_cls.value()[j];
    auto et = model.forward_text(corpus[i].caption);
    enc.t_cls_full.push_back(et.t_cls_full);
    enc.captions.push_back(corpus[i].caption);
    for (std::size_t j = 0; j < cfg.projection_dim; ++j) enc.t_cls(i, j) = et.t_cls.value()[j];
  }
  return enc;
}

/// Matching log-probability of (video i, text j) through pooling and the
/// grounded encoder.
template <class Real>
double vtm_pair_score(const Model<Real>& model, const EncodedCorpus<Real>& enc, std::size_t i,
                      std::size_t j) {
  NoGradGuard guard;
  auto bundle = model.forward_pool(enc.v_l[i], enc.t_cls_full[j]);
  auto grounded = model.forward_grounded(enc.captions[j], bundle.v_f);
  auto logits = ops::add_bias(ops::matmul(grounded.t_enc, model.vtm_w), model.vtm_b);
  return static_cast<double>(vtm_match_log_prob(logits.value()));
}

/// Both pairwise score matrices: s_vtc(i, j) = v_cls(i) . t_cls(j) and
/// s_vtm(i, j) the matched-class log-probability.
template <class Real>
std::pair<Tensor<double>, Tensor<double>> score_all(const Model<Real>& model,
                                                    const std::vector<SyntheticPair<Real>>& corpus) {
  auto enc = encode_corpus(model, corpus);
  const std::size_t n = corpus.size();
  Tensor<double> s_vtc({n, n}), s_vtm({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0;
      for (std::size_t d = 0; d < enc.v_cls.cols(); ++d) {
        dot += static_cast<double>(enc.v_cls(i, d)) * static_cast<double>(enc.t_cls(j, d));
      }
      s_vtc(i, j) = dot;
      s_vtm(i, j) = vtm_pair_score(model, enc, i, j);
    }
  }
  return {std::move(s_vtc), std::move(s_vtm)};
}

/// Candidate filtering by s_vtc, reranking of the top k by the expensive
/// score. vtm_score(i, j) is called exactly k times per query; candidates
/// outside the top k keep their first-stage order behind position k.
template <class Real, class ScoreFn>
RetrievalMetrics eval_two_stage(const Tensor<Real>& s_vtc, ScoreFn&& vtm_score, std::size_t k) {
  s_vtc.require_rank(2);
  const std::size_t n = s_vtc.rows();
  if (s_vtc.cols() != n) throw std::invalid_argument("eval_two_stage: matrix not square");
  if (k < 1 || k > n) throw std::invalid_argument("eval_two_stage: k out of range");

  std::vector<std::size_t> ranks(n);
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return s_vtc(a, j) > s_vtc(b, j);
    });

    std::size_t truth_pos = 0;
    while (order[truth_pos] != j) ++truth_pos;
    std::vector<double> top_scores(k);
    for (std::size_t c = 0; c < k; ++c) top_scores[c] = vtm_score(order[c], j);
    if (truth_pos >= k) {
      ranks[j] = truth_pos + 1;  // never reranked, keeps its first-stage slot
      continue;
    }
    std::size_t rank = 1;
    for (std::size_t c = 0; c < k; ++c) {
      if (c == truth_pos) continue;
      if (top_scores[c] > top_scores[truth_pos] ||
          (top_scores[c] == top_scores[truth_pos] && order[c] < j)) {
        ++rank;
      }
    }
    ranks[j] = rank;
  }
  return metrics_from_ranks(ranks);
}

/// Two-stage retrieval straight from a model and corpus.
template <class Real>
RetrievalMetrics eval_two_stage_model(const Model<Real>& model,
                                      const std::vector<SyntheticPair<Real>>& corpus,
                                      std::size_t k) {
  auto enc = encode_corpus(model, corpus);
  const std::size_t n = corpus.size();
  Tensor<double> s_vtc({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0;
      for (std::size_t d = 0; d < enc.v_cls.cols(); ++d) {
        dot += static_cast<double>(enc.v_cls(i, d)) * static_cast<double>(enc.t_cls(j, d));
      }
      s_vtc(i, j) = dot;
    }
  }
  return eval_two_stage(s_vtc,
                        [&](std::size_t i, std::size_t j) { return vtm_pair_score(model, enc, i, j); },
                        k);
}

}  // namespace litevl
