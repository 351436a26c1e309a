#pragma once

#include <cstddef>
#include <vector>

#include "litevl/attention.hpp"
#include "litevl/config.hpp"
#include "litevl/graph.hpp"
#include "litevl/ops.hpp"
#include "litevl/rng.hpp"
#include "litevl/vocab.hpp"

namespace litevl {

template <class Real>
struct TextBlockParams {
  LnParams<Real> ln_a;
  AttnParams<Real> attn;
  LnParams<Real> ln_f;
  FfnParams<Real> ffn;
};

/// The shared trunk: embeddings, self-attention blocks, FFNs, final norm,
/// contrastive projection. Both text encoders read these same tensors.
template <class Real>
struct TextTrunkParams {
  Var<Real> tok_embed;  // vocab x D
  Var<Real> pos_embed;  // max_text_len x D
  std::vector<TextBlockParams<Real>> blocks;
  LnParams<Real> ln_final;
  Var<Real> proj;  // D x D_p
};

/// Per-layer cross-attention block owned by the grounded encoder alone.
template <class Real>
struct CrossBlockParams {
  LnParams<Real> ln_c;
  AttnParams<Real> cattn;
};

template <class Real>
struct EncodedText {
  Var<Real> token_states;  // len x D after final norm
  Var<Real> t_cls_full;    // 1 x D, un-projected row 0 (pooling consumes this)
  Var<Real> t_cls;         // 1 x D_p, unit norm (contrastive loss consumes this)
};

template <class Real>
struct GroundedOutput {
  Var<Real> t_enc;  // 1 x D at the mode-token position
};

/// Per cross-attention layer, the per-head probability nodes over V_f keys;
/// filled only when a trace pointer is supplied to encode_grounded.
template <class Real>
struct CrossAttnTrace {
  std::vector<std::vector<Var<Real>>> layer_head_probs;
};

template <class Real>
TextTrunkParams<Real> init_text_trunk(const ModelConfig& cfg, Rng& rng) {
  TextTrunkParams<Real> p;
  const std::size_t d = cfg.hidden_dim;
  p.tok_embed = make_param(normal_tensor<Real>(rng, {cfg.vocab_size, d}, kInitStd));
  p.pos_embed = make_param(normal_tensor<Real>(rng, {cfg.max_text_len, d}, kInitStd));
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    TextBlockParams<Real> blk;
    blk.ln_a = init_ln<Real>(d);
    blk.attn = init_attn<Real>(rng, d);
    blk.ln_f = init_ln<Real>(d);
    blk.ffn = init_ffn<Real>(rng, d, cfg.ffn_dim);
    p.blocks.push_back(std::move(blk));
  }
  p.ln_final = init_ln<Real>(d);
  p.proj = make_param(normal_tensor<Real>(rng, {d, cfg.projection_dim}, kInitStd));
  return p;
}

template <class Real>
std::vector<CrossBlockParams<Real>> init_cross_blocks(const ModelConfig& cfg, Rng& rng) {
  std::vector<CrossBlockParams<Real>> blocks;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    CrossBlockParams<Real> blk;
    blk.ln_c = init_ln<Real>(cfg.hidden_dim);
    blk.cattn = init_attn<Real>(rng, cfg.hidden_dim);
    blocks.push_back(std::move(blk));
  }
  return blocks;
}

template <class Real>
Var<Real> embed_sequence(const ModelConfig& cfg, const TextTrunkParams<Real>& p,
                         std::size_t mode_token, const TokenSequence& seq) {
  validate_sequence(seq, cfg.vocab_size, cfg.max_text_len);
  std::vector<std::size_t> ids;
  ids.push_back(mode_token);
  ids.insert(ids.end(), seq.content.begin(), seq.content.end());
  std::vector<std::size_t> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = i;
  return ops::add(ops::gather_rows(p.tok_embed, ids), ops::gather_rows(p.pos_embed, positions));
}

/// The unimodal pipeline at an arbitrary mode token: embeddings, L pre-norm
/// self-attention + FFN blocks, final norm. Exposed so the grounded encoder's
/// zero-cross-branch behavior can be compared against it directly.
template <class Real>
Var<Real> trunk_states(const ModelConfig& cfg, const TextTrunkParams<Real>& p,
                       std::size_t mode_token, const TokenSequence& seq) {
  auto x = embed_sequence(cfg, p, mode_token, seq);
  for (const auto& blk : p.blocks) {
    auto h = ops::layer_norm(x, blk.ln_a.gain, blk.ln_a.bias);
    x = ops::add(x, multi_head_attention(h, h, blk.attn, cfg.num_heads));
    auto h2 = ops::layer_norm(x, blk.ln_f.gain, blk.ln_f.bias);
    x = ops::add(x, ffn_forward(h2, blk.ffn));
  }
  return ops::layer_norm(x, p.ln_final.gain, p.ln_final.bias);
}

template <class Real>
EncodedText<Real> encode_text(const ModelConfig& cfg, const TextTrunkParams<Real>& p,
                              const TokenSequence& seq) {
  EncodedText<Real> out;
  out.token_states = trunk_states(cfg, p, kClsTokenId, seq);
  out.t_cls_full = ops::row(out.token_states, 0);
  out.t_cls = ops::l2_normalize_rows(ops::matmul(out.t_cls_full, p.proj));
  return out;
}

/// Video-grounded text encoder: the shared self-attention/FFN blocks with an
/// unshared cross-attention layer inserted after each self-attention. Queries
/// come from the text states, keys/values from V_f as-is.
template <class Real>
GroundedOutput<Real> encode_grounded(const ModelConfig& cfg, const TextTrunkParams<Real>& trunk,
                                     const std::vector<CrossBlockParams<Real>>& cross,
                                     const TokenSequence& seq, const Var<Real>& v_f,
                                     CrossAttnTrace<Real>* trace = nullptr) {
  if (cross.size() != cfg.num_layers) {
    throw std::invalid_argument("encode_grounded: cross block count must equal num_layers");
  }
  if (v_f.value().rank() != 2 || v_f.value().cols() != cfg.hidden_dim) {
    throw std::invalid_argument("encode_grounded: V_f width must equal hidden_dim");
  }
  auto x = embed_sequence(cfg, trunk, kEncodeTokenId, seq);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const auto& blk = trunk.blocks[l];
    auto h = ops::layer_norm(x, blk.ln_a.gain, blk.ln_a.bias);
    x = ops::add(x, multi_head_attention(h, h, blk.attn, cfg.num_heads));

    auto hc = ops::layer_norm(x, cross[l].ln_c.gain, cross[l].ln_c.bias);
    std::vector<Var<Real>>* probs_out = nullptr;
    if (trace) {
      trace->layer_head_probs.emplace_back();
      probs_out = &trace->layer_head_probs.back();
    }
    x = ops::add(x, multi_head_attention(hc, v_f, cross[l].cattn, cfg.num_heads, probs_out));

    auto h2 = ops::layer_norm(x, blk.ln_f.gain, blk.ln_f.bias);
    x = ops::add(x, ffn_forward(h2, blk.ffn));
  }
  auto final_states = ops::layer_norm(x, trunk.ln_final.gain, trunk.ln_final.bias);
  GroundedOutput<Real> out;
  out.t_enc = ops::row(final_states, 0);
  return out;
}

}  // namespace litevl
