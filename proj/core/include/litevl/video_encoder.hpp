#pragma once

#include <cstddef>
#include <vector>

#include "litevl/attention.hpp"
#include "litevl/config.hpp"
#include "litevl/graph.hpp"
#include "litevl/ops.hpp"
#include "litevl/rng.hpp"

namespace litevl {

enum class EncoderVariant {
  kScaled,      // temporal attention output gated by alpha = tanh(gamma) + 1
  kUnscaled,    // divided space-time baseline, alpha fixed at 1
  kSpatialOnly  // temporal sub-layer removed entirely
};

template <class Real>
struct VideoBlockParams {
  LnParams<Real> ln_t, ln_s, ln_f;
  AttnParams<Real> tattn, sattn;
  FfnParams<Real> ffn;
};

template <class Real>
struct VideoEncoderParams {
  Var<Real> patch_embed_w;  // patch_dim x D
  Var<Real> patch_embed_b;  // D
  Var<Real> cls;            // 1 x D
  Var<Real> pos_spatial;    // S x D, shared across frames
  Var<Real> pos_temporal;   // T x D, zero-initialized
  Var<Real> gamma;          // L x T temporal scaling bank, zero-initialized
  std::vector<VideoBlockParams<Real>> blocks;
  LnParams<Real> ln_final;
  Var<Real> proj;  // D x D_p
};

template <class Real>
struct EncodedVideo {
  Var<Real> v_l;    // (1+ST) x D, row 0 is [CLS]
  Var<Real> v_cls;  // 1 x D_p, unit norm
};

/// Copies the spatial attention weights into the temporal slot; with the
/// zero-output option the output projection starts silenced instead.
template <class Real>
void init_temporal_from_spatial(VideoBlockParams<Real>& blk, bool zero_output) {
  auto copy_into = [](Var<Real>& dst, const Var<Real>& src) {
    dst.node()->value = src.value();
  };
  copy_into(blk.tattn.wq, blk.sattn.wq);
  copy_into(blk.tattn.wk, blk.sattn.wk);
  copy_into(blk.tattn.wv, blk.sattn.wv);
  copy_into(blk.tattn.bq, blk.sattn.bq);
  copy_into(blk.tattn.bk, blk.sattn.bk);
  copy_into(blk.tattn.bv, blk.sattn.bv);
  if (zero_output) {
    blk.tattn.wo.node()->value.fill(Real(0));
    blk.tattn.bo.node()->value.fill(Real(0));
  } else {
    copy_into(blk.tattn.wo, blk.sattn.wo);
    copy_into(blk.tattn.bo, blk.sattn.bo);
  }
}

template <class Real>
VideoEncoderParams<Real> init_video_encoder(const ModelConfig& cfg, Rng& rng) {
  VideoEncoderParams<Real> p;
  const std::size_t d = cfg.hidden_dim;
  p.patch_embed_w = make_param(normal_tensor<Real>(rng, {cfg.patch_dim(), d}, kInitStd));
  p.patch_embed_b = make_param(Tensor<Real>({d}));
  p.cls = make_param(normal_tensor<Real>(rng, {1, d}, kInitStd));
  p.pos_spatial = make_param(normal_tensor<Real>(rng, {cfg.patches_per_frame, d}, kInitStd));
  p.pos_temporal = make_param(Tensor<Real>({cfg.frames, d}));
  p.gamma = make_param(Tensor<Real>({cfg.num_layers, cfg.frames}));
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    VideoBlockParams<Real> blk;
    blk.ln_t = init_ln<Real>(d);
    blk.tattn = init_attn<Real>(rng, d);
    blk.ln_s = init_ln<Real>(d);
    blk.sattn = init_attn<Real>(rng, d);
    blk.ln_f = init_ln<Real>(d);
    blk.ffn = init_ffn<Real>(rng, d, cfg.ffn_dim);
    init_temporal_from_spatial(blk, cfg.zero_init_temporal_output);
    p.blocks.push_back(std::move(blk));
  }
  p.ln_final = init_ln<Real>(d);
  p.proj = make_param(normal_tensor<Real>(rng, {d, cfg.projection_dim}, kInitStd));
  return p;
}

/// Splits raw single-channel frames (T x res x res) into non-overlapping
/// patches in raster order: output T x S x patch_size^2.
template <class Real>
Tensor<Real> patchify(const Tensor<Real>& frames, std::size_t patch_size) {
  frames.require_rank(3);
  const std::size_t t_count = frames.dim(0);
  const std::size_t res = frames.dim(1);
  if (frames.dim(2) != res) throw std::invalid_argument("patchify: frames must be square");
  if (patch_size == 0 || res % patch_size != 0) {
    throw std::invalid_argument("patchify: resolution not divisible by patch size");
  }
  const std::size_t per_side = res / patch_size;
  const std::size_t s_count = per_side * per_side;
  const std::size_t pd = patch_size * patch_size;
  Tensor<Real> out({t_count, s_count, pd});
  for (std::size_t t = 0; t < t_count; ++t) {
    for (std::size_t py = 0; py < per_side; ++py) {
      for (std::size_t px = 0; px < per_side; ++px) {
        const std::size_t s = py * per_side + px;
        for (std::size_t y = 0; y < patch_size; ++y) {
          for (std::size_t x = 0; x < patch_size; ++x) {
            out[(t * s_count + s) * pd + y * patch_size + x] =
                frames[(t * res + py * patch_size + y) * res + px * patch_size + x];
          }
        }
      }
    }
  }
  return out;
}

/// One divided space-time block. Patch rows are frame-major: token 1 + t*S + s
/// is frame t, spatial position s. [CLS] skips temporal attention and is
/// averaged over the per-frame spatial attention groups.
template <class Real>
Var<Real> divided_block(const ModelConfig& cfg, const VideoBlockParams<Real>& blk,
                        const Var<Real>& gamma_row, const Var<Real>& x_in,
                        EncoderVariant variant) {
  const std::size_t t_count = cfg.frames;
  const std::size_t s_count = cfg.patches_per_frame;
  const std::size_t st = t_count * s_count;
  if (x_in.value().rows() != 1 + st) {
    throw std::invalid_argument("divided_block: expected " + std::to_string(1 + st) + " tokens");
  }
  if (gamma_row.value().numel() != t_count) {
    throw std::invalid_argument("divided_block: gamma row length must equal frames");
  }
  Var<Real> x = x_in;

  if (variant != EncoderVariant::kSpatialOnly) {
    auto h = ops::layer_norm(x, blk.ln_t.gain, blk.ln_t.bias);
    auto hp = ops::slice_rows(h, 1, 1 + st);
    std::vector<Var<Real>> per_position;
    per_position.reserve(s_count);
    for (std::size_t s = 0; s < s_count; ++s) {
      std::vector<std::size_t> idx(t_count);
      for (std::size_t t = 0; t < t_count; ++t) idx[t] = t * s_count + s;
      auto column = ops::gather_rows(hp, idx);
      per_position.push_back(multi_head_attention(column, column, blk.tattn, cfg.num_heads));
    }
    auto cat = ops::concat_rows(per_position);  // row s*T + t
    std::vector<std::size_t> back(st);
    for (std::size_t t = 0; t < t_count; ++t)
      for (std::size_t s = 0; s < s_count; ++s) back[t * s_count + s] = s * t_count + t;
    auto tout = ops::gather_rows(cat, back);  // frame-major again

    if (variant == EncoderVariant::kScaled) {
      auto alpha = ops::add_scalar(ops::tanh_op(gamma_row), Real(1));  // 1 x T
      std::vector<std::size_t> expand(st);
      for (std::size_t t = 0; t < t_count; ++t)
        for (std::size_t s = 0; s < s_count; ++s) expand[t * s_count + s] = t;
      auto alpha_rows = ops::gather_rows(ops::reshape(alpha, {t_count, 1}), expand);
      tout = ops::scale_rows(tout, alpha_rows);
    }
    auto patches = ops::add(ops::slice_rows(x, 1, 1 + st), tout);
    x = ops::concat_rows<Real>({ops::row(x, 0), patches});
  }

  {
    auto h = ops::layer_norm(x, blk.ln_s.gain, blk.ln_s.bias);
    auto cls_h = ops::row(h, 0);
    std::vector<Var<Real>> cls_outs;
    std::vector<Var<Real>> frame_outs;
    for (std::size_t t = 0; t < t_count; ++t) {
      auto frame = ops::slice_rows(h, 1 + t * s_count, 1 + (t + 1) * s_count);
      auto grp = ops::concat_rows<Real>({cls_h, frame});
      auto o = multi_head_attention(grp, grp, blk.sattn, cfg.num_heads);
      cls_outs.push_back(ops::row(o, 0));
      frame_outs.push_back(ops::slice_rows(o, 1, 1 + s_count));
    }
    auto cls_avg = ops::reshape(ops::mean_over_axis(ops::concat_rows(cls_outs), 0),
                                {1, cfg.hidden_dim});
    std::vector<Var<Real>> parts;
    parts.push_back(cls_avg);
    for (auto& f : frame_outs) parts.push_back(f);
    x = ops::add(x, ops::concat_rows(parts));
  }

  {
    auto h = ops::layer_norm(x, blk.ln_f.gain, blk.ln_f.bias);
    x = ops::add(x, ffn_forward(h, blk.ffn));
  }
  return x;
}

/// Full encoder: patch embedding + positions + [CLS], L divided blocks, final
/// layer norm, projected unit-norm [CLS] embedding.
template <class Real>
EncodedVideo<Real> encode_video(const ModelConfig& cfg, const VideoEncoderParams<Real>& p,
                                const Tensor<Real>& video,
                                EncoderVariant variant = EncoderVariant::kScaled) {
  video.require_rank(3);
  if (video.dim(0) != cfg.frames || video.dim(1) != cfg.patches_per_frame ||
      video.dim(2) != cfg.patch_dim()) {
    throw std::invalid_argument("encode_video: video tensor does not match config");
  }
  const std::size_t t_count = cfg.frames;
  const std::size_t s_count = cfg.patches_per_frame;
  const std::size_t st = t_count * s_count;

  auto patches = make_const(
      Tensor<Real>({st, cfg.patch_dim()}, video.storage()), "video_patches");
  auto x = ops::add_bias(ops::matmul(patches, p.patch_embed_w), p.patch_embed_b);

  std::vector<std::size_t> sp_idx(st), tp_idx(st);
  for (std::size_t t = 0; t < t_count; ++t) {
    for (std::size_t s = 0; s < s_count; ++s) {
      sp_idx[t * s_count + s] = s;
      tp_idx[t * s_count + s] = t;
    }
  }
  x = ops::add(x, ops::gather_rows(p.pos_spatial, sp_idx));
  x = ops::add(x, ops::gather_rows(p.pos_temporal, tp_idx));
  x = ops::concat_rows<Real>({p.cls, x});

  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    auto gamma_row = ops::slice_rows(p.gamma, l, l + 1);
    x = divided_block(cfg, p.blocks[l], gamma_row, x, variant);
  }
  EncodedVideo<Real> out;
  out.v_l = ops::layer_norm(x, p.ln_final.gain, p.ln_final.bias);
  out.v_cls = ops::l2_normalize_rows(ops::matmul(ops::row(out.v_l, 0), p.proj));
  return out;
}

}  // namespace litevl
