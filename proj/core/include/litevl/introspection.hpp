#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "litevl/corpus.hpp"
#include "litevl/frame_sampling.hpp"
#include "litevl/model.hpp"

namespace litevl {

/// Temporal scaling bank with the derived gates alpha = tanh(gamma) + 1 and
/// per-layer means.
struct ScalingReport {
  Tensor<double> gamma;  // L x T
  Tensor<double> alpha;  // L x T
  std::vector<double> layer_mean_gamma;
  std::vector<double> layer_mean_alpha;
};

template <class Real>
ScalingReport build_scaling_report(const Tensor<Real>& gamma) {
  gamma.require_rank(2);
  ScalingReport r;
  r.gamma = Tensor<double>(gamma.shape());
  r.alpha = Tensor<double>(gamma.shape());
  for (std::size_t l = 0; l < gamma.rows(); ++l) {
    double gsum = 0, asum = 0;
    for (std::size_t t = 0; t < gamma.cols(); ++t) {
      const double g = static_cast<double>(gamma(l, t));
      const double a = std::tanh(g) + 1.0;
      r.gamma(l, t) = g;
      r.alpha(l, t) = a;
      gsum += g;
      asum += a;
    }
    r.layer_mean_gamma.push_back(gsum / static_cast<double>(gamma.cols()));
    r.layer_mean_alpha.push_back(asum / static_cast<double>(gamma.cols()));
  }
  return r;
}

/// One row per (layer, frame); per-layer means follow with "mean" in the
/// frame column.
inline void write_scalings_csv(const ScalingReport& r, std::ostream& os) {
  os << std::setprecision(17);
  os << "layer,frame,gamma,alpha\n";
  for (std::size_t l = 0; l < r.gamma.rows(); ++l) {
    for (std::size_t t = 0; t < r.gamma.cols(); ++t) {
      os << l << ',' << t << ',' << r.gamma(l, t) << ',' << r.alpha(l, t) << '\n';
    }
  }
  for (std::size_t l = 0; l < r.gamma.rows(); ++l) {
    os << l << ",mean," << r.layer_mean_gamma[l] << ',' << r.layer_mean_alpha[l] << '\n';
  }
}

/// Writes the weights captured in a forward pass; never recomputes.
template <class Real>
void write_temporal_weights_csv(const PooledBundle<Real>& bundle, std::ostream& os) {
  if (!bundle.g_t.defined()) {
    throw std::invalid_argument("no temporal weights captured (pooling mode without reweighting)");
  }
  os << std::setprecision(17);
  os << "frame,weight\n";
  for (std::size_t t = 0; t < bundle.g_t.value().numel(); ++t) {
    os << t << ',' << bundle.g_t.value()[t] << '\n';
  }
}

template <class Real>
void write_spatial_weights_csv(const PooledBundle<Real>& bundle, std::ostream& os) {
  if (!bundle.g_s.defined()) {
    throw std::invalid_argument("no spatial weights captured (pooling mode without reweighting)");
  }
  os << std::setprecision(17);
  os << "position,weight\n";
  for (std::size_t s = 0; s < bundle.g_s.value().numel(); ++s) {
    os << s << ',' << bundle.g_s.value()[s] << '\n';
  }
}

/// Nonnegative T x S relevance grid, max-normalized to 1 when any cell is
/// positive.
struct RelevanceMap {
  Tensor<double> grid;  // T x S
};

/// Rectified attention-times-gradient relevance from one query row of the
/// head-averaged attention map and its gradient, restricted to the patch-key
/// slice.
inline RelevanceMap relevance_from(const std::vector<double>& attn,
                                   const std::vector<double>& grad, std::size_t t_count,
                                   std::size_t s_count) {
  if (attn.size() != t_count * s_count || grad.size() != attn.size()) {
    throw std::invalid_argument("relevance_from: slice does not match the T x S grid");
  }
  RelevanceMap map;
  map.grid = Tensor<double>({t_count, s_count});
  double mx = 0;
  for (std::size_t i = 0; i < attn.size(); ++i) {
    map.grid[i] = std::max(0.0, grad[i] * attn[i]);
    mx = std::max(mx, map.grid[i]);
  }
  if (mx > 0) {
    for (std::size_t i = 0; i < map.grid.numel(); ++i) map.grid[i] /= mx;
  }
  return map;
}

/// Relevance of the video patches for one text query position, from the
/// cross-attention at one layer. Gradients flow from the matched-class
/// matching logit. Mutates parameter gradients; callers mid-training should
/// zero afterwards.
template <class Real>
RelevanceMap gradcam(Model<Real>& model, const SyntheticPair<Real>& pair,
                     std::size_t layer_index, std::size_t token_position) {
  const auto& cfg = model.config();
  if (layer_index >= cfg.num_layers) {
    throw std::invalid_argument("gradcam: layer_index out of range");
  }
  const std::size_t text_rows = 1 + pair.caption.content.size();
  if (token_position >= text_rows) {
    throw std::invalid_argument("gradcam: token position out of range");
  }

  auto clip = patchify(eval_clip(cfg, pair.frames), cfg.patch_size);
  auto ev = model.forward_video(clip);
  auto et = model.forward_text(pair.caption);
  auto bundle = model.forward_pool(ev.v_l, et.t_cls_full);
  CrossAttnTrace<Real> trace;
  auto grounded = model.forward_grounded(pair.caption, bundle.v_f, &trace);
  auto logit = vtm_match_logit(grounded.t_enc, model.vtm_w, model.vtm_b);

  model.zero_grads();
  backward(logit);

  const auto& heads = trace.layer_head_probs.at(layer_index);
  const std::size_t t_count = cfg.frames;
  const std::size_t s_count = cfg.patches_per_frame;
  const std::size_t offset =
      v_l_row_offset(cfg.pooling_mode, t_count, s_count) + 1;  // skip V_L's [CLS] row
  std::vector<double> attn(t_count * s_count, 0.0), grad(t_count * s_count, 0.0);
  for (const auto& p : heads) {
    const auto& a = p.value();
    const auto& g = p.grad();
    for (std::size_t i = 0; i < attn.size(); ++i) {
      attn[i] += static_cast<double>(a(token_position, offset + i));
      grad[i] += static_cast<double>(g(token_position, offset + i));
    }
  }
  for (auto& v : attn) v /= static_cast<double>(heads.size());
  for (auto& v : grad) v /= static_cast<double>(heads.size());
  return relevance_from(attn, grad, t_count, s_count);
}

inline constexpr std::size_t kHeatmapCellPixels = 16;

/// Binary PGM (P5) with each grid cell drawn as a square block of pixels.
inline void render_heatmap(const RelevanceMap& map, std::ostream& os) {
  map.grid.require_rank(2);
  const std::size_t h = map.grid.rows() * kHeatmapCellPixels;
  const std::size_t w = map.grid.cols() * kHeatmapCellPixels;
  os << "P5\n" << w << ' ' << h << "\n255\n";
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double v = map.grid(y / kHeatmapCellPixels, x / kHeatmapCellPixels);
      const double clamped = std::min(1.0, std::max(0.0, v));
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0))));
    }
  }
}

}  // namespace litevl
