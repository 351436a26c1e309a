#pragma once

#include <cstddef>

#include "litevl/config.hpp"
#include "litevl/graph.hpp"
#include "litevl/ops.hpp"

namespace litevl {

/// Everything produced while assembling V_f. The reweighting fields are only
/// defined in text_dependent mode; introspection reads the captured nodes
/// rather than recomputing.
template <class Real>
struct PooledBundle {
  Var<Real> v_ft;  // T x D spatial mean per frame
  Var<Real> v_fs;  // S x D temporal mean per position
  Var<Real> g_t;   // 1 x T softmax weights
  Var<Real> g_s;   // 1 x S
  Var<Real> v_ft_tilde;  // T x D reweighted
  Var<Real> v_fs_tilde;  // S x D
  Var<Real> v_f;   // assembled feature matrix handed to the grounded encoder
};

/// Spatial and temporal means of the patch rows; [CLS] row excluded.
template <class Real>
std::pair<Var<Real>, Var<Real>> mean_pools(const Var<Real>& v_l, std::size_t t_count,
                                           std::size_t s_count) {
  const std::size_t st = t_count * s_count;
  if (v_l.value().rank() != 2 || v_l.value().rows() != 1 + st) {
    throw std::invalid_argument("mean_pools: expected " + std::to_string(1 + st) + " rows, got " +
                                shape_str(v_l.value().shape()));
  }
  const std::size_t d = v_l.value().cols();
  auto patches = ops::reshape(ops::slice_rows(v_l, 1, 1 + st), {t_count, s_count, d});
  auto v_ft = ops::mean_over_axis(patches, 1);  // T x D
  auto v_fs = ops::mean_over_axis(patches, 0);  // S x D
  return {v_ft, v_fs};
}

/// Cosine-similarity softmax weights against the text [CLS]; the
/// un-normalized pooled features are then reweighted as T*g[t] * row t, which
/// preserves total weight mass relative to plain concatenation.
template <class Real>
void text_dependent_reweight(PooledBundle<Real>& bundle, const Var<Real>& t_cls_full, Real tau) {
  if (!(tau > Real(0))) throw std::invalid_argument("text_dependent_reweight: tau must be > 0");
  if (t_cls_full.value().rank() != 2 || t_cls_full.value().rows() != 1) {
    throw std::invalid_argument("text_dependent_reweight: t_cls_full must be 1 x D");
  }
  auto t_norm_t = ops::transpose(ops::l2_normalize_rows(t_cls_full));  // D x 1

  auto weigh = [&](const Var<Real>& pooled) {
    auto sims = ops::transpose(ops::matmul(ops::l2_normalize_rows(pooled), t_norm_t));  // 1 x n
    return ops::softmax_rows(sims, tau);
  };
  const std::size_t t_count = bundle.v_ft.value().rows();
  const std::size_t s_count = bundle.v_fs.value().rows();
  bundle.g_t = weigh(bundle.v_ft);
  bundle.g_s = weigh(bundle.v_fs);
  bundle.v_ft_tilde = ops::scale_rows(
      bundle.v_ft, ops::reshape(ops::scale(bundle.g_t, Real(t_count)), {t_count, 1}));
  bundle.v_fs_tilde = ops::scale_rows(
      bundle.v_fs, ops::reshape(ops::scale(bundle.g_s, Real(s_count)), {s_count, 1}));
}

/// Row order is always [temporal part, spatial part, V_L]; which parts appear
/// depends on the mode, and only text_dependent uses the reweighted versions.
template <class Real>
Var<Real> assemble_features(PoolingMode mode, const Var<Real>& v_l,
                            const PooledBundle<Real>& bundle) {
  switch (mode) {
    case PoolingMode::kTextDependent:
      return ops::concat_rows<Real>({bundle.v_ft_tilde, bundle.v_fs_tilde, v_l});
    case PoolingMode::kVanilla:
      return ops::concat_rows<Real>({bundle.v_ft, bundle.v_fs, v_l});
    case PoolingMode::kOriginal:
      return v_l;
    case PoolingMode::kOriginalTemporal:
      return ops::concat_rows<Real>({bundle.v_ft, v_l});
    case PoolingMode::kOriginalSpatial:
      return ops::concat_rows<Real>({bundle.v_fs, v_l});
  }
  throw std::invalid_argument("assemble_features: unknown mode");
}

/// One-call pipeline from V_L (+ text [CLS] in text_dependent mode) to the
/// bundle with V_f set.
template <class Real>
PooledBundle<Real> pool_video(const ModelConfig& cfg, const Var<Real>& v_l,
                              const Var<Real>& t_cls_full) {
  PooledBundle<Real> bundle;
  auto [v_ft, v_fs] = mean_pools(v_l, cfg.frames, cfg.patches_per_frame);
  bundle.v_ft = v_ft;
  bundle.v_fs = v_fs;
  if (cfg.pooling_mode == PoolingMode::kTextDependent) {
    text_dependent_reweight(bundle, t_cls_full, static_cast<Real>(cfg.pooling_temperature));
  }
  bundle.v_f = assemble_features(cfg.pooling_mode, v_l, bundle);
  return bundle;
}

/// Mean over all reweighted pooled rows; the dual-stream-style alternative to
/// concatenation. Requires a text_dependent bundle.
template <class Real>
Var<Real> pool_weighted_average(const PooledBundle<Real>& bundle) {
  if (!bundle.v_ft_tilde.defined() || !bundle.v_fs_tilde.defined()) {
    throw std::invalid_argument("pool_weighted_average: bundle lacks reweighted features");
  }
  auto cat = ops::concat_rows<Real>({bundle.v_ft_tilde, bundle.v_fs_tilde});
  return ops::reshape(ops::mean_over_axis(cat, 0), {1, cat.value().cols()});
}

/// Expected V_f row count for a mode; the grounded encoder checks against it.
inline std::size_t v_f_rows(PoolingMode mode, std::size_t t, std::size_t s) {
  const std::size_t st = 1 + t * s;
  switch (mode) {
    case PoolingMode::kTextDependent:
    case PoolingMode::kVanilla: return t + s + st;
    case PoolingMode::kOriginal: return st;
    case PoolingMode::kOriginalTemporal: return t + st;
    case PoolingMode::kOriginalSpatial: return s + st;
  }
  throw std::invalid_argument("v_f_rows: unknown mode");
}

/// Column offset of the V_L block inside V_f's rows, used by introspection to
/// cut the patch-key slice out of a cross-attention map.
inline std::size_t v_l_row_offset(PoolingMode mode, std::size_t t, std::size_t s) {
  switch (mode) {
    case PoolingMode::kTextDependent:
    case PoolingMode::kVanilla: return t + s;
    case PoolingMode::kOriginal: return 0;
    case PoolingMode::kOriginalTemporal: return t;
    case PoolingMode::kOriginalSpatial: return s;
  }
  throw std::invalid_argument("v_l_row_offset: unknown mode");
}

}  // namespace litevl
