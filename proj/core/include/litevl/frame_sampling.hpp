#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "litevl/config.hpp"
#include "litevl/rng.hpp"
#include "litevl/tensor.hpp"

namespace litevl {

enum class SampleMode {
  kTrain,  // N/2 without replacement from each half, sorted
  kEval    // fixed uniform grid
};

/// Frame indices for a clip of n_frames out of total frames.
inline std::vector<std::size_t> sample_frames(std::size_t total, std::size_t n_frames,
                                              SampleMode mode, Rng& rng) {
  if (n_frames == 0) throw std::invalid_argument("sample_frames: need at least one frame");
  if (total < n_frames) {
    throw std::invalid_argument("sample_frames: video has " + std::to_string(total) +
                                " frames, need " + std::to_string(n_frames));
  }
  std::vector<std::size_t> out;
  out.reserve(n_frames);
  if (mode == SampleMode::kEval) {
    for (std::size_t i = 0; i < n_frames; ++i) {
      out.push_back((2 * i + 1) * total / (2 * n_frames));
    }
    return out;
  }

  if (n_frames % 2 != 0) {
    throw std::invalid_argument("sample_frames: training clip length must be even");
  }
  const std::size_t half = n_frames / 2;
  const std::size_t mid = total / 2;
  if (mid < half || total - mid < half) {
    throw std::invalid_argument("sample_frames: halves too short for the clip length");
  }
  auto draw_half = [&](std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> pool;
    pool.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) pool.push_back(i);
    rng.shuffle(pool);
    out.insert(out.end(), pool.begin(), pool.begin() + half);
  };
  draw_half(0, mid);
  draw_half(mid, total);
  std::sort(out.begin(), out.end());
  return out;
}

/// Piece a clip together from whole frames of a T x res x res tensor.
template <class Real>
Tensor<Real> select_frames(const Tensor<Real>& frames, const std::vector<std::size_t>& indices);

/// Uniform-grid clip when the stored video is longer than the model's frame
/// count, identity otherwise.
template <class Real>
Tensor<Real> eval_clip(const ModelConfig& cfg, const Tensor<Real>& frames) {
  if (frames.dim(0) == cfg.frames) return frames;
  Rng dummy(0);
  return select_frames(frames, sample_frames(frames.dim(0), cfg.frames, SampleMode::kEval, dummy));
}

template <class Real>
Tensor<Real> select_frames(const Tensor<Real>& frames, const std::vector<std::size_t>& indices) {
  frames.require_rank(3);
  const std::size_t stride = frames.dim(1) * frames.dim(2);
  Tensor<Real> out({indices.size(), frames.dim(1), frames.dim(2)});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= frames.dim(0)) {
      throw std::invalid_argument("select_frames: index out of range");
    }
    const Real* src = frames.data() + indices[i] * stride;
    std::copy(src, src + stride, out.data() + i * stride);
  }
  return out;
}

}  // namespace litevl
