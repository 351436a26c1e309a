#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "litevl/config.hpp"
#include "litevl/rng.hpp"
#include "litevl/tensor.hpp"
#include "litevl/vocab.hpp"

namespace litevl {

/// One video-caption pair. The video holds raw square frames; the caption is
/// [object, motion]; signal_frame is the one frame carrying the caption's
/// planted pattern and serves as localization ground truth.
template <class Real>
struct SyntheticPair {
  std::size_t pair_id = 0;
  Tensor<Real> frames;  // T x res x res
  TokenSequence caption;
  std::size_t signal_frame = 0;
  std::size_t qa_answer = 0;
};

/// Deterministic per-token pattern image. Depends only on the token id, so the
/// same word paints the same texture in every corpus.
template <class Real>
Tensor<Real> token_pattern(std::size_t token_id, std::size_t resolution) {
  Rng rng(splitmix64(0x70a77e12u ^ static_cast<std::uint64_t>(token_id)));
  Tensor<Real> img({resolution, resolution});
  for (std::size_t i = 0; i < img.numel(); ++i) {
    img[i] = static_cast<Real>(rng.normal());
  }
  return img;
}

inline constexpr double kCorpusNoiseSigma = 0.02;
inline constexpr double kCorpusSignalAmplitude = 2.0;

/// Bijective corpus: n distinct [object, motion] captions, each assigned one
/// video of Gaussian noise plus the caption's pattern planted in a uniformly
/// chosen signal frame. qa_answer is derived from the object token alone.
template <class Real>
std::vector<SyntheticPair<Real>> generate_synthetic_corpus(const ModelConfig& cfg,
                                                           std::size_t n_pairs,
                                                           std::uint64_t seed) {
  cfg.validate();
  if (n_pairs < 2) throw std::invalid_argument("corpus: need at least 2 pairs");
  Vocab vocab(cfg.vocab_size);
  const std::size_t combos = vocab.n_objects() * vocab.n_motions();
  if (n_pairs > combos) {
    throw std::invalid_argument("corpus: " + std::to_string(n_pairs) +
                                " pairs exceed the " + std::to_string(combos) +
                                " distinct captions");
  }

  Rng root(seed);
  std::vector<std::size_t> combo_ids(combos);
  for (std::size_t i = 0; i < combos; ++i) combo_ids[i] = i;
  auto shuffle_rng = root.fork(0);
  shuffle_rng.shuffle(combo_ids);

  const std::size_t res = cfg.frame_resolution;
  const std::size_t t_count = cfg.frames;
  std::vector<SyntheticPair<Real>> corpus;
  corpus.reserve(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const std::size_t obj = combo_ids[i] / vocab.n_motions();
    const std::size_t mot = combo_ids[i] % vocab.n_motions();

    SyntheticPair<Real> pair;
    pair.pair_id = i;
    pair.caption.content = {vocab.object_id(obj), vocab.motion_id(mot)};
    pair.qa_answer = obj % cfg.answer_count;

    auto rng = root.fork(1 + i);
    pair.signal_frame = static_cast<std::size_t>(rng.uniform_index(t_count));

    pair.frames = Tensor<Real>({t_count, res, res});
    for (std::size_t k = 0; k < pair.frames.numel(); ++k) {
      pair.frames[k] = static_cast<Real>(rng.normal(0.0, kCorpusNoiseSigma));
    }
    auto p_obj = token_pattern<Real>(pair.caption.content[0], res);
    auto p_mot = token_pattern<Real>(pair.caption.content[1], res);
    Real* signal = pair.frames.data() + pair.signal_frame * res * res;
    for (std::size_t k = 0; k < res * res; ++k) {
      signal[k] += static_cast<Real>(kCorpusSignalAmplitude) * (p_obj[k] + p_mot[k]);
    }
    corpus.push_back(std::move(pair));
  }
  return corpus;
}

}  // namespace litevl
