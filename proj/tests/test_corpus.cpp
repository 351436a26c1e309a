#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "litevl/corpus.hpp"
#include "litevl/frame_sampling.hpp"
#include "toy_setup.hpp"

using namespace litevl;

namespace {

template <class Real>
bool tensors_bitwise_equal(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

// dot product of frame t with a pattern image
template <class Real>
double frame_correlation(const Tensor<Real>& frames, std::size_t t, const Tensor<Real>& pattern) {
  const std::size_t n = pattern.numel();
  double dot = 0;
  for (std::size_t k = 0; k < n; ++k) {
    dot += static_cast<double>(frames[t * n + k]) * static_cast<double>(pattern[k]);
  }
  return dot;
}

}  // namespace

TEST_CASE("corpus generation is deterministic in config and seed") {
  auto cfg = toy_config();
  auto a = generate_synthetic_corpus<float>(cfg, 8, 123);
  auto b = generate_synthetic_corpus<float>(cfg, 8, 123);
  REQUIRE(a.size() == 8);
  REQUIRE(b.size() == 8);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pair_id == i);
    CHECK(a[i].caption.content == b[i].caption.content);
    CHECK(a[i].signal_frame == b[i].signal_frame);
    CHECK(a[i].qa_answer == b[i].qa_answer);
    CHECK(tensors_bitwise_equal(a[i].frames, b[i].frames));
  }
}

TEST_CASE("corpus seed changes the caption assignment") {
  auto cfg = toy_config();
  auto a = generate_synthetic_corpus<float>(cfg, 8, 1);
  auto b = generate_synthetic_corpus<float>(cfg, 8, 2);
  bool any_differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].caption.content != b[i].caption.content) any_differs = true;
  }
  CHECK(any_differs);
}

TEST_CASE("captions are distinct object-motion pairs from the vocabulary") {
  auto cfg = toy_config();
  Vocab vocab(cfg.vocab_size);
  auto corpus = generate_synthetic_corpus<float>(cfg, 32, 9);
  std::set<std::vector<std::size_t>> seen;
  for (const auto& pair : corpus) {
    REQUIRE(pair.caption.content.size() == 2);
    CHECK(vocab.is_object(pair.caption.content[0]));
    CHECK(!vocab.is_object(pair.caption.content[1]));
    CHECK(pair.caption.content[1] >= 2 + vocab.n_objects());
    CHECK(pair.caption.content[1] < vocab.size());
    seen.insert(pair.caption.content);
  }
  CHECK(seen.size() == 32);
}

TEST_CASE("qa answer is the object index modulo the answer count") {
  auto cfg = toy_config();
  Vocab vocab(cfg.vocab_size);
  auto corpus = generate_synthetic_corpus<float>(cfg, 16, 5);
  for (const auto& pair : corpus) {
    const std::size_t obj = vocab.object_index(pair.caption.content[0]);
    CHECK(pair.qa_answer == obj % cfg.answer_count);
    CHECK(pair.qa_answer < cfg.answer_count);
  }
}

TEST_CASE("token patterns depend only on the token id") {
  auto a = token_pattern<float>(3, 8);
  auto b = token_pattern<float>(3, 8);
  auto c = token_pattern<float>(4, 8);
  CHECK(tensors_bitwise_equal(a, b));
  CHECK(!tensors_bitwise_equal(a, c));
  REQUIRE(a.shape() == std::vector<std::size_t>{8, 8});
}

TEST_CASE("the planted pattern is detectable in exactly the signal frame") {
  auto cfg = toy_config();
  auto corpus = generate_synthetic_corpus<double>(cfg, 32, 77);
  std::size_t localized = 0;
  for (const auto& pair : corpus) {
    auto p_obj = token_pattern<double>(pair.caption.content[0], cfg.frame_resolution);
    auto p_mot = token_pattern<double>(pair.caption.content[1], cfg.frame_resolution);
    Tensor<double> pattern(p_obj.shape());
    for (std::size_t k = 0; k < pattern.numel(); ++k) pattern[k] = p_obj[k] + p_mot[k];

    std::size_t best = 0;
    double best_corr = -1e300;
    for (std::size_t t = 0; t < cfg.frames; ++t) {
      const double corr = frame_correlation(pair.frames, t, pattern);
      if (corr > best_corr) {
        best_corr = corr;
        best = t;
      }
    }
    if (best == pair.signal_frame) ++localized;
    CHECK(pair.signal_frame < cfg.frames);
  }
  // amplitude 1 vs noise sigma 0.1 makes the correlation test near-certain
  CHECK(localized == 32);
}

TEST_CASE("off-signal frames are pure noise at the configured scale") {
  auto cfg = toy_config();
  auto corpus = generate_synthetic_corpus<double>(cfg, 16, 31);
  double sum = 0, sumsq = 0;
  std::size_t n = 0;
  for (const auto& pair : corpus) {
    const std::size_t fpx = cfg.frame_resolution * cfg.frame_resolution;
    for (std::size_t t = 0; t < cfg.frames; ++t) {
      if (t == pair.signal_frame) continue;
      for (std::size_t k = 0; k < fpx; ++k) {
        const double v = pair.frames[t * fpx + k];
        sum += v;
        sumsq += v * v;
        ++n;
      }
    }
  }
  const double mean = sum / static_cast<double>(n);
  const double stddev = std::sqrt(sumsq / static_cast<double>(n) - mean * mean);
  CHECK(std::abs(mean) < 0.02);
  CHECK(stddev == doctest::Approx(kCorpusNoiseSigma).epsilon(0.15));
}

TEST_CASE("corpus rejects impossible sizes") {
  auto cfg = toy_config();
  CHECK_THROWS_AS(generate_synthetic_corpus<float>(cfg, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic_corpus<float>(cfg, 10000, 0), std::invalid_argument);
  Vocab vocab(cfg.vocab_size);
  const std::size_t combos = vocab.n_objects() * vocab.n_motions();
  CHECK_NOTHROW(generate_synthetic_corpus<float>(cfg, combos, 0));
  CHECK_THROWS_AS(generate_synthetic_corpus<float>(cfg, combos + 1, 0), std::invalid_argument);
}

TEST_CASE("eval frame sampling picks bin midpoints") {
  Rng rng(0);
  CHECK(sample_frames(16, 4, SampleMode::kEval, rng) ==
        std::vector<std::size_t>{2, 6, 10, 14});
  CHECK(sample_frames(10, 4, SampleMode::kEval, rng) == std::vector<std::size_t>{1, 3, 6, 8});
  CHECK(sample_frames(4, 4, SampleMode::kEval, rng) == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(sample_frames(9, 1, SampleMode::kEval, rng) == std::vector<std::size_t>{4});
}

TEST_CASE("eval frame sampling is rng-independent") {
  Rng a(1), b(99);
  CHECK(sample_frames(17, 4, SampleMode::kEval, a) == sample_frames(17, 4, SampleMode::kEval, b));
}

TEST_CASE("train frame sampling draws half from each temporal half") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    auto idx = sample_frames(10, 4, SampleMode::kTrain, rng);
    REQUIRE(idx.size() == 4);
    for (std::size_t i = 1; i < idx.size(); ++i) CHECK(idx[i - 1] < idx[i]);
    CHECK(idx[0] < 5);
    CHECK(idx[1] < 5);
    CHECK(idx[2] >= 5);
    CHECK(idx[3] >= 5);
    for (auto v : idx) CHECK(v < 10);
  }
}

TEST_CASE("train frame sampling covers every admissible index") {
  std::set<std::size_t> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    for (auto v : sample_frames(8, 4, SampleMode::kTrain, rng)) seen.insert(v);
  }
  CHECK(seen.size() == 8);
}

TEST_CASE("train frame sampling is deterministic per rng state") {
  Rng a(7), b(7);
  CHECK(sample_frames(12, 6, SampleMode::kTrain, a) ==
        sample_frames(12, 6, SampleMode::kTrain, b));
}

TEST_CASE("frame sampling rejects bad requests") {
  Rng rng(0);
  CHECK_THROWS_AS(sample_frames(8, 0, SampleMode::kEval, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_frames(3, 4, SampleMode::kEval, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_frames(8, 3, SampleMode::kTrain, rng), std::invalid_argument);
  CHECK_NOTHROW(sample_frames(8, 3, SampleMode::kEval, rng));
}

TEST_CASE("select_frames copies whole frames in the requested order") {
  Tensor<float> frames({4, 2, 2});
  for (std::size_t i = 0; i < frames.numel(); ++i) frames[i] = static_cast<float>(i);
  auto picked = select_frames(frames, {2, 0});
  REQUIRE(picked.shape() == std::vector<std::size_t>{2, 2, 2});
  CHECK(picked[0] == 8.0f);
  CHECK(picked[1] == 9.0f);
  CHECK(picked[2] == 10.0f);
  CHECK(picked[3] == 11.0f);
  CHECK(picked[4] == 0.0f);
  CHECK(picked[7] == 3.0f);
  CHECK_THROWS_AS(select_frames(frames, {4}), std::invalid_argument);
}

TEST_CASE("eval_clip is the identity at native length") {
  auto cfg = toy_config();
  Tensor<float> frames({cfg.frames, cfg.frame_resolution, cfg.frame_resolution});
  Rng rng(3);
  for (std::size_t i = 0; i < frames.numel(); ++i) frames[i] = static_cast<float>(rng.normal());
  auto clip = eval_clip(cfg, frames);
  CHECK(tensors_bitwise_equal(clip, frames));
}

TEST_CASE("eval_clip subsamples longer videos on the eval grid") {
  auto cfg = toy_config();
  const std::size_t total = cfg.frames * 3;
  Tensor<float> frames({total, cfg.frame_resolution, cfg.frame_resolution});
  for (std::size_t i = 0; i < frames.numel(); ++i) frames[i] = static_cast<float>(i % 101);
  auto clip = eval_clip(cfg, frames);
  Rng rng(0);
  auto expected = select_frames(frames, sample_frames(total, cfg.frames, SampleMode::kEval, rng));
  CHECK(tensors_bitwise_equal(clip, expected));
}
