// End-to-end benchmarks: encoder passes, pooled match scoring, one optimizer
// step, and a relevance map, all at the default desk dimensions.

#include <benchmark/benchmark.h>

#include "litevl/corpus.hpp"
#include "litevl/frame_sampling.hpp"
#include "litevl/introspection.hpp"
#include "litevl/model.hpp"
#include "litevl/objectives.hpp"
#include "litevl/scoring.hpp"
#include "litevl/trainer.hpp"
#include "litevl/video_encoder.hpp"

namespace {

using litevl::Model;
using litevl::ModelConfig;
using litevl::Tensor;
using litevl::TrainConfig;

struct DeskFixture {
  ModelConfig cfg;
  Model<float> model;
  std::vector<litevl::SyntheticPair<float>> corpus;
  Tensor<float> clip;

  DeskFixture()
      : model(cfg, 42),
        corpus(litevl::generate_synthetic_corpus<float>(cfg, 16, 3)),
        clip(litevl::patchify(litevl::eval_clip(cfg, corpus[0].frames), cfg.patch_size)) {}
};

DeskFixture& fixture() {
  static DeskFixture fx;
  return fx;
}

void BM_VideoEncoder(benchmark::State& state) {
  auto& fx = fixture();
  litevl::NoGradGuard guard;
  for (auto _ : state) {
    auto ev = fx.model.forward_video(fx.clip);
    benchmark::DoNotOptimize(ev.v_cls.value()[0]);
  }
}
BENCHMARK(BM_VideoEncoder);

void BM_TextEncoder(benchmark::State& state) {
  auto& fx = fixture();
  litevl::NoGradGuard guard;
  for (auto _ : state) {
    auto et = fx.model.forward_text(fx.corpus[0].caption);
    benchmark::DoNotOptimize(et.t_cls.value()[0]);
  }
}
BENCHMARK(BM_TextEncoder);

void BM_PoolAndMatch(benchmark::State& state) {
  auto& fx = fixture();
  litevl::NoGradGuard guard;
  const auto ev = fx.model.forward_video(fx.clip);
  const auto et = fx.model.forward_text(fx.corpus[0].caption);
  for (auto _ : state) {
    auto bundle = fx.model.forward_pool(ev.v_l, et.t_cls_full);
    auto grounded = fx.model.forward_grounded(fx.corpus[0].caption, bundle.v_f);
    auto logit = litevl::vtm_match_logit(grounded.t_enc, fx.model.vtm_w, fx.model.vtm_b);
    benchmark::DoNotOptimize(logit.value()[0]);
  }
}
BENCHMARK(BM_PoolAndMatch);

void BM_TrainStep(benchmark::State& state) {
  auto& fx = fixture();
  TrainConfig tc;
  tc.max_steps = 1;
  tc.batch_size = 8;
  for (auto _ : state) {
    state.PauseTiming();
    Model<float> model(fx.cfg, 7);  // fresh weights so every step does real work
    state.ResumeTiming();
    auto result = litevl::train_retrieval(model, fx.corpus, tc);
    benchmark::DoNotOptimize(result.final_loss);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_RelevanceMap(benchmark::State& state) {
  auto& fx = fixture();
  for (auto _ : state) {
    auto map = litevl::gradcam(fx.model, fx.corpus[0], fx.cfg.num_layers - 1, 0);
    benchmark::DoNotOptimize(map.grid[0]);
  }
}
BENCHMARK(BM_RelevanceMap)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
