#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "litevl/corpus.hpp"
#include "litevl/frame_sampling.hpp"
#include "litevl/model.hpp"
#include "litevl/optimizer.hpp"

namespace litevl {

struct StepLog {
  std::size_t step = 0;
  double loss = 0, vtc = 0, vtm = 0;
  double lr = 0;
};

struct TrainResult {
  std::vector<StepLog> steps;
  double initial_loss = 0, final_loss = 0;
};

struct QaTrainResult {
  std::vector<StepLog> steps;             // vtc/vtm fields unused
  std::vector<double> val_accuracy;       // per epoch
  double best_val_accuracy = 0;
  std::size_t best_epoch = 0;
};

namespace train_detail {

// Distinct fork tags per random stream; epoch and step indices never collide.
inline constexpr std::uint64_t kShuffleTag = 0x10000000ull;
inline constexpr std::uint64_t kFramesTag = 0x20000000ull;
inline constexpr std::uint64_t kMiningTag = 0x30000000ull;
inline constexpr std::uint64_t kSplitTag = 0x40000000ull;

template <class Real>
Tensor<Real> train_clip(const ModelConfig& cfg, const Tensor<Real>& frames, Rng& rng) {
  if (frames.dim(0) == cfg.frames) return frames;
  return select_frames(frames,
                       sample_frames(frames.dim(0), cfg.frames, SampleMode::kTrain, rng));
}

inline std::size_t plan_steps(const TrainConfig& tc, std::size_t corpus_size) {
  const std::size_t batches = corpus_size / tc.batch_size;
  if (batches == 0) {
    throw std::invalid_argument("batch_size " + std::to_string(tc.batch_size) +
                                " exceeds corpus size " + std::to_string(corpus_size));
  }
  const std::size_t total = tc.max_steps > 0 ? tc.max_steps : tc.epochs * batches;
  if (total == 0) throw std::invalid_argument("training plan has zero steps");
  return total;
}

inline void check_frame_plan(const ModelConfig& cfg, const TrainConfig& tc) {
  if (tc.frames_train != cfg.frames || tc.frames_eval != cfg.frames) {
    throw std::invalid_argument("frames_train/frames_eval must match the model's frame count " +
                                std::to_string(cfg.frames));
  }
}

inline void require_finite_loss(double loss) {
  if (!std::isfinite(loss)) {
    throw std::runtime_error("training diverged (loss = " + std::to_string(loss) + ")");
  }
}

}  // namespace train_detail

/// Contrastive + matching training over matched pairs with in-batch hard
/// negatives. Deterministic in (config seed, corpus); logs one CSV row per
/// step when a stream is given.
template <class Real>
TrainResult train_retrieval(Model<Real>& model, const std::vector<SyntheticPair<Real>>& corpus,
                            const TrainConfig& tc, std::ostream* csv = nullptr) {
  tc.validate();
  const auto& cfg = model.config();
  train_detail::check_frame_plan(cfg, tc);
  if (tc.batch_size < 2) {
    throw std::invalid_argument("retrieval training needs batch_size >= 2 for negatives");
  }
  const std::size_t total_steps = train_detail::plan_steps(tc, corpus.size());
  AdamW<Real> opt(model, tc, total_steps);
  Rng root(tc.seed);

  if (csv) *csv << "step,loss,vtc,vtm,lr\n";

  TrainResult result;
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t step = 0;
  for (std::size_t epoch = 0; step < total_steps; ++epoch) {
    auto shuffle_rng = root.fork(train_detail::kShuffleTag + epoch);
    shuffle_rng.shuffle(order);
    const std::size_t batches = corpus.size() / tc.batch_size;
    for (std::size_t b = 0; b < batches && step < total_steps; ++b, ++step) {
      const double lr = lr_at_step(tc, step, total_steps);
      try {
        auto frame_rng = root.fork(train_detail::kFramesTag + step);
        auto mine_rng = root.fork(train_detail::kMiningTag + step);

        std::vector<std::size_t> batch(order.begin() + b * tc.batch_size,
                                       order.begin() + (b + 1) * tc.batch_size);
        std::vector<Var<Real>> v_l, t_full, v_cls_rows, t_cls_rows;
        for (std::size_t idx : batch) {
          auto clip = patchify(train_detail::train_clip(cfg, corpus[idx].frames, frame_rng),
                               cfg.patch_size);
          auto ev = model.forward_video(clip);
          auto et = model.forward_text(corpus[idx].caption);
          v_l.push_back(ev.v_l);
          t_full.push_back(et.t_cls_full);
          v_cls_rows.push_back(ev.v_cls);
          t_cls_rows.push_back(et.t_cls);
        }
        auto v_cls = ops::concat_rows(v_cls_rows);
        auto t_cls = ops::concat_rows(t_cls_rows);
        require_unit_rows(v_cls.value(), "train v_cls");
        require_unit_rows(t_cls.value(), "train t_cls");
        auto ms = scaled_similarity(v_cls, t_cls, model.log_tau_c);
        auto vtc = vtc_loss_from_scores(ms);
        auto mined = mine_hard_negatives(ms.value(), mine_rng);

        auto t_enc_for = [&](std::size_t text_slot, std::size_t video_slot) {
          auto bundle = model.forward_pool(v_l[video_slot], t_full[text_slot]);
          return model.forward_grounded(corpus[batch[text_slot]].caption, bundle.v_f).t_enc;
        };
        std::vector<Var<Real>> pos, vneg, tneg;
        for (std::size_t k = 0; k < batch.size(); ++k) {
          pos.push_back(t_enc_for(k, k));
          vneg.push_back(t_enc_for(k, mined.video_for_text[k]));
          tneg.push_back(t_enc_for(mined.text_for_video[k], k));
        }
        auto vtm = vtm_loss(ops::concat_rows(pos), ops::concat_rows(vneg),
                            ops::concat_rows(tneg), model.vtm_w, model.vtm_b);
        auto loss = retrieval_loss(vtc, vtm);

        const double loss_v = static_cast<double>(loss.value()[0]);
        train_detail::require_finite_loss(loss_v);
        model.zero_grads();
        backward(loss);
        opt.step();

        StepLog log{step, loss_v, static_cast<double>(vtc.value()[0]),
                    static_cast<double>(vtm.value()[0]), lr};
        if (csv) {
          *csv << log.step << ',' << log.loss << ',' << log.vtc << ',' << log.vtm << ','
               << log.lr << '\n';
        }
        result.steps.push_back(log);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("step " + std::to_string(step) + ": " + e.what());
      }
    }
  }
  result.initial_loss = result.steps.front().loss;
  result.final_loss = result.steps.back().loss;
  return result;
}

/// Answer accuracy of the classification head over matched pairs.
template <class Real>
double vqa_accuracy(const Model<Real>& model, const std::vector<SyntheticPair<Real>>& corpus,
                    const std::vector<std::size_t>& subset) {
  if (subset.empty()) throw std::invalid_argument("vqa_accuracy: empty subset");
  NoGradGuard guard;
  const auto& cfg = model.config();
  std::size_t hits = 0;
  for (std::size_t idx : subset) {
    auto clip = patchify(eval_clip(cfg, corpus[idx].frames), cfg.patch_size);
    auto ev = model.forward_video(clip);
    auto et = model.forward_text(corpus[idx].caption);
    auto bundle = model.forward_pool(ev.v_l, et.t_cls_full);
    auto t_enc = model.forward_grounded(corpus[idx].caption, bundle.v_f).t_enc;
    auto logits = vqa_logits(t_enc, model.qa_w1, model.qa_b1, model.qa_w2, model.qa_b2);
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.value().numel(); ++k) {
      if (logits.value()[k] > logits.value()[best]) best = k;
    }
    if (best == corpus[idx].qa_answer) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(subset.size());
}

template <class Real>
double vqa_accuracy(const Model<Real>& model, const std::vector<SyntheticPair<Real>>& corpus) {
  std::vector<std::size_t> all(corpus.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return vqa_accuracy(model, corpus, all);
}

/// Answer-classification training with a held-out validation split; the model
/// is left at the best-validation parameters.
template <class Real>
QaTrainResult train_vqa(Model<Real>& model, const std::vector<SyntheticPair<Real>>& corpus,
                        const TrainConfig& tc, std::ostream* csv = nullptr) {
  tc.validate();
  const auto& cfg = model.config();
  train_detail::check_frame_plan(cfg, tc);

  std::vector<std::size_t> all(corpus.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  Rng root(tc.seed);
  auto split_rng = root.fork(train_detail::kSplitTag);
  split_rng.shuffle(all);
  const auto val_count =
      static_cast<std::size_t>(tc.val_fraction * static_cast<double>(corpus.size()));
  std::vector<std::size_t> val(all.begin(), all.begin() + val_count);
  std::vector<std::size_t> train(all.begin() + val_count, all.end());
  if (val.empty()) val = train;  // degenerate split: validate on the train set

  const std::size_t total_steps = train_detail::plan_steps(tc, train.size());
  AdamW<Real> opt(model, tc, total_steps);

  if (csv) *csv << "step,loss,lr\n";

  QaTrainResult result;
  std::map<std::string, Tensor<Real>> best_state = model.state_dict();
  result.best_val_accuracy = vqa_accuracy(model, corpus, val);

  std::size_t step = 0;
  for (std::size_t epoch = 0; step < total_steps; ++epoch) {
    auto shuffle_rng = root.fork(train_detail::kShuffleTag + epoch);
    shuffle_rng.shuffle(train);
    const std::size_t batches = train.size() / tc.batch_size;
    for (std::size_t b = 0; b < batches && step < total_steps; ++b, ++step) {
      const double lr = lr_at_step(tc, step, total_steps);
      try {
        auto frame_rng = root.fork(train_detail::kFramesTag + step);
        std::vector<Var<Real>> t_enc_rows;
        std::vector<std::size_t> answers;
        for (std::size_t bi = 0; bi < tc.batch_size; ++bi) {
          const std::size_t idx = train[b * tc.batch_size + bi];
          auto clip = patchify(train_detail::train_clip(cfg, corpus[idx].frames, frame_rng),
                               cfg.patch_size);
          auto ev = model.forward_video(clip);
          auto et = model.forward_text(corpus[idx].caption);
          auto bundle = model.forward_pool(ev.v_l, et.t_cls_full);
          t_enc_rows.push_back(
              model.forward_grounded(corpus[idx].caption, bundle.v_f).t_enc);
          answers.push_back(corpus[idx].qa_answer);
        }
        auto loss = vqa_loss(ops::concat_rows(t_enc_rows), model.qa_w1, model.qa_b1,
                             model.qa_w2, model.qa_b2, answers);
        const double loss_v = static_cast<double>(loss.value()[0]);
        train_detail::require_finite_loss(loss_v);
        model.zero_grads();
        backward(loss);
        opt.step();

        StepLog log{step, loss_v, 0, 0, lr};
        if (csv) *csv << log.step << ',' << log.loss << ',' << log.lr << '\n';
        result.steps.push_back(log);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("step " + std::to_string(step) + ": " + e.what());
      }
    }
    const double acc = vqa_accuracy(model, corpus, val);
    result.val_accuracy.push_back(acc);
    if (acc > result.best_val_accuracy) {
      result.best_val_accuracy = acc;
      result.best_epoch = epoch;
      best_state = model.state_dict();
    }
  }
  model.load_state(best_state);
  return result;
}

}  // namespace litevl
