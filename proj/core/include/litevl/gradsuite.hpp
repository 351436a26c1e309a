#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "litevl/corpus.hpp"
#include "litevl/gradcheck.hpp"
#include "litevl/model.hpp"

namespace litevl {

struct GradSuiteCase {
  std::string name;
  GradCheckReport report;
  bool passed = false;
};

inline bool grad_suite_passed(const std::vector<GradSuiteCase>& cases) {
  for (const auto& c : cases) {
    if (!c.passed) return false;
  }
  return !cases.empty();
}

namespace suite_detail {

inline ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.num_layers = 2;
  cfg.frames = 2;
  cfg.patches_per_frame = 4;
  cfg.hidden_dim = 8;
  cfg.num_heads = 2;
  cfg.projection_dim = 4;
  cfg.ffn_dim = 16;
  cfg.patch_size = 4;
  cfg.frame_resolution = 8;
  cfg.vocab_size = 16;
  cfg.max_text_len = 6;
  cfg.answer_count = 4;
  return cfg;
}

using Params = std::vector<std::pair<std::string, Var<double>>>;

inline Var<double> leaf(Rng& rng, std::vector<std::size_t> shape, double std_dev = 0.5) {
  return make_param(normal_tensor<double>(rng, std::move(shape), std_dev));
}

}  // namespace suite_detail

/// Finite-difference checks for every differentiable op plus full model
/// graphs. All in double; tolerance applies to |analytic - numeric| /
/// max(1, |numeric|). max_coords caps coordinates per parameter on the big
/// end-to-end cases (0 means all).
inline std::vector<GradSuiteCase> run_grad_suite(double tol = 1e-4,
                                                 std::size_t max_coords = 4) {
  using suite_detail::Params;
  using suite_detail::leaf;
  std::vector<GradSuiteCase> cases;

  auto check = [&](const std::string& name, const std::function<Var<double>()>& loss_fn,
                   const Params& params, std::size_t coords) {
    GradSuiteCase c;
    c.name = name;
    c.report = grad_check<double>(loss_fn, params, 1e-5, coords);
    c.passed = c.report.max_rel_err < tol;
    cases.push_back(std::move(c));
  };

  Rng rng(314159);
  {
    auto x = leaf(rng, {3, 4});
    auto w = leaf(rng, {4, 5});
    check("matmul", [&] { return ops::sum_all(ops::matmul(x, w)); }, {{"x", x}, {"w", w}}, 0);
  }
  {
    auto x = leaf(rng, {3, 4});
    auto b = leaf(rng, {4});
    check("add_bias", [&] { return ops::sum_all(ops::mul(ops::add_bias(x, b), x)); },
          {{"x", x}, {"b", b}}, 0);
  }
  {
    auto x = leaf(rng, {2, 6});
    auto y = leaf(rng, {2, 6});
    check("arithmetic",
          [&] {
            auto s = ops::sub(ops::add(ops::scale(x, 1.7), ops::neg(y)), ops::mul(x, y));
            return ops::mean_all(ops::add_scalar(s, 0.3));
          },
          {{"x", x}, {"y", y}}, 0);
  }
  {
    auto x = leaf(rng, {3, 5});
    check("tanh_exp", [&] { return ops::sum_all(ops::mul(ops::tanh_op(x), ops::exp_op(ops::scale(x, 0.5)))); },
          {{"x", x}}, 0);
  }
  {
    auto x = leaf(rng, {4, 6});
    check("gelu", [&] { return ops::sum_all(ops::gelu(x)); }, {{"x", x}}, 0);
  }
  {
    auto x = leaf(rng, {3, 8});
    auto gain = leaf(rng, {8});
    auto bias = leaf(rng, {8});
    auto probe = leaf(rng, {3, 8});
    check("layer_norm",
          [&] { return ops::sum_all(ops::mul(ops::layer_norm(x, gain, bias), probe)); },
          {{"x", x}, {"gain", gain}, {"bias", bias}}, 0);
  }
  {
    auto x = leaf(rng, {3, 5});
    auto probe = leaf(rng, {3, 5});
    check("softmax_rows",
          [&] { return ops::sum_all(ops::mul(ops::softmax_rows(x), probe)); }, {{"x", x}}, 0);
  }
  {
    auto x = leaf(rng, {4, 6});
    auto probe = leaf(rng, {4, 6});
    check("l2_normalize_rows",
          [&] { return ops::sum_all(ops::mul(ops::l2_normalize_rows(x), probe)); }, {{"x", x}},
          0);
  }
  {
    auto x = leaf(rng, {2, 3, 4});
    auto probe_t = leaf(rng, {3, 4});
    auto probe_s = leaf(rng, {2, 4});
    check("mean_over_axis",
          [&] {
            auto a = ops::sum_all(ops::mul(ops::mean_over_axis(x, 0), probe_t));
            auto b = ops::sum_all(ops::mul(ops::mean_over_axis(x, 1), probe_s));
            return ops::add(a, b);
          },
          {{"x", x}}, 0);
  }
  {
    auto x = leaf(rng, {4, 5});
    check("cross_entropy",
          [&] { return ops::cross_entropy_with_indices(x, std::vector<std::size_t>{1, 0, 4, 2}); },
          {{"x", x}}, 0);
  }
  {
    auto a = leaf(rng, {2, 4});
    auto b = leaf(rng, {3, 4});
    auto probe = leaf(rng, {2, 8});
    check("structural",
          [&] {
            auto cat = ops::concat_rows<double>({a, b});
            auto sl = ops::slice_rows(cat, 1, 5);
            auto g = ops::gather_rows(ops::transpose(sl), std::vector<std::size_t>{3, 0, 1, 2});
            return ops::sum_all(ops::mul(ops::reshape(g, {2, 8}), probe));
          },
          {{"a", a}, {"b", b}}, 0);
  }
  {
    Rng arng(99);
    auto q = leaf(arng, {3, 8});
    auto kv = leaf(arng, {5, 8});
    auto p = init_attn<double>(arng, 8);
    auto probe = leaf(arng, {3, 8});
    Params params = {{"q", q},     {"kv", kv},   {"wq", p.wq}, {"wk", p.wk}, {"wv", p.wv},
                     {"wo", p.wo}, {"bq", p.bq}, {"bk", p.bk}, {"bv", p.bv}, {"bo", p.bo}};
    check("attention",
          [&] { return ops::sum_all(ops::mul(multi_head_attention(q, kv, p, 2), probe)); },
          params, 0);
  }

  const auto cfg = suite_detail::tiny_config();
  {
    Model<double> model(cfg, 2024);
    auto corpus = generate_synthetic_corpus<double>(cfg, 2, 7);
    Params params;
    for (const auto& e : model.params()) params.push_back({e.name, e.var});
    auto loss_fn = [&] {
      std::vector<Var<double>> v_rows, t_rows;
      std::vector<EncodedText<double>> texts;
      std::vector<Var<double>> v_ls;
      for (const auto& pair : corpus) {
        auto clip = patchify(pair.frames, cfg.patch_size);
        auto ev = model.forward_video(clip);
        auto et = model.forward_text(pair.caption);
        v_rows.push_back(ev.v_cls);
        t_rows.push_back(et.t_cls);
        texts.push_back(et);
        v_ls.push_back(ev.v_l);
      }
      auto ms = scaled_similarity(ops::concat_rows<double>(v_rows),
                                  ops::concat_rows<double>(t_rows), model.log_tau_c);
      auto vtc = vtc_loss_from_scores(ms);
      auto t_enc_for = [&](std::size_t text_i, std::size_t video_i) {
        auto bundle = model.forward_pool(v_ls[video_i], texts[text_i].t_cls_full);
        return model.forward_grounded(corpus[text_i].caption, bundle.v_f).t_enc;
      };
      // fixed swapped negatives keep the loss a pure function of the params
      auto pos = ops::concat_rows<double>({t_enc_for(0, 0), t_enc_for(1, 1)});
      auto vneg = ops::concat_rows<double>({t_enc_for(0, 1), t_enc_for(1, 0)});
      auto tneg = ops::concat_rows<double>({t_enc_for(1, 0), t_enc_for(0, 1)});
      auto vtm = vtm_loss(pos, vneg, tneg, model.vtm_w, model.vtm_b);
      return retrieval_loss(vtc, vtm);
    };
    check("end_to_end_retrieval", loss_fn, params, max_coords);
  }
  {
    Model<double> model(cfg, 2025);
    auto corpus = generate_synthetic_corpus<double>(cfg, 2, 8);
    Params params;
    for (const auto& e : model.params()) params.push_back({e.name, e.var});
    auto loss_fn = [&] {
      std::vector<Var<double>> rows;
      std::vector<std::size_t> answers;
      for (const auto& pair : corpus) {
        auto clip = patchify(pair.frames, cfg.patch_size);
        auto ev = model.forward_video(clip);
        auto et = model.forward_text(pair.caption);
        auto bundle = model.forward_pool(ev.v_l, et.t_cls_full);
        rows.push_back(model.forward_grounded(pair.caption, bundle.v_f).t_enc);
        answers.push_back(pair.qa_answer);
      }
      return vqa_loss(ops::concat_rows<double>(rows), model.qa_w1, model.qa_b1, model.qa_w2,
                      model.qa_b2, answers);
    };
    check("end_to_end_vqa", loss_fn, params, max_coords);
  }

  return cases;
}

}  // namespace litevl
