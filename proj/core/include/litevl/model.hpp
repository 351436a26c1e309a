#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "litevl/attention.hpp"
#include "litevl/config.hpp"
#include "litevl/objectives.hpp"
#include "litevl/pooling.hpp"
#include "litevl/text_encoder.hpp"
#include "litevl/video_encoder.hpp"
#include "litevl/vocab.hpp"

namespace litevl {

template <class Real>
struct ParamEntry {
  std::string name;
  Var<Real> var;
  bool scaling_lr = false;  // temporal-scaling bank trains at multiplier x lr
};

/// The whole trainable system: video encoder, shared text trunk, grounded
/// encoder's cross blocks, task heads, contrastive temperature. The registry
/// lists every learnable tensor exactly once, in construction order, under a
/// stable name; shared tensors appear once by construction.
template <class Real>
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    Rng rng(seed);
    video = init_video_encoder<Real>(cfg, rng);
    text = init_text_trunk<Real>(cfg, rng);
    cross = init_cross_blocks<Real>(cfg, rng);
    vtm_w = make_param(normal_tensor<Real>(rng, {cfg.hidden_dim, 2}, kInitStd));
    vtm_b = make_param(Tensor<Real>({2}));
    qa_w1 = make_param(normal_tensor<Real>(rng, {cfg.hidden_dim, cfg.hidden_dim}, kInitStd));
    qa_b1 = make_param(Tensor<Real>({cfg.hidden_dim}));
    qa_w2 = make_param(normal_tensor<Real>(rng, {cfg.hidden_dim, cfg.answer_count}, kInitStd));
    qa_b2 = make_param(Tensor<Real>({cfg.answer_count}));
    log_tau_c = init_log_tau_c<Real>(cfg.contrastive_temperature_init);
    build_registry();
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }

  VideoEncoderParams<Real> video;
  TextTrunkParams<Real> text;
  std::vector<CrossBlockParams<Real>> cross;
  Var<Real> vtm_w, vtm_b;
  Var<Real> qa_w1, qa_b1, qa_w2, qa_b2;
  Var<Real> log_tau_c;

  const std::vector<ParamEntry<Real>>& params() const { return params_; }

  Var<Real> param(const std::string& name) const {
    for (const auto& e : params_) {
      if (e.name == name) return e.var;
    }
    throw std::invalid_argument("no parameter named '" + name + "'");
  }

  void zero_grads() {
    for (auto& e : params_) e.var.node()->zero_grad();
  }

  std::map<std::string, Tensor<Real>> state_dict() const {
    std::map<std::string, Tensor<Real>> out;
    for (const auto& e : params_) out.emplace(e.name, e.var.value());
    return out;
  }

  void load_state(const std::map<std::string, Tensor<Real>>& state) {
    for (const auto& [name, tensor] : state) {
      bool found = false;
      for (auto& e : params_) {
        if (e.name == name) {
          found = true;
          if (e.var.value().shape() != tensor.shape()) {
            throw std::runtime_error("shape mismatch for tensor '" + name + "'");
          }
          e.var.node()->value = tensor;
          break;
        }
      }
      if (!found) throw std::runtime_error("unknown tensor name '" + name + "'");
    }
    if (state.size() != params_.size()) {
      throw std::runtime_error("state has " + std::to_string(state.size()) + " tensors, model has " +
                               std::to_string(params_.size()));
    }
  }

  EncodedVideo<Real> forward_video(const Tensor<Real>& video_tsd,
                                   EncoderVariant variant = EncoderVariant::kScaled) const {
    return encode_video(cfg_, video, video_tsd, variant);
  }

  EncodedText<Real> forward_text(const TokenSequence& seq) const {
    return encode_text(cfg_, text, seq);
  }

  PooledBundle<Real> forward_pool(const Var<Real>& v_l, const Var<Real>& t_cls_full) const {
    return pool_video(cfg_, v_l, t_cls_full);
  }

  GroundedOutput<Real> forward_grounded(const TokenSequence& seq, const Var<Real>& v_f,
                                        CrossAttnTrace<Real>* trace = nullptr) const {
    return encode_grounded(cfg_, text, cross, seq, v_f, trace);
  }

 private:
  void reg(std::string name, const Var<Real>& v, bool scaling = false) {
    params_.push_back({std::move(name), v, scaling});
  }
  void reg_ln(const std::string& prefix, const LnParams<Real>& p) {
    reg(prefix + ".gain", p.gain);
    reg(prefix + ".bias", p.bias);
  }
  void reg_attn(const std::string& prefix, const AttnParams<Real>& p) {
    reg(prefix + ".wq", p.wq);
    reg(prefix + ".wk", p.wk);
    reg(prefix + ".wv", p.wv);
    reg(prefix + ".wo", p.wo);
    reg(prefix + ".bq", p.bq);
    reg(prefix + ".bk", p.bk);
    reg(prefix + ".bv", p.bv);
    reg(prefix + ".bo", p.bo);
  }
  void reg_ffn(const std::string& prefix, const FfnParams<Real>& p) {
    reg(prefix + ".w1", p.w1);
    reg(prefix + ".b1", p.b1);
    reg(prefix + ".w2", p.w2);
    reg(prefix + ".b2", p.b2);
  }

  void build_registry() {
    reg("video.patch_embed.w", video.patch_embed_w);
    reg("video.patch_embed.b", video.patch_embed_b);
    reg("video.cls", video.cls);
    reg("video.pos_spatial", video.pos_spatial);
    reg("video.pos_temporal", video.pos_temporal);
    reg("video.gamma", video.gamma, /*scaling=*/true);
    for (std::size_t l = 0; l < video.blocks.size(); ++l) {
      const std::string b = "video.block" + std::to_string(l);
      reg_ln(b + ".ln_t", video.blocks[l].ln_t);
      reg_attn(b + ".tattn", video.blocks[l].tattn);
      reg_ln(b + ".ln_s", video.blocks[l].ln_s);
      reg_attn(b + ".sattn", video.blocks[l].sattn);
      reg_ln(b + ".ln_f", video.blocks[l].ln_f);
      reg_ffn(b + ".ffn", video.blocks[l].ffn);
    }
    reg_ln("video.ln_final", video.ln_final);
    reg("video.proj", video.proj);

    reg("text.tok_embed", text.tok_embed);
    reg("text.pos_embed", text.pos_embed);
    for (std::size_t l = 0; l < text.blocks.size(); ++l) {
      const std::string b = "text.block" + std::to_string(l);
      reg_ln(b + ".ln_a", text.blocks[l].ln_a);
      reg_attn(b + ".attn", text.blocks[l].attn);
      reg_ln(b + ".ln_f", text.blocks[l].ln_f);
      reg_ffn(b + ".ffn", text.blocks[l].ffn);
    }
    reg_ln("text.ln_final", text.ln_final);
    reg("text.proj", text.proj);

    for (std::size_t l = 0; l < cross.size(); ++l) {
      const std::string b = "cross.block" + std::to_string(l);
      reg_ln(b + ".ln_c", cross[l].ln_c);
      reg_attn(b + ".cattn", cross[l].cattn);
    }

    reg("head.vtm.w", vtm_w);
    reg("head.vtm.b", vtm_b);
    reg("head.qa.w1", qa_w1);
    reg("head.qa.b1", qa_b1);
    reg("head.qa.w2", qa_w2);
    reg("head.qa.b2", qa_b2);
    reg("tau_c.log", log_tau_c);
  }

  ModelConfig cfg_;
  std::vector<ParamEntry<Real>> params_;
};

}  // namespace litevl
