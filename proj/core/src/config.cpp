#include "litevl/config.hpp"

#include <stdexcept>

#include "json.hpp"

namespace litevl {

PoolingMode pooling_mode_from_string(const std::string& s) {
  if (s == "text_dependent") return PoolingMode::kTextDependent;
  if (s == "vanilla") return PoolingMode::kVanilla;
  if (s == "original") return PoolingMode::kOriginal;
  if (s == "original+temporal") return PoolingMode::kOriginalTemporal;
  if (s == "original+spatial") return PoolingMode::kOriginalSpatial;
  throw std::invalid_argument("unknown pooling mode '" + s + "'");
}

std::string pooling_mode_to_string(PoolingMode m) {
  switch (m) {
    case PoolingMode::kTextDependent: return "text_dependent";
    case PoolingMode::kVanilla: return "vanilla";
    case PoolingMode::kOriginal: return "original";
    case PoolingMode::kOriginalTemporal: return "original+temporal";
    case PoolingMode::kOriginalSpatial: return "original+spatial";
  }
  throw std::invalid_argument("unknown pooling mode value");
}

void ModelConfig::validate() const {
  if (num_layers < 1 || frames < 1 || patches_per_frame < 1) {
    throw std::invalid_argument("num_layers, frames, patches_per_frame must be >= 1");
  }
  if (hidden_dim == 0 || num_heads == 0 || hidden_dim % num_heads != 0) {
    throw std::invalid_argument("hidden_dim must be a positive multiple of num_heads");
  }
  if (projection_dim == 0 || ffn_dim == 0) {
    throw std::invalid_argument("projection_dim and ffn_dim must be positive");
  }
  if (patch_size == 0 || frame_resolution % patch_size != 0) {
    throw std::invalid_argument("frame_resolution must be divisible by patch_size");
  }
  const std::size_t per_side = frame_resolution / patch_size;
  if (per_side * per_side != patches_per_frame) {
    throw std::invalid_argument("patches_per_frame must equal (frame_resolution/patch_size)^2");
  }
  if (!(pooling_temperature > 0.0)) {
    throw std::invalid_argument("pooling_temperature must be positive");
  }
  if (!(contrastive_temperature_init > 0.0)) {
    throw std::invalid_argument("contrastive_temperature_init must be positive");
  }
  if (answer_count < 1) throw std::invalid_argument("answer_count must be >= 1");
  if (vocab_size < 4) {
    throw std::invalid_argument("vocab_size must be >= 4 (two reserved ids plus content)");
  }
  if (max_text_len < 2) {
    throw std::invalid_argument("max_text_len must be >= 2 (mode token plus content)");
  }
}

void TrainConfig::validate() const {
  // zero is allowed: a no-op schedule is the cheapest determinism probe
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (!(scaling_lr_multiplier > 0.0)) {
    throw std::invalid_argument("scaling_lr_multiplier must be positive");
  }
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("betas must lie in [0, 1)");
  }
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) {
    throw std::invalid_argument("warmup_ratio must lie in [0, 1)");
  }
  if (schedule != "linear") {
    throw std::invalid_argument("unknown schedule '" + schedule + "' (only 'linear')");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 1 && max_steps == 0) {
    throw std::invalid_argument("either epochs or max_steps must be positive");
  }
  if (frames_train < 1 || frames_eval < 1) {
    throw std::invalid_argument("frames_train and frames_eval must be >= 1");
  }
  if (frames_train % 2 != 0) {
    throw std::invalid_argument("frames_train must be even (half drawn from each video half)");
  }
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("val_fraction must lie in [0, 1)");
  }
}

namespace {

using nlohmann::json;

template <class T>
void read_into(const json& j, const char* key, T& out, bool& consumed_flag) {
  if (j.contains(key)) {
    out = j.at(key).get<T>();
    consumed_flag = true;
  }
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg, int indent) {
  json j;
  const ModelConfig& m = cfg.model;
  j["num_layers"] = m.num_layers;
  j["frames"] = m.frames;
  j["patches_per_frame"] = m.patches_per_frame;
  j["hidden_dim"] = m.hidden_dim;
  j["num_heads"] = m.num_heads;
  j["projection_dim"] = m.projection_dim;
  j["ffn_dim"] = m.ffn_dim;
  j["patch_size"] = m.patch_size;
  j["frame_resolution"] = m.frame_resolution;
  j["pooling_temperature"] = m.pooling_temperature;
  j["contrastive_temperature_init"] = m.contrastive_temperature_init;
  j["answer_count"] = m.answer_count;
  j["vocab_size"] = m.vocab_size;
  j["max_text_len"] = m.max_text_len;
  j["pooling_mode"] = pooling_mode_to_string(m.pooling_mode);
  j["zero_init_temporal_output"] = m.zero_init_temporal_output;

  const TrainConfig& t = cfg.train;
  j["learning_rate"] = t.learning_rate;
  j["scaling_lr_multiplier"] = t.scaling_lr_multiplier;
  j["weight_decay"] = t.weight_decay;
  j["beta1"] = t.beta1;
  j["beta2"] = t.beta2;
  j["warmup_ratio"] = t.warmup_ratio;
  j["schedule"] = t.schedule;
  j["batch_size"] = t.batch_size;
  j["epochs"] = t.epochs;
  j["max_steps"] = t.max_steps;
  j["frames_train"] = t.frames_train;
  j["frames_eval"] = t.frames_eval;
  j["val_fraction"] = t.val_fraction;
  j["seed"] = t.seed;
  return j.dump(indent);
}

RunConfig run_config_from_json(const std::string& text, RunConfig base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config root must be a JSON object");

  static const char* known[] = {
      "num_layers", "frames", "patches_per_frame", "hidden_dim", "num_heads",
      "projection_dim", "ffn_dim", "patch_size", "frame_resolution", "pooling_temperature",
      "contrastive_temperature_init", "answer_count", "vocab_size", "max_text_len",
      "pooling_mode", "zero_init_temporal_output", "learning_rate", "scaling_lr_multiplier",
      "weight_decay", "beta1", "beta2", "warmup_ratio", "schedule", "batch_size", "epochs",
      "max_steps", "frames_train", "frames_eval", "val_fraction", "seed"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw std::invalid_argument("unknown config key '" + it.key() + "'");
  }

  bool dummy = false;
  ModelConfig& m = base.model;
  read_into(j, "num_layers", m.num_layers, dummy);
  read_into(j, "frames", m.frames, dummy);
  read_into(j, "patches_per_frame", m.patches_per_frame, dummy);
  read_into(j, "hidden_dim", m.hidden_dim, dummy);
  read_into(j, "num_heads", m.num_heads, dummy);
  read_into(j, "projection_dim", m.projection_dim, dummy);
  read_into(j, "ffn_dim", m.ffn_dim, dummy);
  read_into(j, "patch_size", m.patch_size, dummy);
  read_into(j, "frame_resolution", m.frame_resolution, dummy);
  read_into(j, "pooling_temperature", m.pooling_temperature, dummy);
  read_into(j, "contrastive_temperature_init", m.contrastive_temperature_init, dummy);
  read_into(j, "answer_count", m.answer_count, dummy);
  read_into(j, "vocab_size", m.vocab_size, dummy);
  read_into(j, "max_text_len", m.max_text_len, dummy);
  if (j.contains("pooling_mode")) {
    m.pooling_mode = pooling_mode_from_string(j.at("pooling_mode").get<std::string>());
  }
  read_into(j, "zero_init_temporal_output", m.zero_init_temporal_output, dummy);

  TrainConfig& t = base.train;
  read_into(j, "learning_rate", t.learning_rate, dummy);
  read_into(j, "scaling_lr_multiplier", t.scaling_lr_multiplier, dummy);
  read_into(j, "weight_decay", t.weight_decay, dummy);
  read_into(j, "beta1", t.beta1, dummy);
  read_into(j, "beta2", t.beta2, dummy);
  read_into(j, "warmup_ratio", t.warmup_ratio, dummy);
  read_into(j, "schedule", t.schedule, dummy);
  read_into(j, "batch_size", t.batch_size, dummy);
  read_into(j, "epochs", t.epochs, dummy);
  read_into(j, "max_steps", t.max_steps, dummy);
  read_into(j, "frames_train", t.frames_train, dummy);
  read_into(j, "frames_eval", t.frames_eval, dummy);
  read_into(j, "val_fraction", t.val_fraction, dummy);
  read_into(j, "seed", t.seed, dummy);
  return base;
}

std::string checkpoint_echo(const RunConfig& cfg, std::size_t training_step) {
  json j = json::parse(run_config_to_json(cfg, -1));
  j["training_step"] = training_step;
  return j.dump(2);
}

std::pair<RunConfig, std::size_t> parse_checkpoint_echo(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("checkpoint config echo is not valid JSON: ") +
                                e.what());
  }
  if (!j.is_object() || !j.contains("training_step")) {
    throw std::invalid_argument("checkpoint config echo lacks training_step");
  }
  const auto step = j.at("training_step").get<std::size_t>();
  j.erase("training_step");
  return {run_config_from_json(j.dump()), step};
}

void apply_profile(RunConfig& cfg, const std::string& profile) {
  if (profile == "desk") {
    return;  // the defaults
  }
  if (profile == "paper-scale") {
    cfg.train.learning_rate = 2.5e-5;
    cfg.train.scaling_lr_multiplier = 1.25;
    cfg.train.weight_decay = 1e-3;
    cfg.train.beta1 = 0.9;
    cfg.train.beta2 = 0.98;
    cfg.train.warmup_ratio = 0.1;
    cfg.train.batch_size = 64;
    cfg.train.epochs = 15;
    return;
  }
  throw std::invalid_argument("unknown profile '" + profile + "' (desk, paper-scale)");
}

}  // namespace litevl
