#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>

namespace litevl {

enum class PoolingMode {
  kTextDependent,
  kVanilla,
  kOriginal,
  kOriginalTemporal,
  kOriginalSpatial,
};

PoolingMode pooling_mode_from_string(const std::string& s);
std::string pooling_mode_to_string(PoolingMode m);

/// Architecture hyperparameters. Defaults are the desk-scale configuration
/// every test runs at; real-scale values are out of scope.
struct ModelConfig {
  std::size_t num_layers = 4;        // L, shared by video and text stacks
  std::size_t frames = 4;            // T
  std::size_t patches_per_frame = 16;  // S, must equal (frame_resolution/patch_size)^2
  std::size_t hidden_dim = 64;       // D
  std::size_t num_heads = 4;
  std::size_t projection_dim = 32;   // D_p for the contrastive embeddings
  std::size_t ffn_dim = 256;
  std::size_t patch_size = 8;
  std::size_t frame_resolution = 32;
  double pooling_temperature = 1.0;         // tau in the pooling softmax
  double contrastive_temperature_init = 0.07;  // tau_c at step 0
  std::size_t answer_count = 8;      // K
  std::size_t vocab_size = 64;
  std::size_t max_text_len = 12;     // includes the mode token at position 0
  PoolingMode pooling_mode = PoolingMode::kTextDependent;
  bool zero_init_temporal_output = false;  // else temporal out-proj copies spatial

  std::size_t patch_dim() const { return patch_size * patch_size; }  // single channel
  std::size_t video_tokens() const { return 1 + frames * patches_per_frame; }
  std::size_t head_dim() const { return hidden_dim / num_heads; }

  void validate() const;
};

/// Optimization hyperparameters. Desk-scale defaults; "paper-scale" profile
/// swaps in the full-size values.
struct TrainConfig {
  double learning_rate = 1e-3;
  double scaling_lr_multiplier = 1.25;  // temporal-scaling params train faster
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double warmup_ratio = 0.1;
  std::string schedule = "linear";  // linear warmup then linear decay
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::size_t max_steps = 0;  // 0 = derive from epochs
  std::size_t frames_train = 4;  // N_v; must equal ModelConfig.frames here
  std::size_t frames_eval = 4;
  double val_fraction = 0.25;  // QA training holds this out for model selection
  std::uint64_t seed = 42;

  void validate() const;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  void validate() const {
    model.validate();
    train.validate();
  }
};

/// Flat JSON object with keys named after the struct fields.
std::string run_config_to_json(const RunConfig& cfg, int indent = 2);

/// Parses a flat JSON object; unknown keys are an error. Missing keys keep
/// their defaults (or the values already in `base`).
RunConfig run_config_from_json(const std::string& text, RunConfig base = {});

/// Named presets: "desk" (the defaults) and "paper-scale".
void apply_profile(RunConfig& cfg, const std::string& profile);

/// Config echo stored inside checkpoints: the flat JSON plus a training_step
/// key.
std::string checkpoint_echo(const RunConfig& cfg, std::size_t training_step);

/// Inverse of checkpoint_echo.
std::pair<RunConfig, std::size_t> parse_checkpoint_echo(const std::string& text);

}  // namespace litevl
