#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace mags {

enum class Stage { stage1, stage2 };

// Which zoom-accuracy reward a stage uses. Stage 2's recall variant applies
// to counting samples only; non-counting samples fall back to S * precision.
enum class ZoomRewardVariant { precision, recall_counting };

// How group rewards are turned into advantages.
enum class AdvantageNorm { std_dev, mean_only };

std::string_view to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view s);
std::string_view to_string(ZoomRewardVariant v);

struct FormatWeights {
  double zfmt = 0.5;
  double afmt = 0.1;
  double tfmt = 0.1;
  double rfmt = 0.1;
};

struct StageConfig {
  Stage stage = Stage::stage1;
  std::string system_prompt;
  std::string prompt_suffix;
  // True when either prompt came from an explicit override block.
  bool prompts_overridden = false;
  ZoomRewardVariant zoom_reward_variant = ZoomRewardVariant::precision;

  double lambda_ans = 2.0;
  double lambda_zoom = 1.0;
  double lambda_revo = 0.5;
  FormatWeights fmt_weights;

  double clip_eps = 0.2;
  double kl_beta = 0.04;
  int group_size = 16;
  int batch_size = 64;
  double learning_rate = 2e-6;
  double sampling_temperature = 0.09;
  int max_steps = 300;

  double eps_std = 1e-4;
  AdvantageNorm advantage_norm = AdvantageNorm::std_dev;
  // Which weights serve as pi_ref for this stage.
  std::string reference_policy;
};

StageConfig default_stage_config(Stage stage);

// Applies a JSON override object on top of the stage defaults. Every numeric
// field may be overridden by its own key. Prompt text can only change via an
// explicit {"override_prompts": {"system_prompt": ..., "prompt_suffix": ...}}
// block; a bare "system_prompt" key is rejected. Unknown keys and wrong types
// raise ConfigError naming the key.
StageConfig apply_overrides(StageConfig config, const nlohmann::json& overrides);

StageConfig load_stage_config(Stage stage, const std::optional<std::filesystem::path>& overrides = std::nullopt);

}  // namespace mags
