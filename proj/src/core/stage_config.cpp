#include "mags/core/stage_config.hpp"

#include <fstream>

#include "mags/core/errors.hpp"
#include "mags/core/prompts.hpp"

namespace mags {

using nlohmann::json;

std::string_view to_string(Stage s) {
  return s == Stage::stage1 ? "stage1" : "stage2";
}

std::optional<Stage> parse_stage(std::string_view s) {
  if (s == "stage1" || s == "Stage1" || s == "1") return Stage::stage1;
  if (s == "stage2" || s == "Stage2" || s == "2") return Stage::stage2;
  return std::nullopt;
}

std::string_view to_string(ZoomRewardVariant v) {
  return v == ZoomRewardVariant::precision ? "precision" : "recall_counting";
}

StageConfig default_stage_config(Stage stage) {
  StageConfig c;
  c.stage = stage;
  if (stage == Stage::stage1) {
    c.system_prompt = std::string(prompts::kStage1System);
    c.prompt_suffix = std::string(prompts::kStage1Suffix);
    c.zoom_reward_variant = ZoomRewardVariant::precision;
    c.kl_beta = 0.04;
    c.sampling_temperature = 0.09;
    c.learning_rate = 2e-6;
    c.max_steps = 300;
    c.reference_policy = "base";
  } else {
    c.system_prompt = std::string(prompts::kStage2System);
    c.prompt_suffix = std::string(prompts::kStage2Suffix);
    c.zoom_reward_variant = ZoomRewardVariant::recall_counting;
    c.kl_beta = 0.03;
    c.sampling_temperature = 1.0;
    c.learning_rate = 5e-7;
    c.max_steps = 225;
    c.reference_policy = "stage1";
  }
  return c;
}

namespace {

double number_at(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("expected a number", key);
  return v.get<double>();
}

int integer_at(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("expected an integer", key);
  return v.get<int>();
}

std::string string_at(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("expected a string", key);
  return v.get<std::string>();
}

double positive(double v, const std::string& key) {
  if (!(v > 0)) throw ConfigError("must be positive", key);
  return v;
}

double non_negative(double v, const std::string& key) {
  if (!(v >= 0)) throw ConfigError("must be non-negative", key);
  return v;
}

}  // namespace

StageConfig apply_overrides(StageConfig c, const json& overrides) {
  if (!overrides.is_object()) throw ConfigError("override document must be an object", "$");
  for (const auto& [key, v] : overrides.items()) {
    if (key == "clip_eps") {
      c.clip_eps = non_negative(number_at(v, key), key);
    } else if (key == "kl_beta") {
      c.kl_beta = non_negative(number_at(v, key), key);
    } else if (key == "group_size") {
      c.group_size = integer_at(v, key);
      if (c.group_size < 2) throw ConfigError("must be at least 2", key);
    } else if (key == "batch_size") {
      c.batch_size = integer_at(v, key);
      if (c.batch_size < 1) throw ConfigError("must be at least 1", key);
    } else if (key == "learning_rate") {
      c.learning_rate = positive(number_at(v, key), key);
    } else if (key == "sampling_temperature") {
      c.sampling_temperature = non_negative(number_at(v, key), key);
    } else if (key == "max_steps") {
      c.max_steps = integer_at(v, key);
    } else if (key == "lambda_ans") {
      c.lambda_ans = number_at(v, key);
    } else if (key == "lambda_zoom") {
      c.lambda_zoom = number_at(v, key);
    } else if (key == "lambda_revo") {
      c.lambda_revo = number_at(v, key);
    } else if (key == "eps_std") {
      c.eps_std = positive(number_at(v, key), key);
    } else if (key == "advantage_norm") {
      const auto s = string_at(v, key);
      if (s == "std") {
        c.advantage_norm = AdvantageNorm::std_dev;
      } else if (s == "mean_only") {
        c.advantage_norm = AdvantageNorm::mean_only;
      } else {
        throw ConfigError("expected \"std\" or \"mean_only\"", key);
      }
    } else if (key == "zoom_reward_variant") {
      const auto s = string_at(v, key);
      if (s == "precision") {
        c.zoom_reward_variant = ZoomRewardVariant::precision;
      } else if (s == "recall_counting") {
        c.zoom_reward_variant = ZoomRewardVariant::recall_counting;
      } else {
        throw ConfigError("expected \"precision\" or \"recall_counting\"", key);
      }
    } else if (key == "reference_policy") {
      c.reference_policy = string_at(v, key);
    } else if (key == "fmt_subweights") {
      if (!v.is_object()) throw ConfigError("expected an object", key);
      for (const auto& [sub, w] : v.items()) {
        const std::string path = key + "." + sub;
        if (sub == "zfmt") {
          c.fmt_weights.zfmt = number_at(w, path);
        } else if (sub == "afmt") {
          c.fmt_weights.afmt = number_at(w, path);
        } else if (sub == "tfmt") {
          c.fmt_weights.tfmt = number_at(w, path);
        } else if (sub == "rfmt") {
          c.fmt_weights.rfmt = number_at(w, path);
        } else {
          throw ConfigError("unknown format sub-weight", path);
        }
      }
    } else if (key == "override_prompts") {
      if (!v.is_object()) throw ConfigError("expected an object", key);
      for (const auto& [sub, text] : v.items()) {
        const std::string path = key + "." + sub;
        if (sub == "system_prompt") {
          c.system_prompt = string_at(text, path);
        } else if (sub == "prompt_suffix") {
          c.prompt_suffix = string_at(text, path);
        } else {
          throw ConfigError("unknown prompt field", path);
        }
        c.prompts_overridden = true;
      }
    } else if (key == "system_prompt" || key == "prompt_suffix") {
      throw ConfigError("prompt text can only be replaced inside an \"override_prompts\" block", key);
    } else if (key == "stage") {
      // Informational; the stage itself is chosen by the caller.
      const auto s = string_at(v, key);
      if (parse_stage(s) != c.stage) throw ConfigError("override file targets a different stage", key);
    } else {
      throw ConfigError("unknown configuration key", key);
    }
  }
  return c;
}

StageConfig load_stage_config(Stage stage, const std::optional<std::filesystem::path>& overrides) {
  StageConfig config = default_stage_config(stage);
  if (!overrides) return config;
  std::ifstream in(*overrides);
  if (!in) throw ConfigError("cannot open override file " + overrides->string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed override file: ") + e.what(), overrides->string());
  }
  return apply_overrides(std::move(config), doc);
}

}  // namespace mags
