#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mags/core/errors.hpp"
#include "mags/core/stage_config.hpp"
#include "mags/core/types.hpp"
#include "mags/grpo/grpo.hpp"
#include "mags/parse/response_parser.hpp"
#include "mags/reward/reward_engine.hpp"
#include "mags/rollout/chat.hpp"
#include "mags/zoom/zoom_agent.hpp"

namespace mags::rollout {

inline constexpr std::string_view kThinkStop = "</think>";

struct BackendCapabilities {
  bool multimodal = true;
  bool returns_logprobs = false;
};

struct BackendHandle {
  std::string identity;
  BackendCapabilities capabilities;
  // Temperature here is replaced by the stage's sampling temperature for
  // training rollouts; evaluation uses it as given.
  GenerationParams params;
  std::shared_ptr<ChatClient> client;
};

// Evaluation decoding: near-greedy.
inline constexpr double kEvalTemperature = 0.01;
inline constexpr double kEvalTopP = 0.95;

struct RolloutContext {
  BackendHandle backend;
  StageConfig stage;
  reward::AnswerJudge* judge = nullptr;
  zoom::ZoomConfig zoom;
  // Loads the sample's image; defaults to read_ppm(sample.image_path).
  std::function<RasterImage(const Sample&)> load_image;
  // Extra attempts after a transport failure (malformed output is never retried).
  int transport_retries = 1;
  // Use the stage sampling temperature (training) or backend.params (evaluation).
  bool use_stage_temperature = true;
  bool record_timing = false;
};

struct Round1Record {
  std::vector<ChatMessage> prompt;
  std::string raw_output;
  std::string text;  // raw_output cut after the first "</think>"
  bool truncated = false;
  std::optional<std::vector<TokenLogProb>> logprobs;
};

struct Round2Record {
  std::vector<ChatMessage> prompt;
  std::string raw_output;
  std::optional<std::vector<TokenLogProb>> logprobs;
};

struct RolloutTranscript {
  std::string sample_id;
  Stage stage = Stage::stage1;
  std::string backend_identity;
  std::uint64_t seed = 0;
  Round1Record round1;
  zoom::ZoomResult zoom;
  Round2Record round2;
  parse::StructuredResponse parsed;
  reward::RewardBreakdown rewards;
  std::optional<grpo::TokenLogProbs> logprobs;
  std::optional<std::string> error;
  bool transport_failure = false;  // the error came from the backend wire
  std::optional<double> elapsed_ms;
};

// system prompt, then user [image, question + "\n" + suffix].
std::vector<ChatMessage> build_round1_prompt(const Sample& sample, const StageConfig& stage,
                                             std::shared_ptr<const RasterImage> image);

Round1Record run_round1(const RolloutContext& ctx, const Sample& sample, std::shared_ptr<const RasterImage> image,
                        std::uint64_t seed);

// Round-1 prompt, then the round-1 text as assistant history, then a user turn
// with either "Region i: [x1, y1, x2, y2]" + crop per valid box, or the
// canonical failure message.
std::vector<ChatMessage> build_round2_prompt(const Sample& sample, const StageConfig& stage,
                                             std::shared_ptr<const RasterImage> image, const Round1Record& round1,
                                             const zoom::ZoomFeedback& feedback);

// Never throws for per-sample failures: they become `error` with zero rewards.
RolloutTranscript run_rollout(const RolloutContext& ctx, const Sample& sample, std::uint64_t seed = 0);

struct GroupResult {
  grpo::GroupBatch batch;
  std::vector<RolloutTranscript> transcripts;  // all G, including failed ones
};

struct GroupDiscarded : Error {
  std::vector<RolloutTranscript> transcripts;
  GroupDiscarded(const std::string& message, std::vector<RolloutTranscript> ts)
      : Error(message), transcripts(std::move(ts)) {}
};

// G rollouts with seeds seed, seed+1, ...; failed members are dropped before
// computing advantages. Throws ConfigError for G < 2 and GroupDiscarded when
// fewer than two members succeed.
GroupResult run_group(const RolloutContext& ctx, const Sample& sample, int group_size, std::uint64_t seed = 0,
                      int parallelism = 1);

// Serialises a transcript. When `sidecar_dir` is given (it is created if
// missing), crops are written there as PPM files named
// "<stem>_crop<box index>.ppm" and referenced by path relative to `relative_to`.
nlohmann::json transcript_to_json(const RolloutTranscript& t, const std::optional<std::filesystem::path>& sidecar_dir = {},
                                  const std::string& stem = {}, const std::filesystem::path& relative_to = {});

}  // namespace mags::rollout
