#include "mags/rollout/rollout.hpp"

#include <chrono>
#include <cstdio>
#include <spdlog/spdlog.h>

#include "mags/core/errors.hpp"
#include "mags/core/parallel.hpp"

namespace mags::rollout {

using nlohmann::json;

namespace {

std::string format_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

std::string box_label(const BoundingBox& b) {
  return "[" + format_coord(b.x1) + ", " + format_coord(b.y1) + ", " + format_coord(b.x2) + ", " +
         format_coord(b.y2) + "]";
}

ChatResponse call_with_retry(const RolloutContext& ctx, const ChatRequest& request) {
  if (!ctx.backend.client) throw ConfigError("backend \"" + ctx.backend.identity + "\" has no client");
  for (int attempt = 0;; ++attempt) {
    try {
      return ctx.backend.client->complete(request);
    } catch (const TransportError& e) {
      if (attempt >= ctx.transport_retries) throw;
      spdlog::warn("backend {} transport failure, retrying: {}", ctx.backend.identity, e.what());
    }
  }
}

GenerationParams params_for(const RolloutContext& ctx) {
  GenerationParams p = ctx.backend.params;
  if (ctx.use_stage_temperature) p.temperature = ctx.stage.sampling_temperature;
  return p;
}

// Keeps the prefix of tokens whose text fits inside `length` characters.
std::vector<TokenLogProb> clip_tokens(const std::vector<TokenLogProb>& tokens, std::size_t length) {
  std::vector<TokenLogProb> out;
  std::size_t used = 0;
  for (const auto& t : tokens) {
    if (used >= length) break;
    out.push_back(t);
    used += t.token.size();
  }
  return out;
}

json message_to_json(const ChatMessage& m, const std::map<std::string, std::string>& crop_paths) {
  json content = json::array();
  for (const auto& p : m.parts) {
    if (p.kind == ChatPart::Kind::text) {
      content.push_back({{"type", "text"}, {"text", p.text}});
    } else {
      auto it = crop_paths.find(p.image_ref);
      content.push_back({{"type", "image"}, {"ref", it == crop_paths.end() ? p.image_ref : it->second}});
    }
  }
  return {{"role", m.role}, {"content", std::move(content)}};
}

json messages_to_json(const std::vector<ChatMessage>& ms, const std::map<std::string, std::string>& crop_paths) {
  json out = json::array();
  for (const auto& m : ms) out.push_back(message_to_json(m, crop_paths));
  return out;
}

json box_to_json(const BoundingBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

json logprobs_to_json(const std::optional<std::vector<TokenLogProb>>& lp) {
  if (!lp) return nullptr;
  json out = json::array();
  for (const auto& t : *lp) out.push_back({{"token_id", t.token_id}, {"token", t.token}, {"logprob", t.logprob}});
  return out;
}

json optional_text(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

json parsed_to_json(const parse::StructuredResponse& r) {
  using parse::TagFamily;
  json families = json::object();
  for (auto [name, f] : {std::pair{"think", TagFamily::think}, std::pair{"zoom", TagFamily::zoom},
                         std::pair{"rethink", TagFamily::rethink}, std::pair{"answer", TagFamily::answer}}) {
    families[name] = {{"present", r.present(f)}, {"disordered", r.disordered(f)}};
  }
  json boxes = json::array();
  for (const auto& b : r.zoom_boxes_raw) boxes.push_back(box_to_json(b));
  return {{"families", std::move(families)},
          {"think_text", optional_text(r.think_text)},
          {"zoom_payload", optional_text(r.zoom_payload)},
          {"rethink_text", optional_text(r.rethink_text)},
          {"answer_text", optional_text(r.answer_text)},
          {"zoom_boxes_raw", std::move(boxes)},
          {"zoom_nested_in_think", r.zoom_nested_in_think}};
}

}  // namespace

std::vector<ChatMessage> build_round1_prompt(const Sample& sample, const StageConfig& stage,
                                             std::shared_ptr<const RasterImage> image) {
  std::vector<ChatMessage> m;
  m.push_back({"system", {ChatPart::text_part(stage.system_prompt)}});
  m.push_back({"user",
               {ChatPart::image_part(std::move(image), sample.image_path),
                ChatPart::text_part(sample.question + "\n" + stage.prompt_suffix)}});
  return m;
}

Round1Record run_round1(const RolloutContext& ctx, const Sample& sample, std::shared_ptr<const RasterImage> image,
                        std::uint64_t seed) {
  Round1Record r;
  r.prompt = build_round1_prompt(sample, ctx.stage, std::move(image));

  ChatRequest req;
  req.messages = r.prompt;
  req.params = params_for(ctx);
  req.params.stop = {std::string(kThinkStop)};
  req.want_logprobs = ctx.backend.capabilities.returns_logprobs;
  req.seed = seed;
  req.metadata = {{"sample_id", sample.id}, {"round", "1"}};

  auto res = call_with_retry(ctx, req);
  r.raw_output = std::move(res.text);
  // The stop sequence is also enforced here in case the backend ignored it.
  auto cut = parse::truncate_at_think_close(r.raw_output);
  r.text = std::move(cut.text);
  r.truncated = cut.violation;
  if (res.logprobs) r.logprobs = clip_tokens(*res.logprobs, r.text.size());
  return r;
}

std::vector<ChatMessage> build_round2_prompt(const Sample& sample, const StageConfig& stage,
                                             std::shared_ptr<const RasterImage> image, const Round1Record& round1,
                                             const zoom::ZoomFeedback& feedback) {
  auto m = build_round1_prompt(sample, stage, std::move(image));
  m.push_back({"assistant", {ChatPart::text_part(round1.text)}});
  ChatMessage fb{"user", {}};
  if (feedback.outcome == zoom::ZoomFeedback::Outcome::crops) {
    for (std::size_t i = 0; i < feedback.crops.size(); ++i) {
      const auto& c = feedback.crops[i];
      fb.parts.push_back(ChatPart::text_part("Region " + std::to_string(i + 1) + ": " + box_label(c.box)));
      fb.parts.push_back(ChatPart::image_part(std::make_shared<RasterImage>(c.image),
                                              "crop:" + std::to_string(c.box_index)));
    }
  } else {
    fb.parts.push_back(ChatPart::text_part(feedback.failure_message));
  }
  m.push_back(std::move(fb));
  return m;
}

RolloutTranscript run_rollout(const RolloutContext& ctx, const Sample& sample, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  RolloutTranscript t;
  t.sample_id = sample.id;
  t.stage = ctx.stage.stage;
  t.backend_identity = ctx.backend.identity;
  t.seed = seed;
  try {
    auto image = std::make_shared<const RasterImage>(ctx.load_image ? ctx.load_image(sample)
                                                                    : read_ppm(sample.image_path));
    t.round1 = run_round1(ctx, sample, image, seed);

    const auto round1_parsed = parse::parse_response(t.round1.text);
    t.zoom = zoom::execute_zoom(*image, round1_parsed.zoom_boxes_raw, ctx.zoom);
    for (const auto& note : t.zoom.notes) spdlog::warn("sample {}: {}", sample.id, note);

    t.round2.prompt = build_round2_prompt(sample, ctx.stage, image, t.round1, t.zoom.feedback);
    ChatRequest req;
    req.messages = t.round2.prompt;
    req.params = params_for(ctx);
    req.params.stop.clear();
    req.want_logprobs = ctx.backend.capabilities.returns_logprobs;
    req.seed = seed;
    req.metadata = {{"sample_id", sample.id}, {"round", "2"}};
    auto res = call_with_retry(ctx, req);
    t.round2.raw_output = std::move(res.text);
    t.round2.logprobs = std::move(res.logprobs);

    t.parsed = parse::parse_response(t.round1.text + t.round2.raw_output);
    t.rewards = reward::total_reward(sample, t.parsed, t.zoom.k, t.zoom.n, ctx.stage, ctx.judge);

    if (t.round1.logprobs && t.round2.logprobs) {
      grpo::TokenLogProbs lp;
      for (const auto* part : {&*t.round1.logprobs, &*t.round2.logprobs}) {
        for (const auto& tok : *part) {
          lp.tokens.push_back(tok.token_id);
          lp.logp_old.push_back(tok.logprob);
        }
      }
      // Freshly sampled: the current policy is the sampling policy, and with no
      // separate reference scorer the reference log-probs start equal too.
      lp.logp_new = lp.logp_old;
      lp.logp_ref = lp.logp_old;
      if (!lp.tokens.empty()) t.logprobs = std::move(lp);
    }
  } catch (const std::exception& e) {
    t.error = e.what();
    t.transport_failure = dynamic_cast<const TransportError*>(&e) != nullptr;
    t.rewards = reward::RewardBreakdown{};
    t.rewards.k = t.zoom.k;
    t.rewards.n = t.zoom.n;
    spdlog::warn("rollout for sample {} failed: {}", sample.id, e.what());
  }
  if (ctx.record_timing) {
    t.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  return t;
}

GroupResult run_group(const RolloutContext& ctx, const Sample& sample, int group_size, std::uint64_t seed,
                      int parallelism) {
  if (group_size < 2) throw ConfigError("group size must be at least 2, got " + std::to_string(group_size), "group_size");
  GroupResult out;
  out.transcripts.resize(static_cast<std::size_t>(group_size));
  parallel_for(out.transcripts.size(), parallelism,
               [&](std::size_t i) { out.transcripts[i] = run_rollout(ctx, sample, seed + i); });

  out.batch.input_id = sample.id;
  for (const auto& t : out.transcripts) {
    if (t.error) continue;
    out.batch.members.push_back({t.logprobs, t.rewards.r_total, std::nullopt});
  }
  if (out.batch.members.size() < 2) {
    const auto reason = "group for sample " + sample.id + " discarded: only " +
                        std::to_string(out.batch.members.size()) + " of " + std::to_string(group_size) +
                        " rollouts succeeded";
    spdlog::warn("{}", reason);
    throw GroupDiscarded(reason, std::move(out.transcripts));
  }
  grpo::assign_advantages(out.batch, ctx.stage.eps_std, ctx.stage.advantage_norm);
  return out;
}

json transcript_to_json(const RolloutTranscript& t, const std::optional<std::filesystem::path>& sidecar_dir,
                        const std::string& stem, const std::filesystem::path& relative_to) {
  std::map<std::string, std::string> crop_paths;
  json crops = json::array();
  if (sidecar_dir && !t.zoom.feedback.crops.empty()) std::filesystem::create_directories(*sidecar_dir);
  for (const auto& c : t.zoom.feedback.crops) {
    json jc = {{"box_index", c.box_index},
               {"box", box_to_json(c.box)},
               {"width", c.image.width()},
               {"height", c.image.height()},
               {"path", nullptr}};
    if (sidecar_dir) {
      const auto file = *sidecar_dir / (stem + "_crop" + std::to_string(c.box_index) + ".ppm");
      write_ppm(file, c.image);
      const auto ref = (relative_to.empty() ? file : std::filesystem::relative(file, relative_to)).generic_string();
      crop_paths["crop:" + std::to_string(c.box_index)] = ref;
      jc["path"] = ref;
    }
    crops.push_back(std::move(jc));
  }

  json verdicts = json::array();
  for (const auto& v : t.zoom.verdicts) {
    verdicts.push_back({{"box", box_to_json(v.box)}, {"valid", v.valid}, {"reason", std::string(zoom::to_string(v.reason))}});
  }
  const bool crops_outcome = t.zoom.feedback.outcome == zoom::ZoomFeedback::Outcome::crops;

  json j = {{"sample_id", t.sample_id},
            {"stage", std::string(to_string(t.stage))},
            {"backend", t.backend_identity},
            {"seed", t.seed},
            {"round1",
             {{"prompt", messages_to_json(t.round1.prompt, crop_paths)},
              {"raw_output", t.round1.raw_output},
              {"text", t.round1.text},
              {"truncated", t.round1.truncated},
              {"logprobs", logprobs_to_json(t.round1.logprobs)}}},
            {"zoom",
             {{"outcome", crops_outcome ? "crops" : "failure"},
              {"failure_message", crops_outcome ? json(nullptr) : json(t.zoom.feedback.failure_message)},
              {"k", t.zoom.k},
              {"n", t.zoom.n},
              {"verdicts", std::move(verdicts)},
              {"crops", std::move(crops)},
              {"notes", t.zoom.notes}}},
            {"round2",
             {{"prompt", messages_to_json(t.round2.prompt, crop_paths)},
              {"raw_output", t.round2.raw_output},
              {"logprobs", logprobs_to_json(t.round2.logprobs)}}},
            {"parsed", parsed_to_json(t.parsed)},
            {"rewards", reward::to_json(t.rewards)},
            {"error", optional_text(t.error)}};
  if (t.elapsed_ms) j["elapsed_ms"] = *t.elapsed_ms;
  return j;
}

}  // namespace mags::rollout
