#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mags/reward/reward_engine.hpp"
#include "mags/rollout/chat.hpp"

namespace mags::eval {

enum class JudgeRole { answer_similarity, extractor, rubric_scorer, difficulty_scorer };
std::string_view to_string(JudgeRole r);

// The system prompt sent for a role. answer_similarity reuses the rubric.
std::string_view system_template(JudgeRole r);

// User turns, one per role.
std::string extractor_user_prompt(const std::string& question, const std::string& raw_response);
std::string rubric_user_prompt(const std::string& question, const std::string& ground_truth, const std::string& answer);
std::string difficulty_user_prompt(const std::string& question);

// Memory cache with an optional directory of "<key>.json" files behind it.
// Safe for concurrent use.
class JudgeCache {
 public:
  explicit JudgeCache(std::optional<std::filesystem::path> dir = std::nullopt);
  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, const std::string& role, const std::string& value);

 private:
  std::optional<std::filesystem::path> dir_;
  std::mutex mutex_;
  std::map<std::string, std::string> memory_;
};

// Spaces call starts at least 1/rate seconds apart. rate <= 0 disables it.
class RateLimiter {
 public:
  explicit RateLimiter(double calls_per_second = 0);
  void acquire();

 private:
  std::chrono::steady_clock::duration interval_{};
  std::mutex mutex_;
  std::chrono::steady_clock::time_point next_{};
};

class JudgeHandle {
 public:
  JudgeHandle(JudgeRole role, std::shared_ptr<rollout::ChatClient> client,
              std::shared_ptr<JudgeCache> cache = std::make_shared<JudgeCache>(), double calls_per_second = 0);

  JudgeRole role() const { return role_; }

  // Raw judge text for one user turn. Identical inputs are answered from the
  // cache; `bypass_cache` forces a fresh call (and refreshes the entry).
  // One retry on TransportError, then it propagates.
  std::string ask(const std::vector<rollout::ChatPart>& user_parts, bool bypass_cache = false);

  std::size_t wire_calls() const { return wire_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }

 private:
  JudgeRole role_;
  std::shared_ptr<rollout::ChatClient> client_;
  std::shared_ptr<JudgeCache> cache_;
  RateLimiter limiter_;
  std::atomic<std::size_t> wire_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

// Parses a bare float judge reply (surrounding whitespace allowed).
std::optional<double> parse_judge_float(std::string_view text);

// reward::AnswerJudge over a JudgeHandle. The reply must be a bare float,
// otherwise DataError.
class HandleAnswerJudge final : public reward::AnswerJudge {
 public:
  explicit HandleAnswerJudge(std::shared_ptr<JudgeHandle> handle);
  double score(const std::string& question, const std::string& ground_truth, const std::string& answer) override;

 private:
  std::shared_ptr<JudgeHandle> handle_;
};

}  // namespace mags::eval
