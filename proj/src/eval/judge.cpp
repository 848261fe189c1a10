#include "mags/eval/judge.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "mags/core/codec.hpp"
#include "mags/core/errors.hpp"
#include "mags/core/prompts.hpp"
#include "mags/text/strings.hpp"

namespace mags::eval {

using nlohmann::json;

std::string_view to_string(JudgeRole r) {
  switch (r) {
    case JudgeRole::answer_similarity: return "answer_similarity";
    case JudgeRole::extractor: return "extractor";
    case JudgeRole::rubric_scorer: return "rubric_scorer";
    case JudgeRole::difficulty_scorer: return "difficulty_scorer";
  }
  return "unknown";
}

std::string_view system_template(JudgeRole r) {
  switch (r) {
    case JudgeRole::extractor: return prompts::kExtractorSystem;
    case JudgeRole::answer_similarity:
    case JudgeRole::rubric_scorer: return prompts::kRubricSystem;
    case JudgeRole::difficulty_scorer: return prompts::kDifficultySystem;
  }
  return {};
}

std::string extractor_user_prompt(const std::string& question, const std::string& raw_response) {
  return "Question: " + question + "\nModel Response: " + raw_response + "\nExtracted Answer:";
}

std::string rubric_user_prompt(const std::string& question, const std::string& ground_truth, const std::string& answer) {
  return "Question: " + question + "\nGround Truth: " + ground_truth + "\nModel Answer: " + answer + "\nScore:";
}

std::string difficulty_user_prompt(const std::string& question) { return "Question: " + question; }

JudgeCache::JudgeCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
  if (dir_) std::filesystem::create_directories(*dir_);
}

std::optional<std::string> JudgeCache::get(const std::string& key) {
  std::lock_guard lock(mutex_);
  if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  if (!dir_) return std::nullopt;
  std::ifstream in(*dir_ / (key + ".json"));
  if (!in) return std::nullopt;
  try {
    const auto j = json::parse(in);
    auto value = j.at("response").get<std::string>();
    memory_[key] = value;
    return value;
  } catch (const std::exception&) {
    return std::nullopt;  // torn or foreign file: treat as a miss
  }
}

void JudgeCache::put(const std::string& key, const std::string& role, const std::string& value) {
  std::lock_guard lock(mutex_);
  memory_[key] = value;
  if (!dir_) return;
  const auto final_path = *dir_ / (key + ".json");
  auto tmp = final_path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << json{{"role", role}, {"response", value}}.dump() << '\n';
    if (!out) throw DataError("cannot write judge cache entry " + tmp.string());
  }
  std::filesystem::rename(tmp, final_path);
}

RateLimiter::RateLimiter(double calls_per_second) {
  if (calls_per_second > 0) {
    interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / calls_per_second));
  }
}

void RateLimiter::acquire() {
  if (interval_ == std::chrono::steady_clock::duration::zero()) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

JudgeHandle::JudgeHandle(JudgeRole role, std::shared_ptr<rollout::ChatClient> client,
                         std::shared_ptr<JudgeCache> cache, double calls_per_second)
    : role_(role), client_(std::move(client)), cache_(std::move(cache)), limiter_(calls_per_second) {
  if (!client_) throw ConfigError("judge " + std::string(to_string(role)) + " has no client");
  if (!cache_) cache_ = std::make_shared<JudgeCache>();
}

std::string JudgeHandle::ask(const std::vector<rollout::ChatPart>& user_parts, bool bypass_cache) {
  const auto system = std::string(system_template(role_));
  std::string material = std::string(to_string(role_)) + '\0' + system;
  for (const auto& p : user_parts) {
    material += '\0';
    if (p.kind == rollout::ChatPart::Kind::text) {
      material += "text:" + p.text;
    } else {
      const auto bytes = encode_ppm(*p.image);
      material += "image:" + content_hash(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    }
  }
  const auto key = content_hash(material);
  if (!bypass_cache) {
    if (auto hit = cache_->get(key)) {
      ++cache_hits_;
      return *hit;
    }
  }

  rollout::ChatRequest req;
  req.messages.push_back({"system", {rollout::ChatPart::text_part(system)}});
  req.messages.push_back({"user", user_parts});
  req.params.temperature = 0.0;
  req.metadata = {{"judge_role", std::string(to_string(role_))}};

  std::string reply;
  for (int attempt = 0;; ++attempt) {
    limiter_.acquire();
    ++wire_calls_;
    try {
      reply = client_->complete(req).text;
      break;
    } catch (const TransportError&) {
      if (attempt >= 1) throw;
    }
  }
  cache_->put(key, std::string(to_string(role_)), reply);
  return reply;
}

std::optional<double> parse_judge_float(std::string_view text) {
  const auto t = text::trim(text);
  if (t.empty()) return std::nullopt;
  double v = 0;
  const auto* first = t.data();
  if (*first == '+') ++first;
  const auto [end, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc{} || end != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

HandleAnswerJudge::HandleAnswerJudge(std::shared_ptr<JudgeHandle> handle) : handle_(std::move(handle)) {
  if (!handle_) throw ConfigError("answer judge has no handle");
}

double HandleAnswerJudge::score(const std::string& question, const std::string& ground_truth,
                                const std::string& answer) {
  const auto reply = handle_->ask({rollout::ChatPart::text_part(rubric_user_prompt(question, ground_truth, answer))});
  const auto v = parse_judge_float(reply);
  if (!v) throw DataError("answer judge replied with a non-numeric score: \"" + reply + "\"");
  return std::clamp(*v, 0.0, 1.0);
}

}  // namespace mags::eval
