#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mags/core/endpoint.hpp"
#include "mags/core/raster_image.hpp"

namespace mags::rollout {

struct ChatPart {
  enum class Kind { text, image };
  Kind kind = Kind::text;
  std::string text;
  std::shared_ptr<const RasterImage> image;
  // How transcripts refer to the image: a dataset path, or "crop:<index>".
  std::string image_ref;

  static ChatPart text_part(std::string text);
  static ChatPart image_part(std::shared_ptr<const RasterImage> image, std::string ref);
};

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::vector<ChatPart> parts;
};

struct GenerationParams {
  double temperature = 1.0;
  double top_p = 1.0;
  std::vector<std::string> stop;
  std::optional<int> max_tokens;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  GenerationParams params;
  bool want_logprobs = false;
  std::uint64_t seed = 0;
  // Local routing hints (sample id, round); never put on the wire.
  std::map<std::string, std::string> metadata;
};

struct TokenLogProb {
  std::int64_t token_id = 0;
  std::string token;
  double logprob = 0;
};

struct ChatResponse {
  std::string text;
  std::optional<std::vector<TokenLogProb>> logprobs;
};

// One chat-completion call. Implementations must tolerate concurrent calls and
// throw TransportError when the service cannot answer.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// Wire format: {"model", "messages": [{"role", "content": [{"type": "text",
// "text"} | {"type": "image", "format": "ppm", "data": <base64>}]}],
// "temperature", "top_p", "stop", "seed", "logprobs", "max_tokens"?,
// "include_stop_str_in_output"? (sent with any stop list)}.
// Response: {"choices": [{"message": {"content"}, "logprobs"?: {"content":
// [{"token", "token_id", "logprob"}]}}]}.
nlohmann::json request_to_wire(const ChatRequest& request, const std::string& model);
ChatResponse response_from_wire(const nlohmann::json& body);
// Inverse of request_to_wire, for servers and tests.
ChatRequest request_from_wire(const nlohmann::json& body);
nlohmann::json response_to_wire(const ChatResponse& response);

class HttpChatClient final : public ChatClient {
 public:
  HttpChatClient(const std::string& url, std::string model, WireOptions options = {});
  ChatResponse complete(const ChatRequest& request) override;

 private:
  Endpoint endpoint_;
  std::string model_;
  WireOptions options_;
};

// Deterministic stand-in for a model or judge service, driven by a script:
//
//   {"rules": [{"when": {"round": 1, "sample_id": "s1", "contains": "buses",
//                        "system_contains": "judge"},
//               "replies": ["...", "..."],
//               "logprobs": [[{"token_id": 1, "token": "a", "logprob": -0.1}], ...],
//               "fail_first": 0}],
//    "default": {"replies": ["..."]},
//    "synthetic_logprobs": false}
//
// The first rule whose conditions all hold answers; the reply is
// replies[seed % replies.size()]. "round" counts assistant turns + 1,
// "contains" searches every non-system text part, "system_contains" the
// system prompt. "fail_first": n makes the rule's first n matches throw
// TransportError. "synthetic_logprobs" derives stable per-word log-probs when
// a request wants them and the rule gives none.
class ScriptedChatClient final : public ChatClient {
 public:
  explicit ScriptedChatClient(nlohmann::json script);
  static std::shared_ptr<ScriptedChatClient> from_file(const std::filesystem::path& path);

  ChatResponse complete(const ChatRequest& request) override;
  std::size_t calls() const;

 private:
  nlohmann::json script_;
  mutable std::mutex mutex_;
  std::map<std::size_t, int> failures_;
  std::size_t calls_ = 0;
};

// Concatenated text of every part of the given role ("" = all roles).
std::string joined_text(const std::vector<ChatMessage>& messages, const std::string& role = "");

// "mock:<script.json>" builds a ScriptedChatClient, http(s) URLs an HttpChatClient.
std::shared_ptr<ChatClient> make_chat_client(const std::string& url, const std::string& model, WireOptions options = {});

}  // namespace mags::rollout
