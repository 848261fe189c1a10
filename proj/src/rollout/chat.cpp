#include "mags/rollout/chat.hpp"

#include <fstream>

#include "httplib.h"
#include "mags/core/codec.hpp"
#include "mags/core/errors.hpp"

namespace mags::rollout {

using nlohmann::json;

ChatPart ChatPart::text_part(std::string text) {
  ChatPart p;
  p.kind = Kind::text;
  p.text = std::move(text);
  return p;
}

ChatPart ChatPart::image_part(std::shared_ptr<const RasterImage> image, std::string ref) {
  ChatPart p;
  p.kind = Kind::image;
  p.image = std::move(image);
  p.image_ref = std::move(ref);
  return p;
}

std::string joined_text(const std::vector<ChatMessage>& messages, const std::string& role) {
  std::string out;
  for (const auto& m : messages) {
    if (!role.empty() && m.role != role) continue;
    for (const auto& p : m.parts) {
      if (p.kind != ChatPart::Kind::text) continue;
      if (!out.empty()) out += '\n';
      out += p.text;
    }
  }
  return out;
}

json request_to_wire(const ChatRequest& request, const std::string& model) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    json content = json::array();
    for (const auto& p : m.parts) {
      if (p.kind == ChatPart::Kind::text) {
        content.push_back({{"type", "text"}, {"text", p.text}});
      } else {
        if (!p.image) throw ConfigError("image part \"" + p.image_ref + "\" has no pixels");
        content.push_back({{"type", "image"}, {"format", "ppm"}, {"data", base64_encode(encode_ppm(*p.image))}});
      }
    }
    messages.push_back({{"role", m.role}, {"content", std::move(content)}});
  }
  json body = {{"model", model},
               {"messages", std::move(messages)},
               {"temperature", request.params.temperature},
               {"top_p", request.params.top_p},
               {"stop", request.params.stop},
               {"seed", request.seed},
               {"logprobs", request.want_logprobs}};
  if (request.params.max_tokens) body["max_tokens"] = *request.params.max_tokens;
  // Round 1 needs the closing tag itself to score the think block.
  if (!request.params.stop.empty()) body["include_stop_str_in_output"] = true;
  return body;
}

ChatRequest request_from_wire(const json& body) {
  ChatRequest r;
  for (const auto& jm : body.at("messages")) {
    ChatMessage m;
    m.role = jm.at("role").get<std::string>();
    for (const auto& jp : jm.at("content")) {
      if (jp.at("type") == "text") {
        m.parts.push_back(ChatPart::text_part(jp.at("text").get<std::string>()));
      } else {
        const auto bytes = base64_decode(jp.at("data").get<std::string>());
        m.parts.push_back(ChatPart::image_part(std::make_shared<RasterImage>(decode_ppm(bytes)), "wire"));
      }
    }
    r.messages.push_back(std::move(m));
  }
  r.params.temperature = body.value("temperature", 1.0);
  r.params.top_p = body.value("top_p", 1.0);
  r.params.stop = body.value("stop", std::vector<std::string>{});
  if (body.contains("max_tokens")) r.params.max_tokens = body.at("max_tokens").get<int>();
  r.seed = body.value("seed", std::uint64_t{0});
  r.want_logprobs = body.value("logprobs", false);
  return r;
}

namespace {

std::vector<TokenLogProb> logprobs_from_json(const json& items) {
  std::vector<TokenLogProb> out;
  for (const auto& item : items) {
    TokenLogProb t;
    t.token_id = item.at("token_id").get<std::int64_t>();
    t.token = item.value("token", "");
    t.logprob = item.at("logprob").get<double>();
    out.push_back(std::move(t));
  }
  return out;
}

json logprobs_to_json(const std::vector<TokenLogProb>& items) {
  json out = json::array();
  for (const auto& t : items) out.push_back({{"token_id", t.token_id}, {"token", t.token}, {"logprob", t.logprob}});
  return out;
}

}  // namespace

ChatResponse response_from_wire(const json& body) {
  try {
    const auto& choice = body.at("choices").at(0);
    ChatResponse r;
    const auto& content = choice.at("message").at("content");
    r.text = content.is_null() ? std::string() : content.get<std::string>();
    if (auto it = choice.find("logprobs"); it != choice.end() && it->is_object() && it->contains("content")) {
      r.logprobs = logprobs_from_json(it->at("content"));
    }
    return r;
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat response: ") + e.what());
  }
}

json response_to_wire(const ChatResponse& response) {
  json choice = {{"message", {{"role", "assistant"}, {"content", response.text}}}};
  if (response.logprobs) choice["logprobs"] = {{"content", logprobs_to_json(*response.logprobs)}};
  return {{"choices", json::array({choice})}};
}

HttpChatClient::HttpChatClient(const std::string& url, std::string model, WireOptions options)
    : endpoint_(parse_endpoint(url)), model_(std::move(model)), options_(std::move(options)) {}

ChatResponse HttpChatClient::complete(const ChatRequest& request) {
  httplib::Client client(endpoint_.base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);
  const auto body = request_to_wire(request, model_).dump();
  auto res = client.Post(endpoint_.path, headers, body, "application/json");
  if (!res) throw TransportError(endpoint_.base + endpoint_.path + " unreachable: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw TransportError(endpoint_.base + endpoint_.path + " returned HTTP " + std::to_string(res->status));
  }
  json parsed;
  try {
    parsed = json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw TransportError(std::string("chat response is not JSON: ") + e.what());
  }
  return response_from_wire(parsed);
}

ScriptedChatClient::ScriptedChatClient(json script) : script_(std::move(script)) {
  if (!script_.is_object()) throw ConfigError("mock script must be an object");
  if (script_.contains("rules") && !script_.at("rules").is_array()) throw ConfigError("must be an array", "rules");
}

std::shared_ptr<ScriptedChatClient> ScriptedChatClient::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock script " + path.string());
  try {
    return std::make_shared<ScriptedChatClient>(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed mock script: ") + e.what(), path.string());
  }
}

std::size_t ScriptedChatClient::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

namespace {

bool rule_matches(const json& when, const ChatRequest& request) {
  if (!when.is_object()) return true;
  if (when.contains("round")) {
    int assistant_turns = 0;
    for (const auto& m : request.messages) assistant_turns += m.role == "assistant" ? 1 : 0;
    if (when.at("round").get<int>() != assistant_turns + 1) return false;
  }
  if (when.contains("sample_id")) {
    auto it = request.metadata.find("sample_id");
    if (it == request.metadata.end() || it->second != when.at("sample_id").get<std::string>()) return false;
  }
  if (when.contains("contains")) {
    std::string body;
    for (const auto& m : request.messages) {
      if (m.role == "system") continue;
      body += joined_text({m});
      body += '\n';
    }
    if (body.find(when.at("contains").get<std::string>()) == std::string::npos) return false;
  }
  if (when.contains("system_contains")) {
    if (joined_text(request.messages, "system").find(when.at("system_contains").get<std::string>()) ==
        std::string::npos) {
      return false;
    }
  }
  return true;
}

std::vector<TokenLogProb> synthetic_logprobs(const std::string& text) {
  std::vector<TokenLogProb> out;
  std::size_t i = 0;
  while (i < text.size()) {
    // Each token is a word plus its trailing whitespace, so tokens concatenate back to the text.
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\n') ++j;
    while (j < text.size() && (text[j] == ' ' || text[j] == '\n')) ++j;
    const std::string token = text.substr(i, j - i);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : token) h = (h ^ c) * 1099511628211ULL;
    const auto id = static_cast<std::int64_t>(h % 100000);
    out.push_back({id, token, -(0.05 + static_cast<double>(id % 97) / 100.0)});
    i = j;
  }
  return out;
}

}  // namespace

ChatResponse ScriptedChatClient::complete(const ChatRequest& request) {
  const json* chosen = nullptr;
  std::size_t rule_index = 0;
  if (auto it = script_.find("rules"); it != script_.end()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& rule = (*it)[i];
      if (rule_matches(rule.value("when", json::object()), request)) {
        chosen = &rule;
        rule_index = i;
        break;
      }
    }
  }
  if (chosen == nullptr) {
    auto it = script_.find("default");
    if (it == script_.end()) throw TransportError("mock script has no rule for this request");
    chosen = &*it;
    rule_index = static_cast<std::size_t>(-1);
  }

  {
    std::lock_guard lock(mutex_);
    ++calls_;
    const int fail_first = chosen->value("fail_first", 0);
    if (fail_first > 0) {
      int& seen = failures_[rule_index];
      if (seen < fail_first) {
        ++seen;
        throw TransportError("mock transport failure (scripted)");
      }
    }
  }

  const auto& replies = chosen->at("replies");
  if (!replies.is_array() || replies.empty()) throw ConfigError("mock rule needs a non-empty \"replies\" array");
  const std::size_t pick = static_cast<std::size_t>(request.seed % replies.size());
  ChatResponse r;
  r.text = replies.at(pick).get<std::string>();
  if (request.want_logprobs) {
    if (auto it = chosen->find("logprobs"); it != chosen->end()) {
      r.logprobs = logprobs_from_json(it->at(pick));
    } else if (script_.value("synthetic_logprobs", false)) {
      r.logprobs = synthetic_logprobs(r.text);
    }
  }
  return r;
}

std::shared_ptr<ChatClient> make_chat_client(const std::string& url, const std::string& model, WireOptions options) {
  constexpr std::string_view kMock = "mock:";
  if (url.rfind(kMock, 0) == 0) return ScriptedChatClient::from_file(url.substr(kMock.size()));
  return std::make_shared<HttpChatClient>(url, model, std::move(options));
}

}  // namespace mags::rollout
