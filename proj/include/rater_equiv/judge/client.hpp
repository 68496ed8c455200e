#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "rater_equiv/error.hpp"
#include "rater_equiv/judge/prompt.hpp"

namespace rater_equiv::judge {

inline constexpr const char* kApiKeyEnv = "RATER_EQUIV_API_KEY";

struct ContentPart {
  enum class Kind { kText, kImage } kind = Kind::kText;
  std::string text;       // kText
  std::string mime_type;  // kImage
  std::string base64;     // kImage
};

struct ChatMessage {
  std::string role;
  std::vector<ContentPart> parts;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  std::optional<double> temperature;
};

// Failure talking to the provider. `retryable` marks throttling, server
// errors and dropped connections.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, bool retryable, int status = 0)
      : Error(ErrorCode::kTransport, message), retryable_(retryable), status_(status) {}

  bool retryable() const noexcept { return retryable_; }
  int status() const noexcept { return status_; }

 private:
  bool retryable_;
  int status_;
};

// Provider-agnostic chat completion endpoint; returns the reply text.
// Implementations must be safe to call from several threads.
class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

using LogSink = std::function<void(const std::string&)>;

inline LogSink stderr_log() {
  return [](const std::string& line) { std::cerr << line << '\n'; };
}

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30000};

  std::chrono::milliseconds backoff(int retry) const {
    double ms = static_cast<double>(initial_backoff.count());
    for (int i = 1; i < retry; ++i) ms *= multiplier;
    return std::chrono::milliseconds(static_cast<long long>(std::min(ms, static_cast<double>(max_backoff.count()))));
  }
};

// Decorator adding exponential backoff on retryable transport failures.
class RetryingClient : public ModelClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  RetryingClient(ModelClient& inner, RetryPolicy policy, LogSink log = stderr_log(),
                 Sleeper sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
      : inner_(inner), policy_(policy), log_(std::move(log)), sleep_(std::move(sleep)) {}

  std::string complete(const ChatRequest& request) override {
    for (int attempt = 1;; ++attempt) {
      try {
        return inner_.complete(request);
      } catch (const TransportError& e) {
        if (!e.retryable() || attempt >= policy_.max_attempts) throw;
        retries_.fetch_add(1, std::memory_order_relaxed);
        const auto wait = policy_.backoff(attempt);
        if (log_) {
          log_("retry " + std::to_string(attempt) + "/" + std::to_string(policy_.max_attempts - 1) + " after " +
               std::to_string(wait.count()) + " ms: " + e.detail());
        }
        sleep_(wait);
      }
    }
  }

  std::size_t retries() const { return retries_.load(); }

 private:
  ModelClient& inner_;
  RetryPolicy policy_;
  LogSink log_;
  Sleeper sleep_;
  std::atomic<std::size_t> retries_{0};
};

inline std::string base64_encode(std::string_view bytes) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const auto n = (static_cast<unsigned char>(bytes[i]) << 16) | (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                   static_cast<unsigned char>(bytes[i + 2]);
    out += {kAlphabet[(n >> 18) & 63], kAlphabet[(n >> 12) & 63], kAlphabet[(n >> 6) & 63], kAlphabet[n & 63]};
  }
  if (i + 1 == bytes.size()) {
    const auto n = static_cast<unsigned char>(bytes[i]) << 16;
    out += {kAlphabet[(n >> 18) & 63], kAlphabet[(n >> 12) & 63], '=', '='};
  } else if (i + 2 == bytes.size()) {
    const auto n = (static_cast<unsigned char>(bytes[i]) << 16) | (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += {kAlphabet[(n >> 18) & 63], kAlphabet[(n >> 12) & 63], kAlphabet[(n >> 6) & 63], '='};
  }
  return out;
}

inline std::string mime_for(const std::string& path) {
  auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
  if (ext == "gif") return "image/gif";
  if (ext == "webp") return "image/webp";
  return "image/png";
}

// Turns an image path into an inline attachment. The default sends the file
// bytes unchanged; the CLI installs a loader that caps the long edge.
using ImageLoader = std::function<ContentPart(const std::string& path)>;

inline ContentPart load_image_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read image '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return {ContentPart::Kind::kImage, {}, mime_for(path), base64_encode(bytes)};
}

inline ChatRequest to_chat_request(const PromptBundle& bundle, const JudgeVariant& variant,
                                   const ImageLoader& load_image) {
  ChatRequest request;
  request.model = variant.model_name;
  std::vector<ContentPart> user;
  std::string text;
  if (!bundle.demonstrations.empty()) {
    text = bundle.demonstrations_intro;
    for (const auto& d : bundle.demonstrations) text += "\n\n" + d;
    text += "\n\n";
  }
  text += bundle.query_text;
  if (variant.uses_reasoning) {
    // reasoning endpoints take no system role; fold it into the user turn
    text = bundle.system_text() + "\n\n" + text;
  } else {
    request.messages.push_back({"system", {{ContentPart::Kind::kText, bundle.system_text(), {}, {}}}});
  }
  user.push_back({ContentPart::Kind::kText, text, {}, {}});
  if (bundle.query_image) user.push_back(load_image(*bundle.query_image));
  request.messages.push_back({"user", std::move(user)});
  return request;
}

inline ChatRequest transcription_request(const std::string& model, const std::string& instruction,
                                         const std::string& image_path, const ImageLoader& load_image) {
  ChatRequest request;
  request.model = model;
  request.messages.push_back(
      {"user", {{ContentPart::Kind::kText, instruction, {}, {}}, load_image(image_path)}});
  return request;
}

// OpenAI-style chat-completions body.
inline nlohmann::json chat_request_json(const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    nlohmann::json content = nlohmann::json::array();
    for (const auto& p : m.parts) {
      if (p.kind == ContentPart::Kind::kText) {
        content.push_back({{"type", "text"}, {"text", p.text}});
      } else {
        content.push_back(
            {{"type", "image_url"}, {"image_url", {{"url", "data:" + p.mime_type + ";base64," + p.base64}}}});
      }
    }
    messages.push_back({{"role", m.role}, {"content", content}});
  }
  nlohmann::json body{{"model", request.model}, {"messages", messages}};
  if (request.temperature) body["temperature"] = *request.temperature;
  return body;
}

inline std::string parse_chat_response(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    std::string text;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") text += part.value("text", "");
    }
    return text;
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed provider response: ") + e.what(), false);
  }
}

// Bearer token from RATER_EQUIV_API_KEY; empty when unset.
inline std::string api_key_from_env() {
  const char* key = std::getenv(kApiKeyEnv);
  return key ? std::string(key) : std::string();
}

}  // namespace rater_equiv::judge
