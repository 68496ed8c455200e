#pragma once

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include <chrono>
#include <string>

#include "rater_equiv/judge/client.hpp"

namespace rater_equiv::judge {

struct HttpClientOptions {
  std::string base_url = "https://api.openai.com/v1";  // any chat-completions-compatible host
  std::string api_key;                                  // defaults to $RATER_EQUIV_API_KEY
  std::chrono::seconds timeout{120};
};

// POSTs to <base_url>/chat/completions. A fresh connection per call keeps
// the client usable from several worker threads.
class HttpChatClient : public ModelClient {
 public:
  explicit HttpChatClient(HttpClientOptions options) : options_(std::move(options)) {
    if (options_.api_key.empty()) options_.api_key = api_key_from_env();
    split_url(options_.base_url);
  }

  std::string complete(const ChatRequest& request) override {
    httplib::Client client(origin_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

    auto result = client.Post(path_prefix_ + "/chat/completions", headers, chat_request_json(request).dump(),
                              "application/json");
    if (!result) {
      throw TransportError("request to " + origin_ + " failed: " + httplib::to_string(result.error()), true);
    }
    const int status = result->status;
    if (status == 429 || status >= 500) {
      throw TransportError("provider returned HTTP " + std::to_string(status), true, status);
    }
    if (status < 200 || status >= 300) {
      throw TransportError("provider returned HTTP " + std::to_string(status) + ": " + result->body, false, status);
    }
    return parse_chat_response(result->body);
  }

 private:
  void split_url(const std::string& url) {
    const auto scheme = url.find("://");
    const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    origin_ = path_start == std::string::npos ? url : url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }

  HttpClientOptions options_;
  std::string origin_;
  std::string path_prefix_;
};

}  // namespace rater_equiv::judge
