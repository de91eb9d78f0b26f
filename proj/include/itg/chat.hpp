#pragma once

// Chat-completion client contract and the HTTP implementation. The offline
// mock lives with the reasoning layer.

#include <httplib.h>
#include <json.hpp>

// <resolv.h> defines _res as a macro, which breaks Eigen headers included later
#ifdef _res
#undef _res
#endif

#include <cstdlib>
#include <memory>
#include <mutex>
#include <condition_variable>
#include <stdexcept>
#include <string>

namespace itg {

struct ChatRequest {
  std::string system;
  std::string user;
  double temperature = 0.2;
  int max_tokens = 512;
};

struct ChatResponse {
  std::string content;
};

/// Transport or protocol failure of a chat client.
struct ChatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Non-empty content or ChatError.
  virtual ChatResponse complete(const ChatRequest& req) = 0;
};

struct RemoteChatSettings {
  std::string endpoint;  // full URL of a chat-completions route
  std::string api_key;
  std::string model;
  double timeout_s = 30.0;
  int max_concurrency = 4;

  /// LLM_ENDPOINT, LLM_API_KEY, LLM_MODEL.
  static RemoteChatSettings from_env() {
    auto env = [](const char* k) {
      const char* v = std::getenv(k);
      return std::string(v ? v : "");
    };
    RemoteChatSettings s;
    s.endpoint = env("LLM_ENDPOINT");
    s.api_key = env("LLM_API_KEY");
    s.model = env("LLM_MODEL");
    return s;
  }
};

/// Chat-completions over HTTP(S). One attempt per call; callers own retries.
class RemoteChatClient final : public ChatClient {
 public:
  explicit RemoteChatClient(RemoteChatSettings s) : s_(std::move(s)) {
    if (s_.endpoint.empty()) throw ChatError("remote client: LLM_ENDPOINT is not set");
    const auto scheme_end = s_.endpoint.find("://");
    const auto path_start = s_.endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    origin_ = s_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : s_.endpoint.substr(path_start);
    if (s_.max_concurrency < 1) throw ChatError("remote client: max_concurrency must be positive");
  }

  ChatResponse complete(const ChatRequest& req) override {
    Slot slot(*this);
    std::unique_ptr<httplib::Client> cli;
    try {
      cli = std::make_unique<httplib::Client>(origin_);
    } catch (const std::exception& e) {
      throw ChatError(std::string("remote client: ") + e.what());
    }
    const auto secs = static_cast<time_t>(s_.timeout_s);
    const auto usecs = static_cast<time_t>((s_.timeout_s - static_cast<double>(secs)) * 1e6);
    cli->set_connection_timeout(secs, usecs);
    cli->set_read_timeout(secs, usecs);
    cli->set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!s_.api_key.empty()) headers.emplace("Authorization", "Bearer " + s_.api_key);
    const nlohmann::json body = {{"model", s_.model},
                                 {"temperature", req.temperature},
                                 {"max_tokens", req.max_tokens},
                                 {"messages",
                                  {{{"role", "system"}, {"content", req.system}},
                                   {{"role", "user"}, {"content", req.user}}}}};
    const auto res = cli->Post(path_, headers, body.dump(), "application/json");
    if (!res) throw ChatError("remote client: " + httplib::to_string(res.error()));
    if (res->status != 200) throw ChatError("remote client: HTTP " + std::to_string(res->status));
    try {
      const auto j = nlohmann::json::parse(res->body);
      std::string content = j.at("choices").at(0).at("message").at("content").get<std::string>();
      if (content.empty()) throw ChatError("remote client: empty content");
      return {std::move(content)};
    } catch (const nlohmann::json::exception& e) {
      throw ChatError(std::string("remote client: unexpected response: ") + e.what());
    }
  }

 private:
  // Caps in-flight requests at max_concurrency.
  struct Slot {
    explicit Slot(RemoteChatClient& c) : c_(c) {
      std::unique_lock lk(c_.mu_);
      c_.cv_.wait(lk, [&] { return c_.in_flight_ < c_.s_.max_concurrency; });
      ++c_.in_flight_;
    }
    ~Slot() {
      {
        std::lock_guard lk(c_.mu_);
        --c_.in_flight_;
      }
      c_.cv_.notify_one();
    }
    RemoteChatClient& c_;
  };

  RemoteChatSettings s_;
  std::string origin_, path_;
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

}  // namespace itg
