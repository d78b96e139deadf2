#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "critter/net/http.hpp"

namespace critter::net {

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;
};

/// Text-completion backend speaking the chat-completion convention.
/// Implementations must be safe to call concurrently.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages) const = 0;
};

/// Request body: {"model", "messages": [{"role", "content"}...], "temperature"}.
std::string encode_chat_request(const std::string& model, const std::vector<ChatMessage>& messages,
                                double temperature);

/// Extracts choices[0].message.content; throws ParseError otherwise.
std::string decode_chat_response(std::string_view body);

class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(ServiceEndpoint endpoint, double temperature = 0.0)
      : endpoint_(std::move(endpoint)), temperature_(temperature) {}

  std::string complete(const std::vector<ChatMessage>& messages) const override;

 private:
  ServiceEndpoint endpoint_;
  double temperature_;
};

/// Adapts a callable; used for offline mocks and tests.
class FunctionChatBackend final : public ChatBackend {
 public:
  using Fn = std::function<std::string(const std::vector<ChatMessage>&)>;
  explicit FunctionChatBackend(Fn fn) : fn_(std::move(fn)) {}

  std::string complete(const std::vector<ChatMessage>& messages) const override { return fn_(messages); }

 private:
  Fn fn_;
};

}  // namespace critter::net
