#include "critter/net/chat.hpp"

#include <json.hpp>

#include "critter/util/error.hpp"

namespace critter::net {

std::string encode_chat_request(const std::string& model, const std::vector<ChatMessage>& messages,
                                double temperature) {
  nlohmann::json body;
  body["model"] = model;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  body["temperature"] = temperature;
  return body.dump();
}

std::string decode_chat_response(std::string_view body) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("chat response is not JSON: ") + e.what());
  }
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    throw ParseError("chat response has no choices");
  }
  const auto& first = (*choices)[0];
  if (!first.contains("message") || !first["message"].contains("content") ||
      !first["message"]["content"].is_string()) {
    throw ParseError("chat response choice has no message content");
  }
  return first["message"]["content"].get<std::string>();
}

std::string HttpChatBackend::complete(const std::vector<ChatMessage>& messages) const {
  const HttpResponse r = http_post(endpoint_, encode_chat_request(endpoint_.model, messages, temperature_),
                                   "application/json");
  return decode_chat_response(r.body);
}

}  // namespace critter::net
