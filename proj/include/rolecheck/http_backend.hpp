#pragma once

#include <chrono>
#include <string>

#include "rolecheck/provider.hpp"

namespace rolecheck {

// OpenAI-compatible transport:
//   POST {base_url}/chat/completions  {model, messages[{role,content}], temperature}
//   POST {base_url}/embeddings        {model, input[]}
// 429 and 5xx map to TransportError (retried); other non-2xx statuses to
// ProviderRefusal.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(std::chrono::seconds timeout = std::chrono::seconds(120));

  ChatReply chat(const ModelEndpoint& endpoint, const ChatRequest& request) override;
  std::vector<std::vector<double>> embed(const ModelEndpoint& endpoint,
                                         std::span<const std::string> texts) override;

  static nlohmann::json chat_body(const ModelEndpoint& endpoint, const ChatRequest& request);
  static nlohmann::json embed_body(const ModelEndpoint& endpoint, std::span<const std::string> texts);
  static ChatReply parse_chat_response(const std::string& body);
  static std::vector<std::vector<double>> parse_embed_response(const std::string& body);

 private:
  std::string post(const ModelEndpoint& endpoint, const std::string& route, const nlohmann::json& body);

  std::chrono::seconds timeout_;
};

}  // namespace rolecheck
