#include "rolecheck/http_backend.hpp"

#include <httplib.h>

#include <algorithm>

#include "rolecheck/errors.hpp"

namespace rolecheck {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing '/'
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url '" + url + "' has no scheme");
  auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

}  // namespace

HttpBackend::HttpBackend(std::chrono::seconds timeout) : timeout_(timeout) {}

nlohmann::json HttpBackend::chat_body(const ModelEndpoint& endpoint, const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  if (!request.system_text.empty())
    messages.push_back({{"role", "system"}, {"content", request.system_text}});
  messages.push_back({{"role", "user"}, {"content", request.user_text}});
  return {{"model", endpoint.model_name},
          {"messages", messages},
          {"temperature", request.params.temperature}};
}

nlohmann::json HttpBackend::embed_body(const ModelEndpoint& endpoint, std::span<const std::string> texts) {
  return {{"model", endpoint.model_name},
          {"input", std::vector<std::string>(texts.begin(), texts.end())}};
}

ChatReply HttpBackend::parse_chat_response(const std::string& body) {
  ChatReply reply;
  try {
    auto j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) reply.text = content.get<std::string>();
    if (j.contains("usage") && j["usage"].is_object()) {
      reply.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
      reply.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProviderRefusal(std::string("malformed chat completion payload: ") + e.what());
  }
  return reply;
}

std::vector<std::vector<double>> HttpBackend::parse_embed_response(const std::string& body) {
  try {
    auto j = nlohmann::json::parse(body);
    std::vector<std::pair<int, std::vector<double>>> rows;
    int position = 0;
    for (const auto& item : j.at("data")) {
      rows.emplace_back(item.value("index", position++), item.at("embedding").get<std::vector<double>>());
    }
    std::stable_sort(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.first < b.first; });
    std::vector<std::vector<double>> out;
    for (auto& [index, v] : rows) out.push_back(std::move(v));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderRefusal(std::string("malformed embeddings payload: ") + e.what());
  }
}

std::string HttpBackend::post(const ModelEndpoint& endpoint, const std::string& route,
                              const nlohmann::json& body) {
  auto url = split_url(endpoint.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (auto key = api_key_for(endpoint.id); !key.empty())
    headers.emplace("Authorization", "Bearer " + key);

  auto res = client.Post(url.path + route, headers, body.dump(), "application/json");
  if (!res) {
    throw TransportError("POST " + endpoint.base_url + route + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("POST " + endpoint.base_url + route + " returned " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw ProviderRefusal("POST " + endpoint.base_url + route + " returned " + std::to_string(res->status) +
                          ": " + res->body.substr(0, 500));
  }
  return res->body;
}

ChatReply HttpBackend::chat(const ModelEndpoint& endpoint, const ChatRequest& request) {
  return parse_chat_response(post(endpoint, "/chat/completions", chat_body(endpoint, request)));
}

std::vector<std::vector<double>> HttpBackend::embed(const ModelEndpoint& endpoint,
                                                    std::span<const std::string> texts) {
  return parse_embed_response(post(endpoint, "/embeddings", embed_body(endpoint, texts)));
}

}  // namespace rolecheck
