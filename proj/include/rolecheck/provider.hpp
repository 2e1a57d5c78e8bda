#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace rolecheck {

enum class EndpointKind { chat, embedding };

std::string to_string(EndpointKind kind);
EndpointKind endpoint_kind_from_string(const std::string& s);

struct ModelEndpoint {
  std::string id;
  std::string base_url;
  std::string model_name;
  EndpointKind kind = EndpointKind::chat;
  int max_in_flight = 1;
  double temperature = 0.0;
  // Embedding endpoints only: texts per request.
  int batch_size = 32;

  static ModelEndpoint from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct SamplingParams {
  double temperature = 0.0;
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ChatExchange {
  std::string system_text;
  std::string user_text;
  SamplingParams params;
  std::string response_text;
  Usage usage;
  bool cache_hit = false;
  int attempts = 0;  // backend attempts made; 0 on a cache hit
};

struct EmbeddingVector {
  std::vector<double> values;
  std::size_t dim = 0;
  std::string source_text_hash;
  bool cache_hit = false;
  int attempts = 0;  // attempts of the batch request that produced it
};

struct ChatRequest {
  std::string system_text;
  std::string user_text;
  SamplingParams params;
};

struct ChatReply {
  std::string text;
  Usage usage;
};

// Transport to a model service. Implementations throw TransportError for
// retryable failures, ProviderRefusal for non-success statuses.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatReply chat(const ModelEndpoint& endpoint, const ChatRequest& request) = 0;
  virtual std::vector<std::vector<double>> embed(const ModelEndpoint& endpoint,
                                                 std::span<const std::string> texts) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{250};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{8000};

  // Delay to wait after the given failed attempt (1-based).
  std::chrono::milliseconds delay_after(int failed_attempt) const;
};

// Thread-safe key/value cache with optional on-disk persistence
// (<dir>/<key[0:2]>/<key>.json) so interrupted runs resume.
class ResponseCache {
 public:
  explicit ResponseCache(std::optional<std::filesystem::path> dir = std::nullopt);

  std::optional<nlohmann::json> get(const std::string& key) const;
  void put(const std::string& key, const nlohmann::json& value);
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> dir_;
  mutable std::mutex mu_;
  mutable std::map<std::string, nlohmann::json> memory_;
};

struct ChatOptions {
  // Extra cache-key material, e.g. "trial=1" or "attempt=2". Requests with
  // distinct salts are cached separately.
  std::string salt;
  bool use_cache = true;
};

// Gateway to every model endpoint of a run: caching, retries with
// exponential backoff, and a per-endpoint in-flight limit.
class Provider {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  Provider(RetryPolicy retry, std::shared_ptr<ResponseCache> cache, Sleeper sleeper = {});
  ~Provider();
  Provider(const Provider&) = delete;
  Provider& operator=(const Provider&) = delete;

  void add_endpoint(const ModelEndpoint& endpoint, std::shared_ptr<Backend> backend);
  bool has_endpoint(const std::string& id) const;
  const ModelEndpoint& endpoint(const std::string& id) const;

  ChatExchange chat(const std::string& endpoint_id, const std::string& system_text,
                    const std::string& user_text, const ChatOptions& options = {});

  std::vector<EmbeddingVector> embed(const std::string& endpoint_id,
                                     const std::vector<std::string>& texts);

  static std::string chat_cache_key(const ModelEndpoint& endpoint, const std::string& system_text,
                                    const std::string& user_text, const SamplingParams& params,
                                    const std::string& salt);
  static std::string embed_cache_key(const ModelEndpoint& endpoint, const std::string& text);

 private:
  struct Slot;
  Slot& slot(const std::string& id) const;

  template <typename Fn>
  auto with_retry(Slot& slot, Fn&& fn, int* attempts) -> decltype(fn());

  RetryPolicy retry_;
  std::shared_ptr<ResponseCache> cache_;
  Sleeper sleeper_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
};

// Bearer token lookup: ROLECHECK_API_KEY_<ID> (ID upper-cased, non
// alphanumerics mapped to '_'), falling back to ROLECHECK_API_KEY.
std::string api_key_for(const std::string& endpoint_id);

}  // namespace rolecheck
