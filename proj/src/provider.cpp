#include "rolecheck/provider.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <future>
#include <thread>

#include "rolecheck/errors.hpp"
#include "rolecheck/text.hpp"

namespace rolecheck {

std::string to_string(EndpointKind kind) { return kind == EndpointKind::chat ? "chat" : "embedding"; }

EndpointKind endpoint_kind_from_string(const std::string& s) {
  if (s == "chat") return EndpointKind::chat;
  if (s == "embedding") return EndpointKind::embedding;
  throw ConfigError("unknown endpoint kind '" + s + "'");
}

ModelEndpoint ModelEndpoint::from_json(const nlohmann::json& j) {
  ModelEndpoint e;
  if (!j.contains("id") || !j["id"].is_string()) throw ConfigError("endpoint without string 'id'");
  e.id = j["id"].get<std::string>();
  e.base_url = j.value("base_url", "");
  e.model_name = j.value("model_name", j.value("model", ""));
  e.kind = endpoint_kind_from_string(j.value("kind", "chat"));
  e.max_in_flight = j.value("max_in_flight", 1);
  e.temperature = j.value("temperature", 0.0);
  e.batch_size = j.value("batch_size", 32);
  if (e.max_in_flight < 1) throw ConfigError("endpoint '" + e.id + "': max_in_flight must be >= 1");
  if (e.temperature < 0) throw ConfigError("endpoint '" + e.id + "': temperature must be >= 0");
  if (e.batch_size < 1) throw ConfigError("endpoint '" + e.id + "': batch_size must be >= 1");
  return e;
}

nlohmann::json ModelEndpoint::to_json() const {
  nlohmann::json j{{"id", id},
                   {"base_url", base_url},
                   {"model_name", model_name},
                   {"kind", to_string(kind)},
                   {"max_in_flight", max_in_flight}};
  if (kind == EndpointKind::chat) j["temperature"] = temperature;
  else j["batch_size"] = batch_size;
  return j;
}

std::chrono::milliseconds RetryPolicy::delay_after(int failed_attempt) const {
  double d = static_cast<double>(base_delay.count()) * std::pow(multiplier, failed_attempt - 1);
  d = std::min(d, static_cast<double>(max_delay.count()));
  return std::chrono::milliseconds(static_cast<long long>(d));
}

// ---------------------------------------------------------------- cache

ResponseCache::ResponseCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
  if (dir_) std::filesystem::create_directories(*dir_);
}

std::optional<nlohmann::json> ResponseCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  if (!dir_) return std::nullopt;
  auto path = *dir_ / key.substr(0, 2) / (key + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    auto value = nlohmann::json::parse(text::read_file(path.string()));
    memory_.emplace(key, value);
    return value;
  } catch (const nlohmann::json::exception&) {
    // A torn write from an interrupted run; treat as a miss.
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const nlohmann::json& value) {
  std::lock_guard lock(mu_);
  memory_.insert_or_assign(key, value);
  if (!dir_) return;
  auto path = *dir_ / key.substr(0, 2) / (key + ".json");
  auto tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  text::write_file(tmp.string(), value.dump());
  std::filesystem::rename(tmp, path);
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  return memory_.size();
}

// ---------------------------------------------------------------- provider

struct Provider::Slot {
  ModelEndpoint endpoint;
  std::shared_ptr<Backend> backend;
  std::counting_semaphore<> in_flight;

  Slot(ModelEndpoint e, std::shared_ptr<Backend> b)
      : endpoint(std::move(e)), backend(std::move(b)), in_flight(endpoint.max_in_flight) {}
};

Provider::Provider(RetryPolicy retry, std::shared_ptr<ResponseCache> cache, Sleeper sleeper)
    : retry_(retry), cache_(std::move(cache)), sleeper_(std::move(sleeper)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (retry_.max_attempts < 1) throw ConfigError("retry max_attempts must be >= 1");
}

Provider::~Provider() = default;

void Provider::add_endpoint(const ModelEndpoint& endpoint, std::shared_ptr<Backend> backend) {
  if (slots_.count(endpoint.id)) throw ConfigError("duplicate endpoint id '" + endpoint.id + "'");
  if (endpoint.max_in_flight < 1) throw ConfigError("endpoint '" + endpoint.id + "': max_in_flight must be >= 1");
  slots_.emplace(endpoint.id, std::make_unique<Slot>(endpoint, std::move(backend)));
}

bool Provider::has_endpoint(const std::string& id) const { return slots_.count(id) > 0; }

Provider::Slot& Provider::slot(const std::string& id) const {
  auto it = slots_.find(id);
  if (it == slots_.end()) throw ConfigError("unknown endpoint id '" + id + "'");
  return *it->second;
}

const ModelEndpoint& Provider::endpoint(const std::string& id) const { return slot(id).endpoint; }

namespace {
// Length-prefixed fields so no two field tuples serialize identically.
void append_field(std::string& out, std::string_view field) {
  out += std::to_string(field.size());
  out += ':';
  out += field;
  out += ';';
}
}  // namespace

std::string Provider::chat_cache_key(const ModelEndpoint& endpoint, const std::string& system_text,
                                     const std::string& user_text, const SamplingParams& params,
                                     const std::string& salt) {
  std::string material = "chat;";
  append_field(material, endpoint.id);
  append_field(material, endpoint.model_name);
  append_field(material, system_text);
  append_field(material, user_text);
  char temp[64];
  std::snprintf(temp, sizeof temp, "%.17g", params.temperature);
  append_field(material, temp);
  append_field(material, salt);
  return text::sha256_hex(material);
}

std::string Provider::embed_cache_key(const ModelEndpoint& endpoint, const std::string& text) {
  std::string material = "embed;";
  append_field(material, endpoint.id);
  append_field(material, endpoint.model_name);
  append_field(material, text::sha256_hex(text));
  return text::sha256_hex(material);
}

template <typename Fn>
auto Provider::with_retry(Slot& s, Fn&& fn, int* attempts) -> decltype(fn()) {
  for (int attempt = 1;; ++attempt) {
    if (attempts) *attempts = attempt;
    try {
      s.in_flight.acquire();
      struct Release {
        std::counting_semaphore<>& sem;
        ~Release() { sem.release(); }
      } release{s.in_flight};
      return fn();
    } catch (const TransportError&) {
      if (attempt >= retry_.max_attempts) throw;
    }
    sleeper_(retry_.delay_after(attempt));
  }
}

ChatExchange Provider::chat(const std::string& endpoint_id, const std::string& system_text,
                            const std::string& user_text, const ChatOptions& options) {
  Slot& s = slot(endpoint_id);
  if (s.endpoint.kind != EndpointKind::chat)
    throw ConfigError("endpoint '" + endpoint_id + "' is not a chat endpoint");
  if (text::is_blank(user_text)) throw UsageError("chat: user_text must be non-empty");

  ChatExchange ex;
  ex.system_text = system_text;
  ex.user_text = user_text;
  ex.params.temperature = s.endpoint.temperature;

  const bool cached = cache_ && options.use_cache;
  std::string key;
  if (cached) {
    key = chat_cache_key(s.endpoint, system_text, user_text, ex.params, options.salt);
    if (auto hit = cache_->get(key)) {
      ex.response_text = hit->at("text").get<std::string>();
      ex.usage.prompt_tokens = hit->value("prompt_tokens", 0);
      ex.usage.completion_tokens = hit->value("completion_tokens", 0);
      ex.cache_hit = true;
      return ex;
    }
  }

  ChatRequest request{system_text, user_text, ex.params};
  ChatReply reply = with_retry(s, [&] { return s.backend->chat(s.endpoint, request); }, &ex.attempts);
  if (text::is_blank(reply.text))
    throw EmptyResponse("endpoint '" + endpoint_id + "' returned no content");
  ex.response_text = std::move(reply.text);
  ex.usage = reply.usage;
  if (cached) {
    cache_->put(key, {{"text", ex.response_text},
                      {"prompt_tokens", ex.usage.prompt_tokens},
                      {"completion_tokens", ex.usage.completion_tokens}});
  }
  return ex;
}

std::vector<EmbeddingVector> Provider::embed(const std::string& endpoint_id,
                                             const std::vector<std::string>& texts) {
  Slot& s = slot(endpoint_id);
  if (s.endpoint.kind != EndpointKind::embedding)
    throw ConfigError("endpoint '" + endpoint_id + "' is not an embedding endpoint");
  if (texts.empty()) throw UsageError("embed: no input texts");
  for (const auto& t : texts)
    if (text::is_blank(t)) throw UsageError("embed: blank input text");

  std::vector<std::optional<std::vector<double>>> found(texts.size());
  std::vector<std::size_t> misses;
  std::vector<int> attempts(texts.size(), 0);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (cache_) {
      if (auto hit = cache_->get(embed_cache_key(s.endpoint, texts[i]))) {
        found[i] = hit->get<std::vector<double>>();
        continue;
      }
    }
    misses.push_back(i);
  }

  // Batches go out concurrently; the endpoint semaphore caps the fan-out.
  const auto batch = static_cast<std::size_t>(s.endpoint.batch_size);
  std::vector<std::future<void>> jobs;
  for (std::size_t start = 0; start < misses.size(); start += batch) {
    std::size_t end = std::min(misses.size(), start + batch);
    jobs.push_back(std::async(std::launch::async, [&, start, end] {
      std::vector<std::string> chunk;
      for (std::size_t k = start; k < end; ++k) chunk.push_back(texts[misses[k]]);
      int tries = 0;
      auto vectors = with_retry(s, [&] { return s.backend->embed(s.endpoint, chunk); }, &tries);
      if (vectors.size() != chunk.size())
        throw DimensionMismatch("endpoint '" + endpoint_id + "' returned " +
                                std::to_string(vectors.size()) + " vectors for " +
                                std::to_string(chunk.size()) + " texts");
      for (std::size_t k = start; k < end; ++k) {
        found[misses[k]] = std::move(vectors[k - start]);
        attempts[misses[k]] = tries;
      }
    }));
  }
  std::exception_ptr first_error;
  for (auto& job : jobs) {
    try {
      job.get();
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  const std::size_t dim = found.front()->size();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto& values = *found[i];
    if (values.empty() || values.size() != dim)
      throw DimensionMismatch("endpoint '" + endpoint_id + "' returned inconsistent vector lengths (" +
                              std::to_string(dim) + " vs " + std::to_string(values.size()) + ")");
    if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); }))
      throw InvalidEmbedding("endpoint '" + endpoint_id + "' returned a non-finite value");
    const bool hit = attempts[i] == 0;
    if (cache_ && !hit) cache_->put(embed_cache_key(s.endpoint, texts[i]), values);
    out.push_back({std::move(values), dim, text::sha256_hex(texts[i]), hit, attempts[i]});
  }
  return out;
}

std::string api_key_for(const std::string& endpoint_id) {
  std::string var = "ROLECHECK_API_KEY_";
  for (unsigned char c : endpoint_id) var += std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_';
  if (const char* v = std::getenv(var.c_str()); v && *v) return v;
  if (const char* v = std::getenv("ROLECHECK_API_KEY"); v && *v) return v;
  return {};
}

}  // namespace rolecheck
