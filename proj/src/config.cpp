#include "rolecheck/config.hpp"

#include <filesystem>

#include "rolecheck/errors.hpp"
#include "rolecheck/http_backend.hpp"
#include "rolecheck/text.hpp"

namespace rolecheck {

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  c.base_dir = base_dir;
  try {
    for (const auto& e : j.value("endpoints", nlohmann::json::array())) c.endpoints.push_back(ModelEndpoint::from_json(e));
    c.roles = j.value("roles", std::map<std::string, std::string>{});
    c.seed = j.value("seed", std::uint64_t{0});
    c.workers = j.value("workers", 4);
    c.chunk_sentences = j.value("chunk_sentences", 8);
    c.cache_dir = j.value("cache_dir", "");
    c.template_dir = j.value("template_dir", "");
    c.registry = j.value("registry", "");
    if (j.contains("retry")) {
      const auto& r = j["retry"];
      c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
      c.retry.base_delay = std::chrono::milliseconds(r.value("base_delay_ms", c.retry.base_delay.count()));
      c.retry.multiplier = r.value("multiplier", c.retry.multiplier);
      c.retry.max_delay = std::chrono::milliseconds(r.value("max_delay_ms", c.retry.max_delay.count()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  if (c.chunk_sentences < 2) throw ConfigError("chunk_sentences must be >= 2");
  std::map<std::string, int> ids;
  for (const auto& e : c.endpoints)
    if (++ids[e.id] > 1) throw ConfigError("duplicate endpoint id '" + e.id + "'");
  for (const auto& [role, id] : c.roles)
    if (!ids.count(id)) throw ConfigError("role '" + role + "' names unknown endpoint '" + id + "'");
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  auto j = nlohmann::json::parse(text::read_file(path), nullptr, false);
  if (j.is_discarded()) throw ConfigError("config '" + path + "' is not valid JSON");
  auto dir = std::filesystem::path(path).parent_path().string();
  return from_json(j, dir.empty() ? "." : dir);
}

const ModelEndpoint& RunConfig::endpoint(const std::string& id) const {
  for (const auto& e : endpoints)
    if (e.id == id) return e;
  throw ConfigError("unknown endpoint id '" + id + "'");
}

std::string RunConfig::role(const std::string& name, const std::string& override_id) const {
  std::string id = override_id;
  if (id.empty()) {
    auto it = roles.find(name);
    if (it == roles.end()) throw ConfigError("no endpoint configured for role '" + name + "'");
    id = it->second;
  }
  endpoint(id);
  return id;
}

std::string RunConfig::resolve(const std::string& path) const {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

ProviderBundle build_provider(const RunConfig& config, Provider::Sleeper sleeper) {
  ProviderBundle b;
  std::shared_ptr<ResponseCache> cache;
  if (config.cache_dir.empty()) cache = std::make_shared<ResponseCache>();
  else cache = std::make_shared<ResponseCache>(std::filesystem::path(config.resolve(config.cache_dir)));
  b.provider = std::make_unique<Provider>(config.retry, cache, std::move(sleeper));
  auto http = std::make_shared<HttpBackend>();
  for (const auto& e : config.endpoints) {
    if (e.base_url.rfind("mock:", 0) == 0) {
      auto script = config.resolve(e.base_url.substr(5));
      auto& mock = b.mocks[script];
      if (!mock) mock = MockBackend::from_file(script);
      b.provider->add_endpoint(e, mock);
    } else {
      b.provider->add_endpoint(e, http);
    }
  }
  return b;
}

}  // namespace rolecheck
