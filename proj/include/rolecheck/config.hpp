#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "rolecheck/mock_backend.hpp"
#include "rolecheck/provider.hpp"

namespace rolecheck {

// Config file (JSON). Relative paths resolve against the file's directory.
//   {"endpoints": [{"id", "base_url", "model_name", "kind", "max_in_flight",
//                   "temperature", "batch_size"}],
//    "roles": {"constructor": id, "judge": id, "embedder": id, "responder": id},
//    "seed": 7, "workers": 4, "chunk_sentences": 8,
//    "cache_dir": "cache", "template_dir": "", "registry": "",
//    "retry": {"max_attempts": 3, "base_delay_ms": 250, "multiplier": 2,
//              "max_delay_ms": 8000}}
// An endpoint whose base_url is "mock:<script.json>" is served by a
// MockBackend loaded from that script; endpoints naming the same script
// share one backend.
struct RunConfig {
  std::vector<ModelEndpoint> endpoints;
  std::map<std::string, std::string> roles;
  std::uint64_t seed = 0;
  int workers = 4;
  int chunk_sentences = 8;
  std::string cache_dir;
  std::string template_dir;
  std::string registry;
  RetryPolicy retry;
  std::string base_dir = ".";

  static RunConfig from_json(const nlohmann::json& j, const std::string& base_dir = ".");
  static RunConfig load(const std::string& path);

  const ModelEndpoint& endpoint(const std::string& id) const;  // throws ConfigError
  // Endpoint id bound to `role`, or `override_id` when non-empty. Throws
  // ConfigError when neither resolves to a configured endpoint.
  std::string role(const std::string& role, const std::string& override_id = {}) const;
  std::string resolve(const std::string& path) const;
};

struct ProviderBundle {
  std::unique_ptr<Provider> provider;
  std::map<std::string, std::shared_ptr<MockBackend>> mocks;  // by resolved script path
};

ProviderBundle build_provider(const RunConfig& config, Provider::Sleeper sleeper = {});

}  // namespace rolecheck
