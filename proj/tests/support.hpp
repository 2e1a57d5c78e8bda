#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "rolecheck/mock_backend.hpp"
#include "rolecheck/provider.hpp"
#include "rolecheck/text.hpp"

namespace rctest {

inline std::string fixture(const std::string& rel) { return std::string(ROLECHECK_FIXTURES) + "/" + rel; }
inline std::string golden(const std::string& name) {
  return rolecheck::text::read_file(std::string(ROLECHECK_GOLDEN) + "/" + name + ".golden");
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("rolecheck-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline rolecheck::ModelEndpoint chat_endpoint(const std::string& id, int max_in_flight = 4) {
  rolecheck::ModelEndpoint e;
  e.id = id;
  e.base_url = "mock:";
  e.model_name = "mock-" + id;
  e.kind = rolecheck::EndpointKind::chat;
  e.max_in_flight = max_in_flight;
  return e;
}

inline rolecheck::ModelEndpoint embed_endpoint(const std::string& id, int batch = 8, int max_in_flight = 4) {
  auto e = chat_endpoint(id, max_in_flight);
  e.kind = rolecheck::EndpointKind::embedding;
  e.batch_size = batch;
  return e;
}

// Provider with an in-memory cache, no real sleeping and one shared mock.
struct MockRig {
  std::shared_ptr<rolecheck::MockBackend> mock = std::make_shared<rolecheck::MockBackend>();
  std::unique_ptr<rolecheck::Provider> provider;

  explicit MockRig(bool cache = true, rolecheck::RetryPolicy retry = {}) {
    auto c = cache ? std::make_shared<rolecheck::ResponseCache>() : nullptr;
    provider = std::make_unique<rolecheck::Provider>(retry, c, [](std::chrono::milliseconds) {});
  }
  MockRig& chat(const std::string& id, int max_in_flight = 4) {
    provider->add_endpoint(chat_endpoint(id, max_in_flight), mock);
    return *this;
  }
  MockRig& embed(const std::string& id, int batch = 8, int max_in_flight = 4) {
    provider->add_endpoint(embed_endpoint(id, batch, max_in_flight), mock);
    return *this;
  }
};

}  // namespace rctest
