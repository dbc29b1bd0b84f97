#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <unistd.h>

#include "fvrule/llm_gateway.hpp"

namespace testing_support {

inline std::string source_path(const std::string& rel) { return std::string(FVRULE_SOURCE_DIR) + "/" + rel; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fvrule_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline fvrule::LlmGateway scripted(std::string_view jsonl, fvrule::GatewayOptions opts = {}) {
  return fvrule::LlmGateway(
      std::make_shared<fvrule::ScriptedProvider>(fvrule::ScriptedProvider::from_jsonl(jsonl)), opts);
}

inline fvrule::LlmGateway demo_gateway(fvrule::GatewayOptions opts = {}) {
  return fvrule::LlmGateway(std::make_shared<fvrule::ScriptedProvider>(
                                fvrule::ScriptedProvider::from_file(source_path("fixtures/demo.jsonl"))),
                            opts);
}

}  // namespace testing_support
