#pragma once

// Chat-completions provider over HTTP(S). Requires linking OpenSSL for
// https endpoints; define CPPHTTPLIB_OPENSSL_SUPPORT before including.

#include <chrono>
#include <cstdlib>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "fvrule/errors.hpp"
#include "fvrule/llm_gateway.hpp"

namespace fvrule {

struct ProviderConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model_name = "gpt-4o";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  int max_output_tokens = 1024;
  int request_timeout_s = 60;
  int max_retries = 3;

  // The key itself is never stored; only the variable name is serialized.
  nlohmann::json to_json() const {
    return {{"endpoint", endpoint},
            {"model_name", model_name},
            {"api_key_env", api_key_env},
            {"temperature", temperature},
            {"max_output_tokens", max_output_tokens},
            {"request_timeout_s", request_timeout_s},
            {"max_retries", max_retries}};
  }

  static ProviderConfig from_json(const nlohmann::json& j) {
    ProviderConfig c;
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model_name = j.value("model_name", c.model_name);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.temperature = j.value("temperature", c.temperature);
    c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
    c.request_timeout_s = j.value("request_timeout_s", c.request_timeout_s);
    c.max_retries = j.value("max_retries", c.max_retries);
    if (c.temperature < 0) throw Error(ErrorCode::Config, "temperature must be >= 0");
    return c;
  }

  std::string api_key() const {
    const char* k = std::getenv(api_key_env.c_str());
    return k ? k : "";
  }
};

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::Config, "endpoint must be an absolute URL");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

inline nlohmann::json post_json(const ProviderConfig& cfg, const std::string& url, const nlohmann::json& body) {
  const auto [origin, path] = split_url(url);
  httplib::Client cli(origin);
  cli.set_connection_timeout(std::chrono::seconds(cfg.request_timeout_s));
  cli.set_read_timeout(std::chrono::seconds(cfg.request_timeout_s));
  cli.set_write_timeout(std::chrono::seconds(cfg.request_timeout_s));
  httplib::Headers headers;
  const auto key = cfg.api_key();
  if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
  auto res = cli.Post(path, headers, body.dump(), "application/json");
  if (!res) throw ProviderError("request failed: " + httplib::to_string(res.error()), true);
  if (res->status == 429 || res->status >= 500)
    throw ProviderError("HTTP " + std::to_string(res->status), true);
  if (res->status != 200) throw ProviderError("HTTP " + std::to_string(res->status) + ": " + res->body, false);
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed response: ") + e.what(), false);
  }
}

}  // namespace detail

class HttpProvider : public LlmProvider {
 public:
  explicit HttpProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {}

  std::string complete(const PromptRequest& req) const override {
    const nlohmann::json body = {{"model", cfg_.model_name},
                                 {"messages", {{{"role", "user"}, {"content", req.text}}}},
                                 {"temperature", cfg_.temperature},
                                 {"max_tokens", cfg_.max_output_tokens}};
    const auto j = detail::post_json(cfg_, cfg_.endpoint, body);
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw ProviderError("response lacks choices[0].message.content", false);
    }
  }

  std::string name() const override { return "http:" + cfg_.model_name; }
  const ProviderConfig& config() const { return cfg_; }

 private:
  ProviderConfig cfg_;
};

// Embedding vector from an OpenAI-style /embeddings endpoint.
inline std::vector<double> http_embed(const ProviderConfig& cfg, const std::string& url,
                                      const std::string& model, std::string_view input) {
  const auto j = detail::post_json(cfg, url, {{"model", model}, {"input", std::string(input)}});
  try {
    return j.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    throw ProviderError("response lacks data[0].embedding", false);
  }
}

}  // namespace fvrule
