#include "adlgen/llm_client.hpp"

#include <chrono>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "httplib.h"

namespace adlgen {

LlmClient::LlmClient(LlmClientConfig cfg) : cfg_(std::move(cfg)) {
  std::string rest = cfg_.endpoint;
  const auto scheme = rest.find("://");
  if (scheme != std::string::npos) {
    if (rest.substr(0, scheme) != "http")
      throw std::invalid_argument("llm client: only http endpoints are supported: " +
                                  cfg_.endpoint);
    rest = rest.substr(scheme + 3);
  }
  const auto slash = rest.find('/');
  path_ = slash == std::string::npos ? "/" : rest.substr(slash);
  std::string hostport = rest.substr(0, slash);
  const auto colon = hostport.rfind(':');
  if (colon != std::string::npos) {
    host_ = hostport.substr(0, colon);
    port_ = std::stoi(hostport.substr(colon + 1));
  } else {
    host_ = hostport;
    port_ = 80;
  }
  if (host_.empty()) throw std::invalid_argument("llm client: empty endpoint host");
}

std::string LlmClient::post(const std::string& body) const {
  std::string last_error;
  int backoff_ms = cfg_.backoff_initial_ms;
  for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
    httplib::Client client(host_, port_);
    client.set_connection_timeout(cfg_.timeout_seconds, 0);
    client.set_read_timeout(cfg_.timeout_seconds, 0);

    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);

    auto res = client.Post(path_, headers, body, "text/plain");
    if (res && res->status >= 200 && res->status < 300) return res->body;
    if (res) {
      // A definite HTTP error is not transient; do not retry.
      throw std::runtime_error("llm client: HTTP " + std::to_string(res->status) + " from " +
                               cfg_.endpoint);
    }
    last_error = httplib::to_string(res.error());
    if (attempt < cfg_.max_attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms *= 2;
    }
  }
  throw std::runtime_error("llm client: transport failed after " +
                           std::to_string(cfg_.max_attempts) + " attempts: " + last_error);
}

}  // namespace adlgen
