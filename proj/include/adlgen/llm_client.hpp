#pragma once

#include <string>

namespace adlgen {

struct LlmClientConfig {
  std::string endpoint;                      // http://host:port/path
  std::string api_key_env = "ADLGEN_LLM_KEY";  // bearer credential, read from env
  int max_attempts = 3;
  int backoff_initial_ms = 200;
  int timeout_seconds = 60;
};

// Minimal HTTP POST transport for the external scoring/refinement loop.
// Retries transport failures with exponential backoff; safe to share across
// threads (each call opens its own connection).
class LlmClient {
 public:
  explicit LlmClient(LlmClientConfig cfg);

  // POSTs a text body and returns the response body; throws std::runtime_error
  // after max_attempts transport failures or on a non-2xx status.
  std::string post(const std::string& body) const;

  const LlmClientConfig& config() const { return cfg_; }

 private:
  LlmClientConfig cfg_;
  std::string host_;
  int port_ = 80;
  std::string path_;
};

}  // namespace adlgen
