#pragma once

#include <string>

#include "redeval/model.hpp"

namespace redeval {

// OpenAI-compatible chat-completions client. One wire dialect covers the
// provider families the harness targets; provider-specific dialects are
// out of scope.
class OpenAiBackend : public ModelBackend {
 public:
  explicit OpenAiBackend(const ModelConfig& config);

 protected:
  GenerationResponse attempt(const GenerationRequest& request) override;

 private:
  std::string origin_;       // scheme://host[:port]
  std::string path_prefix_;  // e.g. "/v1"
  std::string api_key_;      // resolved once from api_key_env
  int connect_timeout_ms_ = 5000;
  int read_timeout_ms_ = 30000;
};

}  // namespace redeval
