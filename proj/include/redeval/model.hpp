#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "redeval/capability.hpp"
#include "redeval/errors.hpp"
#include "redeval/ledger.hpp"
#include "redeval/types.hpp"

namespace redeval {

enum class MessageRole { System, User, Assistant };

constexpr const char* to_string(MessageRole role) {
  switch (role) {
    case MessageRole::System: return "system";
    case MessageRole::User: return "user";
    case MessageRole::Assistant: return "assistant";
  }
  return "unknown";
}

MessageRole message_role_from_string(std::string_view name);

struct ChatMessage {
  MessageRole role = MessageRole::User;
  std::string content;
};

struct GenerationRequest {
  std::vector<ChatMessage> messages;
  DecodingParams decoding;
  QueryRole caller_role = QueryRole::Target;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;  // always <= 0
};

struct GenerationResponse {
  std::string text;
  std::optional<std::vector<TokenLogprob>> token_logprobs;
  std::string finish_reason;
  std::map<std::string, std::string> provider_meta;  // excluded from replay-compared output
};

struct RetryPolicy {
  int max_attempts = 4;
  int base_delay_ms = 500;
  double backoff_factor = 2.0;
  double jitter_fraction = 0.25;
};

// Delay before retry number attempt_index (0-based); unit_jitter in [0, 1).
// Bounded by base_delay_ms * backoff_factor^(max_attempts-1) * (1+jitter).
std::chrono::milliseconds retry_delay(const RetryPolicy& policy, int attempt_index,
                                      double unit_jitter);

enum class BackendKind { OpenAiCompatible, Mock };

constexpr const char* to_string(BackendKind kind) {
  return kind == BackendKind::OpenAiCompatible ? "openai_compatible" : "mock";
}

struct ModelConfig {
  std::string name;
  BackendKind kind = BackendKind::Mock;
  std::string base_url;      // required for openai_compatible
  std::string api_key_env;   // env var *name*; the secret never enters configs
  std::string model_id;
  CapabilitySet capabilities{Capability::BlackBox};
  RetryPolicy retry;
  int max_inflight = 4;
  nlohmann::json parameters = nlohmann::json::object();
};

// True iff required is a subset of the model's advertised capabilities.
bool check_capability(const ModelConfig& model, CapabilitySet required);

// Process-wide count of transport attempts (mock and HTTP alike). Lets tests
// assert that validation performs zero network activity.
std::uint64_t transport_call_count();
void bump_transport_call_count();

// Bounds in-flight requests per backend to respect provider rate limits.
class InflightLimiter {
 public:
  explicit InflightLimiter(int limit) : limit_(limit < 1 ? 1 : limit) {}

  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return active_ < limit_; });
    ++active_;
  }

  void release() {
    {
      std::lock_guard lock(mutex_);
      --active_;
    }
    cv_.notify_one();
  }

  class Guard {
   public:
    explicit Guard(InflightLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
    ~Guard() { limiter_.release(); }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    InflightLimiter& limiter_;
  };

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int limit_;
  int active_ = 0;
};

// Uniform backend handle. generate() owns the retry loop and ledger
// accounting; subclasses implement a single transport attempt.
class ModelBackend {
 public:
  explicit ModelBackend(ModelConfig config);
  virtual ~ModelBackend() = default;

  const ModelConfig& config() const { return config_; }

  // On success increments ledger.counts[request.caller_role] by exactly 1;
  // every failed attempt (retried or not) increments ledger.failed_calls.
  GenerationResponse generate(const GenerationRequest& request, QueryLedger& ledger);

 protected:
  virtual GenerationResponse attempt(const GenerationRequest& request) = 0;

 private:
  ModelConfig config_;
  InflightLimiter limiter_;
};

void validate_request(const GenerationRequest& request);

// Backend factory over ModelConfig.kind.
std::shared_ptr<ModelBackend> make_backend(const ModelConfig& config);

}  // namespace redeval
