#include "redeval/model.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "redeval/hash.hpp"
#include "redeval/mock_backend.hpp"
#include "redeval/openai_backend.hpp"

namespace redeval {

namespace {

std::atomic<std::uint64_t> g_transport_calls{0};

}  // namespace

std::chrono::milliseconds retry_delay(const RetryPolicy& policy, int attempt_index,
                                      double unit_jitter) {
  const int capped_index = std::min(attempt_index, policy.max_attempts - 1);
  const double base = static_cast<double>(policy.base_delay_ms);
  const double factor = std::pow(policy.backoff_factor, capped_index);
  // Jitter multiplies into [1 - j, 1 + j].
  const double jitter = 1.0 + policy.jitter_fraction * (2.0 * unit_jitter - 1.0);
  double ms = base * factor * jitter;
  if (ms < 0.0) ms = 0.0;
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

MessageRole message_role_from_string(std::string_view name) {
  if (name == "system") return MessageRole::System;
  if (name == "user") return MessageRole::User;
  if (name == "assistant") return MessageRole::Assistant;
  throw FrameworkError(ErrorKind::Validation,
                       "unknown message role: " + std::string(name));
}

ComponentKind component_kind_from_string(std::string_view name) {
  if (name == "model") return ComponentKind::Model;
  if (name == "attack") return ComponentKind::Attack;
  if (name == "defense") return ComponentKind::Defense;
  if (name == "dataset") return ComponentKind::Dataset;
  if (name == "judger") return ComponentKind::Judger;
  throw FrameworkError(ErrorKind::Validation,
                       "unknown component kind: " + std::string(name));
}

bool check_capability(const ModelConfig& model, CapabilitySet required) {
  return model.capabilities.contains_all(required);
}

std::uint64_t transport_call_count() {
  return g_transport_calls.load(std::memory_order_relaxed);
}

void bump_transport_call_count() {
  g_transport_calls.fetch_add(1, std::memory_order_relaxed);
}

void validate_request(const GenerationRequest& request) {
  if (request.messages.empty()) {
    throw FrameworkError(ErrorKind::Validation, "request has no messages");
  }
  for (std::size_t i = 0; i < request.messages.size(); ++i) {
    if (request.messages[i].role == MessageRole::System && i != 0) {
      throw FrameworkError(ErrorKind::Validation,
                           "system message must be first and unique");
    }
  }
  if (request.decoding.temperature < 0.0) {
    throw FrameworkError(ErrorKind::Validation, "temperature must be >= 0");
  }
  if (request.decoding.max_tokens < 1) {
    throw FrameworkError(ErrorKind::Validation, "max_tokens must be positive");
  }
}

ModelBackend::ModelBackend(ModelConfig config)
    : config_(std::move(config)), limiter_(config_.max_inflight) {}

GenerationResponse ModelBackend::generate(const GenerationRequest& request,
                                          QueryLedger& ledger) {
  validate_request(request);
  if (ledger.would_exceed_budget()) {
    throw FrameworkError(ErrorKind::BudgetExhausted,
                         "query budget exhausted before call");
  }
  InflightLimiter::Guard guard(limiter_);

  const RetryPolicy& policy = config_.retry;
  SplitMix64 jitter_rng(stable_hash64(config_.name) ^
                        request.decoding.seed.value_or(0));
  int attempts = std::max(policy.max_attempts, 1);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    try {
      GenerationResponse response = this->attempt(request);
      if (response.token_logprobs) {
        for (const auto& tl : *response.token_logprobs) {
          if (tl.logprob > 0.0) {
            throw FrameworkError(ErrorKind::Parse,
                                 "backend returned positive logprob");
          }
        }
      }
      ledger.add(request.caller_role);
      return response;
    } catch (const FrameworkError& err) {
      ledger.add_failed();
      const bool last = attempt + 1 >= attempts;
      if (!err.retryable() || last) throw;
      std::this_thread::sleep_for(
          retry_delay(policy, attempt, jitter_rng.next_unit()));
    }
  }
  throw FrameworkError(ErrorKind::Provider, "retry loop exited unexpectedly");
}

std::shared_ptr<ModelBackend> make_backend(const ModelConfig& config) {
  switch (config.kind) {
    case BackendKind::Mock:
      return std::make_shared<MockBackend>(config);
    case BackendKind::OpenAiCompatible:
      return std::make_shared<OpenAiBackend>(config);
  }
  throw FrameworkError(ErrorKind::Validation, "unknown backend kind");
}

}  // namespace redeval
