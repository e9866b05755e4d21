#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <unordered_map>

#include "redeval/model.hpp"

namespace redeval {

// Deterministic in-process backend for offline end-to-end tests.
//
// Parameters (ModelConfig.parameters):
//   mode          "echo" (default): reply with the last user message;
//                 "echo_all": reply with every message as "role: content" lines;
//                 "script": look replies up in the script table.
//   script        map from fixture text to reply. Keys are matched against
//                 the concatenation of all message contents, hashed with
//                 stable_hash64, so fixtures survive formatting changes.
//   default_reply fallback reply when a script lookup misses.
//   faults        list of {kind, times} entries consumed once per transport
//                 attempt, in order, before any reply is produced; an entry
//                 may instead carry {kind, at: [i, ...]} to fire on specific
//                 0-based transport attempt indices.
//   logprob_value per-token logprob attached when the request asks for
//                 logprobs and the config advertises white_box_logprobs
//                 (default -0.5; tokens are whitespace-split words).
class MockBackend : public ModelBackend {
 public:
  explicit MockBackend(const ModelConfig& config);

 protected:
  GenerationResponse attempt(const GenerationRequest& request) override;

 private:
  enum class Mode { Echo, EchoAll, Script };

  Mode mode_ = Mode::Echo;
  std::unordered_map<std::uint64_t, std::string> script_;
  bool has_default_reply_ = false;
  std::string default_reply_;
  double logprob_value_ = -0.5;

  std::mutex fault_mutex_;
  std::deque<ErrorKind> fault_queue_;
  std::map<std::uint64_t, ErrorKind> faults_by_attempt_;
  std::uint64_t attempt_counter_ = 0;
};

}  // namespace redeval
