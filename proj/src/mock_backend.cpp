#include "redeval/mock_backend.hpp"

#include <sstream>

#include "redeval/hash.hpp"

namespace redeval {

namespace {

ErrorKind fault_kind_from_string(const std::string& name) {
  if (name == "auth") return ErrorKind::Auth;
  if (name == "rate_limit") return ErrorKind::RateLimit;
  if (name == "quota") return ErrorKind::Quota;
  if (name == "network") return ErrorKind::Network;
  if (name == "provider") return ErrorKind::Provider;
  if (name == "parse") return ErrorKind::Parse;
  throw FrameworkError(ErrorKind::Validation, "unknown mock fault kind: " + name);
}

std::string concatenated_contents(const GenerationRequest& request) {
  std::string joined;
  for (const auto& message : request.messages) joined += message.content;
  return joined;
}

}  // namespace

MockBackend::MockBackend(const ModelConfig& config) : ModelBackend(config) {
  const nlohmann::json& params = this->config().parameters;

  const std::string mode = params.value("mode", "echo");
  if (mode == "echo") {
    mode_ = Mode::Echo;
  } else if (mode == "echo_all") {
    mode_ = Mode::EchoAll;
  } else if (mode == "script") {
    mode_ = Mode::Script;
  } else {
    throw FrameworkError(ErrorKind::Validation, "unknown mock mode: " + mode);
  }

  if (params.contains("script")) {
    for (const auto& [key, value] : params.at("script").items()) {
      script_[stable_hash64(key)] = value.get<std::string>();
    }
  }
  if (mode_ == Mode::Script && script_.empty() && !params.contains("default_reply")) {
    throw FrameworkError(ErrorKind::Validation,
                         "mock in script mode needs a script table or default_reply");
  }
  if (params.contains("default_reply")) {
    has_default_reply_ = true;
    default_reply_ = params.at("default_reply").get<std::string>();
  }
  logprob_value_ = params.value("logprob_value", -0.5);
  if (logprob_value_ > 0.0) {
    throw FrameworkError(ErrorKind::Validation, "logprob_value must be <= 0");
  }

  if (params.contains("faults")) {
    for (const auto& fault : params.at("faults")) {
      const ErrorKind kind = fault_kind_from_string(fault.at("kind").get<std::string>());
      if (fault.contains("at")) {
        for (const auto& index : fault.at("at")) {
          faults_by_attempt_[index.get<std::uint64_t>()] = kind;
        }
      } else {
        const int times = fault.value("times", 1);
        for (int i = 0; i < times; ++i) fault_queue_.push_back(kind);
      }
    }
  }
}

GenerationResponse MockBackend::attempt(const GenerationRequest& request) {
  bump_transport_call_count();

  {
    std::lock_guard lock(fault_mutex_);
    const std::uint64_t attempt_index = attempt_counter_++;
    if (auto it = faults_by_attempt_.find(attempt_index);
        it != faults_by_attempt_.end()) {
      throw FrameworkError(it->second,
                           std::string("scripted mock fault: ") + to_string(it->second));
    }
    if (!fault_queue_.empty()) {
      const ErrorKind kind = fault_queue_.front();
      fault_queue_.pop_front();
      throw FrameworkError(kind, std::string("scripted mock fault: ") + to_string(kind));
    }
  }

  GenerationResponse response;
  response.finish_reason = "stop";

  switch (mode_) {
    case Mode::Echo: {
      for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
        if (it->role == MessageRole::User) {
          response.text = it->content;
          break;
        }
      }
      break;
    }
    case Mode::EchoAll: {
      std::ostringstream out;
      for (const auto& message : request.messages) {
        out << to_string(message.role) << ": " << message.content << "\n";
      }
      response.text = out.str();
      break;
    }
    case Mode::Script: {
      const std::uint64_t key = stable_hash64(concatenated_contents(request));
      auto it = script_.find(key);
      if (it != script_.end()) {
        response.text = it->second;
      } else if (has_default_reply_) {
        response.text = default_reply_;
      } else {
        throw FrameworkError(ErrorKind::Validation,
                             "mock script has no entry for this request");
      }
      break;
    }
  }

  if (request.decoding.logprobs_requested &&
      config().capabilities.contains(Capability::WhiteBoxLogprobs)) {
    std::vector<TokenLogprob> logprobs;
    std::istringstream words(response.text);
    std::string token;
    while (words >> token) logprobs.push_back({token, logprob_value_});
    response.token_logprobs = std::move(logprobs);
  }

  return response;
}

}  // namespace redeval
