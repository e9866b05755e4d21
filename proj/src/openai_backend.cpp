#include "redeval/openai_backend.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

namespace redeval {

namespace {

using nlohmann::json;

std::string lowercase(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return text;
}

json request_body(const ModelConfig& config, const GenerationRequest& request) {
  json body;
  body["model"] = config.model_id;
  json messages = json::array();
  for (const auto& message : request.messages) {
    messages.push_back({{"role", to_string(message.role)},
                        {"content", message.content}});
  }
  body["messages"] = std::move(messages);
  body["temperature"] = request.decoding.temperature;
  body["max_tokens"] = request.decoding.max_tokens;
  if (request.decoding.seed) body["seed"] = *request.decoding.seed;
  if (request.decoding.logprobs_requested) {
    body["logprobs"] = true;
    body["top_logprobs"] = 1;
  }
  return body;
}

GenerationResponse parse_body(const std::string& body) {
  json payload;
  try {
    payload = json::parse(body);
  } catch (const json::exception& ex) {
    throw FrameworkError(ErrorKind::Parse,
                         std::string("unparseable response body: ") + ex.what());
  }
  try {
    const json& choice = payload.at("choices").at(0);
    GenerationResponse response;
    const json& content = choice.at("message").at("content");
    response.text = content.is_null() ? "" : content.get<std::string>();
    response.finish_reason = choice.value("finish_reason", "");
    if (choice.contains("logprobs") && choice.at("logprobs").is_object()) {
      const json& lp = choice.at("logprobs");
      if (lp.contains("content") && lp.at("content").is_array()) {
        std::vector<TokenLogprob> logprobs;
        for (const auto& entry : lp.at("content")) {
          logprobs.push_back({entry.value("token", ""),
                              entry.at("logprob").get<double>()});
        }
        response.token_logprobs = std::move(logprobs);
      }
    }
    if (payload.contains("model") && payload.at("model").is_string()) {
      response.provider_meta["model"] = payload.at("model").get<std::string>();
    }
    if (payload.contains("id") && payload.at("id").is_string()) {
      response.provider_meta["id"] = payload.at("id").get<std::string>();
    }
    return response;
  } catch (const json::exception& ex) {
    throw FrameworkError(ErrorKind::Parse,
                         std::string("unexpected response shape: ") + ex.what());
  }
}

[[noreturn]] void throw_for_status(int status, const std::string& body) {
  if (status == 401 || status == 403) {
    throw FrameworkError(ErrorKind::Auth, "credential rejected (HTTP " +
                                              std::to_string(status) + ")");
  }
  if (status == 429) {
    if (lowercase(body).find("quota") != std::string::npos) {
      throw FrameworkError(ErrorKind::Quota, "quota exhausted (HTTP 429)");
    }
    throw FrameworkError(ErrorKind::RateLimit, "rate limited (HTTP 429)");
  }
  if (status >= 500) {
    throw FrameworkError(ErrorKind::Provider,
                         "provider error (HTTP " + std::to_string(status) + ")");
  }
  throw FrameworkError(ErrorKind::Provider,
                       "unexpected status (HTTP " + std::to_string(status) + ")");
}

}  // namespace

OpenAiBackend::OpenAiBackend(const ModelConfig& config) : ModelBackend(config) {
  const std::string& url = this->config().base_url;
  if (url.empty()) {
    throw FrameworkError(ErrorKind::Validation,
                         "openai_compatible backend requires base_url");
  }
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw FrameworkError(ErrorKind::Validation, "base_url must include a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    origin_ = url;
  } else {
    origin_ = url.substr(0, path_start);
    path_prefix_ = url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }

  if (!this->config().api_key_env.empty()) {
    const char* value = std::getenv(this->config().api_key_env.c_str());
    if (value) api_key_ = value;
  }

  const nlohmann::json& params = this->config().parameters;
  connect_timeout_ms_ = params.value("connect_timeout_ms", connect_timeout_ms_);
  read_timeout_ms_ = params.value("read_timeout_ms", read_timeout_ms_);
}

GenerationResponse OpenAiBackend::attempt(const GenerationRequest& request) {
  bump_transport_call_count();

  if (!config().api_key_env.empty() && api_key_.empty()) {
    throw FrameworkError(ErrorKind::Auth, "environment variable '" +
                                              config().api_key_env + "' is not set");
  }

  httplib::Client client(origin_);
  client.set_connection_timeout(0, connect_timeout_ms_ * 1000);
  client.set_read_timeout(read_timeout_ms_ / 1000, (read_timeout_ms_ % 1000) * 1000);
  client.set_write_timeout(read_timeout_ms_ / 1000, (read_timeout_ms_ % 1000) * 1000);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const std::string body = request_body(config(), request).dump();
  auto result = client.Post(path_prefix_ + "/chat/completions", headers, body,
                            "application/json");
  if (!result) {
    throw FrameworkError(ErrorKind::Network,
                         "transport failure: " + httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    throw_for_status(result->status, result->body);
  }
  return parse_body(result->body);
}

}  // namespace redeval
