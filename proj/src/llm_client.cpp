// The only translation unit that talks to the network.
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "todcsp/errors.hpp"
#include "todcsp/relex.hpp"

namespace todcsp {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // ".../chat/completions"
};

Endpoint split_base(const std::string& base) {
  const auto scheme_end = base.find("://");
  if (scheme_end == std::string::npos) throw UsageError("LLM endpoint '" + base + "' lacks a scheme");
  const auto path_start = base.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = base.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : base.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  e.path = prefix + "/chat/completions";
  return e;
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

LLMConfig LLMConfig::from_environment() {
  LLMConfig c;
  if (const char* base = std::getenv("LLM_API_BASE")) c.api_base = base;
  if (const char* key = std::getenv("LLM_API_KEY")) c.api_key = key;
  return c;
}

void LLMConfig::validate() const {
  if (api_base.empty()) throw UsageError("LLM endpoint not set (LLM_API_BASE)");
  if (api_key.empty()) throw UsageError("LLM credential not set (LLM_API_KEY)");
  if (model_name.empty()) throw UsageError("LLM model name is empty");
  if (!std::isfinite(temperature) || temperature < 0.0 || temperature > 2.0)
    throw UsageError("temperature must lie in [0, 2]");
  if (timeout.count() <= 0) throw UsageError("timeout must be positive");
  if (retries < 0) throw UsageError("retries must be non-negative");
}

std::string chat_completion(const LLMConfig& config, const std::string& prompt) {
  config.validate();
  const Endpoint endpoint = split_base(config.api_base);
  httplib::Client client(endpoint.origin);
  if (!client.is_valid()) throw TransportError("cannot use LLM endpoint " + config.api_base);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());
  client.set_bearer_token_auth(config.api_key);

  const nlohmann::json body = {{"model", config.model_name},
                               {"temperature", config.temperature},
                               {"messages", {{{"role", "user"}, {"content", prompt}}}}};
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= config.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(200) * attempt);
    auto res = client.Post(endpoint.path, payload, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (retryable(res->status)) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300)
      throw TransportError("LLM endpoint answered HTTP " + std::to_string(res->status) + ": " + res->body);
    // Bodies that are not chat completions are handed on as-is; parsing then
    // degrades to unfilled variables.
    try {
      const auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      return res->body;
    }
  }
  throw TransportError("LLM endpoint " + config.api_base + ": " + last_error + " after " +
                       std::to_string(config.retries + 1) + " attempt(s)");
}

}  // namespace todcsp
