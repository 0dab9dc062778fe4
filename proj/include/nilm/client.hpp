#pragma once

// Chat-completion backends: an OpenAI-compatible HTTP client and a
// deterministic offline mock that reads the knowledge ranges back out of the
// prompt.

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "nilm/detail/text.hpp"
#include "nilm/errors.hpp"
#include "nilm/prompt.hpp"

namespace nilm {

struct BackendConfig {
  std::string endpoint = "https://api.openai.com/v1";
  std::string model = "gpt-4.1-mini";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  bool json_mode = true;
  int max_retries = 3;
  double timeout_seconds = 60.0;
  int initial_backoff_ms = 500;  // doubles after every failed attempt

  void validate() const {
    if (max_retries < 0) throw InvalidConfig("max_retries must be >= 0");
    if (!(timeout_seconds > 0.0)) throw InvalidConfig("timeout must be positive");
    if (initial_backoff_ms < 0) throw InvalidConfig("backoff must be >= 0");
  }
};

struct RawResponse {
  std::string text;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  double latency_ms = 0.0;
  int retries = 0;
};

// Implementations must be safe to call from several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual RawResponse complete(const std::string& prompt) = 0;
};

namespace detail {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string base_path;
};

inline Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidConfig("endpoint needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  ep.base_path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
  return ep;
}

inline std::string fmt_range(double lo) { return format_fixed(lo, 0) + " W"; }

}  // namespace detail

inline nlohmann::json chat_request_body(const std::string& prompt, const BackendConfig& config) {
  const auto msgs = split_messages(prompt);
  nlohmann::json messages = nlohmann::json::array();
  if (!msgs.system.empty()) messages.push_back({{"role", "system"}, {"content", msgs.system}});
  messages.push_back({{"role", "user"}, {"content", msgs.user}});
  nlohmann::json body = {{"model", config.model},
                         {"messages", messages},
                         {"temperature", config.temperature}};
  if (config.json_mode) body["response_format"] = {{"type", "json_object"}};
  return body;
}

// POST {endpoint}/chat/completions. Transport failures, timeouts, 429 and 5xx
// responses are retried with exponential backoff; 401/403 fail immediately.
inline RawResponse complete(const std::string& prompt, const BackendConfig& config) {
  config.validate();
  const char* key = std::getenv(config.api_key_env.c_str());
  if (key == nullptr || *key == '\0')
    throw AuthError("API key variable " + config.api_key_env + " is not set");

  const auto ep = detail::split_endpoint(config.endpoint);
  const std::string path = ep.base_path + "/chat/completions";
  const std::string body = chat_request_body(prompt, config).dump();
  const auto timeout = std::chrono::duration<double>(config.timeout_seconds);
  const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);

  enum class Failure { none, timeout, transport, rate_limited };
  Failure last = Failure::none;
  std::string last_detail;

  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0 && config.initial_backoff_ms > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(
          static_cast<long long>(config.initial_backoff_ms) << std::min(attempt - 1, 20)));

    httplib::Client cli(ep.origin);
    if (!cli.is_valid()) throw TransportError("unsupported endpoint: " + config.endpoint);
    cli.set_connection_timeout(timeout_us.count() / 1000000, timeout_us.count() % 1000000);
    cli.set_read_timeout(timeout_us.count() / 1000000, timeout_us.count() % 1000000);
    cli.set_write_timeout(timeout_us.count() / 1000000, timeout_us.count() % 1000000);
    cli.set_bearer_token_auth(key);

    const auto started = std::chrono::steady_clock::now();
    auto res = cli.Post(path, body, "application/json");
    const double elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && elapsed_ms >= 0.9 * timeout.count() * 1000.0);
      last = timed_out ? Failure::timeout : Failure::transport;
      last_detail = httplib::to_string(err);
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw AuthError("backend rejected credentials (HTTP " + std::to_string(res->status) + ")");
    if (res->status == 429) {
      last = Failure::rate_limited;
      last_detail = "HTTP 429";
      continue;
    }
    if (res->status >= 500) {
      last = Failure::transport;
      last_detail = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body);

    auto j = nlohmann::json::parse(res->body, nullptr, false);
    RawResponse out;
    out.latency_ms = elapsed_ms;
    out.retries = attempt;
    try {
      out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
      if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
        out.prompt_tokens = u->value("prompt_tokens", std::size_t{0});
        out.completion_tokens = u->value("completion_tokens", std::size_t{0});
      }
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("unexpected response body: ") + e.what());
    }
    return out;
  }

  const std::string tries = " after " + std::to_string(config.max_retries + 1) + " attempt(s)";
  switch (last) {
    case Failure::timeout: throw Timeout("request timed out" + tries);
    case Failure::rate_limited: throw RateLimited("rate limited" + tries);
    default: throw TransportError(last_detail + tries);
  }
}

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig config) : config_(std::move(config)) { config_.validate(); }
  RawResponse complete(const std::string& prompt) override { return nilm::complete(prompt, config_); }
  const BackendConfig& config() const noexcept { return config_; }

 private:
  BackendConfig config_;
};

// Offline stand-in: an appliance is ON in every slot whose aggregate reaches
// the lower end of its rendered power range; appliances without a rendered
// range stay OFF. In explanation mode, template rationales are added.
inline RawResponse mock_complete(const std::string& prompt) {
  const ParsedPrompt parsed = parse_prompt(prompt);
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& name : parsed.appliances) {
    std::vector<int> states(parsed.window_size, 0);
    const auto it = parsed.power_min.find(name);
    if (it != parsed.power_min.end())
      for (std::size_t k = 0; k < parsed.window_size; ++k)
        states[k] = it->second <= parsed.aggregate[k] ? 1 : 0;
    out[name + "_status"] = states;
  }
  if (parsed.explanation_mode) {
    for (const auto& name : parsed.appliances) {
      const auto& states = out[name + "_status"];
      std::size_t first_on = parsed.window_size, on_count = 0;
      for (std::size_t k = 0; k < states.size(); ++k) {
        if (states[k].get<int>() == 1) {
          ++on_count;
          first_on = std::min(first_on, k);
        }
      }
      const auto it = parsed.power_min.find(name);
      std::string text;
      if (on_count == 0) {
        text = "No significant power changes matching the " + name + "'s profile";
        if (it != parsed.power_min.end())
          text += " (e.g., ON power from " + detail::fmt_range(it->second) + ")";
        text += " were observed; state remains OFF.";
      } else {
        text = "Aggregate power reaches the " + name + "'s known ON range (from " +
               detail::fmt_range(it->second) + ") at timestep " + std::to_string(first_on) +
               ", aligning with its operational wattage; ON for " + std::to_string(on_count) +
               " of " + std::to_string(parsed.window_size) + " steps.";
      }
      out[name + "_explanation"] = text;
    }
  }
  RawResponse r;
  r.text = out.dump();
  r.prompt_tokens = detail::approx_tokens(prompt);
  r.completion_tokens = detail::approx_tokens(r.text);
  return r;
}

class MockBackend final : public Backend {
 public:
  RawResponse complete(const std::string& prompt) override { return mock_complete(prompt); }
};

}  // namespace nilm
